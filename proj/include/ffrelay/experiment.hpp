#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ffrelay/model.hpp"
#include "ffrelay/simkit.hpp"
#include "ffrelay/table.hpp"

namespace ffrelay::experiment {

using model::ConfigError;
using model::SystemConfig;

enum class Mode { power_min, worst_snr, worst_snr_joint, rate_max, validate, mismatch };

Mode parse_mode(const std::string& name);  // throws ConfigError
std::string mode_name(Mode m);

struct SweepAxis {
    std::string name;
    std::vector<double> values;
};

// Fields a sweep axis may name.
const std::vector<std::string>& sweep_fields();

struct ExperimentSpec {
    Mode mode = Mode::worst_snr;
    SystemConfig base;
    std::vector<SweepAxis> axes;  // cartesian product, first axis slowest
    int trials = 1;
    std::uint64_t seed = 1;
    std::string output;
    std::string format = "csv";

    double gamma_db = -5.0;          // power-min target on every active subcarrier
    std::vector<int> active;         // empty: every subcarrier
    bool simulate = false;           // Monte Carlo check of each design
    int sim_frames = 2000;
    int sim_draws = 20;
    int threads = 0;                 // 0: hardware concurrency
    bool timing = false;             // wall_time column; off keeps outputs byte-stable
    std::string channel = "random";  // validate: random or fixture

    simkit::MismatchAlgorithm algorithm = simkit::MismatchAlgorithm::joint_worst_snr;
    simkit::ChannelSpec truth;    // lg 0: same as base
    simkit::ChannelSpec assumed;  // lg 0: same as base

    void validate() const;  // throws ConfigError
};

// INI text with [system], [experiment], [sweep], [mismatch]. Power keys ending
// in _db are relative to unit noise power.
ExperimentSpec parse_config_text(const std::string& text, const std::string& origin = "<config>");
ExperimentSpec parse_config(const std::string& path);

// FNV-1a over the resolved spec; stable across runs and platforms.
std::string config_hash(const ExperimentSpec& spec);

// Resolved settings of one sweep point.
struct SweepPoint {
    std::vector<double> values;  // one per axis
    SystemConfig cfg;
    double gamma_db = 0.0;
    double rho = 0.0;
};
std::vector<SweepPoint> sweep_points(const ExperimentSpec& spec);

// Row schema of sweep tables, in column order.
const std::vector<std::string>& result_columns();

Table run_experiment(const ExperimentSpec& spec);

// One (sweep point, trial) cell of the experiment, as run_experiment computes it.
std::vector<Cell> run_trial(const ExperimentSpec& spec, const SweepPoint& point, std::size_t point_index, int trial);

// RD and SR taps of the notch-filling example (L_f = L_g = 3).
numkit::CVector fixture_sr();
numkit::CVector fixture_rd();

// Frequency responses of f*g and f*r*g plus per-subcarrier SNRs for one channel.
Table run_validation(const ExperimentSpec& spec);

enum class Format { csv, json };
Format parse_format(const std::string& name);
std::string to_csv(const Table& t);
std::string to_json(const Table& t);
Table read_csv(std::istream& in);
void emit_report(const Table& t, Format format, const std::string& path);  // throws std::runtime_error

}  // namespace ffrelay::experiment
