#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "ffrelay/experiment.hpp"

using namespace ffrelay;
using namespace ffrelay::experiment;

namespace {

struct Common {
    std::string config;
    std::string mode;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> threads;
    std::string out;
    std::string format;
    bool timing = false;
    bool simulate = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_mode) {
    cmd->add_option("--config", c.config, "experiment config (INI)")->required();
    if (with_mode) cmd->add_option("--mode", c.mode, "power-min, worst-snr, worst-snr-joint, rate-max");
    cmd->add_option("--seed", c.seed, "override [experiment] seed");
    cmd->add_option("--trials", c.trials, "override [experiment] trials");
    cmd->add_option("--out", c.out, "output file, - for stdout");
    cmd->add_option("--format", c.format, "csv or json");
    cmd->add_option("--threads", c.threads, "worker threads, 0 for all cores");
    cmd->add_flag("--timing", c.timing, "fill the wall_time column");
    cmd->add_flag("--simulate", c.simulate, "Monte Carlo check of each design");
}

ExperimentSpec load(const Common& c) {
    ExperimentSpec spec = parse_config(c.config);
    if (!c.mode.empty()) spec.mode = parse_mode(c.mode);
    if (c.seed) {
        spec.seed = *c.seed;
        spec.base.seed = *c.seed;
    }
    if (c.trials) spec.trials = *c.trials;
    if (c.threads) spec.threads = *c.threads;
    if (!c.format.empty()) spec.format = c.format;
    if (!c.out.empty()) spec.output = c.out;
    spec.timing = spec.timing || c.timing;
    spec.simulate = spec.simulate || c.simulate;
    spec.validate();
    return spec;
}

void emit(const Table& t, const ExperimentSpec& spec) { emit_report(t, parse_format(spec.format), spec.output); }

bool design_mode(Mode m) { return m != Mode::validate && m != Mode::mismatch; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Filter-and-forward relay design for OFDM"};
    app.require_subcommand(1);

    Common common;
    int point = 0;
    int trial = 0;
    auto* design = app.add_subcommand("design", "one design: a single sweep point and trial");
    add_common(design, common, true);
    design->add_option("--point", point, "sweep point index");
    design->add_option("--trial", trial, "trial index");

    auto* sweep = app.add_subcommand("sweep", "every sweep point x trial plus aggregate rows");
    add_common(sweep, common, true);

    std::string channel;
    auto* validate = app.add_subcommand("validate", "frequency responses and per-subcarrier SNRs");
    add_common(validate, common, false);
    validate->add_option("--channel", channel, "fixture or random");

    auto* mismatch = app.add_subcommand("mismatch", "matched vs mismatched design under the true channel");
    add_common(mismatch, common, false);

    std::string in_path;
    std::string out_path = "-";
    std::string format = "json";
    bool aggregate_only = false;
    auto* report = app.add_subcommand("report", "convert or filter a results CSV");
    report->add_option("--in", in_path, "results CSV")->required()->check(CLI::ExistingFile);
    report->add_option("--out", out_path, "output file, - for stdout");
    report->add_option("--format", format, "csv or json");
    report->add_flag("--aggregate-only", aggregate_only, "keep aggregate rows only");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*report) {
            const Format fmt = parse_format(format);
            std::ifstream in(in_path);
            Table t = read_csv(in);
            if (aggregate_only) {
                const std::size_t c = t.column("row_type");
                std::erase_if(t.rows, [&](const auto& row) { return cell_text(row[c]) != "aggregate"; });
            }
            emit_report(t, fmt, out_path);
            return 0;
        }

        ExperimentSpec spec = load(common);
        if (*validate) {
            spec.mode = Mode::validate;
            if (!channel.empty()) spec.channel = channel;
            spec.validate();
            emit(run_validation(spec), spec);
            return 0;
        }
        if (*mismatch) {
            spec.mode = Mode::mismatch;
            emit(run_experiment(spec), spec);
            return 0;
        }
        if (!design_mode(spec.mode)) {
            throw ConfigError("mode: " + mode_name(spec.mode) + " needs the " + mode_name(spec.mode) +
                              " subcommand");
        }
        if (*sweep) {
            emit(run_experiment(spec), spec);
            return 0;
        }
        const auto points = sweep_points(spec);
        if (point < 0 || static_cast<std::size_t>(point) >= points.size()) {
            throw ConfigError("--point: out of range (" + std::to_string(points.size()) + " points)");
        }
        if (trial < 0) throw ConfigError("--trial: must be nonnegative");
        Table t;
        t.header = result_columns();
        t.rows.push_back(run_trial(spec, points[static_cast<std::size_t>(point)], static_cast<std::size_t>(point),
                                   trial));
        emit(t, spec);
        return cell_number(t.at(0, "feasible")) > 0.0 ? 0 : 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
