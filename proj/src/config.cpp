#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ffrelay/experiment.hpp"

namespace ffrelay::experiment {

namespace pt = boost::property_tree;
using numkit::Index;

namespace {

double from_db(double db) { return std::pow(10.0, db / 10.0); }

[[noreturn]] void bad(const std::string& where, const std::string& why) { throw ConfigError(where + ": " + why); }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& where, const std::string& text) {
    const std::string s = trim(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        bad(where, "expected a number, got '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) bad(where, "expected a number, got '" + s + "'");
    return v;
}

long long to_int(const std::string& where, const std::string& text) {
    const std::string s = trim(text);
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        bad(where, "expected an integer, got '" + s + "'");
    }
    if (used != s.size()) bad(where, "expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& where, const std::string& text) {
    const std::string s = trim(text);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad(where, "expected true or false, got '" + s + "'");
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> to_list(const std::string& where, const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) out.push_back(to_double(where, item));
    if (out.empty()) bad(where, "empty list");
    return out;
}

numkit::RVector to_rvector(const std::string& where, const std::string& text) {
    const auto v = to_list(where, text);
    return Eigen::Map<const numkit::RVector>(v.data(), static_cast<Index>(v.size()));
}

// "0-27", "0,2,4" or a mix
std::vector<int> to_index_set(const std::string& where, const std::string& text) {
    std::vector<int> out;
    for (const auto& item : split(text, ',')) {
        const auto dash = item.find('-', 1);
        if (dash == std::string::npos) {
            out.push_back(static_cast<int>(to_int(where, item)));
            continue;
        }
        const long long lo = to_int(where, item.substr(0, dash));
        const long long hi = to_int(where, item.substr(dash + 1));
        if (hi < lo) bad(where, "empty range '" + item + "'");
        for (long long i = lo; i <= hi; ++i) out.push_back(static_cast<int>(i));
    }
    if (out.empty()) bad(where, "empty index set");
    return out;
}

using Handler = std::function<void(const std::string& where, const std::string& value)>;

void apply_section(const pt::ptree& tree, const std::string& section, const std::map<std::string, Handler>& handlers) {
    const auto node = tree.get_child_optional(section);
    if (!node) return;
    for (const auto& [key, child] : *node) {
        const std::string where = "[" + section + "] " + key;
        const auto it = handlers.find(key);
        if (it == handlers.end()) bad(where, "unknown key");
        it->second(where, child.get_value<std::string>());
    }
}

}  // namespace

Mode parse_mode(const std::string& name) {
    if (name == "power-min") return Mode::power_min;
    if (name == "worst-snr") return Mode::worst_snr;
    if (name == "worst-snr-joint") return Mode::worst_snr_joint;
    if (name == "rate-max") return Mode::rate_max;
    if (name == "validate") return Mode::validate;
    if (name == "mismatch") return Mode::mismatch;
    throw ConfigError("mode: unknown mode '" + name +
                      "' (power-min, worst-snr, worst-snr-joint, rate-max, validate, mismatch)");
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::power_min: return "power-min";
        case Mode::worst_snr: return "worst-snr";
        case Mode::worst_snr_joint: return "worst-snr-joint";
        case Mode::rate_max: return "rate-max";
        case Mode::validate: return "validate";
        case Mode::mismatch: return "mismatch";
    }
    return "?";
}

const std::vector<std::string>& sweep_fields() {
    static const std::vector<std::string> fields = {"n_sub",           "lf",        "lg",       "lr",
                                                    "source_budget_db", "relay_budget_db", "budget_db",
                                                    "gamma_db",        "rho",       "tap_var"};
    return fields;
}

void ExperimentSpec::validate() const {
    if (trials < 1) bad("[experiment] trials", "must be at least 1");
    if (sim_frames < 1) bad("[experiment] sim_frames", "must be at least 1");
    if (sim_draws < 1) bad("[experiment] sim_draws", "must be at least 1");
    if (threads < 0) bad("[experiment] threads", "must be nonnegative");
    if (channel != "random" && channel != "fixture") bad("[experiment] channel", "must be random or fixture");
    if (format != "csv" && format != "json") bad("[experiment] format", "must be csv or json");
    std::set<std::string> seen;
    for (const auto& axis : axes) {
        const auto& f = sweep_fields();
        if (std::find(f.begin(), f.end(), axis.name) == f.end()) bad("[sweep] " + axis.name, "not a sweepable field");
        if (!seen.insert(axis.name).second) bad("[sweep] " + axis.name, "listed twice");
        if (axis.values.empty()) bad("[sweep] " + axis.name, "empty list");
    }
    if (assumed.sr_error < 0.0) bad("[mismatch] rho", "must be nonnegative");
    for (const auto& point : sweep_points(*this)) {
        try {
            point.cfg.validate();
        } catch (const ConfigError& e) {
            bad("[system]", std::string(e.what()) + (axes.empty() ? "" : " (at a sweep point)"));
        }
        if (mode == Mode::power_min) {
            for (int k : active) {
                if (k < 0 || k >= point.cfg.n_sub) bad("[experiment] active", "subcarrier out of range");
            }
        }
        if (mode == Mode::mismatch && point.rho < 0.0) bad("[sweep] rho", "must be nonnegative");
        for (const auto* spec : {&truth, &assumed}) {
            if (spec->lg < 0) bad("[mismatch] lg", "must be positive");
            const int lg = spec->lg > 0 ? spec->lg : point.cfg.lg;
            if (spec->profile.size() > 0 && spec->profile.size() != static_cast<Index>(lg)) {
                bad("[mismatch] profile", "length must equal the RD channel length");
            }
            SystemConfig probe = point.cfg;
            probe.lg = lg;
            probe.tap_profile = spec->profile;
            probe.cp_len = -1;
            try {
                probe.validate();
            } catch (const ConfigError& e) {
                bad("[mismatch]", e.what());
            }
        }
    }
}

ExperimentSpec parse_config_text(const std::string& text, const std::string& origin) {
    // inline comments: whitespace then ; or #
    std::string cleaned;
    {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            for (std::size_t i = 1; i < line.size(); ++i) {
                if ((line[i] == ';' || line[i] == '#') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
                    line.erase(i);
                    break;
                }
            }
            cleaned += line;
            cleaned += '\n';
        }
    }
    pt::ptree tree;
    std::istringstream in(cleaned);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [name, child] : tree) {
        if (name != "system" && name != "experiment" && name != "sweep" && name != "mismatch") {
            bad(origin, child.empty() ? "key '" + name + "' outside a section" : "unknown section [" + name + "]");
        }
    }

    ExperimentSpec spec;
    SystemConfig& c = spec.base;
    c.source_budget = 100.0;
    c.relay_budget = 100.0;
    const std::map<std::string, Handler> system = {
        {"n_sub", [&](auto& w, auto& v) { c.n_sub = static_cast<int>(to_int(w, v)); }},
        {"lf", [&](auto& w, auto& v) { c.lf = static_cast<int>(to_int(w, v)); }},
        {"lg", [&](auto& w, auto& v) { c.lg = static_cast<int>(to_int(w, v)); }},
        {"lr", [&](auto& w, auto& v) { c.lr = static_cast<int>(to_int(w, v)); }},
        {"cp_len", [&](auto& w, auto& v) { c.cp_len = static_cast<int>(to_int(w, v)); }},
        {"noise_relay_db", [&](auto& w, auto& v) { c.noise_relay = from_db(to_double(w, v)); }},
        {"noise_dest_db", [&](auto& w, auto& v) { c.noise_dest = from_db(to_double(w, v)); }},
        {"tap_var", [&](auto& w, auto& v) { c.tap_var = to_double(w, v); }},
        {"tap_profile", [&](auto& w, auto& v) { c.tap_profile = to_rvector(w, v); }},
        {"source_budget_db", [&](auto& w, auto& v) { c.source_budget = from_db(to_double(w, v)); }},
        {"relay_budget_db", [&](auto& w, auto& v) { c.relay_budget = from_db(to_double(w, v)); }},
        {"tolerance", [&](auto& w, auto& v) { c.tolerance = to_double(w, v); }},
    };
    const std::map<std::string, Handler> experiment = {
        {"mode", [&](auto& w, auto& v) {
             try {
                 spec.mode = parse_mode(trim(v));
             } catch (const ConfigError& e) {
                 bad(w, e.what());
             }
         }},
        {"trials", [&](auto& w, auto& v) { spec.trials = static_cast<int>(to_int(w, v)); }},
        {"seed", [&](auto& w, auto& v) {
             const long long s = to_int(w, v);
             if (s < 0) bad(w, "must be nonnegative");
             spec.seed = static_cast<std::uint64_t>(s);
         }},
        {"output", [&](auto&, auto& v) { spec.output = trim(v); }},
        {"format", [&](auto&, auto& v) { spec.format = trim(v); }},
        {"gamma_db", [&](auto& w, auto& v) { spec.gamma_db = to_double(w, v); }},
        {"active", [&](auto& w, auto& v) { spec.active = to_index_set(w, v); }},
        {"simulate", [&](auto& w, auto& v) { spec.simulate = to_bool(w, v); }},
        {"sim_frames", [&](auto& w, auto& v) { spec.sim_frames = static_cast<int>(to_int(w, v)); }},
        {"sim_draws", [&](auto& w, auto& v) { spec.sim_draws = static_cast<int>(to_int(w, v)); }},
        {"threads", [&](auto& w, auto& v) { spec.threads = static_cast<int>(to_int(w, v)); }},
        {"timing", [&](auto& w, auto& v) { spec.timing = to_bool(w, v); }},
        {"channel", [&](auto&, auto& v) { spec.channel = trim(v); }},
    };
    const std::map<std::string, Handler> mismatch = {
        {"algorithm", [&](auto& w, auto& v) {
             const std::string a = trim(v);
             if (a == "joint_worst_snr") {
                 spec.algorithm = simkit::MismatchAlgorithm::joint_worst_snr;
             } else if (a == "rate_pgm") {
                 spec.algorithm = simkit::MismatchAlgorithm::rate_pgm;
             } else {
                 bad(w, "must be joint_worst_snr or rate_pgm");
             }
         }},
        {"rho", [&](auto& w, auto& v) { spec.assumed.sr_error = to_double(w, v); }},
        {"true_lg", [&](auto& w, auto& v) { spec.truth.lg = static_cast<int>(to_int(w, v)); }},
        {"true_profile", [&](auto& w, auto& v) { spec.truth.profile = to_rvector(w, v); }},
        {"assumed_lg", [&](auto& w, auto& v) { spec.assumed.lg = static_cast<int>(to_int(w, v)); }},
        {"assumed_profile", [&](auto& w, auto& v) { spec.assumed.profile = to_rvector(w, v); }},
    };
    spec.truth.lg = 0;
    spec.assumed.lg = 0;
    apply_section(tree, "system", system);
    apply_section(tree, "experiment", experiment);
    apply_section(tree, "mismatch", mismatch);
    if (const auto sweep = tree.get_child_optional("sweep")) {
        for (const auto& [key, child] : *sweep) {
            spec.axes.push_back({key, to_list("[sweep] " + key, child.get_value<std::string>())});
        }
    }
    spec.base.seed = spec.seed;
    spec.validate();
    return spec;
}

ExperimentSpec parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path + ": cannot open config file");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::vector<SweepPoint> sweep_points(const ExperimentSpec& spec) {
    std::vector<SweepPoint> out;
    std::vector<std::size_t> idx(spec.axes.size(), 0);
    for (;;) {
        SweepPoint p;
        p.cfg = spec.base;
        p.gamma_db = spec.gamma_db;
        p.rho = spec.assumed.sr_error;
        for (std::size_t a = 0; a < spec.axes.size(); ++a) {
            const double v = spec.axes[a].values[idx[a]];
            const std::string& name = spec.axes[a].name;
            p.values.push_back(v);
            if (name == "n_sub") p.cfg.n_sub = static_cast<int>(std::lround(v));
            else if (name == "lf") p.cfg.lf = static_cast<int>(std::lround(v));
            else if (name == "lg") p.cfg.lg = static_cast<int>(std::lround(v));
            else if (name == "lr") p.cfg.lr = static_cast<int>(std::lround(v));
            else if (name == "source_budget_db") p.cfg.source_budget = from_db(v);
            else if (name == "relay_budget_db") p.cfg.relay_budget = from_db(v);
            else if (name == "budget_db") p.cfg.source_budget = p.cfg.relay_budget = from_db(v);
            else if (name == "gamma_db") p.gamma_db = v;
            else if (name == "rho") p.rho = v;
            else if (name == "tap_var") p.cfg.tap_var = v;
        }
        out.push_back(p);
        // odometer, last axis fastest
        std::size_t a = spec.axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < spec.axes[a].values.size()) break;
            idx[a] = 0;
            if (a == 0) return out;
        }
        if (spec.axes.empty()) return out;
    }
}

std::string config_hash(const ExperimentSpec& spec) {
    std::ostringstream s;
    auto num = [&](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g;", v);
        s << buf;
    };
    auto vec = [&](const numkit::RVector& v) {
        s << '[';
        for (Index i = 0; i < v.size(); ++i) num(v(i));
        s << ']';
    };
    const SystemConfig& c = spec.base;
    s << mode_name(spec.mode) << ';' << c.n_sub << ';' << c.lf << ';' << c.lg << ';' << c.lr << ';' << c.cp_len << ';';
    num(c.noise_relay);
    num(c.noise_dest);
    num(c.tap_var);
    vec(c.tap_profile);
    num(c.source_budget);
    num(c.relay_budget);
    num(c.tolerance);
    for (const auto& axis : spec.axes) {
        s << axis.name << '=';
        for (double v : axis.values) num(v);
    }
    s << spec.trials << ';' << spec.seed << ';';
    num(spec.gamma_db);
    for (int k : spec.active) s << k << ',';
    s << ';' << spec.simulate << spec.sim_frames << ';' << spec.sim_draws << ';' << spec.channel << ';'
      << static_cast<int>(spec.algorithm) << ';' << spec.truth.lg << ';' << spec.assumed.lg << ';';
    vec(spec.truth.profile);
    vec(spec.assumed.profile);
    num(spec.assumed.sr_error);

    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s.str()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char out[32];
    std::snprintf(out, sizeof out, "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace ffrelay::experiment
