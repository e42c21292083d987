// Experiment configuration, seeded reproducibility, run records and
// plot-data emission. Config files are line-oriented `key = value` text with
// a mandatory schema_version; unknown keys are errors so experiment
// definitions cannot contain silent typos.
#pragma once

#include <chrono>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hill/common.hpp"
#include "hill/potential.hpp"
#include "hill/statistics.hpp"

namespace hill {

inline constexpr const char* kSoftwareVersion = "hill 0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// 17 significant digits guarantee binary round-trip of doubles in text form.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct ExperimentConfig {
    int schema_version = 0;
    std::map<std::string, std::string> values;
    std::string source_path;

    bool has(const std::string& key) const { return values.count(key) > 0; }

    const std::string& get(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw ConfigError("config: missing key '" + key + "'");
        return it->second;
    }
    std::string get_or(const std::string& key, const std::string& dflt) const {
        auto it = values.find(key);
        return it == values.end() ? dflt : it->second;
    }
    double get_double(const std::string& key) const {
        try {
            return std::stod(get(key));
        } catch (const std::invalid_argument&) {
            throw ConfigError("config: key '" + key + "' is not a number");
        }
    }
    double get_double_or(const std::string& key, double dflt) const {
        return has(key) ? get_double(key) : dflt;
    }
    long long get_int(const std::string& key) const {
        try {
            return std::stoll(get(key));
        } catch (const std::invalid_argument&) {
            throw ConfigError("config: key '" + key + "' is not an integer");
        }
    }
    long long get_int_or(const std::string& key, long long dflt) const {
        return has(key) ? get_int(key) : dflt;
    }

    // Canonical text for hashing: sorted key=value lines.
    std::string canonical() const {
        std::ostringstream os;
        os << "schema_version=" << schema_version << "\n";
        for (const auto& [k, v] : values) os << k << "=" << v << "\n";
        return os.str();
    }
};

inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::set<std::string>& allowed_keys,
                                          const std::string& source = "<memory>") {
    ExperimentConfig cfg;
    cfg.source_path = source;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> violations;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto notspace = [](unsigned char c) { return !std::isspace(c); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
        line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            violations.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
        val.erase(val.begin(), std::find_if(val.begin(), val.end(), notspace));
        if (key == "schema_version") {
            cfg.schema_version = std::stoi(val);
            continue;
        }
        if (!allowed_keys.count(key)) {
            violations.push_back("line " + std::to_string(lineno) + ": unknown key '" + key +
                                 "'");
            continue;
        }
        if (cfg.values.count(key))
            violations.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key +
                                 "'");
        cfg.values[key] = val;
    }
    if (cfg.schema_version == 0)
        violations.push_back("schema_version is required");
    else if (cfg.schema_version != kConfigSchemaVersion)
        violations.push_back("unsupported schema_version " +
                             std::to_string(cfg.schema_version));
    if (!violations.empty()) {
        std::string msg = "config errors in " + source + ":";
        for (const auto& v : violations) msg += "\n  " + v;
        throw ConfigError(msg);
    }
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path,
                                          const std::set<std::string>& allowed_keys) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), allowed_keys, path);
}

inline uint64_t fnv1a_hash(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

struct RunRecord {
    std::string config_hash;
    std::string started;
    std::string finished;
    std::string version = kSoftwareVersion;
    nlohmann::json summary;
    std::vector<std::string> outputs;

    nlohmann::json manifest() const {
        return nlohmann::json{{"config_hash", config_hash}, {"started", started},
                              {"finished", finished},       {"version", version},
                              {"summary", summary},         {"outputs", outputs}};
    }
};

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

// CSV emission for named plot kinds with documented column schemas.
//   discriminant: lambda,delta[,delta_prime]
//   tails:        eps,empirical_tail,rate_bound
//   gaps:         j,mean_gap,stderr
//   recovery:     s,q_true,q_recovered
inline std::string emit_plot_data(const nlohmann::json& record, const std::string& kind) {
    std::ostringstream os;
    if (kind == "discriminant") {
        bool with_deriv = record.contains("delta_prime");
        os << (with_deriv ? "lambda,delta,delta_prime\n" : "lambda,delta\n");
        const auto& ls = record.at("lambda");
        const auto& ds = record.at("delta");
        for (size_t i = 0; i < ls.size(); ++i) {
            os << format_double(ls[i].get<double>()) << ","
               << format_double(ds[i].get<double>());
            if (with_deriv)
                os << "," << format_double(record.at("delta_prime")[i].get<double>());
            os << "\n";
        }
    } else if (kind == "tails") {
        os << "eps,empirical_tail,rate_bound\n";
        for (const auto& row : record.at("tails"))
            os << format_double(row.at("eps").get<double>()) << ","
               << format_double(row.at("tail").get<double>()) << ","
               << format_double(row.at("bound").get<double>()) << "\n";
    } else if (kind == "gaps") {
        os << "j,mean_gap,stderr\n";
        const auto& js = record.at("j");
        for (size_t i = 0; i < js.size(); ++i)
            os << js[i].get<int>() << ","
               << format_double(record.at("mean_gap")[i].get<double>()) << ","
               << format_double(record.at("stderr")[i].get<double>()) << "\n";
    } else if (kind == "recovery") {
        os << "s,q_true,q_recovered\n";
        const auto& ss = record.at("s");
        for (size_t i = 0; i < ss.size(); ++i)
            os << format_double(ss[i].get<double>()) << ","
               << format_double(record.at("q_true")[i].get<double>()) << ","
               << format_double(record.at("q_recovered")[i].get<double>()) << "\n";
    } else {
        throw std::invalid_argument("emit_plot_data: unknown kind '" + kind + "'");
    }
    return os.str();
}

inline const std::set<std::string>& mc_config_keys() {
    static const std::set<std::string> keys{
        "experiment", "beta",   "big_n",  "mode_cut", "seed",  "trials",
        "m",          "j_lo",   "j_hi",   "with_xi",  "tol",   "rate_c",
        "rate_c1",    "g_kind", "target",
    };
    return keys;
}

// Config-driven experiment dispatch. experiment = mc runs the concentration
// study plus gap scaling; experiment = sample persists a weighted batch.
inline RunRecord run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    RunRecord rec;
    rec.started = timestamp_utc();
    rec.config_hash = std::to_string(fnv1a_hash(cfg.canonical()));
    fs::create_directories(out_dir);

    std::string experiment = cfg.get("experiment");
    GibbsConfig gc;
    gc.beta = cfg.get_double_or("beta", 0.0);
    gc.big_n = cfg.get_double_or("big_n", 1.0);
    gc.mode_cut = static_cast<int>(cfg.get_int_or("mode_cut", 16));
    gc.seed = static_cast<uint64_t>(cfg.get_int_or("seed", 1));

    if (experiment == "sample") {
        gc.batch = static_cast<int>(cfg.get_int_or("trials", 100));
        auto batch = sample_gibbs(gc);
        std::ostringstream lines;
        for (const auto& ws : batch) lines << nlohmann::json(ws).dump() << "\n";
        std::string path = out_dir + "/samples.jsonl";
        write_text_file(path, lines.str());
        rec.outputs.push_back(path);
        rec.summary = {{"experiment", "sample"},
                       {"batch", gc.batch},
                       {"ess", effective_sample_size(batch)}};
    } else if (experiment == "mc") {
        int trials = static_cast<int>(cfg.get_int_or("trials", 200));
        int m = static_cast<int>(cfg.get_int_or("m", 8));
        bool with_xi = cfg.get_int_or("with_xi", 0) != 0;
        BandLimited g = BandLimited::sinc_kernel();
        RateProfile profile = RateProfile::make(cfg.get_double_or("rate_c", 1.0),
                                                cfg.get_double_or("rate_c1", 1.0), gc.beta,
                                                gc.big_n, {1, 2, 4, 8});
        ConcentrationReport rep = mc_concentration(gc, g, m, trials, with_xi, &profile);

        std::ostringstream lines;
        for (const auto& t : rep.trials) {
            nlohmann::json j{{"f_m", t.f_m},
                             {"xi_norm", t.xi_norm},
                             {"gaps", t.gaps},
                             {"log_weight", t.log_weight},
                             {"in_ball", t.in_ball}};
            lines << j.dump() << "\n";
        }
        std::string trials_path = out_dir + "/trials.jsonl";
        write_text_file(trials_path, lines.str());
        rec.outputs.push_back(trials_path);

        nlohmann::json tails_rec;
        for (const auto& tp : rep.tails)
            tails_rec["tails"].push_back(
                {{"eps", tp.eps}, {"tail", tp.tail}, {"bound", tp.bound}});
        std::string tails_path = out_dir + "/tails.csv";
        write_text_file(tails_path, emit_plot_data(tails_rec, "tails"));
        rec.outputs.push_back(tails_path);

        int j_lo = static_cast<int>(cfg.get_int_or("j_lo", 2));
        int j_hi = static_cast<int>(cfg.get_int_or("j_hi", 12));
        GapScalingReport gaps = mean_gap_scaling(gc, j_lo, j_hi, trials);
        nlohmann::json gaps_rec{{"j", gaps.j_values},
                                {"mean_gap", gaps.mean_gap},
                                {"stderr", gaps.stderr_gap}};
        std::string gaps_path = out_dir + "/gaps.csv";
        write_text_file(gaps_path, emit_plot_data(gaps_rec, "gaps"));
        rec.outputs.push_back(gaps_path);

        rec.summary = {{"experiment", "mc"},
                       {"trials", trials},
                       {"mean", rep.mean},
                       {"variance", rep.variance},
                       {"ess", rep.ess},
                       {"kappa_hat", rep.kappa_hat},
                       {"fit_r_squared", rep.fit_r_squared},
                       {"gaussian_shape", rep.gaussian_shape},
                       {"gap_slope", gaps.slope}};
    } else {
        throw ConfigError("config: unknown experiment '" + experiment + "'");
    }

    rec.finished = timestamp_utc();
    std::string manifest_path = out_dir + "/manifest.json";
    write_text_file(manifest_path, rec.manifest().dump(2) + "\n");
    rec.outputs.push_back(manifest_path);
    return rec;
}

}  // namespace hill
