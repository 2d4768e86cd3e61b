#pragma once
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "asl/errors.hpp"
#include "asl/graph.hpp"
#include "asl/models.hpp"
#include "asl/version.hpp"

namespace asl::io {

// Experiment description loaded from a JSON file.  Parsing is strict:
// unknown keys are rejected, values are type- and range-checked, and file
// paths are resolved relative to the directory containing the config.  The
// canonical serialization (sorted keys, all fields present) feeds the config
// hash that ties output files back to their inputs.
struct experiment_config {
    std::string network;               // edge-list file
    std::string model;                 // observation-model table
    std::string policy = "averaging";  // averaging | laplacian
    std::string strategy = "adaptive"; // adaptive | traditional | flattened
    double delta = 0.1;
    int theta0 = 1;
    std::uint64_t seed = 1;
    long reps = 1000;
    long horizon = 0; // 0: derived from delta
    int workers = 1;
    std::vector<double> deltas;        // sweep grid; empty: single delta
    double eps = 0.5;
    double q_hyp = 5e-3;
    double q_mat = 1e-3;
    double q_fun = 1e-3;
    double sigma_perturbed = 0.5;
    double sigma_bad = 5.0;
    int belief_stride = 0;
    std::vector<std::pair<int, int>> schedule; // scripted truth changes (step, label)

    void validate() const {
        if (network.empty()) throw config_error("config: 'network' is required");
        if (model.empty()) throw config_error("config: 'model' is required");
        if (policy != "averaging" && policy != "laplacian") {
            throw config_error("config: policy must be 'averaging' or 'laplacian'");
        }
        if (strategy != "adaptive" && strategy != "traditional" && strategy != "flattened") {
            throw config_error("config: strategy must be adaptive, traditional or flattened");
        }
        if (!(delta > 0.0 && delta < 1.0)) throw config_error("config: delta must lie in (0,1)");
        for (double d : deltas) {
            if (!(d > 0.0 && d < 1.0)) throw config_error("config: deltas must lie in (0,1)");
        }
        if (theta0 < 1) throw config_error("config: theta0 must be a positive label");
        if (reps < 0) throw config_error("config: reps must be >= 0 (0 skips simulation stages)");
        if (horizon < 0) throw config_error("config: horizon must be >= 0");
        if (workers < 1) throw config_error("config: workers must be >= 1");
        if (!(eps > 0.0)) throw config_error("config: eps must be positive");
        for (double q : {q_hyp, q_mat, q_fun}) {
            if (!(q >= 0.0 && q < 0.5)) throw config_error("config: rates must lie in [0, 0.5)");
        }
        if (sigma_perturbed < 0.0 || sigma_bad < 0.0) {
            throw config_error("config: noise scales must be non-negative");
        }
        if (belief_stride < 0) throw config_error("config: belief_stride must be >= 0");
        for (const auto& [at, th] : schedule) {
            if (at < 1 || th < 1) throw config_error("config: schedule entries must be >= 1");
        }
    }
};

inline nlohmann::json to_json(const experiment_config& c) {
    nlohmann::json j;
    j["network"] = c.network;
    j["model"] = c.model;
    j["policy"] = c.policy;
    j["strategy"] = c.strategy;
    j["delta"] = c.delta;
    j["theta0"] = c.theta0;
    j["seed"] = c.seed;
    j["reps"] = c.reps;
    j["horizon"] = c.horizon;
    j["workers"] = c.workers;
    j["deltas"] = c.deltas;
    j["eps"] = c.eps;
    j["q_hyp"] = c.q_hyp;
    j["q_mat"] = c.q_mat;
    j["q_fun"] = c.q_fun;
    j["sigma_perturbed"] = c.sigma_perturbed;
    j["sigma_bad"] = c.sigma_bad;
    j["belief_stride"] = c.belief_stride;
    nlohmann::json sched = nlohmann::json::array();
    for (const auto& [at, th] : c.schedule) sched.push_back({at, th});
    j["schedule"] = sched;
    return j;
}

inline experiment_config config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("config: top level must be a JSON object");
    experiment_config c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "network") c.network = value.get<std::string>();
            else if (key == "model") c.model = value.get<std::string>();
            else if (key == "policy") c.policy = value.get<std::string>();
            else if (key == "strategy") c.strategy = value.get<std::string>();
            else if (key == "delta") c.delta = value.get<double>();
            else if (key == "theta0") c.theta0 = value.get<int>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "reps") c.reps = value.get<long>();
            else if (key == "horizon") c.horizon = value.get<long>();
            else if (key == "workers") c.workers = value.get<int>();
            else if (key == "deltas") c.deltas = value.get<std::vector<double>>();
            else if (key == "eps") c.eps = value.get<double>();
            else if (key == "q_hyp") c.q_hyp = value.get<double>();
            else if (key == "q_mat") c.q_mat = value.get<double>();
            else if (key == "q_fun") c.q_fun = value.get<double>();
            else if (key == "sigma_perturbed") c.sigma_perturbed = value.get<double>();
            else if (key == "sigma_bad") c.sigma_bad = value.get<double>();
            else if (key == "belief_stride") c.belief_stride = value.get<int>();
            else if (key == "schedule") {
                c.schedule.clear();
                for (const auto& e : value) {
                    if (!e.is_array() || e.size() != 2) {
                        throw config_error("config: schedule entries must be [step, label]");
                    }
                    c.schedule.emplace_back(e[0].get<int>(), e[1].get<int>());
                }
            } else {
                throw config_error("config: unknown key '" + key + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw config_error("config: bad value for '" + key + "': " + e.what());
        }
    }
    c.validate();
    return c;
}

inline experiment_config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_config: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("load_config: invalid JSON in " + path.string() + ": " + e.what());
    }
    experiment_config c = config_from_json(j);
    const std::filesystem::path base = path.has_parent_path()
                                           ? path.parent_path()
                                           : std::filesystem::path(".");
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) {
            p = (base / p).lexically_normal().string();
        }
    };
    resolve(c.network);
    resolve(c.model);
    return c;
}

// Canonical form: nlohmann::json orders keys lexicographically, so a compact
// dump of the full field set is deterministic.
inline std::string canonical_dump(const experiment_config& c) { return to_json(c).dump(); }

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string config_hash(const experiment_config& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_dump(c))));
    return std::string(buf);
}

// Shortest decimal that round-trips a double (CSV cells stay bit-faithful).
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

using csv_cell = std::variant<long, double, std::string>;

inline std::string format_cell(const csv_cell& cell) {
    if (std::holds_alternative<long>(cell)) return std::to_string(std::get<long>(cell));
    if (std::holds_alternative<double>(cell)) return format_double(std::get<double>(cell));
    return std::get<std::string>(cell);
}

// CSV with a single provenance comment line, then a header row, then data.
// Output is deterministic: no timestamps, fixed formatting.
class csv_writer {
  public:
    csv_writer(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::string& config_hash_hex, std::uint64_t seed)
        : out_(path), columns_(columns.size()) {
        if (!out_) throw io_error("csv_writer: cannot open " + path.string());
        out_ << "# version=" << kVersion << " config=" << config_hash_hex << " seed=" << seed
             << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) {
            out_ << columns[i] << (i + 1 < columns.size() ? "," : "");
        }
        out_ << "\n";
    }

    void row(const std::vector<csv_cell>& cells) {
        if (cells.size() != columns_) {
            throw std::invalid_argument("csv_writer: row width disagrees with the header");
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out_ << format_cell(cells[i]) << (i + 1 < cells.size() ? "," : "");
        }
        out_ << "\n";
    }

    void close() {
        out_.close();
        if (out_.fail()) throw io_error("csv_writer: write failed");
    }

  private:
    std::ofstream out_;
    std::size_t columns_;
};

// Structured sidecar next to a CSV: provenance plus run summary, no
// timestamps, 2-space indent, trailing newline.
inline void write_sidecar(const std::filesystem::path& path, nlohmann::json summary,
                          const std::string& config_hash_hex, std::uint64_t seed,
                          const std::string& command) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["config"] = config_hash_hex;
    j["seed"] = seed;
    j["command"] = command;
    j["summary"] = std::move(summary);
    std::ofstream out(path);
    if (!out) throw io_error("write_sidecar: cannot open " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw io_error("write_sidecar: write failed");
}

inline graph::network load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_network: cannot open " + path.string());
    return graph::parse_edge_list(in);
}

inline Eigen::MatrixXd load_model_table(const std::filesystem::path& path, int agents) {
    std::ifstream in(path);
    if (!in) throw io_error("load_model_table: cannot open " + path.string());
    return models::parse_model_table(in, agents);
}

} // namespace asl::io
