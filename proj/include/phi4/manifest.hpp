#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace phi4 {

// ---- Content hashing --------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, size_t size,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("hash_file: cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<size_t>(is.gcount()), h);
    }
    return h;
}

// ---- Run configuration ------------------------------------------------------
// INI-style sections of key = value pairs; '#' starts a comment. Unknown keys
// are rejected so that typos cannot silently change an experiment.

class RunConfig {
public:
    static RunConfig parse(const std::string& text) {
        RunConfig cfg;
        cfg.text_ = text;
        std::istringstream is(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[' && line.back() == ']') {
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) fail(lineno, "empty section name");
                continue;
            }
            size_t eq = line.find('=');
            if (eq == std::string::npos) fail(lineno, "expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty() || section.empty()) fail(lineno, "key outside a section");
            std::string full = section + "." + key;
            if (cfg.values_.count(full)) fail(lineno, "duplicate key " + full);
            cfg.values_[full] = value;
        }
        cfg.validate_keys();
        return cfg;
    }

    static RunConfig load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("RunConfig: cannot open " + path.string());
        std::stringstream ss;
        ss << is.rdbuf();
        return parse(ss.str());
    }

    const std::string& text() const { return text_; }
    std::uint64_t content_hash() const { return fnv1a64(text_); }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end())
            throw std::runtime_error("config: missing required key " + key);
        return it->second;
    }
    std::string get_str(const std::string& key, const std::string& dflt) const {
        auto it = values_.find(key);
        return it == values_.end() ? dflt : it->second;
    }
    double get_double(const std::string& key) const { return to_double(key, get_str(key)); }
    double get_double(const std::string& key, double dflt) const {
        return has(key) ? get_double(key) : dflt;
    }
    long get_int(const std::string& key) const {
        double d = get_double(key);
        long v = static_cast<long>(d);
        if (static_cast<double>(v) != d)
            throw std::runtime_error("config: " + key + " must be an integer");
        return v;
    }
    long get_int(const std::string& key, long dflt) const {
        return has(key) ? get_int(key) : dflt;
    }
    bool get_bool(const std::string& key, bool dflt) const {
        if (!has(key)) return dflt;
        std::string v = get_str(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw std::runtime_error("config: " + key + " must be true/false");
    }
    std::vector<double> get_list(const std::string& key) const {
        std::vector<double> out;
        std::istringstream ss(get_str(key));
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
        if (out.empty()) throw std::runtime_error("config: empty list for " + key);
        return out;
    }
    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& dflt) const {
        return has(key) ? get_list(key) : dflt;
    }

    // Flat echo of every present key, for the manifest.
    nlohmann::json echo() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

private:
    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }
    [[noreturn]] static void fail(int lineno, const std::string& what) {
        throw std::runtime_error("config line " + std::to_string(lineno) + ": " + what);
    }
    static double to_double(const std::string& key, const std::string& v) {
        try {
            size_t pos = 0;
            double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (...) {
            throw std::runtime_error("config: " + key + " is not a number: '" + v + "'");
        }
    }

    void validate_keys() const {
        static const std::set<std::string> allowed = {
            "run.schema", "run.seed", "run.out",
            "grid.n", "grid.l",
            "model.m", "model.m_list", "model.dt", "model.t", "model.t_grid",
            "model.cubic", "model.renorm", "model.noise",
            "stopping.eta", "stopping.theta", "stopping.alpha", "stopping.epsilon",
            "stopping.calibration_replicas", "stopping.records", "stopping.tail_times",
            "estimator.replicas", "estimator.probes", "estimator.power_budget",
            "estimator.p", "estimator.kappa", "estimator.q",
            "estimator.burn_in", "estimator.samples", "estimator.thin",
            "estimator.inner", "estimator.outer", "estimator.magnitudes",
            "estimator.functional", "estimator.t_short_grid",
        };
        for (const auto& [k, v] : values_)
            if (!allowed.count(k)) throw std::runtime_error("config: unknown key " + k);
        if (has("run.schema") && get_int("run.schema") != 1)
            throw std::runtime_error("config: unsupported schema version");
    }

    std::string text_;
    std::map<std::string, std::string> values_;
};

// ---- Run manifest -----------------------------------------------------------

inline constexpr int kArtifactVersion = 1;

struct RunManifest {
    std::string experiment;
    std::string config_text;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    int workers = 1;
    std::vector<std::pair<std::string, std::uint64_t>> files;  // relative path, hash

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["artifact_version"] = kArtifactVersion;
        j["experiment"] = experiment;
        j["config"] = config_text;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["workers"] = workers;
        j["files"] = nlohmann::json::array();
        for (const auto& [p, h] : files) j["files"].push_back({{"path", p}, {"hash", h}});
        return j;
    }

    static RunManifest from_json(const nlohmann::json& j) {
        if (j.at("artifact_version").get<int>() != kArtifactVersion)
            throw std::runtime_error("manifest: unsupported artifact version");
        RunManifest m;
        m.experiment = j.at("experiment").get<std::string>();
        m.config_text = j.at("config").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::uint64_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.workers = j.at("workers").get<int>();
        for (const auto& f : j.at("files"))
            m.files.emplace_back(f.at("path").get<std::string>(),
                                 f.at("hash").get<std::uint64_t>());
        return m;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("manifest: cannot write " + path.string());
        os << to_json().dump(2) << "\n";
    }

    static RunManifest load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("manifest: cannot open " + path.string());
        nlohmann::json j;
        is >> j;
        return from_json(j);
    }
};

// Hash every produced file (sorted by relative path) under a run directory,
// skipping the manifest itself.
inline std::vector<std::pair<std::string, std::uint64_t>> inventory(
    const std::filesystem::path& dir) {
    std::vector<std::pair<std::string, std::uint64_t>> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string rel = std::filesystem::relative(e.path(), dir).generic_string();
        if (rel == "manifest.json") continue;
        files.emplace_back(rel, hash_file(e.path()));
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace phi4
