#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "phi4/stats.hpp"
#include "phi4/stopping.hpp"

namespace phi4 {

inline constexpr int kReportSchemaVersion = 1;

struct ReportRow {
    std::string key;       // the t, m, or functional label of the row
    double estimate = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    long n = 0;
};

inline ReportRow make_row(const std::string& key, const Ci& ci) {
    return {key, ci.estimate, ci.lo, ci.hi, ci.n};
}

struct Verdict {
    std::string bound;  // human-readable statement of the checked bound
    bool pass = false;
    double margin = 0.0;
};

struct FitSummary {
    std::string name;
    LinearFit fit;
};

// The one JSON shape every experiment emits:
// {schema, experiment, config, rows:[...], fits:{...}, verdicts:[...]}.
struct EstimateReport {
    std::string experiment;
    nlohmann::json config = nlohmann::json::object();
    std::vector<ReportRow> rows;
    std::vector<FitSummary> fits;
    std::vector<Verdict> verdicts;

    bool all_pass() const {
        for (const auto& v : verdicts)
            if (!v.pass) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = kReportSchemaVersion;
        j["experiment"] = experiment;
        j["config"] = config;
        j["rows"] = nlohmann::json::array();
        for (const auto& r : rows)
            j["rows"].push_back({{"key", r.key},
                                 {"estimate", r.estimate},
                                 {"ci", {r.ci_lo, r.ci_hi}},
                                 {"n", r.n}});
        j["fits"] = nlohmann::json::object();
        for (const auto& f : fits)
            j["fits"][f.name] = {{"slope", f.fit.slope},
                                 {"intercept", f.fit.intercept},
                                 {"r2", f.fit.r2},
                                 {"slope_se", f.fit.slope_se}};
        j["verdicts"] = nlohmann::json::array();
        for (const auto& v : verdicts)
            j["verdicts"].push_back(
                {{"bound", v.bound}, {"pass", v.pass}, {"margin", v.margin}});
        return j;
    }
};

// Minimal structural validation of an emitted report (used by the test suite
// and the replay path).
inline void check_report_schema(const nlohmann::json& j) {
    if (!j.contains("schema") || j["schema"].get<int>() != kReportSchemaVersion)
        throw std::runtime_error("report: bad schema field");
    for (const char* key : {"experiment", "config", "rows", "fits", "verdicts"})
        if (!j.contains(key)) throw std::runtime_error(std::string("report: missing ") + key);
    for (const auto& r : j["rows"])
        for (const char* key : {"key", "estimate", "ci", "n"})
            if (!r.contains(key))
                throw std::runtime_error(std::string("report row: missing ") + key);
    for (const auto& v : j["verdicts"])
        for (const char* key : {"bound", "pass", "margin"})
            if (!v.contains(key))
                throw std::runtime_error(std::string("report verdict: missing ") + key);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << body;
}

inline void write_report(const std::filesystem::path& path, const EstimateReport& rep) {
    write_text_file(path, rep.to_json().dump(2) + "\n");
}

// CSV of realized stopping times: one line per (replica, restart).
inline std::string stopping_records_csv(const std::vector<StoppingRecord>& records) {
    std::string out = "replica_id,n,tau_n,capped\n";
    char buf[96];
    for (size_t r = 0; r < records.size(); ++r)
        for (size_t i = 0; i < records[r].taus.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%d\n", r, i + 1,
                          records[r].taus[i], records[r].capped[i] ? 1 : 0);
            out += buf;
        }
    return out;
}

// Plot-ready CSV: a header line plus rows of doubles.
inline std::string table_csv(const std::vector<std::string>& header,
                             const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (size_t i = 0; i < header.size(); ++i)
        out += (i ? "," : "") + header[i];
    out += "\n";
    char buf[48];
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::invalid_argument("table_csv: ragged row");
        for (size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
            out += (i ? "," : "") + std::string(buf);
        }
        out += "\n";
    }
    return out;
}

}  // namespace phi4
