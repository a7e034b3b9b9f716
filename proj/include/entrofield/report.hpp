#pragma once

#include "entrofield/config.hpp"
#include "entrofield/version.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace entrofield {

struct MetricRow {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;   // 0 marks an informational row
    bool pass = true;
    std::string note;
};

struct RunReport {
    std::string scenario;
    std::string config_hash;
    std::uint64_t seed = 0;
    double hbar = 1.0;
    std::vector<std::string> config_lines;
    std::vector<MetricRow> metrics;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> table;

    bool pass() const {
        for (const auto& m : metrics)
            if (!m.pass) return false;
        return true;
    }
};

namespace report_detail {

inline std::string fmt(double v) { return config_detail::format_double(v); }

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

}

inline std::string render_csv(const RunReport& r) {
    using report_detail::fmt;
    std::string out;
    out += "# entrofield report v";
    out += report_format_version;
    out += '\n';
    out += "# version = ";
    out += version_string;
    out += '\n';
    out += "# scenario = " + r.scenario + '\n';
    out += "# config_hash = " + r.config_hash + '\n';
    out += "# seed = " + std::to_string(r.seed) + '\n';
    out += "# hbar = " + fmt(r.hbar) + '\n';
    out += "# config_begin\n";
    for (const auto& line : r.config_lines) out += "# " + line + '\n';
    out += "# config_end\n";
    out += "metric,value,tolerance,pass,note\n";
    for (const auto& m : r.metrics) {
        out += m.name + ',' + fmt(m.value) + ',' + fmt(m.tolerance) + ',' +
               (m.pass ? "1" : "0") + ',' + m.note + '\n';
    }
    if (!r.columns.empty()) {
        out += '\n';
        for (std::size_t i = 0; i < r.columns.size(); ++i) {
            if (i) out += ',';
            out += r.columns[i];
        }
        out += '\n';
        for (const auto& row : r.table) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                out += fmt(row[i]);
            }
            out += '\n';
        }
    }
    out += std::string("result,") + (r.pass() ? "pass" : "fail") + '\n';
    return out;
}

// mirrors the CSV content field for field
inline std::string render_json(const RunReport& r) {
    using report_detail::fmt;
    using report_detail::json_escape;
    std::string out = "{\n";
    out += "  \"report\": \"entrofield\",\n";
    out += std::string("  \"format_version\": \"") + report_format_version + "\",\n";
    out += std::string("  \"version\": \"") + version_string + "\",\n";
    out += "  \"scenario\": \"" + json_escape(r.scenario) + "\",\n";
    out += "  \"config_hash\": \"" + r.config_hash + "\",\n";
    out += "  \"seed\": " + std::to_string(r.seed) + ",\n";
    out += "  \"hbar\": " + fmt(r.hbar) + ",\n";
    out += "  \"config\": [";
    for (std::size_t i = 0; i < r.config_lines.size(); ++i) {
        if (i) out += ", ";
        out += '"' + json_escape(r.config_lines[i]) + '"';
    }
    out += "],\n";
    out += "  \"metrics\": [\n";
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
        const auto& m = r.metrics[i];
        out += "    {\"name\": \"" + json_escape(m.name) + "\", \"value\": " + fmt(m.value) +
               ", \"tolerance\": " + fmt(m.tolerance) + ", \"pass\": " +
               (m.pass ? "true" : "false") + ", \"note\": \"" + json_escape(m.note) + "\"}";
        out += i + 1 < r.metrics.size() ? ",\n" : "\n";
    }
    out += "  ],\n";
    out += "  \"columns\": [";
    for (std::size_t i = 0; i < r.columns.size(); ++i) {
        if (i) out += ", ";
        out += '"' + json_escape(r.columns[i]) + '"';
    }
    out += "],\n";
    out += "  \"table\": [";
    for (std::size_t i = 0; i < r.table.size(); ++i) {
        out += i ? ",\n    [" : "\n    [";
        for (std::size_t j = 0; j < r.table[i].size(); ++j) {
            if (j) out += ", ";
            out += fmt(r.table[i][j]);
        }
        out += ']';
    }
    out += r.table.empty() ? "],\n" : "\n  ],\n";
    out += std::string("  \"pass\": ") + (r.pass() ? "true" : "false") + "\n";
    out += "}\n";
    return out;
}

inline std::string render_report(const RunReport& r, OutputFormat f) {
    return f == OutputFormat::csv ? render_csv(r) : render_json(r);
}

}
