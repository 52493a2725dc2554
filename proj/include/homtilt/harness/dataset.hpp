#ifndef HOMTILT_HARNESS_DATASET_HPP
#define HOMTILT_HARNESS_DATASET_HPP

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "config.hpp"

namespace homtilt::harness
{

inline constexpr const char* tool_version = "0.1.0";

struct Dataset
{
    Json provenance;
    Json summary = Json::object();
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> warnings;

    std::size_t column(std::string_view name) const
    {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name)
                return i;
        throw DomainError("dataset has no column " + std::string(name));
    }

    std::vector<double> values(std::string_view name) const
    {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& row : rows)
            out.push_back(row[c]);
        return out;
    }
};

inline Json make_provenance(const ScenarioConfig& config)
{
    return Json{{"tool", "homtilt"}, {"version", tool_version}, {"config", to_json(config)}};
}

// Shortest round-trip representation, independent of locale.
inline std::string format_number(double x)
{
    char buffer[64];
    const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, x);
    if (ec != std::errc{})
        throw NumericError("cannot format number");
    return std::string(buffer, end);
}

inline Json summary_with_warnings(const Dataset& data)
{
    Json summary = data.summary;
    summary["warnings"] = data.warnings;
    return summary;
}

// '#'-prefixed provenance and summary lines, then RFC 4180 records (CRLF).
inline void write_csv(std::ostream& out, const Dataset& data)
{
    out << "# " << Json{{"provenance", data.provenance}}.dump() << "\r\n";
    out << "# " << Json{{"summary", summary_with_warnings(data)}}.dump() << "\r\n";
    for (std::size_t i = 0; i < data.columns.size(); ++i)
        out << (i ? "," : "") << data.columns[i];
    out << "\r\n";
    for (const auto& row : data.rows)
    {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_number(row[i]);
        out << "\r\n";
    }
}

inline void write_json(std::ostream& out, const Dataset& data)
{
    Json j;
    j["provenance"] = data.provenance;
    j["summary"] = summary_with_warnings(data);
    j["columns"] = data.columns;
    Json rows = Json::array();
    for (const auto& row : data.rows)
    {
        Json r = Json::array();
        for (double v : row)
            r.push_back(std::isfinite(v) ? Json(v) : Json(format_number(v)));
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    out << j.dump(1) << "\n";
}

inline void write(std::ostream& out, const Dataset& data, OutputFormat format)
{
    if (format == OutputFormat::Csv)
        write_csv(out, data);
    else
        write_json(out, data);
}

inline std::string to_text(const Dataset& data, OutputFormat format)
{
    std::ostringstream out;
    write(out, data, format);
    return out.str();
}

inline void write_file(const std::string& path, const Dataset& data, OutputFormat format)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open output file " + path);
    write(out, data, format);
    if (!out)
        throw Error("failed writing output file " + path);
}

} // namespace homtilt::harness

#endif
