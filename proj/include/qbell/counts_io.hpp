#pragma once

// Coincidence-count tables.
//
// Format: comma-separated text, one row per analyzer setting, with the header
//
//   alpha,beta,n_pp,n_pm,n_mp,n_mm
//
// Angles are analysis angles in radians, or wave-plate angles in degrees when
// read with AngleUnit::waveplate (analysis angle = 2 x wave-plate angle).
// Counts are non-negative integers; the first letter is Alice's outcome, the
// second Bob's (p = transmitted, m = reflected/orthogonal port). Blank lines
// and lines starting with '#' are ignored.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "qbell/measure.hpp"

namespace qbell {

enum class AngleUnit { analysis, waveplate };

inline std::string_view to_string(AngleUnit u) noexcept { return u == AngleUnit::analysis ? "analysis" : "waveplate"; }

inline constexpr std::string_view kCountsHeader = "alpha,beta,n_pp,n_pm,n_mp,n_mm";

// Converts an angle given in `unit` to analysis-angle radians.
inline double to_analysis_radians(double angle, AngleUnit unit) noexcept {
    return unit == AngleUnit::analysis ? angle : angle * (kPi / 90.0);
}

struct CountsRow {
    std::size_t line = 0;  // 1-based source line
    CoincidenceRecord record;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_angle(std::string_view text, std::size_t line, std::string_view name) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
        throw ParseError(line, std::string(name) + ": not a finite number: '" + std::string(text) + "'");
    return v;
}

inline std::uint64_t parse_count(std::string_view text, std::size_t line, std::string_view name) {
    if (!text.empty() && text.front() == '-')
        throw ParseError(line, std::string(name) + ": negative count " + std::string(text));
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError(line, std::string(name) + ": not a non-negative integer: '" + std::string(text) + "'");
    return v;
}

}  // namespace detail

inline std::vector<CountsRow> parse_counts(std::istream& in, AngleUnit unit = AngleUnit::analysis) {
    static constexpr std::string_view names[] = {"alpha", "beta", "n_pp", "n_pm", "n_mp", "n_mm"};
    std::vector<CountsRow> rows;
    std::string raw;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, raw)) {
        ++line;
        const std::string_view text = detail::trim(raw);
        if (text.empty() || text.front() == '#') continue;
        const auto fields = detail::split_csv(text);
        if (!have_header) {
            std::string joined;
            for (std::size_t i = 0; i < fields.size(); ++i) joined += (i ? "," : "") + std::string(fields[i]);
            if (joined != kCountsHeader)
                throw ParseError(line, "malformed header '" + std::string(text) + "', expected '" +
                                           std::string(kCountsHeader) + "'");
            have_header = true;
            continue;
        }
        if (fields.size() != 6)
            throw ParseError(line, "expected 6 fields, found " + std::to_string(fields.size()));
        CountsRow row;
        row.line = line;
        row.record.setting.alpha = to_analysis_radians(detail::parse_angle(fields[0], line, names[0]), unit);
        row.record.setting.beta = to_analysis_radians(detail::parse_angle(fields[1], line, names[1]), unit);
        row.record.n_pp = detail::parse_count(fields[2], line, names[2]);
        row.record.n_pm = detail::parse_count(fields[3], line, names[3]);
        row.record.n_mp = detail::parse_count(fields[4], line, names[4]);
        row.record.n_mm = detail::parse_count(fields[5], line, names[5]);
        rows.push_back(row);
    }
    if (!have_header) throw ParseError(0, "missing header '" + std::string(kCountsHeader) + "'");
    return rows;
}

inline std::vector<CountsRow> ingest_counts(const std::string& path, AngleUnit unit = AngleUnit::analysis) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open counts file '" + path + "'");
    return parse_counts(in, unit);
}

// Writes records with angles in analysis radians (17 significant digits).
inline void write_counts(std::ostream& out, std::span<const CoincidenceRecord> records) {
    out << kCountsHeader << '\n';
    char buf[64];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%.17g,", r.setting.alpha);
        out << buf;
        std::snprintf(buf, sizeof buf, "%.17g,", r.setting.beta);
        out << buf << r.n_pp << ',' << r.n_pm << ',' << r.n_mp << ',' << r.n_mm << '\n';
    }
}

}  // namespace qbell
