#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crnlab/errors.hpp"
#include "crnlab/grid.hpp"
#include "crnlab/numeric.hpp"
#include "crnlab/simulate.hpp"

namespace crnlab {

/// Write a whole file through a temp-and-rename so readers never observe a
/// partial file. All outputs use '.' decimals and LF line endings.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("output", "cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw ValidationError("output", "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Diagnostics CSV, one row per (sample, species):
///   t, species, l2_dev, h2_dev, linf_dev, mean, total_<name>..., energy, triple_norm
inline std::string diagnostics_csv(const DiagnosticsSeries& series) {
    std::string out = "t,species,l2_dev,h2_dev,linf_dev,mean";
    for (const auto& name : series.total_names) out += ",total_" + name;
    out += ",energy,triple_norm\n";
    for (const auto& s : series.samples) {
        for (std::size_t i = 0; i < series.species.size(); ++i) {
            out += format_double(s.t);
            out += ',';
            out += series.species[i];
            out += ',';
            out += format_double(s.l2_dev[i]);
            out += ',';
            out += format_double(s.h2_dev[i]);
            out += ',';
            out += format_double(s.linf_dev[i]);
            out += ',';
            out += format_double(s.mean[i]);
            for (double total : s.totals) {
                out += ',';
                out += format_double(total);
            }
            out += ',';
            out += format_double(s.energy);
            out += ',';
            out += format_double(s.triple_norm);
            out += '\n';
        }
    }
    return out;
}

/// Field snapshot CSV with cell-center coordinates:
///   axis0,axis1,axis2,species,value
/// Missing axes report coordinate 0.
inline std::string snapshot_csv(const std::vector<std::string>& species,
                                const std::vector<ScalarField>& fields) {
    if (species.size() != fields.size())
        throw ValidationError("snapshot", "species/field count mismatch");
    std::string out = "axis0,axis1,axis2,species,value\n";
    const BoxDomain& d = fields.at(0).domain;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        for (int i0 = 0; i0 < d.cells[0]; ++i0)
            for (int i1 = 0; i1 < d.cells[1]; ++i1)
                for (int i2 = 0; i2 < d.cells[2]; ++i2) {
                    out += format_double(d.dim > 0 ? d.center(0, i0) : 0.0);
                    out += ',';
                    out += format_double(d.dim > 1 ? d.center(1, i1) : 0.0);
                    out += ',';
                    out += format_double(d.dim > 2 ? d.center(2, i2) : 0.0);
                    out += ',';
                    out += species[i];
                    out += ',';
                    out += format_double(
                        fields[i].values[static_cast<std::size_t>(d.linear_index(i0, i1, i2))]);
                    out += '\n';
                }
    }
    return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline double parse_csv_double(const std::string& text, const std::string& context) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw ValidationError(context, "not a number: '" + text + "'");
    return v;
}

}  // namespace detail

/// Reload a snapshot written by snapshot_csv. The caller supplies the domain
/// and species names; coordinates are validated against cell centers.
inline std::vector<ScalarField> load_snapshot(const std::filesystem::path& path,
                                              const BoxDomain& domain,
                                              const std::vector<std::string>& species) {
    std::ifstream in(path);
    if (!in) throw ValidationError("snapshot", "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) ||
        detail::split_csv_line(line) !=
            std::vector<std::string>{"axis0", "axis1", "axis2", "species", "value"})
        throw ValidationError("snapshot", "bad header in " + path.string());

    std::vector<ScalarField> fields(species.size(), ScalarField::zero(domain));
    std::vector<std::vector<bool>> seen(
        species.size(),
        std::vector<bool>(static_cast<std::size_t>(domain.total_cells()), false));
    auto axis_index = [&](int axis, double x) {
        const double h = domain.spacing(axis);
        const int i = static_cast<int>(std::lround(x / h - 0.5));
        if (i < 0 || i >= domain.cells[static_cast<std::size_t>(axis)] ||
            std::abs(domain.center(axis, i) - x) >
                1e-9 * domain.lengths[static_cast<std::size_t>(axis)])
            throw ValidationError("snapshot", "coordinate off the cell grid: " + format_double(x));
        return i;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 5) throw ValidationError("snapshot", "bad row: '" + line + "'");
        const int i0 = domain.dim > 0 ? axis_index(0, detail::parse_csv_double(cells[0], "snapshot")) : 0;
        const int i1 = domain.dim > 1 ? axis_index(1, detail::parse_csv_double(cells[1], "snapshot")) : 0;
        const int i2 = domain.dim > 2 ? axis_index(2, detail::parse_csv_double(cells[2], "snapshot")) : 0;
        const auto sp = std::find(species.begin(), species.end(), cells[3]);
        if (sp == species.end())
            throw ValidationError("snapshot", "unknown species '" + cells[3] + "'");
        const std::size_t s = static_cast<std::size_t>(sp - species.begin());
        const std::size_t idx = static_cast<std::size_t>(domain.linear_index(i0, i1, i2));
        if (seen[s][idx]) throw ValidationError("snapshot", "duplicate cell row");
        seen[s][idx] = true;
        const double v = detail::parse_csv_double(cells[4], "snapshot");
        if (!std::isfinite(v)) throw ValidationError("snapshot", "non-finite value");
        fields[s].values[idx] = v;
    }
    for (const auto& flags : seen)
        for (bool f : flags)
            if (!f) throw ValidationError("snapshot", "incomplete snapshot: missing cells");
    return fields;
}

/// Extract a (t, value) series from a diagnostics CSV for rate fitting.
/// Per-species columns need a species filter; per-sample columns repeat one
/// value across the species rows of each sample, which leaves a least-squares
/// fit unchanged.
inline std::pair<std::vector<double>, std::vector<double>> read_csv_series(
    const std::filesystem::path& path, const std::string& column, const std::string& species) {
    std::ifstream in(path);
    if (!in) throw ValidationError("csv", "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("csv", "empty file");
    const auto header = detail::split_csv_line(line);
    const auto t_it = std::find(header.begin(), header.end(), "t");
    const auto col_it = std::find(header.begin(), header.end(), column);
    const auto sp_it = std::find(header.begin(), header.end(), "species");
    if (t_it == header.end()) throw ValidationError("csv", "no 't' column");
    if (col_it == header.end()) throw ValidationError("csv", "no '" + column + "' column");
    const std::size_t t_idx = static_cast<std::size_t>(t_it - header.begin());
    const std::size_t col_idx = static_cast<std::size_t>(col_it - header.begin());
    const std::size_t sp_idx = sp_it == header.end()
                                   ? static_cast<std::size_t>(-1)
                                   : static_cast<std::size_t>(sp_it - header.begin());

    std::vector<double> ts, vs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw ValidationError("csv", "row width differs from header");
        if (!species.empty() && sp_idx != static_cast<std::size_t>(-1) &&
            cells[sp_idx] != species)
            continue;
        ts.push_back(detail::parse_csv_double(cells[t_idx], "csv"));
        vs.push_back(detail::parse_csv_double(cells[col_idx], "csv"));
    }
    return {std::move(ts), std::move(vs)};
}

}  // namespace crnlab
