#include "ccebreak/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ccebreak/error.hpp"

namespace ccebreak {

namespace {

std::string at_line(std::size_t line) { return " (line " + std::to_string(line) + ")"; }

double parse_field(const std::string& s, const std::string& column, std::size_t line) {
    if (s.empty()) throw Error(Errc::parse_error, "missing value in column '" + column + "'" + at_line(line));
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc::result_out_of_range) {
        throw Error(Errc::non_finite_value, "value '" + s + "' in column '" + column + "' overflows" + at_line(line));
    }
    if (ec != std::errc{} || ptr != last) {
        throw Error(Errc::parse_error, "cannot parse '" + s + "' in column '" + column + "' as a number" + at_line(line));
    }
    if (!std::isfinite(v)) {
        throw Error(Errc::non_finite_value, "non-finite value in column '" + column + "'" + at_line(line));
    }
    return v;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::size_t> resolve(const CsvTable& table, const std::vector<std::string>& names,
                                 const std::vector<std::string>& excluded, std::vector<std::string>& resolved) {
    std::vector<std::size_t> cols;
    resolved.clear();
    if (names.empty()) {
        for (std::size_t j = 0; j < table.header.size(); ++j) {
            if (std::find(excluded.begin(), excluded.end(), table.header[j]) != excluded.end()) continue;
            cols.push_back(j);
            resolved.push_back(table.header[j]);
        }
    } else {
        for (const auto& n : names) {
            cols.push_back(table.column(n));
            resolved.push_back(n);
        }
    }
    return cols;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(Errc::parse_error, "no column named '" + name + "' in the header");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    std::size_t line = 1;
    std::size_t row_line = 1;

    auto finish_row = [&] {
        fields.push_back(field);
        field.clear();
        const bool blank = fields.size() == 1 && fields[0].empty() && !row_has_content;
        if (!blank) {
            if (table.header.empty()) {
                table.header = fields;
            } else {
                if (fields.size() != table.header.size()) {
                    throw Error(Errc::ragged_row, "expected " + std::to_string(table.header.size()) +
                                                      " fields, got " + std::to_string(fields.size()) +
                                                      at_line(row_line));
                }
                table.rows.push_back(fields);
                table.lines.push_back(row_line);
            }
        }
        fields.clear();
        row_has_content = false;
    };

    std::size_t pos = 0;
    if (text.rfind("\xEF\xBB\xBF", 0) == 0) pos = 3;
    for (; pos < text.size(); ++pos) {
        const char c = text[pos];
        if (in_quotes) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field += '"';
                    ++pos;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_has_content = true;
                break;
            case ',':
                fields.push_back(field);
                field.clear();
                row_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                finish_row();
                ++line;
                row_line = line;
                break;
            default:
                field += c;
                row_has_content = true;
        }
    }
    if (in_quotes) throw Error(Errc::parse_error, "unterminated quoted field" + at_line(row_line));
    if (!field.empty() || !fields.empty() || row_has_content) finish_row();
    if (table.header.empty()) throw Error(Errc::parse_error, "empty CSV input");
    for (auto& h : table.header) {
        const auto b = h.find_first_not_of(" \t");
        const auto e = h.find_last_not_of(" \t");
        h = b == std::string::npos ? std::string{} : h.substr(b, e - b + 1);
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_csv(ss.str());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<Observation> observations_from_csv(const CsvTable& table, const ColumnRoles& roles,
                                               std::vector<std::string>* x_names) {
    const std::size_t cu = table.column(roles.unit);
    const std::size_t ct = table.column(roles.time);
    const std::size_t cy = table.column(roles.y);
    std::vector<std::string> names;
    const auto cx = resolve(table, roles.x_columns, {roles.unit, roles.time, roles.y}, names);
    if (cx.empty()) throw Error(Errc::parse_error, "no regressor columns");
    std::vector<Observation> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.lines[r];
        Observation obs;
        obs.unit = row[cu];
        obs.time = row[ct];
        obs.y = parse_field(row[cy], roles.y, line);
        for (std::size_t j = 0; j < cx.size(); ++j) obs.x.push_back(parse_field(row[cx[j]], names[j], line));
        obs.line = line;
        out.push_back(std::move(obs));
    }
    if (x_names) *x_names = names;
    return out;
}

std::vector<CommonObservation> common_from_csv(const CsvTable& table, const ColumnRoles& roles,
                                               std::vector<std::string>* d_names) {
    const std::size_t ct = table.column(roles.time);
    std::vector<std::string> names;
    const auto cd = resolve(table, roles.d_columns, {roles.time}, names);
    std::vector<CommonObservation> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        CommonObservation obs;
        obs.time = row[ct];
        obs.line = table.lines[r];
        for (std::size_t j = 0; j < cd.size(); ++j) obs.d.push_back(parse_field(row[cd[j]], names[j], obs.line));
        out.push_back(std::move(obs));
    }
    if (d_names) *d_names = names;
    return out;
}

PanelData read_panel(const std::filesystem::path& input, const std::filesystem::path& common_input,
                     const ColumnRoles& roles, bool intercept, TimeOrder time_order) {
    PanelOptions options;
    options.intercept = intercept;
    options.time_order = time_order;
    const CsvTable main = read_csv(input);
    const auto rows = observations_from_csv(main, roles, &options.x_names);
    std::vector<CommonObservation> common;
    if (!common_input.empty()) {
        const CsvTable table = read_csv(common_input);
        common = common_from_csv(table, roles, &options.d_names);
        if (common.empty()) throw Error(Errc::unbalanced_panel, common_input.string() + ": no rows");
    }
    return build_panel(rows, common, options);
}

std::string panel_csv(const PanelData& panel) {
    std::string out = "unit,time,y";
    for (const auto& n : panel.x_names()) out += "," + quote_if_needed(n);
    out += "\n";
    const std::size_t T = panel.n_periods();
    for (std::size_t i = 0; i < panel.n_units(); ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            const auto row = static_cast<Eigen::Index>(i * T + t);
            out += quote_if_needed(panel.unit_labels()[i]) + "," + quote_if_needed(panel.time_labels()[t]) + "," +
                   fmt17(panel.y()(row));
            for (Eigen::Index j = 0; j < panel.x().cols(); ++j) out += "," + fmt17(panel.x()(row, j));
            out += "\n";
        }
    }
    return out;
}

std::string common_csv(const PanelData& panel) {
    std::vector<Eigen::Index> cols;
    std::string out = "time";
    for (std::size_t j = 0; j < panel.n_common(); ++j) {
        if (panel.d_names()[j] == "(intercept)") continue;
        cols.push_back(static_cast<Eigen::Index>(j));
        out += "," + quote_if_needed(panel.d_names()[j]);
    }
    out += "\n";
    for (std::size_t t = 0; t < panel.n_periods(); ++t) {
        out += quote_if_needed(panel.time_labels()[t]);
        for (auto j : cols) out += "," + fmt17(panel.d()(static_cast<Eigen::Index>(t), j));
        out += "\n";
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
        out << contents;
        if (!out.flush()) throw Error(Errc::io_error, "cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(Errc::io_error, "cannot replace " + path.string() + ": " + ec.message());
}

void write_panel(const PanelData& panel, const std::filesystem::path& output,
                 const std::filesystem::path& common_output) {
    write_file_atomic(output, panel_csv(panel));
    if (!common_output.empty()) write_file_atomic(common_output, common_csv(panel));
}

}  // namespace ccebreak
