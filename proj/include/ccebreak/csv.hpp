#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ccebreak/panel.hpp"

namespace ccebreak {

/// Header plus rows of raw fields, with the source line of every row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;

    /// Column index of `name`; ParseError if absent.
    std::size_t column(const std::string& name) const;
};

/// RFC 4180-style parsing: comma separated, optional double quotes, CRLF tolerated.
/// Rows whose field count differs from the header raise RaggedRow.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

/// Which columns of the long-format files play which role. Empty x_columns means every column
/// except unit, time and y; empty d_columns means every column except time.
struct ColumnRoles {
    std::string unit = "unit";
    std::string time = "time";
    std::string y = "y";
    std::vector<std::string> x_columns;
    std::vector<std::string> d_columns;
};

/// Parse long-format observations; ParseError with the line number on a malformed number.
std::vector<Observation> observations_from_csv(const CsvTable& table, const ColumnRoles& roles,
                                               std::vector<std::string>* x_names = nullptr);
std::vector<CommonObservation> common_from_csv(const CsvTable& table, const ColumnRoles& roles,
                                               std::vector<std::string>* d_names = nullptr);

/// Read `unit,time,y,<x...>` and optionally `time,<d...>` into a panel.
PanelData read_panel(const std::filesystem::path& input, const std::filesystem::path& common_input,
                     const ColumnRoles& roles, bool intercept, TimeOrder time_order);

/// Write the panel as long-format CSV with 17 significant digits. The known common regressors
/// other than an "(intercept)" column go to `common_output` when it is non-empty.
void write_panel(const PanelData& panel, const std::filesystem::path& output,
                 const std::filesystem::path& common_output = {});

std::string panel_csv(const PanelData& panel);
std::string common_csv(const PanelData& panel);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace ccebreak
