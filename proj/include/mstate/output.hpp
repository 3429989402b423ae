#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mstate {

// General format with 17 significant digits and a '.' separator, independent
// of the global locale.
std::string format_number(double v);

// Comma-separated table with a header row and Unix newlines.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);
// Same for pre-formatted cells.
void write_csv_text(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Line chart with axes, ticks and a legend.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);
void write_svg(const std::filesystem::path& path, const std::string& svg);

} // namespace mstate
