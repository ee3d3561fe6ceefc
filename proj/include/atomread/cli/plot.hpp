#ifndef ATOMREAD_CLI_PLOT_HPP
#define ATOMREAD_CLI_PLOT_HPP

#include <string>
#include <vector>

namespace atomread::cli {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const;
    std::vector<double> numeric_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Renders an SVG line plot of the named y columns against the x column.
void plot_csv(const CsvTable& table, const std::string& x_col,
              const std::vector<std::string>& y_cols, const std::string& title,
              const std::string& out_svg, bool log_y = false);

}  // namespace atomread::cli

#endif
