#include "atomread/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace atomread::cli {

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    throw std::runtime_error("csv column not found: " + name);
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
    const int c = column(name);
    std::vector<double> out;
    for (const auto& row : rows)
        out.push_back(std::stod(row[static_cast<size_t>(c)]));
    return out;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open csv: " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

namespace {
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b", "#17becf"};
}

void plot_csv(const CsvTable& table, const std::string& x_col,
              const std::vector<std::string>& y_cols, const std::string& title,
              const std::string& out_svg, bool log_y) {
    const auto xs = table.numeric_column(x_col);
    std::vector<std::vector<double>> ys;
    for (const auto& c : y_cols)
        ys.push_back(table.numeric_column(c));
    if (xs.empty())
        throw std::runtime_error("plot: no rows");

    const int width = 640, height = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = *std::min_element(xs.begin(), xs.end());
    double xmax = *std::max_element(xs.begin(), xs.end());
    double ymin = 1e300, ymax = -1e300;
    for (const auto& col : ys)
        for (double v : col) {
            double t = log_y ? std::log10(std::max(v, 1e-12)) : v;
            ymin = std::min(ymin, t);
            ymax = std::max(ymax, t);
        }
    if (xmax == xmin)
        xmax = xmin + 1;
    if (ymax == ymin)
        ymax = ymin + 1;

    auto px = [&](double x) {
        return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
    };
    auto py = [&](double y) {
        const double t = log_y ? std::log10(std::max(y, 1e-12)) : y;
        return height - mb - (t - ymin) / (ymax - ymin) * (height - mt - mb);
    };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
        << height << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << width / 2 << "' y='24' text-anchor='middle' "
        << "font-family='sans-serif' font-size='16'>" << title << "</text>\n";
    // axes
    svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
        << height - mb << "' stroke='black'/>\n";
    svg << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr
        << "' y2='" << height - mb << "' stroke='black'/>\n";
    // ticks
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        svg << "<text x='" << px(fx) << "' y='" << height - mb + 18
            << "' text-anchor='middle' font-family='sans-serif' font-size='11'>" << fx
            << "</text>\n";
        const double ty = ymin + (ymax - ymin) * i / 4.0;
        const double fy = log_y ? std::pow(10.0, ty) : ty;
        const double ypix = height - mb - (ty - ymin) / (ymax - ymin) * (height - mt - mb);
        svg << "<text x='" << ml - 6 << "' y='" << ypix + 4
            << "' text-anchor='end' font-family='sans-serif' font-size='11'>" << fy
            << "</text>\n";
    }
    svg << "<text x='" << (ml + width - mr) / 2 << "' y='" << height - 12
        << "' text-anchor='middle' font-family='sans-serif' font-size='13'>" << x_col
        << "</text>\n";

    for (size_t c = 0; c < ys.size(); ++c) {
        const char* color = kColors[c % 7];
        svg << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
        for (size_t i = 0; i < xs.size(); ++i)
            svg << px(xs[i]) << "," << py(ys[c][i]) << " ";
        svg << "'/>\n";
        for (size_t i = 0; i < xs.size(); ++i)
            svg << "<circle cx='" << px(xs[i]) << "' cy='" << py(ys[c][i])
                << "' r='3' fill='" << color << "'/>\n";
        svg << "<text x='" << width - mr - 8 << "' y='" << mt + 16 * (c + 1)
            << "' text-anchor='end' font-family='sans-serif' font-size='12' fill='"
            << color << "'>" << y_cols[c] << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(out_svg, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write svg: " + out_svg);
    out << svg.str();
}

}  // namespace atomread::cli
