#include "atomread/core/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace atomread {

std::string CsvWriter::format_double(double v) {
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
}

CsvWriter& CsvWriter::cell(const std::string& s) {
    current_.push_back(s);
    return *this;
}

CsvWriter& CsvWriter::cell(double v) {
    current_.push_back(format_double(v));
    return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
    current_.push_back(std::to_string(v));
    return *this;
}

void CsvWriter::end_row() {
    if (current_.size() != header_.size())
        throw std::logic_error("csv row width mismatch");
    rows_.push_back(std::move(current_));
    current_.clear();
}

std::string CsvWriter::str() const {
    std::string out;
    auto join = [&out](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i)
                out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    join(header_);
    for (const auto& r : rows_)
        join(r);
    return out;
}

void CsvWriter::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write csv: " + path);
    const std::string s = str();
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace atomread
