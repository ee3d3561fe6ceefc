#ifndef ATOMREAD_CORE_CSV_HPP
#define ATOMREAD_CORE_CSV_HPP

#include <string>
#include <vector>

namespace atomread {

// Deterministic CSV writer: fixed "%.10g" float formatting so identical runs
// produce byte-identical files.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    CsvWriter& cell(const std::string& s);
    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(size_t v) { return cell(static_cast<long long>(v)); }
    void end_row();

    std::string str() const;
    void write(const std::string& path) const;

    static std::string format_double(double v);

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::string> current_;
};

}  // namespace atomread

#endif
