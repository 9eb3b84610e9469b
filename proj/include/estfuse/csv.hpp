#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace estfuse {

using CsvValue = std::variant<std::string, std::int64_t, std::uint64_t, double>;

// Shortest representation that round-trips a double exactly (up to 17
// significant digits), '.' decimal separator.
std::string format_double(double value);

// RFC 4180 output: UTF-8, LF line endings, quoting only where required.
// Rows accumulate in memory and land atomically via rename on close().
class CsvWriter {
public:
    CsvWriter(std::filesystem::path path, std::vector<std::string> header);
    ~CsvWriter();

    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void write_row(const std::vector<CsvValue>& values);
    std::int64_t rows_written() const { return rows_; }

    // Writes <path>.tmp and renames onto the target.
    void close();

private:
    std::filesystem::path path_;
    std::string buffer_;
    std::size_t columns_;
    std::int64_t rows_ = 0;
    bool closed_ = false;
};

} // namespace estfuse
