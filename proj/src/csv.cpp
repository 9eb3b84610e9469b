#include "estfuse/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace estfuse {

namespace {

bool needs_quoting(const std::string& field) {
    return field.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quote(const std::string& field) {
    if (!needs_quoting(field)) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

} // namespace

std::string format_double(double value) {
    char buf[64];
    // 17 significant digits round-trip any double exactly.
    const int len = std::snprintf(buf, sizeof(buf), "%.17g", value);
    if (len < 0 || len >= static_cast<int>(sizeof(buf))) {
        throw std::runtime_error("failed to format double");
    }
    return std::string(buf, static_cast<std::size_t>(len));
}

CsvWriter::CsvWriter(std::filesystem::path path, std::vector<std::string> header)
    : path_(std::move(path)), columns_(header.size()) {
    if (header.empty()) throw std::invalid_argument("CSV header must be nonempty");
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += quote(header[i]);
    }
    buffer_ += '\n';
}

CsvWriter::~CsvWriter() {
    if (!closed_) {
        try {
            close();
        } catch (...) {
        }
    }
}

void CsvWriter::write_row(const std::vector<CsvValue>& values) {
    if (values.size() != columns_) {
        throw std::invalid_argument("CSV row width does not match header");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) buffer_ += ',';
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, std::string>) {
                    buffer_ += quote(v);
                } else if constexpr (std::is_same_v<T, double>) {
                    buffer_ += format_double(v);
                } else {
                    buffer_ += std::to_string(v);
                }
            },
            values[i]);
    }
    buffer_ += '\n';
    ++rows_;
}

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    const std::filesystem::path tmp = path_.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path_);
}

} // namespace estfuse
