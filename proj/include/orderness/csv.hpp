// CSV formatting and atomic file output.
//
// Numeric cells use 9 significant digits so logs diff cleanly across runs.
// Writes go to a temp file in the target directory and are renamed into
// place, so an interrupted run never leaves a partial file behind.
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "orderness/errors.hpp"

namespace orderness {

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::string format_u64(uint64_t v) { return std::to_string(v); }

inline void atomic_write_file(const std::filesystem::path& path, const std::string& contents) {
    namespace fs = std::filesystem;
    fs::path dir = path.parent_path();
    if (!dir.empty()) {
        std::error_code ec;
        fs::create_directories(dir, ec);
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), Err::IoError, "cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        require(out.good(), Err::IoError, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    require(!ec, Err::IoError, "rename " + tmp.string() + " -> " + path.string() + " failed");
}

// Rectangular all-numeric CSV with a fixed header.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_row(std::vector<double> row) {
        require(row.size() == columns.size(), Err::ShapeMismatch, "CSV row width mismatch");
        rows.push_back(std::move(row));
    }

    std::string to_string() const {
        std::string out;
        for (size_t c = 0; c < columns.size(); ++c) {
            if (c) out += ',';
            out += columns[c];
        }
        out += '\n';
        for (const auto& row : rows) {
            for (size_t c = 0; c < row.size(); ++c) {
                if (c) out += ',';
                out += format_real(row[c]);
            }
            out += '\n';
        }
        return out;
    }

    void write(const std::filesystem::path& path) const { atomic_write_file(path, to_string()); }
};

} // namespace orderness
