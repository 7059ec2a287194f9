#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "micromacro/common.hpp"

namespace micromacro::io {

using CsvValue = std::variant<double, long long, std::string>;
using CsvRow = std::vector<CsvValue>;

/// Serializes one field with RFC-4180 quoting; doubles at 17 significant
/// digits so files round-trip bit-exactly.
std::string csv_field(const CsvValue& value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<CsvRow> rows;
};

/// Writes the table; an empty row set still produces the header line.
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// CRC-32 of a file's bytes (zlib polynomial), as 8 hex digits.
std::string crc32_file_hex(const std::filesystem::path& path);

} // namespace micromacro::io
