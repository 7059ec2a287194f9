#include "micromacro/csv_io.hpp"

#include <cstdio>
#include <fstream>
#include <zlib.h>

namespace micromacro::io {

std::string csv_field(const CsvValue& value)
{
    std::string text;
    if (std::holds_alternative<double>(value))
        text = format_double(std::get<double>(value));
    else if (std::holds_alternative<long long>(value))
        text = std::to_string(std::get<long long>(value));
    else
        text = std::get<std::string>(value);
    if (text.find_first_of(",\"\n\r") == std::string::npos)
        return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"')
            quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw ConfigError("cannot open '" + path.string() + "' for writing");
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i)
            os << ',';
        os << csv_field(table.header[i]);
    }
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i)
                os << ',';
            os << csv_field(row[i]);
        }
        os << '\n';
    }
    os.flush();
    if (!os)
        throw ConfigError("write failed for '" + path.string() + "'");
}

std::string crc32_file_hex(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ConfigError("cannot open '" + path.string() + "' for checksumming");
    uLong crc = crc32(0L, Z_NULL, 0);
    char buf[1 << 16];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0)
        crc = crc32(crc, reinterpret_cast<const Bytef*>(buf),
                    static_cast<uInt>(is.gcount()));
    char hex[16];
    std::snprintf(hex, sizeof(hex), "%08lx", static_cast<unsigned long>(crc));
    return hex;
}

} // namespace micromacro::io
