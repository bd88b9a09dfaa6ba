#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "talbot/optics.hpp"

namespace talbot::io {

inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path);

inline std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

// Fixed decimal formatting so identical runs produce identical bytes.
inline std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", value);
    return buf;
}

void ensure_directory(const std::filesystem::path& dir);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// Intensity raster: little-endian float32, row-major, plus a JSON sidecar
// {nx, ny, dx_m, dy_m, z_m} next to it.
void write_raster(const optics::ScalarField& field, const std::filesystem::path& base_path);

struct RasterMeta {
    int nx = 0;
    int ny = 0;
    double dx_m = 0.0;
    double dy_m = 0.0;
    double z_m = 0.0;
};
std::pair<RasterMeta, std::vector<float>> read_raster(const std::filesystem::path& base_path);

class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header);
    void add_row(const std::vector<std::string>& cells);
    const std::string& str() const { return body_; }

private:
    std::size_t columns_;
    std::string body_;
};

}  // namespace talbot::io
