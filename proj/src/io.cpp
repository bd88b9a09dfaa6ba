#include "talbot/io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "talbot/errors.hpp"

namespace talbot::io {

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        const auto got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    return hash;
}

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

void write_raster(const optics::ScalarField& field, const std::filesystem::path& base_path) {
    const auto intensity = field.intensity();
    std::vector<float> pixels(intensity.begin(), intensity.end());

    std::filesystem::path raster = base_path;
    raster += ".f32";
    std::ofstream out(raster, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + raster.string() + " for writing");
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size() * sizeof(float)));
    if (!out) throw IoError("write failed for " + raster.string());

    nlohmann::json meta{{"nx", field.grid.nx},
                        {"ny", field.grid.ny},
                        {"dx_m", field.grid.dx_m},
                        {"dy_m", field.grid.dy_m},
                        {"z_m", field.z_m}};
    std::filesystem::path sidecar = base_path;
    sidecar += ".json";
    write_text_file(sidecar, meta.dump(2) + "\n");
}

std::pair<RasterMeta, std::vector<float>> read_raster(const std::filesystem::path& base_path) {
    std::filesystem::path sidecar = base_path;
    sidecar += ".json";
    const auto meta_json = nlohmann::json::parse(read_text_file(sidecar));
    RasterMeta meta;
    meta.nx = meta_json.at("nx").get<int>();
    meta.ny = meta_json.at("ny").get<int>();
    meta.dx_m = meta_json.at("dx_m").get<double>();
    meta.dy_m = meta_json.at("dy_m").get<double>();
    meta.z_m = meta_json.at("z_m").get<double>();

    std::filesystem::path raster = base_path;
    raster += ".f32";
    std::ifstream in(raster, std::ios::binary);
    if (!in) throw IoError("cannot open " + raster.string());
    std::vector<float> pixels(static_cast<std::size_t>(meta.nx) * meta.ny);
    in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(pixels.size() * sizeof(float)))
        throw IoError("raster " + raster.string() + " is shorter than its sidecar promises");
    return {meta, std::move(pixels)};
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) body_ += ',';
        body_ += header[i];
    }
    body_ += '\n';
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::invalid_argument("CSV row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) body_ += ',';
        body_ += cells[i];
    }
    body_ += '\n';
}

}  // namespace talbot::io
