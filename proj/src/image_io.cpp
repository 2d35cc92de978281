#include "stmforge/image_io.hpp"

#include "stmforge/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace stmforge {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path.string());
    return in;
}

static_assert(std::endian::native == std::endian::little,
              "on-disk float format assumes a little-endian host");

} // namespace

void write_pgm(const SimImage& img, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const float v = std::clamp(img.at(r, c), 0.0f, 1.0f);
            row[static_cast<std::size_t>(c)] =
                static_cast<unsigned char>(std::lround(v * 255.0f));
        }
        out.write(reinterpret_cast<const char*>(row.data()), img.width);
    }
    if (!out) throw DataError("short write: " + path.string());
}

SimImage read_pgm(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0)
        throw DataError("not an 8-bit binary PGM: " + path.string());
    in.get(); // single whitespace after the header
    SimImage img = SimImage::zeros(w, h);
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw DataError("truncated PGM: " + path.string());
    for (std::size_t i = 0; i < buf.size(); ++i)
        img.pixels[i] = static_cast<float>(buf[i]) / 255.0f;
    return img;
}

void write_f32(const SimImage& img, const std::filesystem::path& path) {
    auto out = open_out(path);
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size() * sizeof(float)));
    if (!out) throw DataError("short write: " + path.string());
}

std::vector<float> read_f32(const std::filesystem::path& path) {
    auto in = open_in(path);
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (bytes % sizeof(float) != 0) throw DataError("not a float array: " + path.string());
    std::vector<float> values(bytes / sizeof(float));
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DataError("truncated f32 file: " + path.string());
    return values;
}

void write_sidecar(const SimImage& img, const std::filesystem::path& path) {
    const auto& m = img.meta;
    nlohmann::json j = {
        {"lattice", lattice_name(m.spec.lattice)},
        {"a", m.spec.a},
        {"extent", m.spec.extent},
        {"seed", m.spec.seed},
        {"angles", {{"alpha_raw", m.spec.angles.alpha_raw},
                    {"theta_raw", m.spec.angles.theta_raw},
                    {"phi_raw", m.spec.angles.phi_raw}}},
        {"noise", {{"gaussian_strength", m.noise.gaussian_strength},
                   {"poisson_strength", m.noise.poisson_strength},
                   {"striation_strength", m.noise.striation_strength},
                   {"pos_jitter", m.noise.pos_jitter},
                   {"brightness_jitter", m.noise.brightness_jitter},
                   {"seed", m.noise.seed}}},
        {"psf_sigma", m.psf_sigma},
        {"brightness_falloff", m.brightness_falloff},
        {"use_floor", m.use_floor},
        {"empty_atoms", m.empty_atoms},
    };
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

ImageMeta read_sidecar(const std::filesystem::path& path) {
    auto in = open_in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad sidecar " + path.string() + ": " + e.what());
    }
    ImageMeta m;
    m.spec.lattice = lattice_from_name(j.at("lattice").get<std::string>());
    m.spec.a = j.at("a").get<double>();
    m.spec.extent = j.at("extent").get<int>();
    m.spec.seed = j.at("seed").get<std::uint64_t>();
    const auto& ang = j.at("angles");
    m.spec.angles.alpha_raw = ang.at("alpha_raw").get<double>();
    m.spec.angles.theta_raw = ang.at("theta_raw").get<double>();
    m.spec.angles.phi_raw = ang.at("phi_raw").get<double>();
    const auto& n = j.at("noise");
    m.noise.gaussian_strength = n.at("gaussian_strength").get<double>();
    m.noise.poisson_strength = n.at("poisson_strength").get<double>();
    m.noise.striation_strength = n.at("striation_strength").get<double>();
    m.noise.pos_jitter = n.at("pos_jitter").get<double>();
    m.noise.brightness_jitter = n.at("brightness_jitter").get<double>();
    m.noise.seed = n.at("seed").get<std::uint64_t>();
    m.psf_sigma = j.at("psf_sigma").get<double>();
    m.brightness_falloff = j.at("brightness_falloff").get<double>();
    m.use_floor = j.at("use_floor").get<bool>();
    m.empty_atoms = j.at("empty_atoms").get<bool>();
    return m;
}

} // namespace stmforge
