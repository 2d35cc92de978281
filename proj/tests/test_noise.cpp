#include "stmforge/noise.hpp"

#include "stmforge/image.hpp"
#include "stmforge/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace stmforge;

namespace {

SimImage gray(float level) {
    SimImage img = SimImage::zeros();
    for (auto& p : img.pixels) p = level;
    return img;
}

} // namespace

TEST_CASE("zero-strength parameters are bit identities") {
    SimImage img = gray(0.25f);
    for (int i = 0; i < 256; ++i) img.pixels[static_cast<std::size_t>(i * 251)] = 0.9f;
    NoiseParams zero;
    zero.seed = 7;
    CHECK(gaussian_noise(img, zero).pixels == img.pixels);
    CHECK(poisson_noise(img, zero).pixels == img.pixels);
    CHECK(striation_noise(img, zero).pixels == img.pixels);
    CHECK(apply_noise_pipeline(img, zero).pixels == img.pixels);
    CHECK(jitter_atoms({{1.0, 2.0, 0.1, 1.0}}, zero)[0].u == 1.0);
}

TEST_CASE("gaussian noise statistics at n=256^2") {
    NoiseParams p;
    p.gaussian_strength = 0.05;
    p.seed = 21;
    const SimImage out = gaussian_noise(gray(0.5f), p);
    double sum = 0.0, sq = 0.0;
    for (float v : out.pixels) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(out.pixels.size());
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    // 3 sigma on the mean of n samples: 3 * 0.05 / 256
    CHECK(std::abs(mean - 0.5) < 3.0 * 0.05 / 256.0);
    CHECK(sd == doctest::Approx(0.05).epsilon(0.02));
}

TEST_CASE("poisson noise") {
    NoiseParams p;
    p.poisson_strength = 2.55; // S = 100
    p.seed = 5;

    SUBCASE("zero pixels stay zero") {
        const SimImage out = poisson_noise(gray(0.0f), p);
        for (float v : out.pixels) CHECK(v == 0.0f);
    }
    SUBCASE("variance follows mean/S") {
        const SimImage out = poisson_noise(gray(0.5f), p);
        double sum = 0.0, sq = 0.0;
        for (float v : out.pixels) {
            sum += v;
            sq += v * v;
        }
        const double n = static_cast<double>(out.pixels.size());
        const double mean = sum / n;
        const double var = sq / n - mean * mean;
        // Var = pixel / S = 0.005; 3-sigma band for the sample variance.
        const double expected = 0.5 / 100.0;
        const double sd_var = expected * std::sqrt(2.0 / n) * 3.0 * 3.0;
        CHECK(std::abs(mean - 0.5) < 3.0 * std::sqrt(expected / n));
        CHECK(std::abs(var - expected) < sd_var + 1e-4);
    }
}

TEST_CASE("striation noise") {
    NoiseParams p;
    p.striation_strength = 0.1;
    p.seed = 33;

    SUBCASE("rows shift uniformly") {
        SimImage img = gray(0.5f);
        const SimImage out = striation_noise(img, p);
        for (int r = 0; r < out.height; ++r) {
            const float first = out.at(r, 0);
            for (int c = 1; c < out.width; ++c) CHECK(out.at(r, c) == first);
        }
    }
    SUBCASE("adjacent rows are correlated above 0.5") {
        NoiseParams unit = p;
        unit.striation_strength = 1.0;
        const auto offsets = striation_offsets(4096, unit);
        double m = 0.0;
        for (double o : offsets) m += o;
        m /= static_cast<double>(offsets.size());
        double c0 = 0.0, c1 = 0.0;
        for (std::size_t r = 0; r + 1 < offsets.size(); ++r) {
            c0 += (offsets[r] - m) * (offsets[r] - m);
            c1 += (offsets[r] - m) * (offsets[r + 1] - m);
        }
        CHECK(c1 / c0 > 0.5);
    }
}

TEST_CASE("jitter statistics at n=1e4") {
    NoiseParams p;
    p.pos_jitter = 0.1;
    p.brightness_jitter = 0.5;
    p.seed = 9;
    std::vector<ProjectedAtom> atoms(10000, ProjectedAtom{1.0, -2.0, 0.2, 1.0});
    const auto out = jitter_atoms(atoms, p);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double du = out[i].u - atoms[i].u;
        sum += du;
        sq += du * du;
        CHECK(out[i].brightness >= 0.0); // clamp keeps multipliers non-negative
    }
    const double n = static_cast<double>(out.size());
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    CHECK(std::abs(sd - 0.1) < 0.01);
}

TEST_CASE("pipeline order and determinism") {
    SimImage img = gray(0.4f);
    NoiseParams p;
    p.gaussian_strength = 0.05;
    p.poisson_strength = 2.0;
    p.striation_strength = 0.05;
    p.seed = 17;

    const auto a = apply_noise_pipeline(img, p);
    const auto b = apply_noise_pipeline(img, p);
    CHECK(a.pixels == b.pixels);

    // Permuted stage order changes the result on the same seed.
    const auto permuted = poisson_noise(striation_noise(gaussian_noise(img, p), p), p);
    CHECK(a.pixels != permuted.pixels);

    for (float v : a.pixels) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}
