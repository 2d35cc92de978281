#include "stmforge/metrics.hpp"

#include "stmforge/errors.hpp"
#include "stmforge/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace stmforge {

double mse_metric(const Patch& a, const Patch& b) {
    if (a.size != b.size) throw DataError("mse_metric: patch size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = static_cast<double>(a.values[i]) - b.values[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.values.size());
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;

const std::array<double, kWin * kWin>& gaussian_window() {
    static const auto window = [] {
        std::array<double, kWin * kWin> w{};
        double sum = 0.0;
        for (int r = 0; r < kWin; ++r) {
            for (int c = 0; c < kWin; ++c) {
                const double dr = r - kWin / 2;
                const double dc = c - kWin / 2;
                w[static_cast<std::size_t>(r) * kWin + c] =
                    std::exp(-(dr * dr + dc * dc) / (2.0 * kSigma * kSigma));
                sum += w[static_cast<std::size_t>(r) * kWin + c];
            }
        }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return window;
}

// Mirror without repeating the edge sample.
int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

} // namespace

double ssim_metric(const Patch& a, const Patch& b) {
    if (a.size != b.size) throw DataError("ssim_metric: patch size mismatch");
    const int n = a.size;

    float lo = a.values[0], hi = a.values[0];
    for (float v : a.values) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (float v : b.values) { lo = std::min(lo, v); hi = std::max(hi, v); }
    if (hi <= lo) {
        // Both constant; equal iff the shared range collapsed.
        return 1.0;
    }
    const double span = static_cast<double>(hi) - lo;
    auto rescaled = [&](const Patch& p) {
        std::vector<double> out(p.values.size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (static_cast<double>(p.values[i]) - lo) / span;
        return out;
    };
    const auto av = rescaled(a);
    const auto bv = rescaled(b);

    constexpr double kC1 = 0.01 * 0.01; // (0.01 L)^2, L = 1
    constexpr double kC2 = 0.03 * 0.03;
    const auto& w = gaussian_window();

    double total = 0.0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
            for (int kr = 0; kr < kWin; ++kr) {
                const int rr = reflect(r + kr - kWin / 2, n);
                for (int kc = 0; kc < kWin; ++kc) {
                    const int cc = reflect(c + kc - kWin / 2, n);
                    const double weight = w[static_cast<std::size_t>(kr) * kWin + kc];
                    const double va = av[static_cast<std::size_t>(rr) * n + cc];
                    const double vb = bv[static_cast<std::size_t>(rr) * n + cc];
                    mu_a += weight * va;
                    mu_b += weight * vb;
                    aa += weight * va * va;
                    bb += weight * vb * vb;
                    ab += weight * va * vb;
                }
            }
            const double var_a = aa - mu_a * mu_a;
            const double var_b = bb - mu_b * mu_b;
            const double cov = ab - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
            const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
            total += num / den;
        }
    }
    return total / static_cast<double>(n * n);
}

MetricRecord evaluate(Network& net, const ModelSpec& spec,
                      const std::vector<Patch>& patches, const std::string& lattice,
                      const std::string& config_name) {
    if (patches.empty()) throw DataError("evaluate: empty dataset");
    std::vector<double> mses(patches.size()), ssims(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const Patch rec = reconstruct(net, spec, patches[i]);
        mses[i] = mse_metric(patches[i], rec);
        ssims[i] = ssim_metric(patches[i], rec);
    }
    MetricRecord record;
    record.lattice = lattice;
    record.config = config_name;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        record.avg_mse += mses[i];
        record.avg_ssim += ssims[i];
    }
    record.avg_mse /= static_cast<double>(patches.size());
    record.avg_ssim /= static_cast<double>(patches.size());
    return record;
}

namespace {

// Cyclic Jacobi rotation for a symmetric matrix; plenty for 10x10.
void jacobi_eigen(std::array<std::array<double, 10>, 10>& m,
                  std::array<std::array<double, 10>, 10>& vectors,
                  std::array<double, 10>& values) {
    constexpr int kDim = 10;
    for (int i = 0; i < kDim; ++i)
        for (int j = 0; j < kDim; ++j) vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = i == j ? 1.0 : 0.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < kDim; ++p)
            for (int q = p + 1; q < kDim; ++q) off += m[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] * m[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
        if (off < 1e-24) break;
        for (int p = 0; p < kDim; ++p) {
            for (int q = p + 1; q < kDim; ++q) {
                const double apq = m[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
                if (std::abs(apq) < 1e-30) continue;
                const double theta = (m[static_cast<std::size_t>(q)][static_cast<std::size_t>(q)] - m[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < kDim; ++k) {
                    const double mkp = m[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)];
                    const double mkq = m[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)];
                    m[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)] = c * mkp - s * mkq;
                    m[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)] = s * mkp + c * mkq;
                }
                for (int k = 0; k < kDim; ++k) {
                    const double mpk = m[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
                    const double mqk = m[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)];
                    m[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)] = c * mpk - s * mqk;
                    m[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)] = s * mpk + c * mqk;
                }
                for (int k = 0; k < kDim; ++k) {
                    const double vkp = vectors[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)];
                    const double vkq = vectors[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)];
                    vectors[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)] = c * vkp - s * vkq;
                    vectors[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    for (int i = 0; i < kDim; ++i) values[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
}

} // namespace

PcaProjection pca_project(const std::vector<std::vector<float>>& latents) {
    constexpr int kDim = 10;
    if (latents.size() < 4) throw DataError("pca_project needs at least 4 vectors");
    for (const auto& v : latents)
        if (v.size() != kDim) throw DataError("pca_project expects 10-dim latents");

    const double n = static_cast<double>(latents.size());
    std::array<double, kDim> mean{};
    for (const auto& v : latents)
        for (int d = 0; d < kDim; ++d) mean[static_cast<std::size_t>(d)] += v[static_cast<std::size_t>(d)];
    for (auto& m : mean) m /= n;

    std::array<std::array<double, kDim>, kDim> cov{};
    for (const auto& v : latents) {
        for (int i = 0; i < kDim; ++i) {
            const double di = v[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)];
            for (int j = 0; j < kDim; ++j)
                cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += di * (v[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)]);
        }
    }
    for (auto& row : cov)
        for (auto& c : row) c /= n;

    std::array<std::array<double, kDim>, kDim> vectors{};
    std::array<double, kDim> values{};
    auto work = cov;
    jacobi_eigen(work, vectors, values);

    std::array<int, kDim> order{};
    for (int i = 0; i < kDim; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)]; });

    PcaProjection out;
    for (int k = 0; k < 3; ++k) {
        const int idx = order[static_cast<std::size_t>(k)];
        out.explained_variance[static_cast<std::size_t>(k)] = std::max(0.0, values[static_cast<std::size_t>(idx)]);
        for (int d = 0; d < kDim; ++d)
            out.components[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] = vectors[static_cast<std::size_t>(d)][static_cast<std::size_t>(idx)];
    }
    out.points.reserve(latents.size());
    for (const auto& v : latents) {
        std::array<double, 3> p{};
        for (int k = 0; k < 3; ++k) {
            double dot = 0.0;
            for (int d = 0; d < kDim; ++d)
                dot += (v[static_cast<std::size_t>(d)] - mean[static_cast<std::size_t>(d)]) * out.components[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)];
            p[static_cast<std::size_t>(k)] = dot;
        }
        out.points.push_back(p);
    }
    return out;
}

} // namespace stmforge
