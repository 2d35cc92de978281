// Acceptance gate: one line per criterion, pinned tolerances, exit 0 only
// if every criterion passes. argv[1] must point at the stmforge CLI binary
// (used by the determinism criterion).

#include "stmforge/image_io.hpp"
#include "stmforge/metrics.hpp"
#include "stmforge/models.hpp"
#include "stmforge/parallel.hpp"
#include "stmforge/render.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stmforge;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(4) << v;
    return out.str();
}

// ------------------------------------------------------------ criterion 1

Result patch_count() {
    std::vector<float> img(256 * 256);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(i % 113) / 112.0f;
    const auto patches = extract_patches(img, 256, 17, 4);
    return {patches.size() == 3600,
            "256x256, P=17, stride 4 -> " + std::to_string(patches.size()) + " patches"};
}

// ------------------------------------------------------------ criterion 2

Result shape_audit() {
    Network a = build_model(ModelSpec{Arch::CAE_A}, 1);
    const auto walk_a = a.shape_walk({17, 17, 1});
    const std::vector<std::vector<int>> expect_a = {
        {17, 17, 1},  {17, 17, 16}, {17, 17, 16}, {8, 8, 16}, {8, 8, 9},
        {8, 8, 9},    {4, 4, 9},    {144},        {10},       {144},
        {4, 4, 9},    {8, 8, 16},   {8, 8, 16},   {17, 17, 1},
    };
    if (walk_a != expect_a) return {false, "17x17 walk mismatch"};

    Network b = build_model(ModelSpec{Arch::CAE_B}, 1);
    const auto walk_b = b.shape_walk({16, 16, 1});
    const std::vector<std::pair<std::size_t, std::vector<int>>> expect_b = {
        {1, {16, 16, 32}}, {3, {8, 8, 32}},  {4, {8, 8, 24}},  {6, {4, 4, 24}},
        {7, {4, 4, 16}},   {9, {2, 2, 16}},  {10, {2, 2, 8}},  {12, {1, 1, 8}},
        {13, {8}},         {14, {10}},       {16, {2, 2, 24}}, {17, {4, 4, 24}},
        {19, {8, 8, 16}},  {23, {16, 16, 8}},
    };
    for (const auto& [idx, shape] : expect_b)
        if (walk_b.at(idx) != shape)
            return {false, "16x16 walk mismatch at node " + std::to_string(idx)};
    if (walk_b.back() != std::vector<int>{16, 16, 1}) return {false, "16x16 output mismatch"};
    return {true, "every node shape of both walks matches"};
}

// ------------------------------------------------------------ criterion 3

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = lo + rng.uniform() * (hi - lo);
    return t;
}

// Distinct, well-separated values so a +-h probe can never flip an argmax.
Tensor separated_tensor(std::vector<int> shape, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::vector<std::size_t> order(t.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);
    for (std::size_t i = 0; i < order.size(); ++i)
        t.data[order[i]] = -1.0 + 0.05 * static_cast<double>(i);
    return t;
}

void nudge_away_from(Tensor& t, double kink, double margin = 1e-2) {
    for (auto& v : t.data)
        if (std::abs(v - kink) < margin) v = kink + (v >= kink ? margin : -margin);
}

double weighted_sum(const Tensor& y, const Tensor& c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += y.data[i] * c.data[i];
    return sum;
}

double fd_worst(Network& net, const Tensor& x, std::uint64_t seed, bool training) {
    constexpr double kH = 1e-4;
    Rng rng(seed, "fd-loss");
    Tensor y = net.forward(x, training);
    Tensor c = rand_tensor(y.shape, rng);
    net.zero_grads();
    Tensor x_work = x;
    const Tensor dx = net.backward(c);
    std::vector<Tensor> analytic;
    for (Tensor* g : net.grads()) analytic.push_back(*g);

    double worst = 0.0;
    auto probe = [&](double* slot, double an) {
        const double old = *slot;
        *slot = old + kH;
        const double lp = weighted_sum(net.forward(x_work, training), c);
        *slot = old - kH;
        const double lm = weighted_sum(net.forward(x_work, training), c);
        *slot = old;
        const double fd = (lp - lm) / (2.0 * kH);
        worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-6));
    };
    const auto params = net.params();
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t i = 0; i < params[k]->size(); ++i)
            probe(&params[k]->data[i], analytic[k].data[i]);
    for (std::size_t i = 0; i < x_work.size(); ++i) probe(&x_work.data[i], dx.data[i]);
    return worst;
}

Result gradient_correctness() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed, "acc-fd");
        auto run = [&](std::unique_ptr<Layer> layer, Tensor x, bool training = false) {
            Network net;
            net.add(std::move(layer));
            net.init(seed);
            worst = std::max(worst, fd_worst(net, x, seed, training));
        };
        run(std::make_unique<Conv2D>(2, 3, 3, 1, 1), rand_tensor({2, 5, 5, 2}, rng));
        run(std::make_unique<TConv2D>(3, 2, 3, 2, 1, 1), rand_tensor({2, 4, 4, 3}, rng));
        run(std::make_unique<Dense>(6, 4), rand_tensor({3, 6}, rng));
        run(std::make_unique<MaxPool2D>(2, 2), separated_tensor({2, 4, 4, 2}, rng));
        {
            Tensor x = rand_tensor({2, 5, 5, 1}, rng);
            nudge_away_from(x, 0.0);
            run(std::make_unique<Activation>(ActKind::ReLU), x);
            run(std::make_unique<Activation>(ActKind::LeakyReLU, 0.01), x);
        }
        {
            Tensor x = rand_tensor({2, 5, 5, 1}, rng, -0.5, 1.5);
            nudge_away_from(x, 0.0);
            nudge_away_from(x, 1.0);
            run(std::make_unique<Activation>(ActKind::ClippedReLU, 0.0, 0.0, 1.0), x);
        }
        run(std::make_unique<BatchNorm>(3), rand_tensor({4, 2, 2, 3}, rng), true);
        run(std::make_unique<Flatten>(), rand_tensor({2, 3, 3, 2}, rng));
        run(std::make_unique<Reshape>(std::vector<int>{9, 2}), rand_tensor({2, 3, 3, 2}, rng));
    }
    if (worst >= 1e-4) return {false, "worst FD relative error " + fmt(worst)};

    double worst_adj = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const int cin = 1 + static_cast<int>(seed % 3);
        const int cout = 1 + static_cast<int>((seed / 3) % 4);
        const int k = (seed % 2) ? 3 : 5;
        const int s = 1 + static_cast<int>(seed % 2);
        const int p = static_cast<int>(seed % 2);
        const int h = 8 + static_cast<int>(seed % 4);
        Conv2D conv(cin, cout, k, s, p);
        Rng wrng(seed, "acc-adj");
        conv.init(wrng);
        const auto out = conv.output_shape({h, h, cin});
        TConv2D tconv(cout, cin, k, s, p, (h + 2 * p - k) % s);
        *tconv.params()[0] = *conv.params()[0];
        Rng rng(seed, "acc-adj-x");
        Tensor x = rand_tensor({1, h, h, cin}, rng);
        Tensor y = rand_tensor({1, out[0], out[1], cout}, rng);
        const double lhs = weighted_sum(conv.forward(x, false), y);
        const double rhs = weighted_sum(tconv.forward(y, false), x);
        worst_adj = std::max(worst_adj,
                             std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-12}));
    }
    if (worst_adj >= 1e-10) return {false, "adjoint identity error " + fmt(worst_adj)};
    return {true, "worst FD rel err " + fmt(worst) + ", adjoint err " + fmt(worst_adj)};
}

// ------------------------------------------------------------ criterion 4

// Ten noisy scans of one tilted simple-cubic surface: images share the
// plane orientation and differ by jitter and noise draws.
NoiseParams desk_noise() {
    NoiseParams noise;
    noise.gaussian_strength = 0.02;
    noise.poisson_strength = 0.5;
    noise.striation_strength = 0.01;
    noise.pos_jitter = 0.02;
    noise.brightness_jitter = 0.04;
    return noise;
}

DatasetSplit desk_dataset(std::uint64_t seed) {
    std::vector<SimImage> images;
    for (std::uint64_t i = 0; i < 10; ++i) {
        LatticeSpec spec;
        spec.lattice = LatticeType::SimpleCubic;
        spec.extent = 20;
        spec.seed = mix_seed(seed, i);
        spec.angles = {0.1, 0.3, 0.7};
        NoiseParams noise = desk_noise();
        RenderConfig rc;
        rc.psf_sigma = 4.0;
        images.push_back(simulate_image(spec, noise, rc, true, /*draw_angles=*/false));
    }
    return build_dataset(images, 17, 4, 300, 0.9, seed);
}

Result desk_scale_training() {
    set_threads(4);
    const DatasetSplit ds = desk_dataset(42);
    if (ds.train.size() != 2700 || ds.val.size() != 300)
        return {false, "unexpected split sizes"};
    const ModelSpec spec{Arch::CAE_A};

    TrainConfig short_run = config_by_name("baseline");
    short_run.epochs = 30;
    short_run.batch = 256;
    Network net = build_model(spec, 42);
    const TrainLog log = train(net, spec, ds, short_run, 42);
    const double mse30 = log.final_val_loss();
    const MetricRecord rec = evaluate(net, spec, ds.val, "sc", "desk");
    const bool ok30 = mse30 <= 0.05 && rec.avg_ssim >= 0.70;

    TrainConfig full = config_by_name("baseline");
    Network net100 = build_model(spec, 42);
    const TrainLog log100 = train(net100, spec, ds, full, 42);
    const double mse100 = log100.final_val_loss();
    const bool ok100 = mse100 <= 0.047;

    set_threads(1);
    return {ok30 && ok100, "30ep: val MSE " + fmt(mse30) + " (<=0.05), SSIM " +
                               fmt(rec.avg_ssim) + " (>=0.70); 100ep: val MSE " +
                               fmt(mse100) + " (<=0.047)"};
}

// ------------------------------------------------------------ criterion 5

Result overfit_capacity() {
    LatticeSpec lspec;
    lspec.lattice = LatticeType::SimpleCubic;
    lspec.extent = 20;
    lspec.seed = 7;
    NoiseParams noise = desk_noise();
    RenderConfig rc;
    const SimImage img = simulate_image(lspec, noise, rc);
    std::vector<float> pixels = normalize(img.pixels);
    const auto patches = extract_patches(pixels, img.width, 17, 4);

    const ModelSpec spec{Arch::CAE_A};
    Network net = build_model(spec, 7);
    const Tensor x = patches_to_tensor({patches[patches.size() / 2]}, 17);
    Adam adam;
    double best = 1e9;
    int steps = 0;
    for (int step = 0; step < 500; ++step) {
        net.zero_grads();
        const Tensor y = net.forward(x, true);
        const auto [loss, grad] = mse_loss(y, x);
        if (loss < best) best = loss;
        ++steps;
        if (best < 1e-3) break;
        net.backward(grad);
        adam.step(net.params(), net.grads(), 0.001);
    }
    return {best < 1e-3,
            "MSE " + fmt(best) + " after " + std::to_string(steps) + " steps (<1e-3 in 500)"};
}

// ------------------------------------------------------------ criterion 6

Result noise_laws() {
    SimImage img = SimImage::zeros();
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = 0.1f + 0.7f * static_cast<float>(i % 101) / 100.0f;
    NoiseParams zero;
    zero.seed = 3;
    if (gaussian_noise(img, zero).pixels != img.pixels) return {false, "gaussian not identity"};
    if (poisson_noise(img, zero).pixels != img.pixels) return {false, "poisson not identity"};
    if (striation_noise(img, zero).pixels != img.pixels) return {false, "striation not identity"};
    if (apply_noise_pipeline(img, zero).pixels != img.pixels)
        return {false, "pipeline not identity"};

    const double n = 256.0 * 256.0;
    SimImage gray = SimImage::zeros();
    for (auto& p : gray.pixels) p = 0.5f;

    NoiseParams gp;
    gp.gaussian_strength = 0.05;
    gp.seed = 11;
    const SimImage g = gaussian_noise(gray, gp);
    double sum = 0.0, sq = 0.0;
    for (float v : g.pixels) { sum += v; sq += v * v; }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    if (std::abs(mean - 0.5) > 3.0 * 0.05 / std::sqrt(n))
        return {false, "gaussian mean off: " + fmt(mean)};
    // 3-sigma band of the sample s.d. is approx sigma/sqrt(2n).
    if (std::abs(sd - 0.05) > 3.0 * 0.05 / std::sqrt(2.0 * n))
        return {false, "gaussian sd off: " + fmt(sd)};

    NoiseParams pp;
    pp.poisson_strength = 2.55; // S = 100
    pp.seed = 13;
    const SimImage p = poisson_noise(gray, pp);
    sum = 0.0;
    sq = 0.0;
    for (float v : p.pixels) { sum += v; sq += v * v; }
    const double pmean = sum / n;
    const double pvar = sq / n - pmean * pmean;
    const double expect_var = 0.5 / 100.0; // lambda/S^2 with lambda = 0.5*S
    if (std::abs(pmean - 0.5) > 3.0 * std::sqrt(expect_var / n))
        return {false, "poisson mean off: " + fmt(pmean)};
    // Var of the sample variance of Poisson/S counts: (lambda + 2 lambda^2)/(n S^4).
    const double lambda = 0.5 * 100.0;
    const double var_of_var = (lambda + 2.0 * lambda * lambda) / (n * 1e8);
    if (std::abs(pvar - expect_var) > 3.0 * std::sqrt(var_of_var))
        return {false, "poisson variance off: " + fmt(pvar)};
    return {true, "identities hold; gaussian mean " + fmt(mean) + ", poisson var " + fmt(pvar)};
}

// ------------------------------------------------------------ criterion 7

Result geometry_suite() {
    OrientationAngles flat{0.0, 0.4, 0.1};
    for (const auto& s : hex1_grid(1.0, 4)) {
        AtomSite site{s.x, s.y, tilt_height(s.x, s.y, flat)};
        if (project_to_plane(site, flat).dist > 1e-12) return {false, "alpha=0 dist nonzero"};
    }

    Rng rng(17);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform() * 20 - 10, y = rng.uniform() * 20 - 10;
        const double phi = rng.uniform();
        const auto [u, v] = rotate2d(x, y, phi);
        if (std::abs(std::hypot(u, v) - std::hypot(x, y)) > 1e-12 * std::max(1.0, std::hypot(x, y)))
            return {false, "rotate2d norm drift"};
    }

    for (int i = 0; i < 500; ++i) {
        OrientationAngles a{rng.uniform(), rng.uniform(), rng.uniform()};
        const auto nv = plane_normal(a);
        const double x1 = rng.uniform() * 10 - 5, y1 = rng.uniform() * 10 - 5;
        const double x2 = rng.uniform() * 10 - 5, y2 = rng.uniform() * 10 - 5;
        const double dz = tilt_height(x2, y2, a) - tilt_height(x1, y1, a);
        if (std::abs(nv[0] * (x2 - x1) + nv[1] * (y2 - y1) + nv[2] * dz) >
            1e-12 * (1.0 + std::abs(dz)))
            return {false, "plane normal not orthogonal"};
    }

    OrientationAngles angles{0.5, 0.0, 0.0};
    AtomSite site{1.0, 0.0, tilt_height(1.0, 0.0, angles)};
    const auto proj = projection_vector(site, angles);
    const double dist = project_to_plane(site, angles).dist;
    const bool worked = std::abs(proj[0] + 0.25) < 1e-5 && std::abs(proj[1]) < 1e-5 &&
                        std::abs(proj[2] - 0.43301) < 1e-5 && std::abs(dist - 0.5) < 1e-5;
    if (!worked)
        return {false, "worked example proj (" + fmt(proj[0]) + "," + fmt(proj[1]) + "," +
                           fmt(proj[2]) + "), dist " + fmt(dist)};
    return {true, "proj (-0.25, 0, 0.43301), dist 0.5 reproduced"};
}

// ------------------------------------------------------------ criterion 8

int mirror_idx(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

// Independent SSIM path: centered moments instead of raw-moment algebra.
double ssim_ref(const Patch& pa, const Patch& pb) {
    const int n = pa.size;
    float lo = pa.values[0], hi = pa.values[0];
    for (float v : pa.values) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (float v : pb.values) { lo = std::min(lo, v); hi = std::max(hi, v); }
    if (hi <= lo) return 1.0;
    std::vector<double> a(pa.values.size()), b(pb.values.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = (pa.values[i] - static_cast<double>(lo)) / (static_cast<double>(hi) - lo);
        b[i] = (pb.values[i] - static_cast<double>(lo)) / (static_cast<double>(hi) - lo);
    }
    const int win = 11;
    std::vector<double> w(static_cast<std::size_t>(win) * win);
    double wsum = 0.0;
    for (int r = 0; r < win; ++r)
        for (int c = 0; c < win; ++c) {
            const double d2 = (r - 5.0) * (r - 5.0) + (c - 5.0) * (c - 5.0);
            w[static_cast<std::size_t>(r) * win + c] = std::exp(-d2 / 4.5);
            wsum += w[static_cast<std::size_t>(r) * win + c];
        }
    for (auto& v : w) v /= wsum;
    double total = 0.0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            double ma = 0.0, mb = 0.0;
            for (int kr = 0; kr < win; ++kr)
                for (int kc = 0; kc < win; ++kc) {
                    const int rr = mirror_idx(r + kr - 5, n), cc = mirror_idx(c + kc - 5, n);
                    const double weight = w[static_cast<std::size_t>(kr) * win + kc];
                    ma += weight * a[static_cast<std::size_t>(rr) * n + cc];
                    mb += weight * b[static_cast<std::size_t>(rr) * n + cc];
                }
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (int kr = 0; kr < win; ++kr)
                for (int kc = 0; kc < win; ++kc) {
                    const int rr = mirror_idx(r + kr - 5, n), cc = mirror_idx(c + kc - 5, n);
                    const double weight = w[static_cast<std::size_t>(kr) * win + kc];
                    const double da = a[static_cast<std::size_t>(rr) * n + cc] - ma;
                    const double db = b[static_cast<std::size_t>(rr) * n + cc] - mb;
                    va += weight * da * da;
                    vb += weight * db * db;
                    cov += weight * da * db;
                }
            total += ((2.0 * ma * mb + 1e-4) * (2.0 * cov + 9e-4)) /
                     ((ma * ma + mb * mb + 1e-4) * (va + vb + 9e-4));
        }
    return total / static_cast<double>(n * n);
}

Result ssim_oracle() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed, "ssim-pairs");
        Patch a, b;
        a.size = b.size = 16;
        a.values.resize(256);
        b.values.resize(256);
        for (auto& v : a.values) v = static_cast<float>(rng.uniform());
        for (auto& v : b.values) v = static_cast<float>(rng.uniform());
        worst = std::max(worst, std::abs(ssim_metric(a, b) - ssim_ref(a, b)));
        if (ssim_metric(a, a) != 1.0) return {false, "ssim(a,a) != 1 exactly"};
    }
    return {worst < 1e-6, "max |ssim - reference| = " + fmt(worst) + " over 100 pairs"};
}

// ------------------------------------------------------------ criterion 9

int run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// train_log.csv carries wall-clock seconds in the last column.
std::string strip_last_column(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.rfind(',');
        out << (pos == std::string::npos ? line : line.substr(0, pos)) << "\n";
    }
    return out.str();
}

// Manifests carry wall-clock timing and absolute output locations.
json scrub_manifest(const fs::path& p) {
    json j = json::parse(slurp(p));
    j.erase("wall_clock_seconds");
    if (j.contains("config") && j["config"].contains("out")) j["config"].erase("out");
    if (j.contains("artifacts")) {
        json names = json::array();
        for (const auto& a : j["artifacts"])
            names.push_back(fs::path(a.get<std::string>()).filename().string());
        j["artifacts"] = names;
    }
    return j;
}

bool trees_match(const fs::path& a, const fs::path& b, std::string& why) {
    std::map<std::string, fs::path> fa, fb;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) fa[fs::relative(e.path(), a).string()] = e.path();
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) fb[fs::relative(e.path(), b).string()] = e.path();
    if (fa.size() != fb.size()) {
        why = "artifact count differs";
        return false;
    }
    for (const auto& [rel, pa] : fa) {
        const auto it = fb.find(rel);
        if (it == fb.end()) {
            why = "missing artifact " + rel;
            return false;
        }
        const std::string name = fs::path(rel).filename().string();
        bool same;
        if (name == "train_log.csv") {
            same = strip_last_column(slurp(pa)) == strip_last_column(slurp(it->second));
        } else if (name.rfind("manifest_", 0) == 0) {
            same = scrub_manifest(pa) == scrub_manifest(it->second);
        } else {
            same = slurp(pa) == slurp(it->second);
        }
        if (!same) {
            why = "artifact differs: " + rel;
            return false;
        }
    }
    return true;
}

Result cli_determinism(const std::string& cli) {
    const fs::path root = fs::temp_directory_path() / "stmforge_acceptance_cli";
    fs::remove_all(root);
    const fs::path a = root / "a", b = root / "b";
    fs::create_directories(a);
    fs::create_directories(b);

    auto stage = [&](const fs::path& base) -> bool {
        const std::string img = (base / "img").string();
        const std::string data = (base / "data").string();
        const std::string run = (base / "run").string();
        const std::string ev = (base / "eval").string();
        if (run_cli(cli, "simulate --lattice hex1 --count 2 --seed 11 --threads 1 --out " + img))
            return false;
        // Replays read inputs from tree A so both runs see identical inputs.
        const std::string src = (a / "img").string();
        if (run_cli(cli, "dataset --in " + src +
                             " --patch-size 16 --stride 8 --patches-per-image 200 "
                             "--seed 11 --threads 1 --out " + data))
            return false;
        if (run_cli(cli, "train --archive " + (a / "data").string() +
                             " --arch cae-b --epochs 2 --batch 32 --lr 0.001 --seed 11 "
                             "--threads 1 --out " + run))
            return false;
        if (run_cli(cli, "eval --archive " + (a / "data").string() + " --checkpoint " +
                             (a / "run" / "model.ckpt").string() +
                             " --arch cae-b --lattice-label hex1 --config-label unit "
                             "--seed 11 --threads 1 --out " + ev))
            return false;
        return true;
    };
    if (!stage(a)) return {false, "first CLI pass failed"};

    // Second pass replays each manifest with only the output dir overridden.
    auto replay = [&](const std::string& sub, const fs::path& manifest,
                      const fs::path& out) {
        return run_cli(cli, sub + " --config " + manifest.string() + " --threads 1 --out " +
                                out.string()) == 0;
    };
    if (!replay("simulate", a / "img" / "manifest_simulate.json", b / "img"))
        return {false, "simulate replay failed"};
    if (!replay("dataset", a / "data" / "manifest_dataset.json", b / "data"))
        return {false, "dataset replay failed"};
    if (!replay("train", a / "run" / "manifest_train.json", b / "run"))
        return {false, "train replay failed"};
    if (!replay("eval", a / "eval" / "manifest_eval.json", b / "eval"))
        return {false, "eval replay failed"};

    std::string why;
    const bool ok = trees_match(a, b, why);
    if (ok) fs::remove_all(root);
    return {ok, ok ? "all artifacts byte-identical (timing fields excepted)" : why};
}

// ----------------------------------------------------------- criterion 10

Result pca_properties() {
    Rng rng(29);
    std::vector<std::vector<float>> latents;
    for (int i = 0; i < 80; ++i) {
        std::vector<float> v(10);
        for (int d = 0; d < 10; ++d)
            v[static_cast<std::size_t>(d)] =
                static_cast<float>((rng.uniform() * 2.0 - 1.0) * (10 - d));
        latents.push_back(std::move(v));
    }
    const PcaProjection pca = pca_project(latents);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int d = 0; d < 10; ++d)
                dot += pca.components[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] *
                       pca.components[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)];
            if (std::abs(dot - (i == j ? 1.0 : 0.0)) >= 1e-10)
                return {false, "components not orthonormal"};
        }
    if (!(pca.explained_variance[0] >= pca.explained_variance[1] &&
          pca.explained_variance[1] >= pca.explained_variance[2]))
        return {false, "explained variance not descending"};

    std::vector<std::vector<float>> rank1;
    for (int i = 0; i < 12; ++i) {
        std::vector<float> v(10);
        for (int d = 0; d < 10; ++d)
            v[static_cast<std::size_t>(d)] = static_cast<float>((i - 5.5) * (d % 3 - 1));
        rank1.push_back(std::move(v));
    }
    const PcaProjection collapsed = pca_project(rank1);
    if (!(collapsed.explained_variance[0] > 1e-6 && collapsed.explained_variance[1] < 1e-10 &&
          collapsed.explained_variance[2] < 1e-10))
        return {false, "rank-1 data did not collapse"};
    return {true, "orthonormal, descending, rank-1 collapse confirmed"};
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-stmforge-cli>\n";
        return 2;
    }
    const std::string cli = argv[1];
    set_threads(1);

    struct Entry {
        int id;
        const char* label;
        double limit_s;
        std::function<Result()> run;
    };
    const std::vector<Entry> entries = {
        {1, "patch-count reproduction", 1.0, patch_count},
        {2, "architecture shape audit", 1.0, shape_audit},
        {3, "gradient correctness", 60.0, gradient_correctness},
        {4, "desk-scale training", 900.0, desk_scale_training},
        {5, "overfit capacity", 30.0, overfit_capacity},
        {6, "noise identity laws", 60.0, noise_laws},
        {7, "projection geometry", 60.0, geometry_suite},
        {8, "ssim oracle equivalence", 60.0, ssim_oracle},
        {9, "cli determinism", 600.0, [&] { return cli_determinism(cli); }},
        {10, "pca properties", 60.0, pca_properties},
    };

    bool all_pass = true;
    for (const auto& e : entries) {
        const double t0 = now_seconds();
        Result r;
        try {
            r = e.run();
        } catch (const std::exception& ex) {
            r = {false, std::string("exception: ") + ex.what()};
        }
        const double dt = now_seconds() - t0;
        const bool in_time = dt < e.limit_s;
        const bool pass = r.pass && in_time;
        all_pass = all_pass && pass;
        std::cout << "criterion " << std::setw(2) << e.id << " [" << e.label
                  << "]: " << (pass ? "PASS" : "FAIL") << " (" << fmt(dt) << " s) - "
                  << r.detail << (in_time ? "" : " [over time limit]") << "\n"
                  << std::flush;
    }
    std::cout << (all_pass ? "acceptance: ALL PASS" : "acceptance: FAILURES PRESENT") << "\n";
    return all_pass ? 0 : 1;
}
