#include "stmforge/patches.hpp"

#include "stmforge/errors.hpp"
#include "stmforge/rng.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

namespace stmforge {

std::vector<float> normalize(const std::vector<float>& values) {
    if (values.empty()) throw DataError("normalize: empty image");
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const float mn = *mn_it, mx = *mx_it;
    if (mx <= mn) throw DataError("normalize: constant image has no dynamic range");
    std::vector<float> out(values.size());
    const float span = mx - mn;
    const float mid = mx + mn;
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = (2.0f * values[i] - mid) / span;
    return out;
}

std::vector<Patch> extract_patches(const std::vector<float>& img, int img_size,
                                   int patch_size, int stride, int image_id) {
    if (patch_size < 1 || patch_size > img_size)
        throw ConfigError("patch size must be in [1, image size]");
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (img.size() != static_cast<std::size_t>(img_size) * img_size)
        throw DataError("image buffer does not match declared size");

    const int per_axis = (img_size - patch_size) / stride + 1;
    std::vector<Patch> patches;
    patches.reserve(static_cast<std::size_t>(per_axis) * per_axis);
    for (int pr = 0; pr < per_axis; ++pr) {
        for (int pc = 0; pc < per_axis; ++pc) {
            Patch p;
            p.size = patch_size;
            p.source = {image_id, pr * stride, pc * stride};
            p.values.resize(static_cast<std::size_t>(patch_size) * patch_size);
            for (int r = 0; r < patch_size; ++r) {
                const float* src =
                    img.data() + static_cast<std::size_t>(pr * stride + r) * img_size + pc * stride;
                std::copy_n(src, patch_size,
                            p.values.data() + static_cast<std::size_t>(r) * patch_size);
            }
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

namespace {

Patch rotate90(const Patch& p) {
    Patch out = p;
    const int n = p.size;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            out.values[static_cast<std::size_t>(c) * n + (n - 1 - r)] =
                p.values[static_cast<std::size_t>(r) * n + c];
    return out;
}

Patch flip_h(const Patch& p) {
    Patch out = p;
    const int n = p.size;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            out.values[static_cast<std::size_t>(r) * n + (n - 1 - c)] =
                p.values[static_cast<std::size_t>(r) * n + c];
    return out;
}

Patch flip_v(const Patch& p) {
    Patch out = p;
    const int n = p.size;
    for (int r = 0; r < n; ++r)
        std::copy_n(p.values.data() + static_cast<std::size_t>(r) * n, n,
                    out.values.data() + static_cast<std::size_t>(n - 1 - r) * n);
    return out;
}

} // namespace

Patch augment(const Patch& patch, std::uint64_t seed) {
    Rng rng(seed, "augment");
    const int quarter_turns = static_cast<int>(rng.uniform_int(4));
    const bool h = rng.uniform() < 0.5;
    const bool v = rng.uniform() < 0.5;
    Patch out = patch;
    for (int t = 0; t < quarter_turns; ++t) out = rotate90(out);
    if (h) out = flip_h(out);
    if (v) out = flip_v(out);
    return out;
}

DatasetSplit build_dataset(const std::vector<SimImage>& images, int patch_size,
                           int stride, int patches_per_image, double split_fraction,
                           std::uint64_t seed) {
    if (split_fraction <= 0.0 || split_fraction >= 1.0)
        throw ConfigError("split fraction must be in (0,1)");
    std::vector<Patch> pool;
    int image_id = 0;
    for (const auto& img : images) {
        if (img.width != img.height) throw DataError("only square images are supported");
        auto normalized = normalize(img.pixels);
        auto patches = extract_patches(normalized, img.width, patch_size, stride, image_id);
        if (patches_per_image > static_cast<int>(patches.size()))
            throw ConfigError("patches_per_image exceeds the " +
                              std::to_string(patches.size()) + " available patches");
        // Partial Fisher-Yates: the first patches_per_image slots end up as
        // a uniform without-replacement sample.
        Rng rng(seed, "subsample", static_cast<std::uint64_t>(image_id));
        for (int i = 0; i < patches_per_image; ++i) {
            const auto j = i + rng.uniform_int(patches.size() - static_cast<std::size_t>(i));
            std::swap(patches[static_cast<std::size_t>(i)], patches[j]);
        }
        patches.resize(static_cast<std::size_t>(patches_per_image));
        pool.insert(pool.end(), std::make_move_iterator(patches.begin()),
                    std::make_move_iterator(patches.end()));
        ++image_id;
    }

    Rng rng(seed, "split");
    for (std::size_t i = 0; i + 1 < pool.size(); ++i) {
        const auto j = i + rng.uniform_int(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    const auto n_train = static_cast<std::size_t>(
        static_cast<double>(pool.size()) * split_fraction);
    DatasetSplit split;
    split.split_fraction = split_fraction;
    split.seed = seed;
    split.train.assign(std::make_move_iterator(pool.begin()),
                       std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(n_train)));
    split.val.assign(std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(n_train)),
                     std::make_move_iterator(pool.end()));
    return split;
}

void write_patch_archive(const std::vector<Patch>& patches,
                         const std::filesystem::path& path) {
    if (patches.empty()) throw DataError("refusing to write an empty patch archive");
    const int p = patches.front().size;
    for (const auto& patch : patches)
        if (patch.size != p) throw DataError("mixed patch sizes in one archive");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write("STMP1", 5);
    const std::uint32_t size32 = static_cast<std::uint32_t>(p);
    const std::uint32_t count = static_cast<std::uint32_t>(patches.size());
    out.write(reinterpret_cast<const char*>(&size32), 4);
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& patch : patches)
        out.write(reinterpret_cast<const char*>(patch.values.data()),
                  static_cast<std::streamsize>(patch.values.size() * sizeof(float)));
    if (!out) throw DataError("short write: " + path.string());
}

std::vector<Patch> read_patch_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path.string());
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "STMP1", 5) != 0)
        throw DataError("not a patch archive: " + path.string());
    std::uint32_t size32 = 0, count = 0;
    in.read(reinterpret_cast<char*>(&size32), 4);
    in.read(reinterpret_cast<char*>(&count), 4);
    if (!in || size32 == 0 || size32 > 4096) throw DataError("bad archive header: " + path.string());
    std::vector<Patch> patches(count);
    for (auto& patch : patches) {
        patch.size = static_cast<int>(size32);
        patch.values.resize(static_cast<std::size_t>(size32) * size32);
        in.read(reinterpret_cast<char*>(patch.values.data()),
                static_cast<std::streamsize>(patch.values.size() * sizeof(float)));
    }
    if (!in) throw DataError("truncated patch archive: " + path.string());
    return patches;
}

} // namespace stmforge
