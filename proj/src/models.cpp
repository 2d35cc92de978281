#include "stmforge/models.hpp"

#include "stmforge/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace stmforge {

std::string arch_name(Arch a) {
    return a == Arch::CAE_A ? "cae-a" : "cae-b";
}

Arch arch_from_name(const std::string& name) {
    if (name == "cae-a" || name == "cae_a" || name == "a") return Arch::CAE_A;
    if (name == "cae-b" || name == "cae_b" || name == "b") return Arch::CAE_B;
    throw ConfigError("unknown architecture: " + name);
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (patches_per_image < 1) throw ConfigError("patches_per_image must be >= 1");
}

std::vector<TrainConfig> builtin_configs() {
    return {
        {"baseline", 0.001, 1024, 3000, 100, false},
        {"lower-lr", 0.0001, 1024, 3000, 100, false},
        {"small-batch", 0.001, 256, 3000, 100, false},
        {"large-batch", 0.002, 2048, 3000, 100, false},
        {"more-patches", 0.001, 1024, 4900, 100, false},
        {"extended-training", 0.001, 1024, 3000, 200, false},
        {"lr-decay", 0.001, 1024, 3000, 100, true},
    };
}

TrainConfig config_by_name(const std::string& name) {
    for (const auto& c : builtin_configs())
        if (c.name == name) return c;
    throw ConfigError("unknown training configuration: " + name);
}

double TrainLog::final_val_loss() const {
    if (epochs.empty()) throw DataError("empty training log");
    return epochs.back().val_loss;
}

Network build_model(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.latent_dim != 10) throw ConfigError("latent dimension is fixed at 10");
    Network net;
    if (spec.arch == Arch::CAE_A) {
        net.add(std::make_unique<Conv2D>(1, 16, 3, 1, 1));
        net.add(std::make_unique<Activation>(ActKind::ReLU));
        net.add(std::make_unique<MaxPool2D>(2, 2));
        net.add(std::make_unique<Conv2D>(16, 9, 3, 1, 1));
        net.add(std::make_unique<Activation>(ActKind::ReLU));
        net.add(std::make_unique<MaxPool2D>(2, 2));
        net.add(std::make_unique<Flatten>());
        net.add(std::make_unique<Dense>(144, 10));
        net.add(std::make_unique<Dense>(10, 144));
        net.add(std::make_unique<Reshape>(std::vector<int>{4, 4, 9}));
        net.add(std::make_unique<TConv2D>(9, 16, 3, 2, 1, 1));
        net.add(std::make_unique<Activation>(ActKind::ReLU));
        // Final stage is linear: targets live in [-1, 1].
        net.add(std::make_unique<TConv2D>(16, 1, 5, 2, 1, 0));
    } else {
        net.add(std::make_unique<Conv2D>(1, 32, 3, 1, 1));
        net.add(std::make_unique<Activation>(ActKind::LeakyReLU, 0.01));
        net.add(std::make_unique<MaxPool2D>(2, 2));
        net.add(std::make_unique<Conv2D>(32, 24, 3, 1, 1));
        net.add(std::make_unique<Activation>(ActKind::LeakyReLU, 0.01));
        net.add(std::make_unique<MaxPool2D>(2, 2));
        net.add(std::make_unique<Conv2D>(24, 16, 3, 1, 1));
        net.add(std::make_unique<Activation>(ActKind::LeakyReLU, 0.01));
        net.add(std::make_unique<MaxPool2D>(2, 2));
        net.add(std::make_unique<Conv2D>(16, 8, 3, 1, 1));
        net.add(std::make_unique<Activation>(ActKind::LeakyReLU, 0.01));
        net.add(std::make_unique<MaxPool2D>(2, 2));
        net.add(std::make_unique<Flatten>());
        net.add(std::make_unique<Dense>(8, 10));
        // Project-and-reshape into the 2x2x24 decoder seed.
        net.add(std::make_unique<Dense>(10, 96));
        net.add(std::make_unique<Reshape>(std::vector<int>{2, 2, 24}));
        net.add(std::make_unique<TConv2D>(24, 24, 3, 2, 1, 1));
        net.add(std::make_unique<Activation>(ActKind::LeakyReLU, 0.01));
        net.add(std::make_unique<TConv2D>(24, 16, 3, 2, 1, 1));
        net.add(std::make_unique<BatchNorm>(16));
        net.add(std::make_unique<Activation>(ActKind::LeakyReLU, 0.01));
        net.add(std::make_unique<TConv2D>(16, 8, 3, 2, 1, 1));
        net.add(std::make_unique<Activation>(ActKind::LeakyReLU, 0.01));
        // Last tconv keeps 16x16 (stride 1); a 1x1 conv merges the four
        // channels into the single-channel output.
        net.add(std::make_unique<TConv2D>(8, 4, 3, 1, 1, 0));
        net.add(std::make_unique<Activation>(ActKind::ClippedReLU, 0.0, 0.0, 1.0));
        net.add(std::make_unique<Conv2D>(4, 1, 1, 1, 0));
    }
    net.init(seed);
    return net;
}

std::size_t latent_layer_index(const ModelSpec& spec) {
    return spec.arch == Arch::CAE_A ? 7u : 13u;
}

Tensor patches_to_tensor(const std::vector<Patch>& patches, int expect_size) {
    if (patches.empty()) throw DataError("no patches to batch");
    Tensor t = Tensor::zeros({static_cast<int>(patches.size()), expect_size, expect_size, 1});
    const std::size_t per = static_cast<std::size_t>(expect_size) * expect_size;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (patches[i].size != expect_size)
            throw DataError("patch size " + std::to_string(patches[i].size) +
                            " does not match architecture input " + std::to_string(expect_size));
        std::copy(patches[i].values.begin(), patches[i].values.end(),
                  t.data.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return t;
}

std::vector<float> encode(Network& net, const ModelSpec& spec, const Patch& patch) {
    Tensor cur = patches_to_tensor({patch}, spec.input_size());
    const std::size_t stop = latent_layer_index(spec);
    for (std::size_t i = 0; i <= stop; ++i) cur = net.layer(i).forward(cur, false);
    if (cur.size() != static_cast<std::size_t>(spec.latent_dim))
        throw DataError("latent size mismatch");
    return {cur.data.begin(), cur.data.end()};
}

Patch reconstruct(Network& net, const ModelSpec& spec, const Patch& patch) {
    Tensor out = net.forward(patches_to_tensor({patch}, spec.input_size()), false);
    Patch result = patch;
    result.values.assign(out.data.begin(), out.data.end());
    return result;
}

namespace {

double eval_loss(Network& net, const std::vector<Patch>& patches, int input_size) {
    constexpr std::size_t kEvalBatch = 512;
    double sum = 0.0;
    for (std::size_t start = 0; start < patches.size(); start += kEvalBatch) {
        const std::size_t stop = std::min(start + kEvalBatch, patches.size());
        std::vector<Patch> chunk(patches.begin() + static_cast<std::ptrdiff_t>(start),
                                 patches.begin() + static_cast<std::ptrdiff_t>(stop));
        Tensor x = patches_to_tensor(chunk, input_size);
        Tensor y = net.forward(x, false);
        const auto [loss, grad] = mse_loss(y, x);
        sum += loss * static_cast<double>(stop - start);
    }
    return sum / static_cast<double>(patches.size());
}

} // namespace

TrainLog train(Network& net, const ModelSpec& spec, const DatasetSplit& dataset,
               const TrainConfig& config, std::uint64_t seed) {
    config.validate();
    if (dataset.train.empty()) throw DataError("empty training split");
    const int input_size = spec.input_size();

    Adam adam;
    TrainLog log;
    std::vector<std::size_t> order(dataset.train.size());
    std::iota(order.begin(), order.end(), 0u);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr =
            config.lr_decay ? config.lr * std::pow(0.5, epoch / 25) : config.lr;

        Rng shuffle_rng(seed, "shuffle", static_cast<std::uint64_t>(epoch));
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const auto j = i + shuffle_rng.uniform_int(order.size() - i);
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch)) {
            const std::size_t stop =
                std::min(start + static_cast<std::size_t>(config.batch), order.size());
            std::vector<Patch> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t idx = order[i];
                // Augmentation is keyed by (epoch, sample identity) so the
                // evaluation order never changes the draw.
                const std::uint64_t aug_seed =
                    mix_seed(mix_seed(seed, hash_tag("aug")),
                             (static_cast<std::uint64_t>(epoch) << 32) | idx);
                batch.push_back(augment(dataset.train[idx], aug_seed));
            }
            Tensor x = patches_to_tensor(batch, input_size);
            net.zero_grads();
            Tensor y = net.forward(x, true);
            const auto [loss, grad] = mse_loss(y, x);
            if (!std::isfinite(loss))
                throw NumericError("non-finite training loss at epoch " +
                                   std::to_string(epoch + 1));
            net.backward(grad);
            adam.step(net.params(), net.grads(), lr);
            epoch_loss += loss * static_cast<double>(stop - start);
        }
        epoch_loss /= static_cast<double>(order.size());

        const double val_loss =
            dataset.val.empty() ? epoch_loss : eval_loss(net, dataset.val, input_size);
        const auto t1 = std::chrono::steady_clock::now();
        log.epochs.push_back({epoch + 1, epoch_loss, val_loss,
                              std::chrono::duration<double>(t1 - t0).count()});
    }
    return log;
}

} // namespace stmforge
