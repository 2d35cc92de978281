#pragma once

#include "stmforge/nn.hpp"
#include "stmforge/patches.hpp"

#include <string>
#include <vector>

namespace stmforge {

enum class Arch { CAE_A, CAE_B };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name); // throws ConfigError

struct ModelSpec {
    Arch arch = Arch::CAE_A;
    int latent_dim = 10;
    int input_size() const { return arch == Arch::CAE_A ? 17 : 16; }
};

struct TrainConfig {
    std::string name = "custom";
    double lr = 0.001;
    int batch = 1024;
    int patches_per_image = 3000;
    int epochs = 100;
    bool lr_decay = false;

    void validate() const; // throws ConfigError
};

// The seven named hyperparameter configurations.
std::vector<TrainConfig> builtin_configs();
TrainConfig config_by_name(const std::string& name); // throws ConfigError

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    double final_val_loss() const;
};

Network build_model(const ModelSpec& spec, std::uint64_t seed);

// Index of the latent layer's output in the forward walk (the layer
// producing the 10-vector).
std::size_t latent_layer_index(const ModelSpec& spec);

// Runs the encoder prefix only; patch must match the arch input size.
std::vector<float> encode(Network& net, const ModelSpec& spec, const Patch& patch);

// Full forward pass; returns a patch-sized reconstruction.
Patch reconstruct(Network& net, const ModelSpec& spec, const Patch& patch);

// Shuffled mini-batch Adam on MSE with on-the-fly augmentation. The
// reconstruction target is the augmented input patch. Deterministic given
// seed in serial mode.
TrainLog train(Network& net, const ModelSpec& spec, const DatasetSplit& dataset,
               const TrainConfig& config, std::uint64_t seed);

Tensor patches_to_tensor(const std::vector<Patch>& patches, int expect_size);

} // namespace stmforge
