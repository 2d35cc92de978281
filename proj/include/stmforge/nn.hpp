#pragma once

#include "stmforge/rng.hpp"
#include "stmforge/tensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

namespace stmforge {

class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    // Per-sample shape inference; throws on incompatible input.
    virtual std::vector<int> output_shape(const std::vector<int>& in) const = 0;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    // Trainable parameters and their gradient slots, pairwise.
    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> grads() { return {}; }
    // Non-trainable state serialized with the checkpoint (running stats).
    virtual std::vector<Tensor*> buffers() { return {}; }
    virtual void init(Rng& rng) { (void)rng; }
    virtual nlohmann::json spec() const = 0;
};

class Conv2D : public Layer {
public:
    Conv2D(int in_ch, int out_ch, int kernel, int stride, int pad);
    std::string kind() const override { return "conv2d"; }
    std::vector<int> output_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Tensor*> params() override { return {&weights_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&dweights_, &dbias_}; }
    void init(Rng& rng) override;
    nlohmann::json spec() const override;

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Tensor weights_, bias_, dweights_, dbias_;
    Tensor cached_input_;
};

// Exact adjoint of a Conv2D with the same kernel/stride/pad. Weights are
// stored as the adjoint conv's weights [k,k,out_ch,in_ch].
class TConv2D : public Layer {
public:
    TConv2D(int in_ch, int out_ch, int kernel, int stride, int pad, int out_pad);
    std::string kind() const override { return "tconv2d"; }
    std::vector<int> output_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Tensor*> params() override { return {&weights_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&dweights_, &dbias_}; }
    void init(Rng& rng) override;
    nlohmann::json spec() const override;

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_, out_pad_;
    Tensor weights_, bias_, dweights_, dbias_;
    Tensor cached_input_;
};

class MaxPool2D : public Layer {
public:
    MaxPool2D(int pool, int stride);
    std::string kind() const override { return "maxpool2d"; }
    std::vector<int> output_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    nlohmann::json spec() const override;

private:
    int pool_, stride_;
    std::vector<int> in_shape_;
    std::vector<std::size_t> argmax_;
};

class Dense : public Layer {
public:
    Dense(int in_features, int out_features);
    std::string kind() const override { return "dense"; }
    std::vector<int> output_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Tensor*> params() override { return {&weights_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&dweights_, &dbias_}; }
    void init(Rng& rng) override;
    nlohmann::json spec() const override;

private:
    int in_features_, out_features_;
    Tensor weights_, bias_, dweights_, dbias_;
    Tensor cached_input_;
};

enum class ActKind { ReLU, LeakyReLU, ClippedReLU };

class Activation : public Layer {
public:
    // slope applies to LeakyReLU; lo/hi to ClippedReLU.
    explicit Activation(ActKind kind, double slope = 0.01, double lo = 0.0, double hi = 1.0);
    std::string kind() const override;
    std::vector<int> output_shape(const std::vector<int>& in) const override { return in; }
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    nlohmann::json spec() const override;

private:
    ActKind act_;
    double slope_, lo_, hi_;
    Tensor cached_input_;
};

class BatchNorm : public Layer {
public:
    explicit BatchNorm(int channels, double eps = 1e-5, double momentum = 0.1);
    std::string kind() const override { return "batchnorm"; }
    std::vector<int> output_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Tensor*> params() override { return {&gamma_, &beta_}; }
    std::vector<Tensor*> grads() override { return {&dgamma_, &dbeta_}; }
    std::vector<Tensor*> buffers() override { return {&running_mean_, &running_var_}; }
    nlohmann::json spec() const override;

private:
    int channels_;
    double eps_, momentum_;
    Tensor gamma_, beta_, dgamma_, dbeta_;
    Tensor running_mean_, running_var_;
    Tensor cached_input_, cached_norm_;
    std::vector<double> batch_mean_, batch_var_;
};

class Flatten : public Layer {
public:
    std::string kind() const override { return "flatten"; }
    std::vector<int> output_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    nlohmann::json spec() const override;

private:
    std::vector<int> in_shape_;
};

class Reshape : public Layer {
public:
    explicit Reshape(std::vector<int> target); // per-sample target shape
    std::string kind() const override { return "reshape"; }
    std::vector<int> output_shape(const std::vector<int>& in) const override;
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    nlohmann::json spec() const override;

private:
    std::vector<int> target_;
    std::vector<int> in_shape_;
};

// Fixed sequential network with reverse-mode differentiation.
class Network {
public:
    void add(std::unique_ptr<Layer> layer);
    void init(std::uint64_t seed);

    Tensor forward(const Tensor& x, bool training = false);
    // Requires a prior forward; returns the gradient wrt the network input
    // and accumulates parameter gradients.
    Tensor backward(const Tensor& dloss);

    std::vector<Tensor*> params();
    std::vector<Tensor*> grads();
    void zero_grads();

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

    // Per-sample shapes after every layer, starting with the input shape.
    std::vector<std::vector<int>> shape_walk(const std::vector<int>& input) const;

    nlohmann::json spec() const;
    static Network from_spec(const nlohmann::json& spec);

    void save(const std::filesystem::path& path) const;
    static Network load(const std::filesystem::path& path);

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    bool forward_done_ = false;
};

// Mean squared error and its gradient 2*(pred - target)/N.
std::pair<double, Tensor> mse_loss(const Tensor& pred, const Tensor& target);

class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    // Standard bias-corrected update; throws NumericError on non-finite
    // gradients.
    void step(std::vector<Tensor*> params, std::vector<Tensor*> grads, double lr);
    int step_count() const { return step_; }

private:
    double beta1_, beta2_, eps_;
    int step_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace stmforge
