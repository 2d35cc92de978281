#include "stmforge/models.hpp"

#include "stmforge/errors.hpp"
#include "stmforge/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace stmforge;

namespace {

// A shared smooth pattern plus per-patch noise: learnable structure so
// training tests can expect the loss to drop.
std::vector<Patch> make_patches(int n, int size, std::uint64_t seed) {
    Rng rng(seed, "patches");
    std::vector<Patch> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Patch& p = out[static_cast<std::size_t>(i)];
        p.size = size;
        p.source.image_id = i;
        p.values.resize(static_cast<std::size_t>(size) * size);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c)
                p.values[static_cast<std::size_t>(r) * size + c] = static_cast<float>(
                    0.8 * std::sin(2.0 * M_PI * r / size) * std::cos(2.0 * M_PI * c / size) +
                    0.1 * (rng.uniform() * 2.0 - 1.0));
    }
    return out;
}

std::vector<double> flat_params(Network& net) {
    std::vector<double> out;
    for (Tensor* p : net.params()) out.insert(out.end(), p->data.begin(), p->data.end());
    return out;
}

} // namespace

TEST_CASE("the seven named configurations") {
    const auto configs = builtin_configs();
    REQUIRE(configs.size() == 7);

    auto find = [&](const std::string& name) { return config_by_name(name); };

    const auto baseline = find("baseline");
    CHECK(baseline.lr == 0.001);
    CHECK(baseline.batch == 1024);
    CHECK(baseline.patches_per_image == 3000);
    CHECK(baseline.epochs == 100);
    CHECK_FALSE(baseline.lr_decay);

    CHECK(find("lower-lr").lr == 0.0001);
    CHECK(find("small-batch").batch == 256);
    CHECK(find("large-batch").lr == 0.002);
    CHECK(find("large-batch").batch == 2048);
    CHECK(find("more-patches").patches_per_image == 4900);
    CHECK(find("extended-training").epochs == 200);
    CHECK(find("lr-decay").lr_decay);
    // Every non-listed field stays at the baseline value.
    CHECK(find("lr-decay").lr == 0.001);
    CHECK(find("extended-training").batch == 1024);

    CHECK_THROWS_AS(config_by_name("no-such-config"), ConfigError);
}

TEST_CASE("train config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.lr = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.patches_per_image = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("arch names") {
    CHECK(arch_from_name("cae-a") == Arch::CAE_A);
    CHECK(arch_from_name("b") == Arch::CAE_B);
    CHECK(arch_name(Arch::CAE_A) == "cae-a");
    CHECK_THROWS_AS(arch_from_name("cae-c"), ConfigError);
    CHECK(ModelSpec{Arch::CAE_A}.input_size() == 17);
    CHECK(ModelSpec{Arch::CAE_B}.input_size() == 16);
}

TEST_CASE("17x17 autoencoder shape walk") {
    ModelSpec spec{Arch::CAE_A};
    Network net = build_model(spec, 1);
    const auto walk = net.shape_walk({17, 17, 1});
    const std::vector<std::vector<int>> expected = {
        {17, 17, 1},  {17, 17, 16}, {17, 17, 16}, {8, 8, 16}, {8, 8, 9},
        {8, 8, 9},    {4, 4, 9},    {144},        {10},       {144},
        {4, 4, 9},    {8, 8, 16},   {8, 8, 16},   {17, 17, 1},
    };
    CHECK(walk == expected);
    CHECK(net.layer(latent_layer_index(spec)).kind() == "dense");
    CHECK(walk[latent_layer_index(spec) + 1] == std::vector<int>{10});

    // Six parameterized layers: two conv, two dense, two tconv.
    int with_params = 0;
    for (std::size_t i = 0; i < net.layer_count(); ++i)
        if (!net.layer(i).params().empty()) ++with_params;
    CHECK(with_params == 6);
}

TEST_CASE("16x16 autoencoder shape walk") {
    ModelSpec spec{Arch::CAE_B};
    Network net = build_model(spec, 1);
    const auto walk = net.shape_walk({16, 16, 1});
    REQUIRE(walk.front() == std::vector<int>{16, 16, 1});
    REQUIRE(walk.back() == std::vector<int>{16, 16, 1});

    // Encoder halves the grid four times: 16 -> 8 -> 4 -> 2 -> 1.
    CHECK(walk[1] == std::vector<int>{16, 16, 32});
    CHECK(walk[3] == std::vector<int>{8, 8, 32});
    CHECK(walk[4] == std::vector<int>{8, 8, 24});
    CHECK(walk[6] == std::vector<int>{4, 4, 24});
    CHECK(walk[7] == std::vector<int>{4, 4, 16});
    CHECK(walk[9] == std::vector<int>{2, 2, 16});
    CHECK(walk[10] == std::vector<int>{2, 2, 8});
    CHECK(walk[12] == std::vector<int>{1, 1, 8});
    CHECK(walk[13] == std::vector<int>{8});
    CHECK(walk[latent_layer_index(spec) + 1] == std::vector<int>{10});
    CHECK(net.layer(latent_layer_index(spec)).kind() == "dense");

    // Decoder doubles back up and merges to one channel at 16x16.
    CHECK(walk[16] == std::vector<int>{2, 2, 24});
    CHECK(walk[17] == std::vector<int>{4, 4, 24});
    CHECK(walk[19] == std::vector<int>{8, 8, 16});

    bool has_batchnorm = false, has_clipped = false;
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        if (net.layer(i).kind() == "batchnorm") has_batchnorm = true;
        if (net.layer(i).kind() == "clipped_relu") has_clipped = true;
    }
    CHECK(has_batchnorm);
    CHECK(has_clipped);

    CHECK_THROWS_AS(build_model(ModelSpec{Arch::CAE_A, 8}, 1), ConfigError);
}

TEST_CASE("encode and reconstruct") {
    for (Arch arch : {Arch::CAE_A, Arch::CAE_B}) {
        ModelSpec spec{arch};
        Network net = build_model(spec, 3);
        const auto patches = make_patches(1, spec.input_size(), 5);

        const auto latent = encode(net, spec, patches[0]);
        CHECK(latent.size() == 10);
        CHECK(encode(net, spec, patches[0]) == latent);

        const Patch rec = reconstruct(net, spec, patches[0]);
        CHECK(rec.size == spec.input_size());
        CHECK(rec.values.size() == patches[0].values.size());
        for (float v : rec.values) CHECK(std::isfinite(v));

        // Wrong patch size is rejected.
        const auto wrong = make_patches(1, spec.input_size() + 1, 5);
        CHECK_THROWS_AS(reconstruct(net, spec, wrong[0]), DataError);
    }
}

TEST_CASE("training reduces the loss and is deterministic") {
    ModelSpec spec{Arch::CAE_A};
    DatasetSplit ds;
    ds.train = make_patches(32, 17, 11);
    ds.val = make_patches(8, 17, 12);

    TrainConfig config;
    config.name = "unit";
    config.lr = 0.005;
    config.batch = 8;
    config.epochs = 20;

    Network net = build_model(spec, 21);
    const double before = [&] {
        double sum = 0.0;
        for (const auto& p : ds.val) {
            const Patch rec = reconstruct(net, spec, p);
            for (std::size_t i = 0; i < p.values.size(); ++i) {
                const double d = static_cast<double>(rec.values[i]) - p.values[i];
                sum += d * d;
            }
        }
        return sum;
    }();
    const TrainLog log = train(net, spec, ds, config, 99);
    REQUIRE(log.epochs.size() == 20);
    CHECK(log.epochs.front().epoch == 1);
    CHECK(log.epochs.back().epoch == 20);
    for (const auto& e : log.epochs) CHECK(e.seconds >= 0.0);
    CHECK(log.final_val_loss() < log.epochs.front().val_loss);

    double after = 0.0;
    for (const auto& p : ds.val) {
        const Patch rec = reconstruct(net, spec, p);
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            const double d = static_cast<double>(rec.values[i]) - p.values[i];
            after += d * d;
        }
    }
    CHECK(after < before);

    // Identical seed, identical parameters.
    Network again = build_model(spec, 21);
    train(again, spec, ds, config, 99);
    CHECK(flat_params(again) == flat_params(net));

    // A different training seed diverges.
    Network other = build_model(spec, 21);
    train(other, spec, ds, config, 100);
    CHECK(flat_params(other) != flat_params(net));

    CHECK_THROWS_AS(train(net, spec, DatasetSplit{}, config, 1), DataError);
}

TEST_CASE("16x16 model trains through the batchnorm path") {
    ModelSpec spec{Arch::CAE_B};
    DatasetSplit ds;
    ds.train = make_patches(16, 16, 31);
    ds.val = make_patches(4, 16, 32);
    TrainConfig config;
    config.batch = 8;
    config.epochs = 2;
    Network net = build_model(spec, 41);
    const TrainLog log = train(net, spec, ds, config, 7);
    CHECK(log.epochs.size() == 2);
    for (const auto& e : log.epochs) CHECK(std::isfinite(e.val_loss));
}

TEST_CASE("trained checkpoint reconstructs bit-identically after reload") {
    ModelSpec spec{Arch::CAE_B};
    DatasetSplit ds;
    ds.train = make_patches(16, 16, 51);
    TrainConfig config;
    config.batch = 8;
    config.epochs = 1;
    Network net = build_model(spec, 61);
    train(net, spec, ds, config, 71);

    const auto patches = make_patches(3, 16, 81);
    std::vector<Patch> before;
    for (const auto& p : patches) before.push_back(reconstruct(net, spec, p));

    const auto path = std::filesystem::temp_directory_path() / "stmforge_test_model.ckpt";
    net.save(path);
    Network loaded = Network::load(path);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const Patch rec = reconstruct(loaded, spec, patches[i]);
        CHECK(rec.values == before[i].values);
    }
    std::filesystem::remove(path);
}
