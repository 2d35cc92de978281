// stmforge: simulate lattice STM images, build patch datasets, train the
// two autoencoders and evaluate reconstructions.

#include "stmforge/image_io.hpp"
#include "stmforge/metrics.hpp"
#include "stmforge/models.hpp"
#include "stmforge/parallel.hpp"
#include "stmforge/render.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stmforge;

namespace {

constexpr const char* kVersion = "stmforge 0.1.0";

struct CommonOpts {
    std::uint64_t seed = 0;
    int threads = 0; // 0: use STMFORGE_THREADS or 1
    std::string out = ".";
    std::string config_file;
};

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("STMFORGE_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

// Loads --config values (a plain JSON object, or a previous run manifest
// whose snapshot sits under "config") before CLI11 parses, so explicit
// flags take precedence.
json load_config_file(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream in(argv[i + 1]);
            if (!in) throw ConfigError(std::string("cannot read config file: ") + argv[i + 1]);
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw ConfigError(std::string("bad config file: ") + e.what());
            }
            if (j.contains("config")) return j.at("config");
            return j;
        }
    }
    return json::object();
}

template <typename T>
void from_config(const json& cfg, const char* key, T& value) {
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& artifacts, double seconds) {
    json manifest = {
        {"command", command},
        {"config", config},
        {"artifacts", artifacts},
        {"tool_version", kVersion},
        {"wall_clock_seconds", seconds},
    };
    fs::create_directories(dir);
    std::ofstream out(dir / ("manifest_" + command + ".json"));
    if (!out) throw DataError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << "\n";
}

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(10) << v;
    return out.str();
}

// ------------------------------------------------------------- simulate

int cmd_simulate(const json& cfg, const CommonOpts& common, const json& snapshot) {
    std::string lattice_arg = "all";
    int count = 1;
    double a = 1.0;
    int extent = 20;
    double psf_sigma = 3.0;
    bool use_floor = true;
    NoiseParams noise;
    from_config(cfg, "lattice", lattice_arg);
    from_config(cfg, "count", count);
    from_config(cfg, "a", a);
    from_config(cfg, "extent", extent);
    from_config(cfg, "psf_sigma", psf_sigma);
    from_config(cfg, "use_floor", use_floor);
    from_config(cfg, "gaussian", noise.gaussian_strength);
    from_config(cfg, "poisson", noise.poisson_strength);
    from_config(cfg, "striation", noise.striation_strength);
    from_config(cfg, "pos_jitter", noise.pos_jitter);
    from_config(cfg, "brightness_jitter", noise.brightness_jitter);
    if (count < 1) throw ConfigError("count must be >= 1");

    std::vector<LatticeType> lattices;
    if (lattice_arg == "all") {
        lattices.assign(kAllLattices.begin(), kAllLattices.end());
    } else {
        lattices.push_back(lattice_from_name(lattice_arg));
    }

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> artifacts(static_cast<std::size_t>(lattices.size()) *
                                       static_cast<std::size_t>(count) * 3);
    parallel_for(lattices.size() * static_cast<std::size_t>(count), [&](std::size_t job) {
        const std::size_t li = job / static_cast<std::size_t>(count);
        const std::size_t i = job % static_cast<std::size_t>(count);
        LatticeSpec spec;
        spec.lattice = lattices[li];
        spec.a = a;
        spec.extent = extent;
        spec.seed = mix_seed(common.seed, mix_seed(hash_tag("image"), job));
        RenderConfig rc;
        rc.psf_sigma = psf_sigma;
        const SimImage img = simulate_image(spec, noise, rc, use_floor);

        const std::string stem = lattice_name(spec.lattice) + "_" + std::to_string(i);
        const fs::path pgm = out_dir / (stem + ".pgm");
        const fs::path f32 = out_dir / (stem + ".f32");
        const fs::path sidecar = out_dir / (stem + ".json");
        write_pgm(img, pgm);
        write_f32(img, f32);
        write_sidecar(img, sidecar);
        artifacts[job * 3] = pgm.string();
        artifacts[job * 3 + 1] = f32.string();
        artifacts[job * 3 + 2] = sidecar.string();
    });
    const auto t1 = std::chrono::steady_clock::now();
    write_manifest(out_dir, "simulate", snapshot, artifacts,
                   std::chrono::duration<double>(t1 - t0).count());
    std::cout << "simulate: wrote " << lattices.size() * static_cast<std::size_t>(count)
              << " image(s) to " << out_dir.string() << "\n";
    return 0;
}

// -------------------------------------------------------------- dataset

int cmd_dataset(const json& cfg, const CommonOpts& common, const json& snapshot) {
    std::string in_dir;
    int patch_size = 17;
    int stride = 4;
    int patches_per_image = 0; // 0 = keep all
    double split = 0.9;
    from_config(cfg, "in", in_dir);
    from_config(cfg, "patch_size", patch_size);
    from_config(cfg, "stride", stride);
    from_config(cfg, "patches_per_image", patches_per_image);
    from_config(cfg, "split", split);
    if (in_dir.empty()) throw ConfigError("dataset requires --in <dir>");

    std::vector<fs::path> files;
    if (!fs::is_directory(in_dir)) throw DataError("input directory missing: " + in_dir);
    for (const auto& entry : fs::directory_iterator(in_dir))
        if (entry.path().extension() == ".f32") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .f32 images in " + in_dir);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<SimImage> images;
    std::vector<std::string> sources;
    for (const auto& file : files) {
        auto values = read_f32(file);
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(values.size()))));
        if (static_cast<std::size_t>(side) * side != values.size())
            throw DataError("non-square image: " + file.string());
        SimImage img = SimImage::zeros(side, side);
        img.pixels = std::move(values);
        try {
            normalize(img.pixels);
        } catch (const DataError&) {
            std::cerr << "skipping constant image (no dynamic range): " << file.string() << "\n";
            continue;
        }
        images.push_back(std::move(img));
        sources.push_back(file.string());
    }
    if (images.empty()) throw DataError("no usable images in " + in_dir);

    int per_image = patches_per_image;
    if (per_image == 0) {
        const int per_axis = (images.front().width - patch_size) / stride + 1;
        per_image = per_axis * per_axis;
    }
    const DatasetSplit ds =
        build_dataset(images, patch_size, stride, per_image, split, common.seed);

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);
    const fs::path train_path = out_dir / "patches.train.stmp";
    const fs::path val_path = out_dir / "patches.val.stmp";
    write_patch_archive(ds.train, train_path);
    write_patch_archive(ds.val, val_path);

    json extra = snapshot;
    extra["sources"] = sources;
    extra["train_count"] = ds.train.size();
    extra["val_count"] = ds.val.size();
    const auto t1 = std::chrono::steady_clock::now();
    write_manifest(out_dir, "dataset", extra, {train_path.string(), val_path.string()},
                   std::chrono::duration<double>(t1 - t0).count());
    std::cout << "dataset: " << ds.train.size() << " train / " << ds.val.size()
              << " val patches\n";
    return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const json& cfg, const CommonOpts& common, const json& snapshot) {
    std::string archive_dir;
    std::string arch_arg = "cae-a";
    std::string config_name;
    bool list_configs = false;
    from_config(cfg, "archive", archive_dir);
    from_config(cfg, "arch", arch_arg);
    from_config(cfg, "train_config", config_name);
    from_config(cfg, "list_configs", list_configs);

    if (list_configs) {
        for (const auto& c : builtin_configs()) std::cout << c.name << "\n";
        return 0;
    }
    if (archive_dir.empty()) throw ConfigError("train requires --archive <dir>");

    TrainConfig tc = config_name.empty() ? TrainConfig{} : config_by_name(config_name);
    from_config(cfg, "lr", tc.lr);
    from_config(cfg, "batch", tc.batch);
    from_config(cfg, "epochs", tc.epochs);
    from_config(cfg, "lr_decay", tc.lr_decay);
    tc.validate();

    ModelSpec spec;
    spec.arch = arch_from_name(arch_arg);

    DatasetSplit ds;
    ds.train = read_patch_archive(fs::path(archive_dir) / "patches.train.stmp");
    ds.val = read_patch_archive(fs::path(archive_dir) / "patches.val.stmp");
    if (ds.train.front().size != spec.input_size())
        throw ConfigError("archive patch size " + std::to_string(ds.train.front().size) +
                          " does not match " + arch_name(spec.arch) + " input " +
                          std::to_string(spec.input_size()));

    const auto t0 = std::chrono::steady_clock::now();
    Network net = build_model(spec, common.seed);
    const TrainLog log = train(net, spec, ds, tc, common.seed);

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);
    const fs::path ckpt = out_dir / "model.ckpt";
    const fs::path csv = out_dir / "train_log.csv";
    net.save(ckpt);
    {
        std::ofstream out(csv);
        out << "epoch,train_loss,val_loss,seconds\n";
        for (const auto& e : log.epochs)
            out << e.epoch << "," << fmt(e.train_loss) << "," << fmt(e.val_loss) << ","
                << fmt(e.seconds) << "\n";
    }
    const auto t1 = std::chrono::steady_clock::now();
    write_manifest(out_dir, "train", snapshot, {ckpt.string(), csv.string()},
                   std::chrono::duration<double>(t1 - t0).count());
    std::cout << "train: final val loss " << log.final_val_loss() << "\n";
    return 0;
}

// ----------------------------------------------------------------- eval

int cmd_eval(const json& cfg, const CommonOpts& common, const json& snapshot) {
    std::string archive_dir;
    std::string checkpoint;
    std::string arch_arg = "cae-a";
    std::string lattice_label = "unknown";
    std::string config_label = "custom";
    int sample_pairs = 4;
    from_config(cfg, "archive", archive_dir);
    from_config(cfg, "checkpoint", checkpoint);
    from_config(cfg, "arch", arch_arg);
    from_config(cfg, "lattice_label", lattice_label);
    from_config(cfg, "config_label", config_label);
    from_config(cfg, "sample_pairs", sample_pairs);
    if (archive_dir.empty() || checkpoint.empty())
        throw ConfigError("eval requires --archive <dir> and --checkpoint <file>");
    if (!fs::exists(checkpoint)) throw DataError("missing checkpoint: " + checkpoint);

    ModelSpec spec;
    spec.arch = arch_from_name(arch_arg);
    Network net = Network::load(checkpoint);
    const auto patches = read_patch_archive(fs::path(archive_dir) / "patches.val.stmp");

    const auto t0 = std::chrono::steady_clock::now();
    const MetricRecord record = evaluate(net, spec, patches, lattice_label, config_label);

    std::vector<std::vector<float>> latents;
    latents.reserve(patches.size());
    for (const auto& p : patches) latents.push_back(encode(net, spec, p));
    const PcaProjection pca = pca_project(latents);

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);
    std::vector<std::string> artifacts;

    const fs::path metrics_csv = out_dir / "metrics.csv";
    {
        std::ofstream out(metrics_csv);
        out << "lattice,config,avg_mse,avg_ssim\n";
        out << record.lattice << "," << record.config << "," << fmt(record.avg_mse) << ","
            << fmt(record.avg_ssim) << "\n";
    }
    artifacts.push_back(metrics_csv.string());

    const fs::path pca_csv = out_dir / "pca.csv";
    {
        std::ofstream out(pca_csv);
        out << "pc1,pc2,pc3,lattice,image_id\n";
        for (std::size_t i = 0; i < pca.points.size(); ++i)
            out << fmt(pca.points[i][0]) << "," << fmt(pca.points[i][1]) << ","
                << fmt(pca.points[i][2]) << "," << lattice_label << "," << i << "\n";
    }
    artifacts.push_back(pca_csv.string());

    auto patch_to_image = [](const Patch& p) {
        SimImage img = SimImage::zeros(p.size, p.size);
        for (std::size_t i = 0; i < p.values.size(); ++i)
            img.pixels[i] = std::clamp((p.values[i] + 1.0f) / 2.0f, 0.0f, 1.0f);
        return img;
    };
    const int pairs = std::min<int>(sample_pairs, static_cast<int>(patches.size()));
    for (int i = 0; i < pairs; ++i) {
        const Patch rec = reconstruct(net, spec, patches[static_cast<std::size_t>(i)]);
        const fs::path orig = out_dir / ("sample" + std::to_string(i) + "_orig.pgm");
        const fs::path recon = out_dir / ("sample" + std::to_string(i) + "_recon.pgm");
        write_pgm(patch_to_image(patches[static_cast<std::size_t>(i)]), orig);
        write_pgm(patch_to_image(rec), recon);
        artifacts.push_back(orig.string());
        artifacts.push_back(recon.string());
    }

    const auto t1 = std::chrono::steady_clock::now();
    write_manifest(out_dir, "eval", snapshot, artifacts,
                   std::chrono::duration<double>(t1 - t0).count());
    std::cout << "eval: avg_mse " << record.avg_mse << " avg_ssim " << record.avg_ssim
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stmforge: simulated STM images and convolutional autoencoders"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    json cfg;
    try {
        cfg = load_config_file(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    CommonOpts common;
    from_config(cfg, "seed", common.seed);
    from_config(cfg, "threads", common.threads);
    from_config(cfg, "out", common.out);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", common.seed, "base RNG seed");
        sub->add_option("--threads", common.threads,
                        "worker threads (default: STMFORGE_THREADS or 1)");
        sub->add_option("--out", common.out, "output directory");
        sub->add_option("--config", common.config_file,
                        "JSON config file or run manifest to replay");
    };

    // Subcommand flags mirror config keys; flags override file values.
    auto* sim = app.add_subcommand("simulate", "render noisy lattice images");
    std::string lattice = cfg.value("lattice", "all");
    int count = cfg.value("count", 1);
    double a = cfg.value("a", 1.0);
    int extent = cfg.value("extent", 20);
    double psf_sigma = cfg.value("psf_sigma", 3.0);
    bool use_floor = cfg.value("use_floor", true);
    double gaussian = cfg.value("gaussian", 0.03);
    double poisson = cfg.value("poisson", 2.0);
    double striation = cfg.value("striation", 0.02);
    double pos_jitter = cfg.value("pos_jitter", 0.02);
    double brightness_jitter = cfg.value("brightness_jitter", 0.05);
    sim->add_option("--lattice", lattice, "sc|bcc|fcc|hex1|hex2|all");
    sim->add_option("--count", count, "images per lattice type");
    sim->add_option("--a", a, "lattice constant");
    sim->add_option("--extent", extent, "site-count half-width");
    sim->add_option("--psf-sigma", psf_sigma, "blob width in pixels");
    sim->add_flag("--use-floor,!--no-use-floor", use_floor, "floor(z) in the point vector");
    sim->add_option("--gaussian", gaussian, "gaussian noise strength");
    sim->add_option("--poisson", poisson, "poisson noise strength");
    sim->add_option("--striation", striation, "striation noise strength");
    sim->add_option("--pos-jitter", pos_jitter, "atom position jitter");
    sim->add_option("--brightness-jitter", brightness_jitter, "atom brightness jitter");
    add_common(sim);

    auto* ds = app.add_subcommand("dataset", "extract normalized patch archives");
    std::string in_dir = cfg.value("in", "");
    int patch_size = cfg.value("patch_size", 17);
    int stride = cfg.value("stride", 4);
    int patches_per_image = cfg.value("patches_per_image", 0);
    double split = cfg.value("split", 0.9);
    ds->add_option("--in", in_dir, "directory of .f32 images");
    ds->add_option("--patch-size", patch_size, "P (17 for cae-a, 16 for cae-b)");
    ds->add_option("--stride", stride, "patch stride in pixels");
    ds->add_option("--patches-per-image", patches_per_image, "subsample count (0 = all)");
    ds->add_option("--split", split, "train fraction");
    add_common(ds);

    auto* tr = app.add_subcommand("train", "train an autoencoder on an archive");
    std::string archive = cfg.value("archive", "");
    std::string arch = cfg.value("arch", "cae-a");
    std::string train_config = cfg.value("train_config", "");
    bool list_configs = false;
    double lr = cfg.value("lr", -1.0);
    int batch = cfg.value("batch", -1);
    int epochs = cfg.value("epochs", -1);
    bool lr_decay = cfg.value("lr_decay", false);
    tr->add_option("--archive", archive, "dataset directory (from `dataset`)");
    tr->add_option("--arch", arch, "cae-a|cae-b");
    tr->add_option("--train-config", train_config, "named configuration (see --list-configs)");
    tr->add_flag("--list-configs", list_configs, "print the named configurations");
    tr->add_option("--lr", lr, "learning rate override");
    tr->add_option("--batch", batch, "batch size override");
    tr->add_option("--epochs", epochs, "epoch count override");
    tr->add_flag("--lr-decay", lr_decay, "halve the learning rate every 25 epochs");
    add_common(tr);

    auto* ev = app.add_subcommand("eval", "metrics, PCA and reconstruction samples");
    std::string checkpoint = cfg.value("checkpoint", "");
    std::string lattice_label = cfg.value("lattice_label", "unknown");
    std::string config_label = cfg.value("config_label", "custom");
    int sample_pairs = cfg.value("sample_pairs", 4);
    ev->add_option("--archive", archive, "dataset directory (uses the val archive)");
    ev->add_option("--checkpoint", checkpoint, "model checkpoint");
    ev->add_option("--arch", arch, "cae-a|cae-b");
    ev->add_option("--lattice-label", lattice_label, "lattice column for the CSVs");
    ev->add_option("--config-label", config_label, "config column for the CSVs");
    ev->add_option("--sample-pairs", sample_pairs, "reconstruction PGM pairs to emit");
    add_common(ev);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    set_threads(resolve_threads(common.threads));

    try {
        json snapshot = {{"seed", common.seed}, {"threads", common.threads}, {"out", common.out}};
        if (sim->parsed()) {
            snapshot.update(json{{"lattice", lattice}, {"count", count}, {"a", a},
                                 {"extent", extent}, {"psf_sigma", psf_sigma},
                                 {"use_floor", use_floor}, {"gaussian", gaussian},
                                 {"poisson", poisson}, {"striation", striation},
                                 {"pos_jitter", pos_jitter},
                                 {"brightness_jitter", brightness_jitter}});
            return cmd_simulate(snapshot, common, snapshot);
        }
        if (ds->parsed()) {
            snapshot.update(json{{"in", in_dir}, {"patch_size", patch_size}, {"stride", stride},
                                 {"patches_per_image", patches_per_image}, {"split", split}});
            return cmd_dataset(snapshot, common, snapshot);
        }
        if (tr->parsed()) {
            snapshot.update(json{{"archive", archive}, {"arch", arch},
                                 {"train_config", train_config}, {"list_configs", list_configs},
                                 {"lr_decay", lr_decay}});
            if (lr > 0.0) snapshot["lr"] = lr;
            if (batch > 0) snapshot["batch"] = batch;
            if (epochs > 0) snapshot["epochs"] = epochs;
            return cmd_train(snapshot, common, snapshot);
        }
        if (ev->parsed()) {
            snapshot.update(json{{"archive", archive}, {"checkpoint", checkpoint},
                                 {"arch", arch}, {"lattice_label", lattice_label},
                                 {"config_label", config_label},
                                 {"sample_pairs", sample_pairs}});
            return cmd_eval(snapshot, common, snapshot);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
