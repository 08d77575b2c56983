// fasunet: command-line front end for the variational solver, the learned
// network, and the surrounding pipeline (synthesis, segmentation, metrics).
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
#include "fasu/fas.hpp"
#include "fasu/fusion.hpp"
#include "fasu/io.hpp"
#include "fasu/metrics.hpp"
#include "fasu/net.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace fasu;

namespace {

Tensor load_image_any(const std::string& path) {
    if (path.size() >= 3 && path.compare(path.size() - 3, 3, ".ft") == 0)
        return io::load_tensor(path);
    return io::load_pgm(path);
}

Tensor as_rank3(const Tensor& t) {
    if (t.rank() == 3) return t;
    if (t.rank() != 2) throw std::runtime_error("expected a rank-2 or rank-3 tensor");
    Tensor out({1, t.extent(0), t.extent(1)});
    std::copy(t.data(), t.data() + t.size(), out.data());
    return out;
}

int cmd_solve(const std::string& image_path, const io::KeyValues& kv,
              const std::string& out_path, const std::string& trace_path) {
    ModelParams p = io::model_params_from(kv);
    FasConfig cfg = io::fas_config_from(kv);

    Tensor f = load_image_any(image_path);
    if (f.rank() == 3 && f.extent(0) == 1) {
        Tensor plane({f.extent(1), f.extent(2)});
        std::copy(f.data(), f.data() + f.size(), plane.data());
        f = std::move(plane);
    }
    SolveResult res = solve(f, p, cfg);
    io::save_tensor(out_path, res.u);
    if (!trace_path.empty()) {
        std::vector<std::vector<double>> rows;
        for (std::size_t c = 0; c < res.residual_trace.size(); ++c)
            rows.push_back({double(c), res.residual_trace[c], res.energy_trace[c]});
        io::write_csv(trace_path, {"cycle", "residual", "energy"}, rows);
    }
    std::printf("solve: %zu cycles, final residual %.6e\n", cfg.cycles,
                res.residual_trace.back());
    return 0;
}

int cmd_segment(const std::string& features_path, const std::string& method,
                const std::vector<double>& thresholds, std::size_t k, std::uint64_t seed,
                const std::string& out_path) {
    Tensor u = as_rank3(io::load_tensor(features_path));
    SegMask mask;
    if (method == "threshold") {
        mask = threshold_segment(u, thresholds);
    } else if (method == "kmeans") {
        mask = kmeans_segment(u, k, seed);
    } else {
        throw std::runtime_error("unknown segmentation method: " + method);
    }
    io::save_mask_pgm(out_path, mask);
    std::printf("segment: %s wrote %zux%zu mask\n", method.c_str(), mask.height, mask.width);
    return 0;
}

std::vector<net::TrainSample> load_dataset(const std::string& dir, std::size_t in_channels) {
    std::vector<net::TrainSample> data;
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 10 && name.compare(name.size() - 10, 10, "_image.pgm") == 0)
            images.push_back(entry.path());
    }
    std::sort(images.begin(), images.end());
    for (const fs::path& img : images) {
        std::string base = img.string();
        base.replace(base.size() - 10, 10, "_mask.pgm");
        net::TrainSample s;
        Tensor plane = io::load_pgm(img.string());
        s.image = Tensor({in_channels, plane.extent(0), plane.extent(1)});
        if (in_channels != 1)
            throw std::runtime_error("train expects single-channel images");
        std::copy(plane.data(), plane.data() + plane.size(), s.image.data());
        s.labels = io::load_mask_pgm(base);
        data.push_back(std::move(s));
    }
    if (data.empty())
        throw std::runtime_error("no *_image.pgm samples found in " + dir);
    return data;
}

int cmd_train(const std::string& data_dir, const io::KeyValues& kv,
              std::optional<std::size_t> epochs, std::optional<std::uint64_t> seed,
              const std::string& ckpt_out, const std::string& trace_out) {
    net::NetConfig cfg = io::net_config_from(kv);
    net::TrainConfig tcfg = io::train_config_from(kv);
    if (epochs) tcfg.max_epochs = *epochs;
    if (seed) tcfg.seed = *seed;

    std::vector<net::TrainSample> data = load_dataset(data_dir, cfg.in_channels);

    // pad every sample up to the level divisibility requirement
    const std::size_t H = data[0].image.extent(1), W = data[0].image.extent(2);
    const std::size_t f = std::size_t{1} << (cfg.levels - 1);
    if (H % f != 0 || W % f != 0) {
        for (net::TrainSample& s : data) {
            Tensor plane({s.image.extent(1), s.image.extent(2)});
            std::copy(s.image.data(), s.image.data() + s.image.size(), plane.data());
            io::PadInfo info;
            Tensor padded = io::pad_to_divisible(plane, cfg.levels, info);
            s.image = Tensor({1, padded.extent(0), padded.extent(1)});
            std::copy(padded.data(), padded.data() + padded.size(), s.image.data());
            SegMask grown(padded.extent(0), padded.extent(1));
            for (std::size_t i = 0; i < info.height; ++i)
                for (std::size_t j = 0; j < info.width; ++j)
                    grown.at(i + info.top, j + info.left) = s.labels.at(i, j);
            s.labels = grown;
        }
        std::printf("train: padded %zux%zu samples to %zux%zu for L=%zu\n", H, W,
                    data[0].image.extent(1), data[0].image.extent(2), cfg.levels);
    }

    net::ParamStore params = net::init_params(cfg, tcfg.seed);
    net::TrainResult result = net::train(data, params, cfg, tcfg);

    if (!ckpt_out.empty()) io::save_checkpoint(ckpt_out, params, true);
    if (!trace_out.empty()) {
        std::vector<std::vector<double>> rows;
        for (std::size_t e = 0; e < result.loss_trace.size(); ++e)
            rows.push_back({double(e), result.loss_trace[e], result.dsc_trace[e]});
        io::write_csv(trace_out, {"epoch", "loss", "a_dsc"}, rows);
    }
    std::printf("train: %zu epochs, final loss %.6e, final a-DSC %.4f\n",
                result.loss_trace.size(), result.loss_trace.back(), result.dsc_trace.back());
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, std::size_t classes,
             double spacing, const std::string& out_path) {
    SegMask pred = io::load_mask_pgm(pred_path);
    SegMask gt = io::load_mask_pgm(gt_path);
    MetricsReport rep = evaluate(pred, gt, classes, spacing);

    std::vector<std::vector<double>> rows;
    for (std::size_t c = 0; c + 1 < classes; ++c)
        rows.push_back({double(c + 1), rep.dsc[c], rep.precision[c],
                        rep.ssd[c] ? *rep.ssd[c] : -1.0});
    if (!out_path.empty())
        io::write_csv(out_path, {"class", "dsc", "precision", "ssd"}, rows);
    std::printf("a-DSC %.6f  a-Precision %.6f  a-SSD %.6f\n", rep.a_dsc, rep.a_precision,
                rep.a_ssd);
    return 0;
}

int cmd_paramcount(std::size_t dims, std::size_t p, std::size_t kc, std::size_t kl,
                   std::size_t km, std::size_t kr, std::size_t levels, double ratio,
                   std::size_t classes, std::size_t in_channels) {
    net::NetConfig cfg;
    cfg.spatial_dims = dims;
    cfg.channels = p;
    cfg.kernel_extent = kc;
    cfg.k_pre = kl;
    cfg.k_coarse = km;
    cfg.k_post = kr;
    cfg.levels = levels;
    cfg.channel_ratio = ratio;
    cfg.classes = classes;
    cfg.in_channels = in_channels;
    net::ParamCount pc = net::param_count(cfg);
    std::printf("kernel_unit %llu\n", (unsigned long long)pc.kernel_unit);
    std::printf("multiplier %llu\n", (unsigned long long)pc.multiplier);
    std::printf("multiplier_term %llu\n", (unsigned long long)pc.multiplier_term);
    std::printf("formula_total %llu\n", (unsigned long long)pc.formula_total);
    if (dims == 2)
        std::printf("instantiated %llu\n", (unsigned long long)pc.instantiated);
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    io::KeyValues kv = io::load_config(spec_path);
    io::PhantomSpec spec = io::phantom_spec_from(kv);
    io::Phantom ph = io::make_phantom(spec);
    fs::create_directories(out_dir);
    io::save_pgm((fs::path(out_dir) / "phantom_image.pgm").string(), ph.image, 65535);
    io::save_mask_pgm((fs::path(out_dir) / "phantom_mask.pgm").string(), ph.gt);
    io::save_tensor((fs::path(out_dir) / "phantom_image.ft").string(), ph.image);
    std::printf("synth: wrote %zux%zu phantom to %s\n", spec.height, spec.width,
                out_dir.c_str());
    return 0;
}

int cmd_postprocess(const std::string& mask_path, int class_id, const std::string& order,
                    const std::string& out_path) {
    SegMask mask = io::load_mask_pgm(mask_path);
    if (order == "ch") {
        ComponentResult comp = largest_component(mask, class_id);
        if (comp.class_absent) std::fprintf(stderr, "warning: class %d absent\n", class_id);
        mask = fill_holes(comp.mask, class_id);
    } else if (order == "hc") {
        mask = fill_holes(mask, class_id);
        ComponentResult comp = largest_component(mask, class_id);
        if (comp.class_absent) std::fprintf(stderr, "warning: class %d absent\n", class_id);
        mask = comp.mask;
    } else {
        throw std::runtime_error("order must be ch or hc");
    }
    io::save_mask_pgm(out_path, mask);
    std::printf("postprocess: class %d, order %s\n", class_id, order.c_str());
    return 0;
}

int cmd_gradcheck(const io::KeyValues& kv, std::size_t probes, std::uint64_t seed) {
    net::NetConfig cfg = io::net_config_from(kv);
    net::ParamStore params = net::init_params(cfg, seed);

    const std::size_t f = std::size_t{1} << (cfg.levels - 1);
    const std::size_t H = std::max<std::size_t>(8, 2 * f);
    const std::size_t W = H;
    Tensor images = Tensor::random_normal({1, cfg.in_channels, H, W}, seed + 1);
    SegMask labels(H, W);
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
            labels.at(i, j) = int((i + j) % cfg.classes);
    Tensor oh = one_hot(labels, cfg.classes);
    Tensor oh4({1, cfg.classes, H, W});
    std::copy(oh.data(), oh.data() + oh.size(), oh4.data());

    double worst = net::gradient_check(params, images, oh4, cfg, probes, 1e-6, seed);
    std::printf("gradcheck: %zu probes, max relative error %.6e\n", probes, worst);
    if (worst > 1e-4) {
        std::fprintf(stderr, "error: gradient check exceeded 1e-4\n");
        return 1;
    }
    return 0;
}

io::KeyValues merge_config(const std::string& config_path, const io::KeyValues& overrides) {
    io::KeyValues kv;
    if (!config_path.empty()) kv = io::load_config(config_path);
    for (const auto& [k, v] : overrides) kv[k] = v;
    return kv;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FAS-Unet style variational segmentation toolkit"};
    app.require_subcommand(1);

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "run the classical multigrid solver");
    std::string solve_image, solve_out, solve_trace, solve_config;
    io::KeyValues solve_kv;
    solve_cmd->add_option("--image", solve_image, "input image (.pgm or .ft)")->required();
    solve_cmd->add_option("--out", solve_out, "output feature tensor (.ft)")->required();
    solve_cmd->add_option("--trace-out", solve_trace, "residual/energy trace CSV");
    solve_cmd->add_option("--config", solve_config, "key=value config file");
    for (const char* key : {"mu", "nu", "eps", "levels", "kl", "km", "kr", "cycles", "tau"}) {
        solve_cmd->add_option_function<std::string>(
            std::string("--") + key, [&solve_kv, key](const std::string& v) { solve_kv[key] = v; },
            std::string("override config key ") + key);
    }

    // segment
    auto* seg_cmd = app.add_subcommand("segment", "fuse a feature tensor into a label mask");
    std::string seg_features, seg_method = "threshold", seg_out;
    std::vector<double> seg_thresholds;
    std::size_t seg_k = 2;
    std::uint64_t seg_seed = 0;
    seg_cmd->add_option("--features", seg_features, "feature tensor (.ft)")->required();
    seg_cmd->add_option("--method", seg_method, "threshold | kmeans");
    seg_cmd->add_option("--thresholds", seg_thresholds, "ascending threshold list");
    seg_cmd->add_option("--k", seg_k, "cluster count for kmeans");
    seg_cmd->add_option("--seed", seg_seed, "kmeans seed");
    seg_cmd->add_option("--out", seg_out, "output mask PGM")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train the network on a phantom directory");
    std::string train_dir, train_config, train_ckpt, train_trace;
    std::optional<std::size_t> train_epochs;
    std::optional<std::uint64_t> train_seed;
    train_cmd->add_option("--data-dir", train_dir, "directory of *_image.pgm / *_mask.pgm")
        ->required();
    train_cmd->add_option("--config", train_config, "key=value config file")->required();
    train_cmd->add_option("--epochs", train_epochs, "override epoch count");
    train_cmd->add_option("--seed", train_seed, "override seed");
    train_cmd->add_option("--checkpoint-out", train_ckpt, "checkpoint directory");
    train_cmd->add_option("--trace-out", train_trace, "loss/DSC trace CSV");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "compare a mask against ground truth");
    std::string eval_pred, eval_gt, eval_out;
    std::size_t eval_classes = 2;
    double eval_spacing = 1.0;
    eval_cmd->add_option("--pred", eval_pred, "predicted mask PGM")->required();
    eval_cmd->add_option("--gt", eval_gt, "ground-truth mask PGM")->required();
    eval_cmd->add_option("--classes", eval_classes, "number of classes");
    eval_cmd->add_option("--spacing", eval_spacing, "pixel spacing for SSD");
    eval_cmd->add_option("--out", eval_out, "metrics CSV");

    // paramcount
    auto* pc_cmd = app.add_subcommand("paramcount", "evaluate the parameter-count formulas");
    std::size_t pc_dims = 2, pc_p = 64, pc_kc = 3, pc_kl = 3, pc_km = 7, pc_kr = 4,
                pc_levels = 5, pc_classes = 5, pc_cin = 1;
    double pc_ratio = 1.0;
    pc_cmd->add_option("--dims", pc_dims, "2 or 3");
    pc_cmd->add_option("--p", pc_p, "feature channels");
    pc_cmd->add_option("--kc", pc_kc, "kernel extent");
    pc_cmd->add_option("--kl", pc_kl, "pre-smoothing iterations");
    pc_cmd->add_option("--km", pc_km, "coarsest iterations");
    pc_cmd->add_option("--kr", pc_kr, "post-smoothing iterations");
    pc_cmd->add_option("--levels", pc_levels, "grid levels");
    pc_cmd->add_option("--ratio", pc_ratio, "3D channel ratio r");
    pc_cmd->add_option("--classes", pc_classes, "output classes");
    pc_cmd->add_option("--in-channels", pc_cin, "input channels");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic phantom");
    std::string synth_spec, synth_out;
    synth_cmd->add_option("--spec-file", synth_spec, "phantom spec (key=value)")->required();
    synth_cmd->add_option("--out-dir", synth_out, "output directory")->required();

    // postprocess
    auto* post_cmd = app.add_subcommand("postprocess", "component filtering and hole filling");
    std::string post_mask, post_out, post_order = "ch";
    int post_class = 1;
    post_cmd->add_option("--mask", post_mask, "input mask PGM")->required();
    post_cmd->add_option("--class", post_class, "class id to clean");
    post_cmd->add_option("--order", post_order, "ch (components then holes) | hc");
    post_cmd->add_option("--out", post_out, "output mask PGM")->required();

    // gradcheck
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    std::string gc_config;
    std::size_t gc_probes = 50;
    std::uint64_t gc_seed = 0;
    gc_cmd->add_option("--config", gc_config, "key=value network config")->required();
    gc_cmd->add_option("--probes", gc_probes, "number of probes");
    gc_cmd->add_option("--seed", gc_seed, "probe seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (solve_cmd->parsed())
            return cmd_solve(solve_image, merge_config(solve_config, solve_kv), solve_out,
                             solve_trace);
        if (seg_cmd->parsed())
            return cmd_segment(seg_features, seg_method, seg_thresholds, seg_k, seg_seed,
                               seg_out);
        if (train_cmd->parsed())
            return cmd_train(train_dir, io::load_config(train_config), train_epochs,
                             train_seed, train_ckpt, train_trace);
        if (eval_cmd->parsed())
            return cmd_eval(eval_pred, eval_gt, eval_classes, eval_spacing, eval_out);
        if (pc_cmd->parsed())
            return cmd_paramcount(pc_dims, pc_p, pc_kc, pc_kl, pc_km, pc_kr, pc_levels,
                                  pc_ratio, pc_classes, pc_cin);
        if (synth_cmd->parsed()) return cmd_synth(synth_spec, synth_out);
        if (post_cmd->parsed())
            return cmd_postprocess(post_mask, post_class, post_order, post_out);
        if (gc_cmd->parsed()) return cmd_gradcheck(io::load_config(gc_config), gc_probes,
                                                   gc_seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
