// Command-line driver: synthetic data generation, training, evaluation,
// ablation and few-shot experiment protocols, the online/offline inference
// benchmark, gradient checking, and qualitative map export.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fasttcm/fasttcm.hpp"

namespace fs = std::filesystem;
using namespace ftcm;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    return out;
}

// Loads the config file (or desk defaults) and applies --set key=value
// overrides. Keys must exist; values parse as JSON scalars first, then as
// strings.
Config resolve_config(const std::string& config_path,
                      const std::vector<std::string>& sets) {
    nlohmann::json doc = config_path.empty() ? Config::desk().to_json()
                                             : Config::load(config_path).to_json();
    for (const std::string& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (!doc.contains(key))
            throw CLI::ValidationError("--set", "unknown config key '" + key + "'");
        try {
            doc[key] = nlohmann::json::parse(val);
        } catch (const nlohmann::json::exception&) {
            doc[key] = val;
        }
    }
    Config cfg = Config::from_json(doc);
    cfg.validate();
    return cfg;
}

void write_effective_config(const Config& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    cfg.save(out_dir / "effective_config.json");
}

std::vector<size_t> parse_indices(const std::string& csv) {
    std::vector<size_t> out;
    for (const std::string& tok : split_csv(csv)) out.push_back(std::stoull(tok));
    return out;
}

std::vector<double> parse_ratios(const std::string& csv) {
    std::vector<double> out;
    for (const std::string& tok : split_csv(csv)) out.push_back(std::stod(tok));
    return out;
}

void print_report(const std::string& run, const EvalReport& r) {
    std::printf("%-24s pixel_p=%.4f pixel_r=%.4f pixel_f=%.4f region_f=%.4f loss=%.4f\n",
                run.c_str(), r.pixel_p, r.pixel_r, r.pixel_f, r.region_f, r.loss);
}

int run_grad_check(const Config& cfg) {
    const FastTcm model(cfg);
    const SynthSample sample = generate_sample(cfg.data_seed, GenConfig::from(cfg));
    const Tensor coarse = downsample_mask(sample.mask, cfg.s);
    auto f = [&]() {
        const FastTcm::Forward fw = model.forward(sample.image);
        return model.loss(fw, sample.mask, coarse).total;
    };
    std::vector<Tensor> params;
    for (auto& [name, p] : model.trainable_params()) params.push_back(p);
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckResult res = grad_check(f, params, 1e-5);
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    std::printf("grad-check: max_rel_error=%.3e over %zu coordinates in %.1f s\n",
                res.max_rel_error, res.coords_checked, secs);
    std::printf("worst: param %zu coord %zu analytic=%.6e numeric=%.6e\n",
                res.worst_param, res.worst_coord, res.analytic, res.numeric);
    return res.max_rel_error < 1e-4 ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fasttcm: cross-modal text-region segmentation at desk scale"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "flat key/value JSON config file")
        ->expected(1);
    app.add_option("--set", sets, "override a config key, e.g. --set tau=0.05");

    std::string data_dir, out_dir = "out", checkpoint, split = "test";
    std::string ratios_csv = "0.1,0.25,0.5,1.0", indices_csv = "0";
    size_t seeds = 3;
    size_t text_depth = 0;
    bool with_tcm = false;

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset splits");
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train a model");
    tr->add_option("--data", data_dir, "dataset root")->required();
    tr->add_option("--out", out_dir, "run directory");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ev->add_option("--data", data_dir, "dataset root")->required();
    ev->add_option("--split", split, "dataset split");
    ev->add_option("--out", out_dir, "report directory");

    auto* ab = app.add_subcommand("ablate", "train and evaluate the component ladder");
    ab->add_option("--data", data_dir, "dataset root")->required();
    ab->add_option("--out", out_dir, "output directory");
    ab->add_option("--seeds", seeds, "seed repetitions per row");

    auto* fsinclude = app.add_subcommand("few-shot", "training-data-ratio protocol");
    fsinclude->add_option("--data", data_dir, "dataset root")->required();
    fsinclude->add_option("--out", out_dir, "output directory");
    fsinclude->add_option("--ratios", ratios_csv, "comma-separated data ratios");
    fsinclude->add_option("--seeds", seeds, "seed repetitions per point");

    auto* be = app.add_subcommand("bench", "online vs offline inference benchmark");
    be->add_option("--checkpoint", checkpoint, "fast-mode checkpoint")->required();
    be->add_option("--data", data_dir, "dataset root")->required();
    be->add_option("--split", split, "dataset split");
    be->add_option("--out", out_dir, "report directory");
    be->add_option("--text-depth", text_depth, "override text encoder depth");
    be->add_flag("--with-tcm", with_tcm, "also time the image-conditioned variant");

    auto* gc = app.add_subcommand("grad-check", "full-model finite-difference check");

    auto* ex = app.add_subcommand("export-maps", "write qualitative PGM maps");
    ex->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ex->add_option("--data", data_dir, "dataset root")->required();
    ex->add_option("--split", split, "dataset split");
    ex->add_option("--indices", indices_csv, "comma-separated sample indices");
    ex->add_option("--out", out_dir, "output directory");

    // --config/--set live on the parent; let them appear after the subcommand
    for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << app.help() << "\n";
        return 1;
    }

    try {
        const Config cfg = resolve_config(config_path, sets);

        if (gen->parsed()) {
            write_effective_config(cfg, out_dir);
            generate_dataset(cfg, out_dir);
            std::printf("wrote %zu/%zu/%zu train/val/test samples under %s\n",
                        cfg.train_count, cfg.val_count, cfg.test_count, out_dir.c_str());
        } else if (tr->parsed()) {
            write_effective_config(cfg, out_dir);
            const TrainResult res = train(cfg, data_dir, out_dir);
            std::printf("trained %zu steps: loss %.4f -> %.4f; checkpoint %s\n",
                        res.steps_run, res.first_loss, res.final_loss,
                        res.checkpoint.string().c_str());
        } else if (ev->parsed()) {
            const FastTcm model = load_checkpoint(checkpoint, cfg);
            const EvalReport rep = evaluate_split(model, data_dir, split);
            print_report(split, rep);
            write_effective_config(cfg, out_dir);
            write_report_csv(fs::path(out_dir) / "eval_report.csv", {{split, rep}});
        } else if (ab->parsed()) {
            write_effective_config(cfg, out_dir);
            const auto rows = default_ablation_ladder(cfg);
            const auto reports = run_ablation(rows, data_dir, out_dir, seeds);
            for (const auto& r : reports) print_report(r.run, r.report);
            write_report_csv(fs::path(out_dir) / "ablation.csv", reports);
        } else if (fsinclude->parsed()) {
            write_effective_config(cfg, out_dir);
            const auto reports =
                run_few_shot(cfg, parse_ratios(ratios_csv), data_dir, out_dir, seeds);
            for (const auto& r : reports) print_report(r.run, r.report);
            write_report_csv(fs::path(out_dir) / "few_shot.csv", reports);
        } else if (be->parsed()) {
            write_effective_config(cfg, out_dir);
            FastTcm model = load_checkpoint(checkpoint, cfg);
            if (text_depth != 0 && text_depth != cfg.text_depth)
                model = with_text_depth(model, text_depth);
            check_manifest(cfg, fs::path(data_dir) / split, split);
            const auto samples = read_split(fs::path(data_dir) / split);
            const auto reports = bench_inference(
                model, samples, fs::path(out_dir) / "t_out_cache.ftcm", with_tcm);
            for (const auto& r : reports)
                std::printf("%-8s images=%zu mean=%.3fms p50=%.3fms p95=%.3fms "
                            "max_abs_diff=%.3e\n",
                            r.mode.c_str(), r.images, r.mean_ms, r.p50_ms, r.p95_ms,
                            r.max_abs_diff);
            write_bench_csv(fs::path(out_dir) / "bench_report.csv", reports);
        } else if (gc->parsed()) {
            return run_grad_check(cfg);
        } else if (ex->parsed()) {
            const FastTcm model = load_checkpoint(checkpoint, cfg);
            check_manifest(cfg, fs::path(data_dir) / split, split);
            const auto samples = read_split(fs::path(data_dir) / split);
            const auto written =
                export_maps(model, samples, parse_indices(indices_csv), out_dir);
            std::printf("wrote %zu maps under %s\n", written.size(), out_dir.c_str());
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
