#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fasttcm/errors.hpp"
#include "fasttcm/rng.hpp"

namespace ftcm {

// Flat run configuration: model dimensions, bridge switches, training policy,
// and synthetic-data generation. Serialized as a flat key/value JSON document.
struct Config {
    std::string preset = "desk";

    // encoder dimensions
    size_t H = 64, W = 64;
    size_t C = 64;  // image/text embedding dimension
    size_t D = 32;  // word embedding dimension
    size_t s = 8;   // image encoder downsampling ratio
    size_t n_prompts = 4;
    size_t K = 1;   // text class count; text detection has exactly one

    // toy text encoder
    size_t text_depth = 2;
    size_t text_heads = 2;

    // visual prompt generator
    size_t vpg_layers = 2;
    size_t vpg_heads = 2;
    size_t vpg_width = 32;
    size_t vpg_ffn = 64;

    // bridge
    double tau = 0.07;
    double lambda = 1.0;
    std::string mode = "fast"; // fast | tcm
    bool use_predefined = true;
    bool use_lg = true;
    bool use_vg = true;
    bool use_aux = true;
    bool use_bsm = true;

    // training
    size_t steps = 2000;
    size_t batch = 4;
    double base_lr = 2e-3;
    double lr_factor_image = 0.1;
    double lr_factor_text = 0.0;
    double data_ratio = 1.0;
    uint64_t seed = 42;
    size_t checkpoint_every = 500;

    // synthetic data
    uint64_t data_seed = 90000;
    size_t train_count = 500;
    size_t val_count = 50;
    size_t test_count = 100;
    size_t min_regions = 1;
    size_t max_regions = 3;
    size_t min_distractors = 1;
    size_t max_distractors = 4;
    double min_coverage = 0.02;
    double max_coverage = 0.40;

    // benchmark protocol
    size_t bench_warmup = 20;
    size_t bench_iters = 300;

    static Config desk() { return Config{}; }

    static Config paper() {
        Config c;
        c.preset = "paper";
        c.C = 1024;
        c.D = 512;
        c.s = 32;
        c.n_prompts = 4;
        c.vpg_layers = 6;
        c.vpg_heads = 4;
        c.vpg_width = 256;
        c.vpg_ffn = 1024;
        return c;
    }

    bool has_text_path() const { return use_predefined || n_prompts > 0; }

    size_t latent_h() const { return H / s; }
    size_t latent_w() const { return W / s; }

    void validate() const {
        if (s == 0 || (s & (s - 1)) != 0)
            throw ConfigError("downsampling ratio s must be a power of two, got " +
                              std::to_string(s));
        if (H % s != 0 || W % s != 0)
            throw ConfigError("H and W must be divisible by s: H=" + std::to_string(H) +
                              " W=" + std::to_string(W) + " s=" + std::to_string(s));
        if (K != 1) throw ConfigError("K must be 1 (single text class)");
        if (tau <= 0.0) throw ConfigError("tau must be positive, got " + std::to_string(tau));
        if (mode != "fast" && mode != "tcm")
            throw ConfigError("mode must be 'fast' or 'tcm', got '" + mode + "'");
        if (C % 2 != 0) throw ConfigError("C must be even (head halves it)");
        if (vpg_width % vpg_heads != 0)
            throw ConfigError("vpg_width must be divisible by vpg_heads");
        if (D % text_heads != 0)
            throw ConfigError("D must be divisible by text_heads");
        if (text_depth == 0 || vpg_layers == 0)
            throw ConfigError("text_depth and vpg_layers must be >= 1");
        if (!has_text_path() && (use_lg || use_vg || use_aux || use_bsm))
            throw ConfigError(
                "use_lg/use_vg/use_aux/use_bsm require a text path "
                "(use_predefined or n_prompts > 0)");
        if (data_ratio <= 0.0 || data_ratio > 1.0)
            throw ConfigError("data_ratio must be in (0, 1]");
        if (min_regions > max_regions || min_distractors > max_distractors)
            throw ConfigError("min/max region or distractor counts inverted");
        if (min_coverage < 0.0 || max_coverage > 1.0 || min_coverage >= max_coverage)
            throw ConfigError("coverage bounds must satisfy 0 <= min < max <= 1");
        if (batch == 0) throw ConfigError("batch must be >= 1");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["preset"] = preset;
        j["H"] = H;
        j["W"] = W;
        j["C"] = C;
        j["D"] = D;
        j["s"] = s;
        j["n_prompts"] = n_prompts;
        j["K"] = K;
        j["text_depth"] = text_depth;
        j["text_heads"] = text_heads;
        j["vpg_layers"] = vpg_layers;
        j["vpg_heads"] = vpg_heads;
        j["vpg_width"] = vpg_width;
        j["vpg_ffn"] = vpg_ffn;
        j["tau"] = tau;
        j["lambda"] = lambda;
        j["mode"] = mode;
        j["use_predefined"] = use_predefined;
        j["use_lg"] = use_lg;
        j["use_vg"] = use_vg;
        j["use_aux"] = use_aux;
        j["use_bsm"] = use_bsm;
        j["steps"] = steps;
        j["batch"] = batch;
        j["base_lr"] = base_lr;
        j["lr_factor_image"] = lr_factor_image;
        j["lr_factor_text"] = lr_factor_text;
        j["data_ratio"] = data_ratio;
        j["seed"] = seed;
        j["checkpoint_every"] = checkpoint_every;
        j["data_seed"] = data_seed;
        j["train_count"] = train_count;
        j["val_count"] = val_count;
        j["test_count"] = test_count;
        j["min_regions"] = min_regions;
        j["max_regions"] = max_regions;
        j["min_distractors"] = min_distractors;
        j["max_distractors"] = max_distractors;
        j["min_coverage"] = min_coverage;
        j["max_coverage"] = max_coverage;
        j["bench_warmup"] = bench_warmup;
        j["bench_iters"] = bench_iters;
        return j;
    }

    static Config from_json(const nlohmann::json& j) {
        Config c;
        auto get = [&j](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("preset", c.preset);
        get("H", c.H);
        get("W", c.W);
        get("C", c.C);
        get("D", c.D);
        get("s", c.s);
        get("n_prompts", c.n_prompts);
        get("K", c.K);
        get("text_depth", c.text_depth);
        get("text_heads", c.text_heads);
        get("vpg_layers", c.vpg_layers);
        get("vpg_heads", c.vpg_heads);
        get("vpg_width", c.vpg_width);
        get("vpg_ffn", c.vpg_ffn);
        get("tau", c.tau);
        get("lambda", c.lambda);
        get("mode", c.mode);
        get("use_predefined", c.use_predefined);
        get("use_lg", c.use_lg);
        get("use_vg", c.use_vg);
        get("use_aux", c.use_aux);
        get("use_bsm", c.use_bsm);
        get("steps", c.steps);
        get("batch", c.batch);
        get("base_lr", c.base_lr);
        get("lr_factor_image", c.lr_factor_image);
        get("lr_factor_text", c.lr_factor_text);
        get("data_ratio", c.data_ratio);
        get("seed", c.seed);
        get("checkpoint_every", c.checkpoint_every);
        get("data_seed", c.data_seed);
        get("train_count", c.train_count);
        get("val_count", c.val_count);
        get("test_count", c.test_count);
        get("min_regions", c.min_regions);
        get("max_regions", c.max_regions);
        get("min_distractors", c.min_distractors);
        get("max_distractors", c.max_distractors);
        get("min_coverage", c.min_coverage);
        get("max_coverage", c.max_coverage);
        get("bench_warmup", c.bench_warmup);
        get("bench_iters", c.bench_iters);
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw IoError("cannot open config: " + path.string());
        nlohmann::json j;
        try {
            is >> j;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("cannot parse config " + path.string() + ": " + e.what());
        }
        return from_json(j);
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream os(path);
        if (!os) throw IoError("cannot write config: " + path.string());
        os << to_json().dump(2) << "\n";
    }

    // Hash of the fields that determine the model itself: architecture,
    // seed, cue mode, ablation switches, temperatures. Training policy and
    // benchmark knobs are excluded so a checkpoint stays loadable when they
    // change. Guards checkpoints and text caches.
    uint64_t hash() const {
        nlohmann::json j;
        j["H"] = H;
        j["W"] = W;
        j["C"] = C;
        j["D"] = D;
        j["s"] = s;
        j["n_prompts"] = n_prompts;
        j["K"] = K;
        j["text_depth"] = text_depth;
        j["text_heads"] = text_heads;
        j["vpg_layers"] = vpg_layers;
        j["vpg_heads"] = vpg_heads;
        j["vpg_width"] = vpg_width;
        j["vpg_ffn"] = vpg_ffn;
        j["tau"] = tau;
        j["lambda"] = lambda;
        j["mode"] = mode;
        j["use_predefined"] = use_predefined;
        j["use_lg"] = use_lg;
        j["use_vg"] = use_vg;
        j["use_aux"] = use_aux;
        j["use_bsm"] = use_bsm;
        j["seed"] = seed;
        return fnv1a64(j.dump());
    }

    // Hash of the fields that determine dataset contents (manifests).
    uint64_t gen_hash() const {
        nlohmann::json j;
        j["H"] = H;
        j["W"] = W;
        j["data_seed"] = data_seed;
        j["train_count"] = train_count;
        j["val_count"] = val_count;
        j["test_count"] = test_count;
        j["min_regions"] = min_regions;
        j["max_regions"] = max_regions;
        j["min_distractors"] = min_distractors;
        j["max_distractors"] = max_distractors;
        j["min_coverage"] = min_coverage;
        j["max_coverage"] = max_coverage;
        return fnv1a64(j.dump());
    }
};

inline std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace ftcm
