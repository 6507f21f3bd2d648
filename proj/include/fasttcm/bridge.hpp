#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fasttcm/config.hpp"
#include "fasttcm/nn.hpp"
#include "fasttcm/serialize.hpp"

namespace ftcm {

// Conditional-cue generator: a two-layer feed-forward network
//   cc = LN(relu(LN(input) W1 + b1)) W2 + b2
// fed by the trainable meta query in fast mode, or by the per-image global
// feature in tcm mode (which precludes caching the text path).
class LanguagePromptGenerator {
public:
    LanguagePromptGenerator() = default;

    LanguagePromptGenerator(const Config& cfg, Rng base) : mode_(cfg.mode) {
        const size_t c = cfg.C, d = cfg.D;
        ln1_ = nn::LayerNormParams(c, true);
        w1_ = nn::xavier_init("lpg.w1", base, {c, c}, c, c, true);
        b1_ = nn::zeros({c}, true);
        ln2_ = nn::LayerNormParams(c, true);
        // damped output projection: the cue starts as a small perturbation of
        // the prompt rows
        w2_ = nn::gaussian("lpg.w2", base, {c, d}, 0.04, true);
        b2_ = nn::zeros({d}, true);
    }

    const std::string& mode() const { return mode_; }

    // fast mode: cc from the meta query; image-independent.
    Tensor generate(const Tensor& meta_query) const {
        if (mode_ != "fast")
            throw ModeError("generate_cc requires fast mode, generator is in '" + mode_ +
                            "' mode");
        return run(meta_query);
    }

    // tcm mode: cc from the per-image global feature.
    Tensor generate_tcm(const Tensor& global_feature) const {
        if (mode_ != "tcm")
            throw ModeError("generate_cc_tcm requires tcm mode, generator is in '" +
                            mode_ + "' mode");
        return run(global_feature);
    }

    void collect_params(ParamMap& out) const {
        ln1_.collect("lpg.ln1", out);
        out.emplace_back("lpg.w1", w1_);
        out.emplace_back("lpg.b1", b1_);
        ln2_.collect("lpg.ln2", out);
        out.emplace_back("lpg.w2", w2_);
        out.emplace_back("lpg.b2", b2_);
    }

private:
    Tensor run(const Tensor& input) const {
        if (input.rank() != 1 || input.dim(0) != w1_.dim(0))
            throw ShapeError("conditional cue input must be [" +
                             std::to_string(w1_.dim(0)) + "], got " +
                             shape_str(input.shape()));
        const size_t c = w1_.dim(0), d = w2_.dim(1);
        Tensor x = reshape(input, {1, c});
        x = nn::linear(ln1_(x), w1_, b1_);
        x = ln2_(relu(x));
        return reshape(nn::linear(x, w2_, b2_), {d});
    }

    std::string mode_ = "fast";
    nn::LayerNormParams ln1_, ln2_;
    Tensor w1_, b1_, w2_, b2_;
};

// t_hat_in = cc + t_in, cc broadcast over every prompt row.
inline Tensor condition_prompt(const Tensor& cc, const Tensor& t_in) {
    if (cc.rank() != 1 || t_in.rank() != 2 || t_in.dim(1) != cc.dim(0))
        throw ShapeError("condition_prompt: incompatible shapes cc=" +
                         shape_str(cc.shape()) + " t_in=" + shape_str(t_in.shape()));
    return add_rowvec(t_in, cc);
}

// Bimodal similarity matching: gates the global image feature into the text
// embedding by their cosine similarity. t_hat_out = sim * global + t_out.
// Disabled, it is the identity on t_out.
inline Tensor bsm(const Tensor& t_out, const Tensor& global_feature, bool enabled = true) {
    if (!enabled) return t_out;
    detail::check_same_shape(t_out, global_feature, "bsm");
    double n_img = 0.0, n_txt = 0.0;
    for (size_t i = 0; i < t_out.size(); ++i) {
        n_img += global_feature.at(i) * global_feature.at(i);
        n_txt += t_out.at(i) * t_out.at(i);
    }
    if (std::sqrt(n_img) < 1e-12 || std::sqrt(n_txt) < 1e-12)
        throw ValueError("bsm: degenerate input, vector norm below 1e-12 (image " +
                         std::to_string(std::sqrt(n_img)) + ", text " +
                         std::to_string(std::sqrt(n_txt)) + ")");
    const Tensor dot = sum(mul(global_feature, t_out));
    const Tensor denom = mul(sqrt(sum(mul(global_feature, global_feature))),
                             sqrt(sum(mul(t_out, t_out))));
    const Tensor sim = div(dot, denom);
    return add(smul(sim, global_feature), t_out);
}

// Cosine similarity value only (reporting/diagnostics).
inline double cosine_similarity(const Tensor& a, const Tensor& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a.at(i) * b.at(i);
        na += a.at(i) * a.at(i);
        nb += b.at(i) * b.at(i);
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Cross-attention transformer decoder: image positions are queries, the text
// embedding is a length-1 key/value sequence. Internally projects C -> width
// and back (entry/exit projections are dimensionally forced when width != C).
// Layers are post-LN: self-attention over queries, cross-attention to text,
// feed-forward.
class VisualPromptGenerator {
public:
    VisualPromptGenerator() = default;

    VisualPromptGenerator(const Config& cfg, Rng base) : cfg_(cfg) {
        const size_t c = cfg.C, w = cfg.vpg_width, f = cfg.vpg_ffn;
        entry_w_ = nn::xavier_init("vpg.entry_w", base, {c, w}, c, w, true);
        entry_b_ = nn::zeros({w}, true);
        for (size_t l = 0; l < cfg.vpg_layers; ++l) {
            const std::string name = "vpg.layer" + std::to_string(l);
            Layer layer;
            layer.self_attn = nn::AttnWeights(name + ".self_attn", base, w, w, true);
            layer.ln1 = nn::LayerNormParams(w, true);
            layer.cross_attn = nn::AttnWeights(name + ".cross_attn", base, w, c, true);
            layer.ln2 = nn::LayerNormParams(w, true);
            layer.ffn_w1 = nn::he_init(name + ".ffn_w1", base, {w, f}, w, true);
            layer.ffn_b1 = nn::zeros({f}, true);
            layer.ffn_w2 = nn::he_init(name + ".ffn_w2", base, {f, w}, f, true);
            layer.ffn_b2 = nn::zeros({w}, true);
            layer.ln3 = nn::LayerNormParams(w, true);
            layers_.push_back(std::move(layer));
        }
        // damped exit projection: the visual prompt starts as a small
        // correction to the raw image embedding
        exit_w_ = nn::gaussian("vpg.exit_w", base, {w, c}, 0.02, true);
        exit_b_ = nn::zeros({c}, true);
    }

    // I [H~, W~, C], t_hat_out [C] -> visual prompt [H~, W~, C]
    Tensor generate(const Tensor& image_embed, const Tensor& t_hat_out) const {
        if (image_embed.rank() != 3 || image_embed.dim(2) != cfg_.C)
            throw ShapeError("visual_prompt: expected [h, w, " + std::to_string(cfg_.C) +
                             "], got " + shape_str(image_embed.shape()));
        if (t_hat_out.shape() != Shape{cfg_.C})
            throw ShapeError("visual_prompt: text embedding must be [" +
                             std::to_string(cfg_.C) + "], got " +
                             shape_str(t_hat_out.shape()));
        const size_t h = image_embed.dim(0), w = image_embed.dim(1);
        const Tensor kv = reshape(t_hat_out, {1, cfg_.C});
        Tensor x = nn::linear(reshape(image_embed, {h * w, cfg_.C}), entry_w_, entry_b_);
        for (const Layer& layer : layers_) {
            x = layer.ln1(
                add(x, nn::multihead_attention(x, x, layer.self_attn, cfg_.vpg_heads)));
            x = layer.ln2(
                add(x, nn::multihead_attention(x, kv, layer.cross_attn, cfg_.vpg_heads)));
            const Tensor ff = nn::linear(relu(nn::linear(x, layer.ffn_w1, layer.ffn_b1)),
                                         layer.ffn_w2, layer.ffn_b2);
            x = layer.ln3(add(x, ff));
        }
        return reshape(nn::linear(x, exit_w_, exit_b_), {h, w, cfg_.C});
    }

    void collect_params(ParamMap& out) const {
        out.emplace_back("vpg.entry_w", entry_w_);
        out.emplace_back("vpg.entry_b", entry_b_);
        for (size_t l = 0; l < layers_.size(); ++l) {
            const std::string name = "vpg.layer" + std::to_string(l);
            layers_[l].self_attn.collect(name + ".self_attn", out);
            layers_[l].ln1.collect(name + ".ln1", out);
            layers_[l].cross_attn.collect(name + ".cross_attn", out);
            layers_[l].ln2.collect(name + ".ln2", out);
            out.emplace_back(name + ".ffn_w1", layers_[l].ffn_w1);
            out.emplace_back(name + ".ffn_b1", layers_[l].ffn_b1);
            out.emplace_back(name + ".ffn_w2", layers_[l].ffn_w2);
            out.emplace_back(name + ".ffn_b2", layers_[l].ffn_b2);
            layers_[l].ln3.collect(name + ".ln3", out);
        }
        out.emplace_back("vpg.exit_w", exit_w_);
        out.emplace_back("vpg.exit_b", exit_b_);
    }

private:
    struct Layer {
        nn::AttnWeights self_attn;
        nn::LayerNormParams ln1;
        nn::AttnWeights cross_attn;
        nn::LayerNormParams ln2;
        Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
        nn::LayerNormParams ln3;
    };

    Config cfg_;
    Tensor entry_w_, entry_b_;
    std::vector<Layer> layers_;
    Tensor exit_w_, exit_b_;
};

// Prompted embeddings: I_hat = I + I_tilde.
inline Tensor fuse(const Tensor& image_embed, const Tensor& visual_prompt) {
    detail::check_same_shape(image_embed, visual_prompt, "fuse");
    return add(image_embed, visual_prompt);
}

// Instance-language matching score map: P = sigmoid(I_hat . t_hat_out / tau),
// shape [H~, W~, 1]. Every value lies strictly in (0, 1).
inline Tensor match(const Tensor& fused, const Tensor& t_hat_out, double tau) {
    if (tau <= 0.0)
        throw ConfigError("match: tau must be positive, got " + std::to_string(tau));
    if (fused.rank() != 3 || t_hat_out.rank() != 1 || fused.dim(2) != t_hat_out.dim(0))
        throw ShapeError("match: incompatible shapes " + shape_str(fused.shape()) +
                         " vs " + shape_str(t_hat_out.shape()));
    const size_t h = fused.dim(0), w = fused.dim(1), c = fused.dim(2);
    const Tensor logits = scale(
        matmul(reshape(fused, {h * w, c}), reshape(t_hat_out, {c, 1})), 1.0 / tau);
    return reshape(sigmoid(logits), {h, w, 1});
}

namespace detail {

inline void check_binary_labels(const Tensor& y, const char* op) {
    for (size_t i = 0; i < y.size(); ++i)
        if (y.at(i) != 0.0 && y.at(i) != 1.0)
            throw ValueError(std::string(op) + ": labels must be binary, found " +
                             std::to_string(y.at(i)));
}

} // namespace detail

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
inline Tensor bce_loss(const Tensor& probs, const Tensor& labels) {
    detail::check_same_shape(probs, labels, "bce_loss");
    const Tensor p = clamp(probs, 1e-7, 1.0 - 1e-7);
    const Tensor ones(labels.shape(), 1.0);
    const Tensor term = add(mul(labels, log(p)), mul(sub(ones, labels), log(sub(ones, p))));
    return neg(mean(term));
}

// Auxiliary loss: mean BCE between the match map and the coarse text mask.
inline Tensor aux_loss(const Tensor& match_map, const Tensor& coarse_mask) {
    detail::check_binary_labels(coarse_mask, "aux_loss");
    return bce_loss(match_map, coarse_mask);
}

// L_total = L_task + lambda * L_aux.
inline Tensor total_loss(const Tensor& task, const Tensor& aux, double lambda) {
    if (task.size() != 1 || aux.size() != 1)
        throw ShapeError("total_loss: expected scalar losses");
    return add(task, scale(aux, lambda));
}

// ---------------------------------------------------------------------------
// offline text-embedding cache

inline constexpr const char* kTextCacheSection = "t_out_cache";

inline void write_text_cache(const std::filesystem::path& path, const Tensor& t_out,
                             uint64_t config_hash) {
    std::vector<ContainerSection> sections;
    sections.push_back({kTextCacheSection, pack_named_tensors({{"t_out", t_out}})});
    sections.push_back({"config_hash", pack_string(hash_hex(config_hash))});
    write_container_file(path, sections);
}

inline Tensor load_text_cache(const std::filesystem::path& path, uint64_t config_hash) {
    const auto sections = read_container_file(path);
    const std::string stored = unpack_string(find_section(sections, "config_hash").payload);
    if (stored != hash_hex(config_hash))
        throw ConfigError("text cache config hash mismatch: cache " + stored +
                          " vs current " + hash_hex(config_hash));
    auto records = unpack_named_tensors(find_section(sections, kTextCacheSection).payload);
    if (records.size() != 1 || records[0].first != "t_out")
        throw IoError("text cache must contain exactly one 't_out' record");
    return records[0].second;
}

} // namespace ftcm
