#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fasttcm/bridge.hpp"
#include "fasttcm/config.hpp"
#include "fasttcm/encoders.hpp"
#include "fasttcm/head.hpp"

namespace ftcm {

// The full bridged model: image/text encoders, learnable prompts, meta query,
// language prompt generator, bimodal similarity matching, visual prompt
// generator, instance-language matching, and the segmentation head. Ablation
// switches in the config turn individual pieces into identities.
class FastTcm {
public:
    struct Forward {
        Tensor image_embed;    // I      [H~, W~, C]
        Tensor global_feature; // I_bar  [C]
        Tensor t_in;           // prompt input [n(+1), D] (text path only)
        Tensor cc;             // conditional cue [D] (use_lg only)
        Tensor t_out;          // text embedding [C]
        Tensor t_hat_out;      // post-BSM text embedding [C]
        Tensor visual_prompt;  // I_tilde [H~, W~, C] (use_vg only)
        Tensor fused;          // I_hat  [H~, W~, C]
        Tensor match_map;      // P      [H~, W~, 1] (text path only)
        Tensor prob;           // head output [H, W, 1]
    };

    struct Losses {
        Tensor total, task, aux;
    };

    FastTcm() = default;

    explicit FastTcm(const Config& cfg) : cfg_(cfg) {
        cfg_.validate();
        Rng base(cfg.seed);
        image_encoder_ = ImageEncoder(cfg, base);
        word_embed_ = WordEmbedding(cfg, base);
        text_encoder_ = TextEncoder(cfg, base);
        head_ = SegHead(cfg, base);
        if (cfg.has_text_path()) {
            if (cfg.n_prompts > 0)
                learnable_prompts_ = nn::gaussian("prompts.learnable", base,
                                                  {cfg.n_prompts, cfg.D}, 0.02, true);
            if (cfg.use_lg) {
                lpg_ = LanguagePromptGenerator(cfg, base);
                meta_query_ = nn::gaussian("meta_query", base, {cfg.C}, 0.02, true);
            }
            if (cfg.use_vg) vpg_ = VisualPromptGenerator(cfg, base);
        }
    }

    const Config& config() const { return cfg_; }

    // Prompt input t_in: learnable rows then the embedded "Text" token.
    Tensor assemble_prompt() const {
        if (!cfg_.has_text_path())
            throw ModeError("assemble_prompt: model has no text path");
        std::optional<Tensor> learnable;
        if (cfg_.n_prompts > 0) learnable = learnable_prompts_;
        if (cfg_.use_predefined) {
            const Tensor token = word_embed_.lookup("Text");
            return learnable ? concat_rows(*learnable, token) : token;
        }
        return *learnable;
    }

    // Image-independent text path (fast mode): cc -> conditioned prompt ->
    // frozen text encoder. This is the cacheable computation.
    Tensor text_path() const {
        if (!cfg_.has_text_path())
            throw ModeError("text_path: model has no text path");
        if (cfg_.use_lg && cfg_.mode != "fast")
            throw ModeError("text_path: image-independent path requires fast mode");
        Tensor t_in = assemble_prompt();
        if (cfg_.use_lg) t_in = condition_prompt(lpg_.generate(meta_query_), t_in);
        return text_encoder_.encode(t_in);
    }

    // Full forward pass. `cached_t_out` substitutes the text path when given
    // (offline inference); BSM and everything downstream still run per image.
    Forward forward(const Tensor& image, const Tensor* cached_t_out = nullptr) const {
        Forward f;
        f.image_embed = image_encoder_.encode(image);
        if (!cfg_.has_text_path()) {
            f.fused = f.image_embed;
            f.prob = head_.forward(f.fused, nullptr);
            return f;
        }
        f.global_feature = global_pool(f.image_embed);
        if (cached_t_out != nullptr) {
            f.t_out = *cached_t_out;
        } else {
            f.t_in = assemble_prompt();
            if (cfg_.use_lg) {
                f.cc = cfg_.mode == "fast" ? lpg_.generate(meta_query_)
                                           : lpg_.generate_tcm(f.global_feature);
                f.t_in = condition_prompt(f.cc, f.t_in);
            }
            f.t_out = text_encoder_.encode(f.t_in);
        }
        f.t_hat_out = bsm(f.t_out, f.global_feature, cfg_.use_bsm);
        if (cfg_.use_vg) {
            f.visual_prompt = vpg_.generate(f.image_embed, f.t_hat_out);
            f.fused = fuse(f.image_embed, f.visual_prompt);
        } else {
            f.fused = f.image_embed;
        }
        f.match_map = match(f.fused, f.t_hat_out, cfg_.tau);
        f.prob = head_.forward(f.fused, &f.match_map);
        return f;
    }

    // Losses for one sample. `mask` is the full-resolution binary ground
    // truth; `coarse_mask` its block-max downsample at the latent grid.
    Losses loss(const Forward& f, const Tensor& mask, const Tensor& coarse_mask) const {
        Losses l;
        l.task = task_loss(f.prob, mask);
        if (cfg_.has_text_path() && cfg_.use_aux) {
            l.aux = aux_loss(f.match_map, coarse_mask);
            l.total = total_loss(l.task, l.aux, cfg_.lambda);
        } else {
            l.aux = Tensor::scalar(0.0);
            l.total = l.task;
        }
        return l;
    }

    // --- parameter access -------------------------------------------------

    ParamMap encoder_params() const {
        ParamMap out;
        image_encoder_.collect_params(out);
        word_embed_.collect_params(out);
        text_encoder_.collect_params(out);
        return out;
    }

    ParamMap bridge_params() const {
        ParamMap out;
        if (cfg_.has_text_path()) {
            if (cfg_.n_prompts > 0) out.emplace_back("prompts.learnable", learnable_prompts_);
            if (cfg_.use_lg) {
                out.emplace_back("meta_query", meta_query_);
                lpg_.collect_params(out);
            }
            if (cfg_.use_vg) vpg_.collect_params(out);
        }
        return out;
    }

    ParamMap head_params() const {
        ParamMap out;
        head_.collect_params(out);
        return out;
    }

    ParamMap all_params() const {
        ParamMap out = encoder_params();
        for (auto& p : bridge_params()) out.push_back(p);
        for (auto& p : head_params()) out.push_back(p);
        return out;
    }

    // Trainable parameters only (requires_grad).
    ParamMap trainable_params() const {
        ParamMap out;
        for (auto& p : all_params())
            if (p.second.requires_grad()) out.push_back(p);
        return out;
    }

    struct ParamGroup {
        std::string name;
        double lr_factor;
        ParamMap params;
    };

    // Optimizer groups: bridge/head at factor 1, encoders at configured factors.
    std::vector<ParamGroup> param_groups() const {
        std::vector<ParamGroup> groups;
        ParamGroup image{"image_encoder", cfg_.lr_factor_image, {}};
        ParamGroup text{"text_encoder", cfg_.lr_factor_text, {}};
        ParamGroup bridge{"bridge", 1.0, {}};
        ParamGroup head{"head", 1.0, {}};
        ParamMap enc;
        image_encoder_.collect_params(enc);
        for (auto& p : enc)
            if (p.second.requires_grad()) image.params.push_back(p);
        ParamMap txt;
        word_embed_.collect_params(txt);
        text_encoder_.collect_params(txt);
        for (auto& p : txt)
            if (p.second.requires_grad()) text.params.push_back(p);
        for (auto& p : bridge_params())
            if (p.second.requires_grad()) bridge.params.push_back(p);
        for (auto& p : head_params())
            if (p.second.requires_grad()) head.params.push_back(p);
        groups.push_back(std::move(image));
        groups.push_back(std::move(text));
        groups.push_back(std::move(bridge));
        groups.push_back(std::move(head));
        return groups;
    }

    // Overwrite tensor values from named records (checkpoint loading).
    void load_encoder_state(const NamedTensors& records) {
        ParamMap dst = encoder_params();
        load_named_into(records, dst);
    }
    void load_bridge_state(const NamedTensors& records) {
        ParamMap dst = bridge_params();
        load_named_into(records, dst);
    }
    void load_head_state(const NamedTensors& records) {
        ParamMap dst = head_params();
        load_named_into(records, dst);
    }

private:
    Config cfg_;
    ImageEncoder image_encoder_;
    WordEmbedding word_embed_;
    TextEncoder text_encoder_;
    Tensor learnable_prompts_;
    Tensor meta_query_;
    LanguagePromptGenerator lpg_;
    VisualPromptGenerator vpg_;
    SegHead head_;
};

} // namespace ftcm
