#pragma once

#include <string>
#include <vector>

#include "fasttcm/config.hpp"
#include "fasttcm/nn.hpp"

namespace ftcm {

// Frozen word-embedding table over a tiny fixed vocabulary. Stands in for a
// real tokenizer+embedding; only single-token class prompts are supported.
class WordEmbedding {
public:
    WordEmbedding() = default;

    WordEmbedding(const Config& cfg, Rng base) {
        table_ = nn::gaussian("word_embedding.table", base,
                              {vocabulary().size(), cfg.D}, 0.02,
                              /*requires_grad=*/false);
    }

    static const std::vector<std::string>& vocabulary() {
        static const std::vector<std::string> vocab = {"Text", "Background", "Object",
                                                       "Region", "Shape"};
        return vocab;
    }

    // Returns the embedded token as [1, D].
    Tensor lookup(const std::string& token) const {
        const auto& vocab = vocabulary();
        for (size_t i = 0; i < vocab.size(); ++i) {
            if (vocab[i] == token) {
                const size_t d = table_.dim(1);
                Tensor row(Shape{1, d});
                for (size_t j = 0; j < d; ++j) row.at(0, j) = table_.at(i, j);
                return row;
            }
        }
        throw ValueError("unknown vocabulary token '" + token + "'");
    }

    void collect_params(ParamMap& out) const {
        out.emplace_back("word_embedding.table", table_);
    }

private:
    Tensor table_;
};

// Small strided convolution stack standing in for the CLIP image encoder.
// log2(s) blocks of (conv k3 s2 p1, relu); channels ramp up to C. Satisfies
// the shape contract [H, W, 3] -> [H/s, W/s, C].
class ImageEncoder {
public:
    ImageEncoder() = default;

    ImageEncoder(const Config& cfg, Rng base) : cfg_(cfg) {
        size_t nb = 0;
        for (size_t v = cfg.s; v > 1; v >>= 1) ++nb;
        size_t cin = 3;
        for (size_t i = 1; i <= nb; ++i) {
            // channel ramp: ..., C/16, C/4, C
            const size_t shift = 2 * (nb - i);
            const size_t cout = std::max<size_t>(4, cfg.C >> shift);
            const std::string name = "image_encoder.block" + std::to_string(i - 1);
            // damped final block keeps embedding magnitudes (and the
            // temperature-scaled match logits) moderate at init
            const double gain = i == nb ? 0.25 : 1.0;
            Block blk;
            blk.w = nn::he_init(name + ".weight", base, {3, 3, cin, cout}, 9 * cin,
                                /*requires_grad=*/true, gain);
            blk.b = nn::zeros({cout}, /*requires_grad=*/true);
            blocks_.push_back(std::move(blk));
            cin = cout;
        }
    }

    // [H, W, 3] -> [H/s, W/s, C]
    Tensor encode(const Tensor& image) const {
        if (image.shape() != Shape{cfg_.H, cfg_.W, 3})
            throw ShapeError("image_encode: expected shape " +
                             shape_str({cfg_.H, cfg_.W, 3}) + ", got " +
                             shape_str(image.shape()));
        Tensor x = image;
        for (const Block& blk : blocks_) x = relu(conv2d(x, blk.w, blk.b, 2, 1));
        return x;
    }

    void collect_params(ParamMap& out) const {
        for (size_t i = 0; i < blocks_.size(); ++i) {
            const std::string name = "image_encoder.block" + std::to_string(i);
            out.emplace_back(name + ".weight", blocks_[i].w);
            out.emplace_back(name + ".bias", blocks_[i].b);
        }
    }

private:
    struct Block {
        Tensor w, b;
    };

    Config cfg_;
    std::vector<Block> blocks_;
};

// Global image-level feature: mean over spatial positions.
inline Tensor global_pool(const Tensor& image_embed) {
    if (image_embed.rank() != 3)
        throw ShapeError("global_pool: expected rank-3 embedding, got " +
                         shape_str(image_embed.shape()));
    const size_t hw = image_embed.dim(0) * image_embed.dim(1);
    const size_t c = image_embed.dim(2);
    return mean_rows(reshape(image_embed, {hw, c}));
}

// Toy stand-in for the frozen CLIP text encoder: learned (frozen) positional
// table, pre-LN self-attention blocks at width D, final LN, last-token readout
// projected D -> C. Weights are initialized from a fixed stream and then
// frozen by default; lr_factor_text > 0 marks them trainable instead.
class TextEncoder {
public:
    static constexpr size_t kMaxTokens = 64;

    TextEncoder() = default;

    TextEncoder(const Config& cfg, Rng base) : cfg_(cfg) {
        const bool rg = cfg.lr_factor_text > 0.0;
        const size_t d = cfg.D;
        pos_embed_ = nn::gaussian("text_encoder.pos_embed", base, {kMaxTokens, d}, 0.02, rg);
        for (size_t l = 0; l < cfg.text_depth; ++l) {
            const std::string name = "text_encoder.layer" + std::to_string(l);
            Layer layer;
            layer.ln1 = nn::LayerNormParams(d, rg);
            layer.attn = nn::AttnWeights(name + ".attn", base, d, d, rg);
            layer.ln2 = nn::LayerNormParams(d, rg);
            layer.ffn_w1 = nn::he_init(name + ".ffn_w1", base, {d, 4 * d}, d, rg);
            layer.ffn_b1 = nn::zeros({4 * d}, rg);
            layer.ffn_w2 = nn::he_init(name + ".ffn_w2", base, {4 * d, d}, 4 * d, rg);
            layer.ffn_b2 = nn::zeros({d}, rg);
            layers_.push_back(std::move(layer));
        }
        final_ln_ = nn::LayerNormParams(d, rg);
        // small-std readout projection keeps |t_out| comparable to the image
        // feature scale
        proj_ = nn::gaussian("text_encoder.proj", base, {d, cfg.C}, 0.04, rg);
    }

    // [T, D] -> [C]
    Tensor encode(const Tensor& prompt) const {
        if (prompt.rank() != 2 || prompt.dim(1) != cfg_.D)
            throw ShapeError("text_encode: expected [T, " + std::to_string(cfg_.D) +
                             "], got " + shape_str(prompt.shape()));
        const size_t t = prompt.dim(0);
        if (t == 0 || t > kMaxTokens)
            throw ShapeError("text_encode: token count " + std::to_string(t) +
                             " outside [1, " + std::to_string(kMaxTokens) + "]");
        Tensor x = add(prompt, slice_rows(pos_embed_, 0, t));
        for (const Layer& layer : layers_) {
            const Tensor nx = layer.ln1(x);
            x = add(x, nn::multihead_attention(nx, nx, layer.attn, cfg_.text_heads));
            const Tensor h = layer.ln2(x);
            x = add(x, nn::linear(relu(nn::linear(h, layer.ffn_w1, layer.ffn_b1)),
                                  layer.ffn_w2, layer.ffn_b2));
        }
        x = final_ln_(x);
        const Tensor last = slice_rows(x, t - 1, t);
        return reshape(matmul(last, proj_), {cfg_.C});
    }

    void collect_params(ParamMap& out) const {
        out.emplace_back("text_encoder.pos_embed", pos_embed_);
        for (size_t l = 0; l < layers_.size(); ++l) {
            const std::string name = "text_encoder.layer" + std::to_string(l);
            layers_[l].ln1.collect(name + ".ln1", out);
            layers_[l].attn.collect(name + ".attn", out);
            layers_[l].ln2.collect(name + ".ln2", out);
            out.emplace_back(name + ".ffn_w1", layers_[l].ffn_w1);
            out.emplace_back(name + ".ffn_b1", layers_[l].ffn_b1);
            out.emplace_back(name + ".ffn_w2", layers_[l].ffn_w2);
            out.emplace_back(name + ".ffn_b2", layers_[l].ffn_b2);
        }
        final_ln_.collect("text_encoder.final_ln", out);
        out.emplace_back("text_encoder.proj", proj_);
    }

private:
    struct Layer {
        nn::LayerNormParams ln1;
        nn::AttnWeights attn;
        nn::LayerNormParams ln2;
        Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };

    Config cfg_;
    Tensor pos_embed_;
    std::vector<Layer> layers_;
    nn::LayerNormParams final_ln_;
    Tensor proj_;
};

} // namespace ftcm
