#pragma once

#include <string>

#include "fasttcm/bridge.hpp"
#include "fasttcm/config.hpp"
#include "fasttcm/nn.hpp"

namespace ftcm {

// Minimal downstream segmentation head: concat(I_hat, P) channels -> 1x1 conv
// to C/2 -> relu -> nearest-neighbor upsample xs -> 1x1 conv to 1 -> sigmoid.
// Without a text path the match-map channel is absent.
class SegHead {
public:
    SegHead() = default;

    SegHead(const Config& cfg, Rng base) : cfg_(cfg) {
        in_channels_ = cfg.C + (cfg.has_text_path() ? 1 : 0);
        const size_t mid = cfg.C / 2;
        w1_ = nn::he_init("head.conv1.weight", base, {in_channels_, mid}, in_channels_,
                          true);
        b1_ = nn::zeros({mid}, true);
        w2_ = nn::he_init("head.conv2.weight", base, {mid, 1}, mid, true);
        b2_ = nn::zeros({1}, true);
    }

    size_t in_channels() const { return in_channels_; }

    // I_hat [H~, W~, C], match_map [H~, W~, 1] or null -> prob [H, W, 1]
    Tensor forward(const Tensor& fused, const Tensor* match_map) const {
        if (fused.rank() != 3 || fused.dim(2) != cfg_.C)
            throw ShapeError("head_forward: expected [h, w, " + std::to_string(cfg_.C) +
                             "], got " + shape_str(fused.shape()));
        const size_t h = fused.dim(0), w = fused.dim(1);
        Tensor x = reshape(fused, {h * w, cfg_.C});
        if (in_channels_ == cfg_.C + 1) {
            if (match_map == nullptr)
                throw ShapeError("head_forward: match map required by this head");
            if (match_map->shape() != Shape{h, w, 1})
                throw ShapeError("head_forward: match map shape " +
                                 shape_str(match_map->shape()) + " does not match " +
                                 shape_str(fused.shape()));
            x = concat_cols(x, reshape(*match_map, {h * w, 1}));
        } else if (match_map != nullptr) {
            throw ShapeError("head_forward: this head takes no match map");
        }
        const size_t mid = cfg_.C / 2;
        Tensor hmid = relu(nn::linear(x, w1_, b1_));
        Tensor up = upsample_nearest(reshape(hmid, {h, w, mid}), cfg_.s);
        return sigmoid(conv1x1(up, w2_, b2_));
    }

    void collect_params(ParamMap& out) const {
        out.emplace_back("head.conv1.weight", w1_);
        out.emplace_back("head.conv1.bias", b1_);
        out.emplace_back("head.conv2.weight", w2_);
        out.emplace_back("head.conv2.bias", b2_);
    }

private:
    Config cfg_;
    size_t in_channels_ = 0;
    Tensor w1_, b1_, w2_, b2_;
};

// Dice loss with smoothing 1.0: 1 - (2*intersection + 1) / (sum(p) + sum(y) + 1).
inline Tensor dice_loss(const Tensor& probs, const Tensor& labels) {
    detail::check_same_shape(probs, labels, "dice_loss");
    const Tensor inter = sum(mul(probs, labels));
    const Tensor num = add_scalar(scale(inter, 2.0), 1.0);
    const Tensor den = add_scalar(add(sum(probs), sum(labels)), 1.0);
    return add_scalar(neg(div(num, den)), 1.0);
}

// Task loss for the toy head: mean BCE + dice, equally weighted.
inline Tensor task_loss(const Tensor& pred, const Tensor& gt) {
    detail::check_binary_labels(gt, "task_loss");
    detail::check_same_shape(pred, gt, "task_loss");
    return add(bce_loss(pred, gt), dice_loss(pred, gt));
}

} // namespace ftcm
