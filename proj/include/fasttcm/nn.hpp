#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fasttcm/ops.hpp"
#include "fasttcm/rng.hpp"

namespace ftcm {

// Named parameter registry. Tensors share storage with the owning module, so
// optimizer updates are visible in place. Order is construction order and is
// deterministic.
using ParamMap = std::vector<std::pair<std::string, Tensor>>;

namespace nn {

// Gaussian init with a stream derived from (seed, name); values do not depend
// on construction order.
inline Tensor gaussian(const std::string& name, Rng base, Shape shape, double stddev,
                       bool requires_grad) {
    Rng r = base.fork(fnv1a64(name));
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t.at(i) = r.normal(0.0, stddev);
    t.set_requires_grad(requires_grad);
    return t;
}

inline Tensor he_init(const std::string& name, Rng base, Shape shape, size_t fan_in,
                      bool requires_grad, double gain = 1.0) {
    return gaussian(name, base, std::move(shape),
                    gain * std::sqrt(2.0 / static_cast<double>(fan_in)), requires_grad);
}

inline Tensor xavier_init(const std::string& name, Rng base, Shape shape, size_t fan_in,
                          size_t fan_out, bool requires_grad) {
    return gaussian(name, base, std::move(shape),
                    std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)),
                    requires_grad);
}

inline Tensor zeros(Shape shape, bool requires_grad) {
    Tensor t(std::move(shape));
    t.set_requires_grad(requires_grad);
    return t;
}

inline Tensor ones(Shape shape, bool requires_grad) {
    Tensor t(std::move(shape), 1.0);
    t.set_requires_grad(requires_grad);
    return t;
}

// x[m, in] . w[in, out] + b[out]
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_rowvec(matmul(x, w), b);
}

struct AttnWeights {
    Tensor wq, bq; // [width, width], [width]
    Tensor wk, bk; // [kv_dim, width], [width]
    Tensor wv, bv; // [kv_dim, width], [width]
    Tensor wo, bo; // [width, width], [width]

    AttnWeights() = default;
    AttnWeights(const std::string& prefix, Rng base, size_t width, size_t kv_dim,
                bool requires_grad) {
        wq = xavier_init(prefix + ".wq", base, {width, width}, width, width, requires_grad);
        bq = zeros({width}, requires_grad);
        wk = xavier_init(prefix + ".wk", base, {kv_dim, width}, kv_dim, width, requires_grad);
        bk = zeros({width}, requires_grad);
        wv = xavier_init(prefix + ".wv", base, {kv_dim, width}, kv_dim, width, requires_grad);
        bv = zeros({width}, requires_grad);
        wo = xavier_init(prefix + ".wo", base, {width, width}, width, width, requires_grad);
        bo = zeros({width}, requires_grad);
    }

    void collect(const std::string& prefix, ParamMap& out) const {
        out.emplace_back(prefix + ".wq", wq);
        out.emplace_back(prefix + ".bq", bq);
        out.emplace_back(prefix + ".wk", wk);
        out.emplace_back(prefix + ".bk", bk);
        out.emplace_back(prefix + ".wv", wv);
        out.emplace_back(prefix + ".bv", bv);
        out.emplace_back(prefix + ".wo", wo);
        out.emplace_back(prefix + ".bo", bo);
    }
};

// Scaled dot-product multi-head attention. Queries come from q_in [Tq, width],
// keys/values from kv_in [Tk, kv_dim]. Heads split the width evenly.
inline Tensor multihead_attention(const Tensor& q_in, const Tensor& kv_in,
                                  const AttnWeights& w, size_t heads) {
    const size_t width = w.wq.dim(1);
    const size_t dh = width / heads;
    const Tensor q = linear(q_in, w.wq, w.bq);
    const Tensor k = linear(kv_in, w.wk, w.bk);
    const Tensor v = linear(kv_in, w.wv, w.bv);
    Tensor merged;
    for (size_t h = 0; h < heads; ++h) {
        const Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        const Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        const Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        const Tensor scores =
            scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
        const Tensor attn = softmax(scores, 1);
        const Tensor oh = matmul(attn, vh);
        merged = h == 0 ? oh : concat_cols(merged, oh);
    }
    return linear(merged, w.wo, w.bo);
}

struct LayerNormParams {
    Tensor gamma, beta;

    LayerNormParams() = default;
    LayerNormParams(size_t d, bool requires_grad) {
        gamma = ones({d}, requires_grad);
        beta = zeros({d}, requires_grad);
    }

    Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }

    void collect(const std::string& prefix, ParamMap& out) const {
        out.emplace_back(prefix + ".gamma", gamma);
        out.emplace_back(prefix + ".beta", beta);
    }
};

} // namespace nn

// Copies tensor values from `src` records into matching names of `dst`.
// Every destination tensor must be covered and shapes must agree.
inline void load_named_into(const std::vector<std::pair<std::string, Tensor>>& src,
                            ParamMap& dst) {
    for (auto& [name, tensor] : dst) {
        bool found = false;
        for (const auto& [sname, stensor] : src) {
            if (sname != name) continue;
            if (stensor.shape() != tensor.shape())
                throw ShapeError("loading '" + name + "': shape " +
                                 shape_str(stensor.shape()) + " does not match " +
                                 shape_str(tensor.shape()));
            std::copy(stensor.values().begin(), stensor.values().end(),
                      tensor.values().begin());
            found = true;
            break;
        }
        if (!found) throw IoError("missing tensor record '" + name + "'");
    }
}

} // namespace ftcm
