#pragma once

#include <algorithm>
#include <vector>

#include "fasttcm/synthgen.hpp"
#include "fasttcm/tensor.hpp"

namespace ftcm {

struct EvalReport {
    double pixel_p = 0.0;
    double pixel_r = 0.0;
    double pixel_f = 0.0;
    double region_f = 0.0;
    double loss = 0.0;
};

inline double f_measure(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

struct PixelCounts {
    size_t tp = 0, fp = 0, fn = 0;

    void add(const Tensor& pred_mask, const Tensor& gt_mask) {
        for (size_t i = 0; i < pred_mask.size(); ++i) {
            const bool p = pred_mask.at(i) != 0.0;
            const bool g = gt_mask.at(i) != 0.0;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
    }

    double precision() const { return tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0; }
    double recall() const { return tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0; }
};

inline Tensor threshold_mask(const Tensor& prob, double thresh = 0.5) {
    Tensor mask(prob.shape());
    for (size_t i = 0; i < prob.size(); ++i) mask.at(i) = prob.at(i) >= thresh ? 1.0 : 0.0;
    return mask;
}

// 8-connected components of a binary [H, W, 1] mask; each component is a
// sorted list of flat pixel indices.
inline std::vector<std::vector<size_t>> connected_components(const Tensor& mask) {
    const size_t H = mask.dim(0), W = mask.dim(1);
    std::vector<int> label(H * W, -1);
    std::vector<std::vector<size_t>> components;
    std::vector<size_t> stack;
    for (size_t start = 0; start < H * W; ++start) {
        if (mask.at(start) == 0.0 || label[start] >= 0) continue;
        const int id = static_cast<int>(components.size());
        components.emplace_back();
        stack.push_back(start);
        label[start] = id;
        while (!stack.empty()) {
            const size_t px = stack.back();
            stack.pop_back();
            components[id].push_back(px);
            const long y = static_cast<long>(px / W), x = static_cast<long>(px % W);
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const long ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= static_cast<long>(H) || nx < 0 ||
                        nx >= static_cast<long>(W))
                        continue;
                    const size_t np = static_cast<size_t>(ny) * W + static_cast<size_t>(nx);
                    if (mask.at(np) != 0.0 && label[np] < 0) {
                        label[np] = id;
                        stack.push_back(np);
                    }
                }
        }
        std::sort(components[id].begin(), components[id].end());
    }
    return components;
}

inline double iou_pixel_sets(const std::vector<size_t>& a, const std::vector<size_t>& b) {
    size_t inter = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    const size_t uni = a.size() + b.size() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

struct RegionCounts {
    size_t matched = 0, predicted = 0, truth = 0;

    // Greedy one-to-one matching at IoU >= 0.5, highest IoU first.
    void add(const std::vector<std::vector<size_t>>& pred_components,
             const std::vector<std::vector<size_t>>& gt_regions, double iou_thresh = 0.5) {
        predicted += pred_components.size();
        truth += gt_regions.size();
        struct Pair {
            double iou;
            size_t pi, gi;
        };
        std::vector<Pair> pairs;
        for (size_t pi = 0; pi < pred_components.size(); ++pi)
            for (size_t gi = 0; gi < gt_regions.size(); ++gi) {
                const double iou = iou_pixel_sets(pred_components[pi], gt_regions[gi]);
                if (iou >= iou_thresh) pairs.push_back({iou, pi, gi});
            }
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            if (a.iou != b.iou) return a.iou > b.iou;
            if (a.pi != b.pi) return a.pi < b.pi;
            return a.gi < b.gi;
        });
        std::vector<bool> pused(pred_components.size(), false), gused(gt_regions.size(), false);
        for (const Pair& p : pairs) {
            if (pused[p.pi] || gused[p.gi]) continue;
            pused[p.pi] = gused[p.gi] = true;
            ++matched;
        }
    }

    double precision() const {
        return predicted > 0 ? static_cast<double>(matched) / predicted : 0.0;
    }
    double recall() const { return truth > 0 ? static_cast<double>(matched) / truth : 0.0; }
};

// Ground-truth region pixel sets rasterized one region at a time.
inline std::vector<std::vector<size_t>> gt_region_pixel_sets(
    const std::vector<RotatedRect>& regions, size_t H, size_t W) {
    std::vector<std::vector<size_t>> sets;
    for (const RotatedRect& r : regions) {
        std::vector<size_t> px;
        for (size_t y = 0; y < H; ++y)
            for (size_t x = 0; x < W; ++x)
                if (r.contains(x + 0.5, y + 0.5)) px.push_back(y * W + x);
        sets.push_back(std::move(px));
    }
    return sets;
}

} // namespace ftcm
