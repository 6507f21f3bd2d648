#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "fasttcm/config.hpp"
#include "fasttcm/rng.hpp"
#include "fasttcm/tensor.hpp"

namespace ftcm {

// Rotated rectangle (center, extents, angle in radians). Containment is
// evaluated at pixel centers (ix + 0.5, iy + 0.5) so axis-aligned rectangles
// with integer corners rasterize to exactly w*h pixels.
struct RotatedRect {
    double cx = 0, cy = 0, w = 0, h = 0, theta = 0;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double c = std::cos(theta), s = std::sin(theta);
        const double u = dx * c + dy * s;
        const double v = -dx * s + dy * c;
        return std::abs(u) <= w / 2.0 && std::abs(v) <= h / 2.0;
    }

    void corners(double out_x[4], double out_y[4]) const {
        const double c = std::cos(theta), s = std::sin(theta);
        const double hw = w / 2.0, hh = h / 2.0;
        const double ux = hw * c, uy = hw * s;
        const double vx = -hh * s, vy = hh * c;
        out_x[0] = cx + ux + vx; out_y[0] = cy + uy + vy;
        out_x[1] = cx + ux - vx; out_y[1] = cy + uy - vy;
        out_x[2] = cx - ux + vx; out_y[2] = cy - uy + vy;
        out_x[3] = cx - ux - vx; out_y[3] = cy - uy - vy;
    }

    bool inside_image(size_t img_w, size_t img_h, double margin = 1.0) const {
        double xs[4], ys[4];
        corners(xs, ys);
        for (int i = 0; i < 4; ++i) {
            if (xs[i] < margin || xs[i] > static_cast<double>(img_w) - margin) return false;
            if (ys[i] < margin || ys[i] > static_cast<double>(img_h) - margin) return false;
        }
        return true;
    }
};

struct SynthSample {
    Tensor image;                     // [H, W, 3] in [0, 1]
    Tensor mask;                      // [H, W, 1] binary
    std::vector<RotatedRect> regions; // text regions
    uint64_t seed = 0;
};

struct GenConfig {
    size_t H = 64, W = 64;
    size_t min_regions = 1, max_regions = 3;
    size_t min_distractors = 1, max_distractors = 4;
    double min_coverage = 0.02, max_coverage = 0.40;

    static GenConfig from(const Config& c) {
        GenConfig g;
        g.H = c.H;
        g.W = c.W;
        g.min_regions = c.min_regions;
        g.max_regions = c.max_regions;
        g.min_distractors = c.min_distractors;
        g.max_distractors = c.max_distractors;
        g.min_coverage = c.min_coverage;
        g.max_coverage = c.max_coverage;
        return g;
    }
};

// Exact mask from region geometry: 1 iff the pixel center lies inside at
// least one region.
inline Tensor rasterize_regions(const std::vector<RotatedRect>& regions, size_t H,
                                size_t W) {
    Tensor mask(Shape{H, W, 1});
    for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x)
            for (const RotatedRect& r : regions)
                if (r.contains(x + 0.5, y + 0.5)) {
                    mask.at(y * W + x) = 1.0;
                    break;
                }
    return mask;
}

// Block-max pooling: a coarse cell is 1 iff any pixel in its s x s block is 1.
inline Tensor downsample_mask(const Tensor& mask, size_t s) {
    if (mask.rank() != 3 || mask.dim(2) != 1)
        throw ShapeError("downsample_mask: expected [H, W, 1], got " +
                         shape_str(mask.shape()));
    const size_t H = mask.dim(0), W = mask.dim(1);
    if (H % s != 0 || W % s != 0)
        throw ShapeError("downsample_mask: dimensions " + shape_str(mask.shape()) +
                         " not divisible by s=" + std::to_string(s));
    Tensor coarse(Shape{H / s, W / s, 1});
    for (size_t cy = 0; cy < H / s; ++cy)
        for (size_t cx = 0; cx < W / s; ++cx) {
            double v = 0.0;
            for (size_t y = cy * s; y < (cy + 1) * s && v == 0.0; ++y)
                for (size_t x = cx * s; x < (cx + 1) * s; ++x)
                    if (mask.at(y * W + x) != 0.0) {
                        v = 1.0;
                        break;
                    }
            coarse.at(cy * (W / s) + cx) = v;
        }
    return coarse;
}

namespace detail {

inline RotatedRect sample_rect(Rng& rng, const GenConfig& cfg, double min_w_frac,
                               double max_w_frac, double min_h_frac, double max_h_frac) {
    const double side = static_cast<double>(std::min(cfg.H, cfg.W));
    RotatedRect r;
    r.w = rng.uniform(min_w_frac, max_w_frac) * side;
    r.h = rng.uniform(min_h_frac, max_h_frac) * side;
    r.theta = rng.uniform(0.0, std::numbers::pi);
    r.cx = rng.uniform(0.0, static_cast<double>(cfg.W));
    r.cy = rng.uniform(0.0, static_cast<double>(cfg.H));
    return r;
}

// Rejection-places a rectangle fully inside the image; keeps the rng stream
// deterministic. Throws after 100 failed draws.
inline RotatedRect place_rect(Rng& rng, const GenConfig& cfg, double min_w_frac,
                              double max_w_frac, double min_h_frac, double max_h_frac,
                              const char* what) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        RotatedRect r =
            sample_rect(rng, cfg, min_w_frac, max_w_frac, min_h_frac, max_h_frac);
        if (r.inside_image(cfg.W, cfg.H)) return r;
    }
    throw ValueError(std::string("unplaceable ") + what +
                     " after 100 rejection samples (image " + std::to_string(cfg.W) +
                     "x" + std::to_string(cfg.H) + ")");
}

} // namespace detail

// Deterministic synthetic sample: smooth low-frequency background, solid
// distractor rectangles (negative class), and striped "text" rectangles whose
// union is the exact ground-truth mask. Text coverage is kept within the
// configured band by re-drawing the region set.
inline SynthSample generate_sample(uint64_t seed, const GenConfig& cfg) {
    Rng rng(seed);
    const size_t H = cfg.H, W = cfg.W;
    SynthSample sample;
    sample.seed = seed;
    sample.image = Tensor(Shape{H, W, 3});

    // background: per-channel base plus three low-frequency waves
    double base[3], amp[3][3], fx[3], fy[3], phase[3];
    for (int c = 0; c < 3; ++c) base[c] = rng.uniform(0.30, 0.60);
    for (int k = 0; k < 3; ++k) {
        fx[k] = rng.uniform(-2.0, 2.0);
        fy[k] = rng.uniform(-2.0, 2.0);
        phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (int c = 0; c < 3; ++c) amp[k][c] = rng.uniform(0.02, 0.07);
    }
    for (size_t y = 0; y < H; ++y) {
        for (size_t x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = base[c];
                for (int k = 0; k < 3; ++k)
                    v += amp[k][c] *
                         std::cos(2.0 * std::numbers::pi *
                                      (fx[k] * (x + 0.5) / W + fy[k] * (y + 0.5) / H) +
                                  phase[k]);
                sample.image.at((y * W + x) * 3 + c) = std::clamp(v, 0.0, 1.0);
            }
        }
    }

    // solid distractor rectangles; unplaceable ones are skipped
    const size_t n_distract =
        cfg.min_distractors +
        rng.below(cfg.max_distractors - cfg.min_distractors + 1);
    for (size_t i = 0; i < n_distract; ++i) {
        RotatedRect r;
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            r = detail::sample_rect(rng, cfg, 0.15, 0.45, 0.08, 0.22);
            placed = r.inside_image(W, H);
        }
        if (!placed) continue;
        double color[3];
        for (int c = 0; c < 3; ++c) color[c] = rng.uniform(0.05, 0.95);
        for (size_t y = 0; y < H; ++y)
            for (size_t x = 0; x < W; ++x)
                if (r.contains(x + 0.5, y + 0.5))
                    for (int c = 0; c < 3; ++c)
                        sample.image.at((y * W + x) * 3 + c) = color[c];
    }

    // striped text regions with coverage rejection
    if (cfg.max_regions > 0) {
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 100)
                throw ValueError(
                    "text region coverage outside bounds after 100 redraws");
            std::vector<RotatedRect> regions;
            const size_t n_regions =
                cfg.min_regions + rng.below(cfg.max_regions - cfg.min_regions + 1);
            for (size_t i = 0; i < n_regions; ++i)
                regions.push_back(
                    detail::place_rect(rng, cfg, 0.25, 0.52, 0.10, 0.19, "text region"));
            Tensor mask = rasterize_regions(regions, H, W);
            double covered = 0.0;
            for (size_t i = 0; i < mask.size(); ++i) covered += mask.at(i);
            const double coverage = covered / static_cast<double>(H * W);
            if (coverage < cfg.min_coverage || coverage > cfg.max_coverage) continue;
            sample.regions = std::move(regions);
            sample.mask = std::move(mask);
            break;
        }
        // high-frequency stripes along each region's axis
        for (const RotatedRect& r : sample.regions) {
            double dark[3], light[3];
            for (int c = 0; c < 3; ++c) {
                dark[c] = rng.uniform(0.02, 0.30);
                light[c] = rng.uniform(0.65, 0.98);
            }
            const double period = rng.uniform(2.0, 4.0);
            const double cth = std::cos(r.theta), sth = std::sin(r.theta);
            for (size_t y = 0; y < H; ++y)
                for (size_t x = 0; x < W; ++x) {
                    const double px = x + 0.5, py = y + 0.5;
                    if (!r.contains(px, py)) continue;
                    const double u = (px - r.cx) * cth + (py - r.cy) * sth;
                    const long band =
                        static_cast<long>(std::floor((u + r.w) / (period / 2.0)));
                    const double* col = (band % 2 == 0) ? dark : light;
                    for (int c = 0; c < 3; ++c)
                        sample.image.at((y * W + x) * 3 + c) = col[c];
                }
        }
    } else {
        sample.mask = Tensor(Shape{H, W, 1});
    }
    return sample;
}

} // namespace ftcm
