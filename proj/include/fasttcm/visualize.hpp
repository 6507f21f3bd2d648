#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fasttcm/model.hpp"
#include "fasttcm/netpbm.hpp"

namespace ftcm {

// Min-max normalization to [0, 1]; degenerate (constant) maps go to mid-gray.
inline Tensor minmax_normalize(const Tensor& map) {
    double lo = map.at(0), hi = map.at(0);
    for (size_t i = 0; i < map.size(); ++i) {
        lo = std::min(lo, map.at(i));
        hi = std::max(hi, map.at(i));
    }
    Tensor out(map.shape());
    if (hi - lo < 1e-12) {
        for (size_t i = 0; i < out.size(); ++i) out.at(i) = 128.0 / 255.0;
        return out;
    }
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = (map.at(i) - lo) / (hi - lo);
    return out;
}

// Per-position L2 norm over the channel axis: [h, w, c] -> [h, w].
inline Tensor channel_norm(const Tensor& embed) {
    const size_t h = embed.dim(0), w = embed.dim(1), c = embed.dim(2);
    Tensor out(Shape{h, w});
    for (size_t i = 0; i < h * w; ++i) {
        double s = 0.0;
        for (size_t k = 0; k < c; ++k) {
            const double v = embed.at(i * c + k);
            s += v * v;
        }
        out.at(i) = std::sqrt(s);
    }
    return out;
}

// Writes four grayscale maps per sample index: channel norm of the image
// embedding, channel norm of the visual prompt, the match map, and the
// predicted mask probability. Returns the written paths.
inline std::vector<std::filesystem::path> export_maps(
    const FastTcm& model, const std::vector<SynthSample>& samples,
    const std::vector<size_t>& indices, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (size_t idx : indices) {
        if (idx >= samples.size())
            throw ValueError("export_maps: sample index " + std::to_string(idx) +
                             " out of range (split has " +
                             std::to_string(samples.size()) + ")");
        const FastTcm::Forward f = model.forward(samples[idx].image);
        const std::string stem = std::to_string(idx);
        const Config& cfg = model.config();
        auto emit = [&](const std::string& name, const Tensor& map) {
            const auto path = out_dir / (stem + "_" + name + ".pgm");
            write_pgm(path, minmax_normalize(map));
            written.push_back(path);
        };
        emit("image_embed", channel_norm(f.image_embed));
        emit("visual_prompt", cfg.use_vg ? channel_norm(f.visual_prompt)
                                         : Tensor(Shape{cfg.latent_h(), cfg.latent_w()}));
        emit("match_map", cfg.has_text_path()
                              ? f.match_map
                              : Tensor(Shape{cfg.latent_h(), cfg.latent_w(), 1}));
        emit("pred_mask", f.prob);
    }
    return written;
}

} // namespace ftcm
