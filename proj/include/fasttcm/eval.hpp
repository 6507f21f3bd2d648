#pragma once

#include <filesystem>
#include <vector>

#include "fasttcm/dataset.hpp"
#include "fasttcm/metrics.hpp"
#include "fasttcm/model.hpp"

namespace ftcm {

// Pixel metrics at threshold 0.5 on the head output (micro-averaged over the
// split) plus greedy IoU>=0.5 region matching and the mean total loss.
inline EvalReport evaluate_samples(const FastTcm& model,
                                   const std::vector<SynthSample>& samples) {
    if (samples.empty()) throw ValueError("evaluate: empty split");
    const Config& cfg = model.config();
    PixelCounts pixels;
    RegionCounts regions;
    double loss_sum = 0.0;
    for (const SynthSample& sample : samples) {
        const FastTcm::Forward f = model.forward(sample.image);
        const Tensor coarse = downsample_mask(sample.mask, cfg.s);
        loss_sum += model.loss(f, sample.mask, coarse).total.item();
        const Tensor pred = threshold_mask(f.prob);
        pixels.add(pred, sample.mask);
        regions.add(connected_components(pred),
                    gt_region_pixel_sets(sample.regions, cfg.H, cfg.W));
    }
    EvalReport r;
    r.pixel_p = pixels.precision();
    r.pixel_r = pixels.recall();
    r.pixel_f = f_measure(r.pixel_p, r.pixel_r);
    r.region_f = f_measure(regions.precision(), regions.recall());
    r.loss = loss_sum / static_cast<double>(samples.size());
    return r;
}

inline EvalReport evaluate_split(const FastTcm& model,
                                 const std::filesystem::path& data_root,
                                 const std::string& split) {
    const auto dir = data_root / split;
    check_manifest(model.config(), dir, split);
    return evaluate_samples(model, read_split(dir));
}

} // namespace ftcm
