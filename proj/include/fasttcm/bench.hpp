#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fasttcm/bridge.hpp"
#include "fasttcm/model.hpp"
#include "fasttcm/trainer.hpp"

namespace ftcm {

struct BenchReport {
    std::string mode; // online | offline | tcm
    size_t images = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double max_abs_diff = 0.0;
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    const size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(n)));
    return v[std::min(n - 1, rank > 0 ? rank - 1 : 0)];
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.at(i) - b.at(i)));
    return m;
}

template <typename Fn>
inline BenchReport time_mode(const std::string& mode, Fn&& run_one,
                             const std::vector<SynthSample>& samples, size_t warmup,
                             size_t iters) {
    BenchReport r;
    r.mode = mode;
    r.images = samples.size();
    std::vector<double> lat;
    lat.reserve(iters);
    for (size_t i = 0; i < warmup + iters; ++i) {
        const SynthSample& s = samples[i % samples.size()];
        const auto t0 = std::chrono::steady_clock::now();
        run_one(s);
        const auto t1 = std::chrono::steady_clock::now();
        if (i >= warmup)
            lat.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    double sum = 0.0;
    for (double v : lat) sum += v;
    r.mean_ms = sum / static_cast<double>(lat.size());
    r.p50_ms = percentile(lat, 0.50);
    r.p95_ms = percentile(lat, 0.95);
    return r;
}

} // namespace detail

// Rebuilds the model with a different (frozen, seed-derived) text encoder
// depth, carrying over every trained tensor. The text encoder itself is
// regenerated from the seed, matching how any depth would have been
// initialized before training.
inline FastTcm with_text_depth(const FastTcm& model, size_t depth) {
    Config cfg = model.config();
    cfg.text_depth = depth;
    FastTcm out(cfg);
    ParamMap dst = out.encoder_params();
    const ParamMap src = model.encoder_params();
    for (auto& [name, tensor] : dst) {
        if (name.rfind("text_encoder.", 0) == 0) continue;
        for (const auto& [sname, stensor] : src) {
            if (sname != name) continue;
            std::copy(stensor.values().begin(), stensor.values().end(),
                      tensor.values().begin());
            break;
        }
    }
    out.load_bridge_state(model.bridge_params());
    out.load_head_state(model.head_params());
    return out;
}

// Precomputes the image-independent text path and caches t_out to disk.
// Only valid in fast mode; in tcm mode the cue depends on the image.
inline Tensor precompute_text_path(const FastTcm& model,
                                   const std::filesystem::path& cache_path) {
    const Config& cfg = model.config();
    if (!cfg.has_text_path())
        throw ModeError("precompute_text_path: model has no text path");
    if (cfg.use_lg && cfg.mode != "fast")
        throw ModeError("precompute_text_path: cache unavailable in tcm mode (the "
                        "conditional cue depends on the image)");
    const Tensor t_out = model.text_path();
    write_text_cache(cache_path, t_out, cfg.hash());
    return t_out;
}

// Online vs offline inference over the same image sequence: online recomputes
// the text path per image, offline loads the cached t_out once. Outputs are
// compared elementwise on the match map and head output. Optionally also
// times the image-conditioned (tcm) variant.
inline std::vector<BenchReport> bench_inference(const FastTcm& model,
                                                const std::vector<SynthSample>& samples,
                                                const std::filesystem::path& cache_path,
                                                bool with_tcm = false) {
    const Config& cfg = model.config();
    if (samples.empty()) throw ValueError("bench: empty split");
    if (!cfg.has_text_path() || !cfg.use_lg)
        throw ModeError("bench: requires the language-prompt path (use_lg)");
    if (cfg.mode != "fast") throw ModeError("bench: requires a fast-mode checkpoint");
    const size_t warmup = std::max<size_t>(cfg.bench_warmup, 10);
    const size_t iters = std::max<size_t>(cfg.bench_iters, 100);

    precompute_text_path(model, cache_path);
    const Tensor cached = load_text_cache(cache_path, cfg.hash());

    // untimed equivalence pass
    double diff = 0.0;
    for (const SynthSample& s : samples) {
        const FastTcm::Forward online = model.forward(s.image);
        const FastTcm::Forward offline = model.forward(s.image, &cached);
        diff = std::max(diff, detail::max_abs_diff(online.match_map, offline.match_map));
        diff = std::max(diff, detail::max_abs_diff(online.prob, offline.prob));
    }

    std::vector<BenchReport> reports;
    reports.push_back(detail::time_mode(
        "online", [&](const SynthSample& s) { model.forward(s.image); }, samples, warmup,
        iters));
    reports.back().max_abs_diff = diff;
    reports.push_back(detail::time_mode(
        "offline", [&](const SynthSample& s) { model.forward(s.image, &cached); },
        samples, warmup, iters));
    reports.back().max_abs_diff = diff;

    if (with_tcm) {
        Config tcm_cfg = cfg;
        tcm_cfg.mode = "tcm";
        FastTcm tcm(tcm_cfg);
        tcm.load_encoder_state(model.encoder_params());
        tcm.load_bridge_state(model.bridge_params());
        tcm.load_head_state(model.head_params());
        // self-consistency: identical images give identical outputs
        double tdiff = 0.0;
        {
            const FastTcm::Forward a = tcm.forward(samples[0].image);
            const FastTcm::Forward b = tcm.forward(samples[0].image);
            tdiff = detail::max_abs_diff(a.prob, b.prob);
        }
        reports.push_back(detail::time_mode(
            "tcm", [&](const SynthSample& s) { tcm.forward(s.image); }, samples, warmup,
            iters));
        reports.back().max_abs_diff = tdiff;
    }
    return reports;
}

inline void write_bench_csv(const std::filesystem::path& path,
                            const std::vector<BenchReport>& reports) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write bench report: " + path.string());
    os << "mode,images,mean_ms,p50_ms,p95_ms,max_abs_diff\n";
    for (const BenchReport& r : reports)
        os << r.mode << ',' << r.images << ',' << detail::csv_double(r.mean_ms) << ','
           << detail::csv_double(r.p50_ms) << ',' << detail::csv_double(r.p95_ms) << ','
           << detail::csv_double(r.max_abs_diff) << '\n';
}

} // namespace ftcm
