#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fasttcm/checkpoint.hpp"
#include "fasttcm/dataset.hpp"
#include "fasttcm/eval.hpp"
#include "fasttcm/model.hpp"
#include "fasttcm/optim.hpp"

namespace ftcm {

struct TrainResult {
    std::filesystem::path checkpoint;
    double first_loss = 0.0;
    double final_loss = 0.0;
    size_t steps_run = 0;
    std::string log_csv; // step,loss_total,loss_task,loss_aux
};

// Deterministic prefix of the seed-shuffled index list. Membership depends
// only on (count, ratio, seed), never on the model, so paired runs see the
// same subsample.
inline std::vector<size_t> subsample_indices(size_t count, double ratio, uint64_t seed) {
    if (ratio <= 0.0 || ratio > 1.0)
        throw ConfigError("data_ratio must be in (0, 1], got " + std::to_string(ratio));
    std::vector<size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng(seed).fork(fnv1a64("subsample"));
    for (size_t i = count; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const size_t keep = static_cast<size_t>(ratio * static_cast<double>(count) + 1e-9);
    if (keep < 1)
        throw ValueError("data ratio " + std::to_string(ratio) + " yields < 1 sample of " +
                         std::to_string(count));
    idx.resize(keep);
    return idx;
}

namespace detail {

inline std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

} // namespace detail

// Training loop: Adam with per-group learning rates, CSV step log, periodic
// checkpoints, non-finite-loss abort with the last good checkpoint retained.
inline TrainResult train(const Config& cfg, const std::filesystem::path& data_root,
                         const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    check_manifest(cfg, data_root / "train", "train");
    const std::vector<SynthSample> all = read_split(data_root / "train");
    const std::vector<size_t> keep = subsample_indices(all.size(), cfg.data_ratio, cfg.seed);

    std::vector<SynthSample> samples;
    samples.reserve(keep.size());
    for (size_t i : keep) samples.push_back(all[i]);
    std::vector<Tensor> coarse;
    coarse.reserve(samples.size());
    for (const auto& s : samples) coarse.push_back(downsample_mask(s.mask, cfg.s));

    FastTcm model(cfg);
    Adam adam(model.param_groups(), cfg.base_lr);

    const auto last_path = out_dir / "checkpoint_last.ftcm";
    const auto final_path = out_dir / "checkpoint.ftcm";
    save_checkpoint(last_path, model, &adam);

    std::ostringstream log;
    log << "step,loss_total,loss_task,loss_aux\n";

    TrainResult result;
    result.checkpoint = final_path;
    Rng batch_rng = Rng(cfg.seed).fork(fnv1a64("batch"));
    for (size_t step = 1; step <= cfg.steps; ++step) {
        Graph tape;
        Tensor total, task, aux;
        double loss_v = 0.0, task_v = 0.0, aux_v = 0.0;
        try {
            for (size_t b = 0; b < cfg.batch; ++b) {
                const size_t i = batch_rng.below(samples.size());
                const FastTcm::Forward f = model.forward(samples[i].image);
                const FastTcm::Losses l = model.loss(f, samples[i].mask, coarse[i]);
                total = b == 0 ? l.total : add(total, l.total);
                task = b == 0 ? l.task : add(task, l.task);
                aux = b == 0 ? l.aux : add(aux, l.aux);
            }
            const double inv_b = 1.0 / static_cast<double>(cfg.batch);
            total = scale(total, inv_b);
            loss_v = total.item();
            task_v = task.item() * inv_b;
            aux_v = aux.item() * inv_b;
            if (!std::isfinite(loss_v))
                throw TrainError("non-finite loss at step " + std::to_string(step));
        } catch (const Error& e) {
            // abort; the periodic checkpoint from before this step survives
            std::ofstream(out_dir / "train_log.csv") << log.str();
            throw TrainError("training aborted at step " + std::to_string(step) + ": " +
                             e.what() + "; last good checkpoint: " + last_path.string());
        }
        adam.zero_grad();
        tape.backward(total);
        adam.step();
        log << step << ',' << detail::csv_double(loss_v) << ','
            << detail::csv_double(task_v) << ',' << detail::csv_double(aux_v) << '\n';
        if (step == 1) result.first_loss = loss_v;
        result.final_loss = loss_v;
        result.steps_run = step;
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0)
            save_checkpoint(last_path, model, &adam);
    }
    save_checkpoint(final_path, model, &adam);
    result.log_csv = log.str();
    std::ofstream(out_dir / "train_log.csv") << result.log_csv;
    return result;
}

} // namespace ftcm
