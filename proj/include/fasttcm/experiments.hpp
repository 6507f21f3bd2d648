#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fasttcm/eval.hpp"
#include "fasttcm/trainer.hpp"

namespace ftcm {

struct RunReport {
    std::string run;
    EvalReport report;
};

// No-bridge baseline: image encoder + head only.
inline Config baseline_config(const Config& base) {
    Config c = base;
    c.use_predefined = false;
    c.n_prompts = 0;
    c.use_lg = false;
    c.use_vg = false;
    c.use_aux = false;
    c.use_bsm = false;
    return c;
}

struct AblationRow {
    std::string name;
    Config cfg;
};

// Cumulative component ladder: baseline, +PP, +LP(n), +LG, +VG, +Aux, +BSM.
inline std::vector<AblationRow> default_ablation_ladder(const Config& base) {
    std::vector<AblationRow> rows;
    Config c = baseline_config(base);
    rows.push_back({"baseline", c});
    c.use_predefined = true;
    rows.push_back({"+pp", c});
    c.n_prompts = base.n_prompts > 0 ? base.n_prompts : 4;
    rows.push_back({"+lp", c});
    c.use_lg = true;
    rows.push_back({"+lg", c});
    c.use_vg = true;
    rows.push_back({"+vg", c});
    c.use_aux = true;
    rows.push_back({"+aux", c});
    c.use_bsm = true;
    rows.push_back({"+bsm(full)", c});
    return rows;
}

inline void write_report_csv(const std::filesystem::path& path,
                             const std::vector<RunReport>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write report: " + path.string());
    os << "run,pixel_p,pixel_r,pixel_f,region_f\n";
    for (const RunReport& r : rows)
        os << r.run << ',' << detail::csv_double(r.report.pixel_p) << ','
           << detail::csv_double(r.report.pixel_r) << ','
           << detail::csv_double(r.report.pixel_f) << ','
           << detail::csv_double(r.report.region_f) << '\n';
}

inline EvalReport mean_report(const std::vector<EvalReport>& reports) {
    EvalReport m;
    for (const EvalReport& r : reports) {
        m.pixel_p += r.pixel_p;
        m.pixel_r += r.pixel_r;
        m.pixel_f += r.pixel_f;
        m.region_f += r.region_f;
        m.loss += r.loss;
    }
    const double n = static_cast<double>(reports.size());
    m.pixel_p /= n;
    m.pixel_r /= n;
    m.pixel_f /= n;
    m.region_f /= n;
    m.loss /= n;
    return m;
}

// Trains and evaluates one configuration per (row, seed); appends per-seed
// rows and a mean row per configuration.
inline std::vector<RunReport> run_ablation(const std::vector<AblationRow>& rows,
                                           const std::filesystem::path& data_root,
                                           const std::filesystem::path& out_dir,
                                           size_t n_seeds) {
    std::vector<RunReport> out;
    for (const AblationRow& row : rows) {
        std::vector<EvalReport> seed_reports;
        for (size_t k = 0; k < n_seeds; ++k) {
            Config cfg = row.cfg;
            cfg.seed = row.cfg.seed + k;
            const auto run_dir = out_dir / (row.name + "_s" + std::to_string(k));
            train(cfg, data_root, run_dir);
            const FastTcm model = load_checkpoint(run_dir / "checkpoint.ftcm", cfg);
            const EvalReport rep = evaluate_split(model, data_root, "test");
            seed_reports.push_back(rep);
            out.push_back({row.name + ":s" + std::to_string(k), rep});
        }
        out.push_back({row.name + ":mean", mean_report(seed_reports)});
    }
    return out;
}

// Few-shot protocol: trains baseline and the full model on identical
// seed-shuffled subsamples at each ratio.
inline std::vector<RunReport> run_few_shot(const Config& base,
                                           const std::vector<double>& ratios,
                                           const std::filesystem::path& data_root,
                                           const std::filesystem::path& out_dir,
                                           size_t n_seeds) {
    std::vector<RunReport> out;
    for (double ratio : ratios) {
        for (const bool full : {false, true}) {
            Config cfg = full ? base : baseline_config(base);
            cfg.data_ratio = ratio;
            const std::string model_name = full ? "fasttcm" : "baseline";
            std::vector<EvalReport> seed_reports;
            for (size_t k = 0; k < n_seeds; ++k) {
                Config run_cfg = cfg;
                run_cfg.seed = base.seed + k;
                const auto run_dir = out_dir / (model_name + "_r" + std::to_string(ratio) +
                                                "_s" + std::to_string(k));
                train(run_cfg, data_root, run_dir);
                const FastTcm model = load_checkpoint(run_dir / "checkpoint.ftcm", run_cfg);
                const EvalReport rep = evaluate_split(model, data_root, "test");
                seed_reports.push_back(rep);
                out.push_back({model_name + ":r" + std::to_string(ratio) + ":s" +
                                   std::to_string(k),
                               rep});
            }
            out.push_back({model_name + ":r" + std::to_string(ratio) + ":mean",
                           mean_report(seed_reports)});
        }
    }
    return out;
}

} // namespace ftcm
