#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fasttcm/config.hpp"
#include "fasttcm/netpbm.hpp"
#include "fasttcm/synthgen.hpp"

namespace ftcm {

// On-disk layout: <root>/<split>/<index:06>.ppm|.pgm|.regions plus a
// manifest.json per split with {split, count, seed_base, config_hash}.

struct DatasetManifest {
    std::string split;
    size_t count = 0;
    uint64_t seed_base = 0;
    std::string config_hash;
};

namespace detail {

inline std::string index_name(size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06zu", index);
    return std::string(buf);
}

} // namespace detail

inline void write_manifest(const std::filesystem::path& split_dir,
                           const DatasetManifest& m) {
    nlohmann::json j;
    j["split"] = m.split;
    j["count"] = m.count;
    j["seed_base"] = m.seed_base;
    j["config_hash"] = m.config_hash;
    std::ofstream os(split_dir / "manifest.json");
    if (!os) throw IoError("cannot write manifest in " + split_dir.string());
    os << j.dump(2) << "\n";
}

inline DatasetManifest read_manifest(const std::filesystem::path& split_dir) {
    std::ifstream is(split_dir / "manifest.json");
    if (!is) throw IoError("cannot open manifest in " + split_dir.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse manifest in " + split_dir.string() + ": " + e.what());
    }
    DatasetManifest m;
    m.split = j.at("split").get<std::string>();
    m.count = j.at("count").get<size_t>();
    m.seed_base = j.at("seed_base").get<uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    return m;
}

inline void write_regions(const std::filesystem::path& path,
                          const std::vector<RotatedRect>& regions) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    char line[256];
    for (const RotatedRect& r : regions) {
        std::snprintf(line, sizeof(line), "%.17g %.17g %.17g %.17g %.17g\n", r.cx, r.cy,
                      r.w, r.h, r.theta);
        os << line;
    }
}

inline std::vector<RotatedRect> read_regions(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path.string());
    std::vector<RotatedRect> regions;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        RotatedRect r;
        if (std::sscanf(line.c_str(), "%lg %lg %lg %lg %lg", &r.cx, &r.cy, &r.w, &r.h,
                        &r.theta) != 5)
            throw IoError("corrupt region line " + std::to_string(line_no) + " in " +
                          path.string());
        regions.push_back(r);
    }
    return regions;
}

// Generates `count` samples with seeds seed_base + index and writes them under
// <root>/<split>/.
inline DatasetManifest write_dataset(const std::filesystem::path& root,
                                     const std::string& split, size_t count,
                                     uint64_t seed_base, const GenConfig& gen,
                                     const std::string& config_hash) {
    const auto dir = root / split;
    std::filesystem::create_directories(dir);
    for (size_t i = 0; i < count; ++i) {
        const SynthSample sample = generate_sample(seed_base + i, gen);
        const std::string stem = detail::index_name(i);
        write_ppm(dir / (stem + ".ppm"), sample.image);
        write_pgm(dir / (stem + ".pgm"), sample.mask);
        write_regions(dir / (stem + ".regions"), sample.regions);
    }
    DatasetManifest m{split, count, seed_base, config_hash};
    write_manifest(dir, m);
    return m;
}

// Reads one sample triple back. Image values carry 8-bit quantization; the
// mask round-trips exactly.
inline SynthSample read_sample(const std::filesystem::path& split_dir, size_t index) {
    const std::string stem = detail::index_name(index);
    SynthSample s;
    s.image = read_ppm(split_dir / (stem + ".ppm"));
    Tensor mask = read_pgm(split_dir / (stem + ".pgm"));
    for (size_t i = 0; i < mask.size(); ++i) mask.at(i) = mask.at(i) > 0.5 ? 1.0 : 0.0;
    s.mask = mask;
    s.regions = read_regions(split_dir / (stem + ".regions"));
    return s;
}

inline std::vector<SynthSample> read_split(const std::filesystem::path& split_dir) {
    const DatasetManifest m = read_manifest(split_dir);
    std::vector<SynthSample> samples;
    samples.reserve(m.count);
    for (size_t i = 0; i < m.count; ++i) samples.push_back(read_sample(split_dir, i));
    return samples;
}

// Split seed bases are disjoint by construction: train starts at data_seed,
// val after the train range, test after both.
inline uint64_t split_seed_base(const Config& cfg, const std::string& split) {
    if (split == "train") return cfg.data_seed;
    if (split == "val") return cfg.data_seed + cfg.train_count;
    if (split == "test") return cfg.data_seed + cfg.train_count + cfg.val_count;
    throw ConfigError("unknown split '" + split + "'");
}

inline size_t split_count(const Config& cfg, const std::string& split) {
    if (split == "train") return cfg.train_count;
    if (split == "val") return cfg.val_count;
    if (split == "test") return cfg.test_count;
    throw ConfigError("unknown split '" + split + "'");
}

// Generates all three splits under `root`.
inline void generate_dataset(const Config& cfg, const std::filesystem::path& root) {
    const GenConfig gen = GenConfig::from(cfg);
    const std::string hash = hash_hex(cfg.gen_hash());
    for (const char* split : {"train", "val", "test"})
        write_dataset(root, split, split_count(cfg, split), split_seed_base(cfg, split),
                      gen, hash);
}

// Verifies that a split on disk was generated from this config.
inline DatasetManifest check_manifest(const Config& cfg,
                                      const std::filesystem::path& split_dir,
                                      const std::string& split) {
    const DatasetManifest m = read_manifest(split_dir);
    if (m.config_hash != hash_hex(cfg.gen_hash()))
        throw ConfigError("dataset manifest hash " + m.config_hash +
                          " does not match current generation config " +
                          hash_hex(cfg.gen_hash()));
    if (m.split != split)
        throw ConfigError("manifest split '" + m.split + "' is not '" + split + "'");
    if (m.seed_base != split_seed_base(cfg, split))
        throw ConfigError("manifest seed_base mismatch for split '" + split + "'");
    return m;
}

} // namespace ftcm
