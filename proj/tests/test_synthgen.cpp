#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "fasttcm/dataset.hpp"
#include "fasttcm/synthgen.hpp"
#include "oracles.hpp"

using namespace ftcm;
namespace fs = std::filesystem;

namespace {

bool same_values(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a.at(i) != b.at(i)) return false;
    return true;
}

fs::path scratch_dir(const char* name) {
    const fs::path dir = fs::path("test_tmp") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("max_regions=0 gives an all-zero mask") {
    GenConfig cfg;
    cfg.min_regions = 0;
    cfg.max_regions = 0;
    const SynthSample s = generate_sample(1, cfg);
    CHECK(s.regions.empty());
    for (size_t i = 0; i < s.mask.size(); ++i) CHECK(s.mask.at(i) == 0.0);
}

TEST_CASE("same seed produces bit-identical samples") {
    const GenConfig cfg;
    const SynthSample a = generate_sample(77, cfg);
    const SynthSample b = generate_sample(77, cfg);
    CHECK(same_values(a.image, b.image));
    CHECK(same_values(a.mask, b.mask));
    REQUIRE(a.regions.size() == b.regions.size());
    for (size_t i = 0; i < a.regions.size(); ++i) {
        CHECK(a.regions[i].cx == b.regions[i].cx);
        CHECK(a.regions[i].theta == b.regions[i].theta);
    }
    const SynthSample c = generate_sample(78, cfg);
    CHECK_FALSE(same_values(a.image, c.image));
}

TEST_CASE("axis-aligned rectangle rasterizes to exactly its area") {
    RotatedRect r{20.0, 16.0, 10.0, 8.0, 0.0};
    const Tensor mask = rasterize_regions({r}, 32, 40);
    double sum = 0.0;
    for (size_t i = 0; i < mask.size(); ++i) sum += mask.at(i);
    CHECK(sum == 10.0 * 8.0);
}

TEST_CASE("mask equals the union of per-region rasterizations") {
    const GenConfig cfg;
    for (uint64_t seed : {11ull, 12ull, 13ull}) {
        const SynthSample s = generate_sample(seed, cfg);
        const Tensor again = rasterize_regions(s.regions, cfg.H, cfg.W);
        CHECK(same_values(s.mask, again));
    }
}

TEST_CASE("text coverage stays inside the configured band") {
    const GenConfig cfg;
    for (uint64_t seed = 100; seed < 140; ++seed) {
        const SynthSample s = generate_sample(seed, cfg);
        double covered = 0.0;
        for (size_t i = 0; i < s.mask.size(); ++i) covered += s.mask.at(i);
        const double coverage = covered / static_cast<double>(cfg.H * cfg.W);
        CHECK(coverage >= cfg.min_coverage);
        CHECK(coverage <= cfg.max_coverage);
    }
}

TEST_CASE("downsample_mask block-max") {
    Tensor ones(Shape{8, 8, 1}, 1.0);
    const Tensor call = downsample_mask(ones, 4);
    for (size_t i = 0; i < call.size(); ++i) CHECK(call.at(i) == 1.0);

    Tensor single(Shape{8, 8, 1});
    single.at(3 * 8 + 5) = 1.0;
    const Tensor cs = downsample_mask(single, 4);
    CHECK(cs.shape() == Shape{2, 2, 1});
    CHECK(cs.at(0, 1, 0) == 1.0);
    CHECK(cs.at(0, 0, 0) + cs.at(1, 0, 0) + cs.at(1, 1, 0) == 0.0);

    Rng rng(14);
    Tensor rnd(Shape{12, 8, 1});
    for (size_t i = 0; i < rnd.size(); ++i) rnd.at(i) = rng.below(4) == 0 ? 1.0 : 0.0;
    const Tensor got = downsample_mask(rnd, 4);
    const auto want = oracle::block_max({rnd.data(), rnd.data() + rnd.size()}, 12, 8, 4);
    for (size_t i = 0; i < want.size(); ++i) CHECK(got.at(i) == want[i]);

    CHECK_THROWS_AS(downsample_mask(rnd, 5), ShapeError);
}

TEST_CASE("ppm/pgm roundtrip bounds") {
    const fs::path dir = scratch_dir("netpbm");
    const GenConfig cfg;
    const SynthSample s = generate_sample(55, cfg);

    write_pgm(dir / "mask.pgm", s.mask);
    Tensor mask_back = read_pgm(dir / "mask.pgm");
    for (size_t i = 0; i < mask_back.size(); ++i)
        mask_back.at(i) = mask_back.at(i) > 0.5 ? 1.0 : 0.0;
    CHECK(same_values(s.mask, mask_back));

    write_ppm(dir / "img.ppm", s.image);
    const Tensor img_back = read_ppm(dir / "img.ppm");
    double max_err = 0.0;
    for (size_t i = 0; i < img_back.size(); ++i)
        max_err = std::max(max_err, std::abs(img_back.at(i) - s.image.at(i)));
    CHECK(max_err <= 1.0 / 255.0 + 1e-12);
}

TEST_CASE("corrupt netpbm header reports a byte offset") {
    const fs::path dir = scratch_dir("netpbm_bad");
    std::ofstream(dir / "bad.pgm") << "P5\nxx yy\n255\n";
    try {
        read_pgm(dir / "bad.pgm");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("byte") != std::string::npos);
    }
    std::ofstream(dir / "bad.ppm") << "P5\n4 4\n255\n";
    CHECK_THROWS_AS(read_ppm(dir / "bad.ppm"), IoError);
}

TEST_CASE("region sidecar roundtrips exactly") {
    const fs::path dir = scratch_dir("regions");
    const GenConfig cfg;
    const SynthSample s = generate_sample(66, cfg);
    write_regions(dir / "r.regions", s.regions);
    const auto back = read_regions(dir / "r.regions");
    REQUIRE(back.size() == s.regions.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].cx == s.regions[i].cx);
        CHECK(back[i].cy == s.regions[i].cy);
        CHECK(back[i].w == s.regions[i].w);
        CHECK(back[i].h == s.regions[i].h);
        CHECK(back[i].theta == s.regions[i].theta);
    }
}

TEST_CASE("dataset write/read: counts, manifest, quantization-only image drift") {
    const fs::path root = scratch_dir("dataset");
    Config cfg = Config::desk();
    cfg.train_count = 5;
    cfg.val_count = 2;
    cfg.test_count = 3;
    generate_dataset(cfg, root);

    size_t triples = 0;
    for (const auto& entry : fs::directory_iterator(root / "train"))
        if (entry.path().extension() == ".ppm") ++triples;
    CHECK(triples == 5);

    const DatasetManifest m = read_manifest(root / "train");
    CHECK(m.split == "train");
    CHECK(m.count == 5);
    CHECK(m.seed_base == cfg.data_seed);
    CHECK(m.config_hash == hash_hex(cfg.gen_hash()));

    // regeneration from the manifest is bit-identical on the mask and regions
    const SynthSample disk = read_sample(root / "train", 2);
    const SynthSample regen = generate_sample(m.seed_base + 2, GenConfig::from(cfg));
    CHECK(same_values(disk.mask, regen.mask));
    REQUIRE(disk.regions.size() == regen.regions.size());
    double max_err = 0.0;
    for (size_t i = 0; i < disk.image.size(); ++i)
        max_err = std::max(max_err, std::abs(disk.image.at(i) - regen.image.at(i)));
    CHECK(max_err <= 1.0 / 255.0 + 1e-12);

    check_manifest(cfg, root / "train", "train");
    Config other = cfg;
    other.data_seed += 1;
    CHECK_THROWS_AS(check_manifest(other, root / "train", "train"), ConfigError);
}

TEST_CASE("split seed ranges are disjoint") {
    Config cfg = Config::desk();
    cfg.train_count = 10;
    cfg.val_count = 4;
    cfg.test_count = 6;
    const uint64_t t0 = split_seed_base(cfg, "train");
    const uint64_t v0 = split_seed_base(cfg, "val");
    const uint64_t e0 = split_seed_base(cfg, "test");
    CHECK(t0 + cfg.train_count <= v0);
    CHECK(v0 + cfg.val_count <= e0);
}
