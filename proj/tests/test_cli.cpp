#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "fasttcm/config.hpp"
#include "fasttcm/dataset.hpp"

using namespace ftcm;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(FASTTCM_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), buf.size(), pipe) != nullptr) out += buf.data();
    const int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

// Small-but-real configuration used for all CLI smoke runs.
const std::string kSmallSets =
    "--set H=16 --set W=16 --set C=16 --set D=8 --set n_prompts=2 "
    "--set text_depth=1 --set text_heads=2 --set vpg_layers=1 --set vpg_heads=2 "
    "--set vpg_width=8 --set vpg_ffn=16 --set train_count=6 --set val_count=2 "
    "--set test_count=3 --set steps=3 --set batch=2 --set min_distractors=0 "
    "--set max_distractors=2";

fs::path scratch_dir(const char* name) {
    const fs::path dir = fs::path("test_tmp_cli") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    return std::string(std::istreambuf_iterator<char>(is), {});
}

} // namespace

TEST_CASE("no arguments: usage text and exit 1") {
    const CliResult r = run_cli("");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("Usage") != std::string::npos);
    CHECK(r.output.find("gen-data") != std::string::npos);
}

TEST_CASE("unknown subcommand and unknown flag exit 1") {
    CHECK(run_cli("frobnicate").exit_code == 1);
    CHECK(run_cli("gen-data --out x --frobnicate").exit_code == 1);
    CHECK(run_cli("gen-data --out x --set nonsense=1").exit_code == 1);
}

TEST_CASE("tau=0 violates the config contract with exit 2") {
    const CliResult r = run_cli("gen-data --out test_tmp_cli/tau0 --set tau=0");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("tau") != std::string::npos);
}

TEST_CASE("full pipeline: gen-data, train, eval, bench, export-maps, grad-check") {
    const fs::path root = scratch_dir("pipe");
    const std::string data = (root / "data").string();
    const std::string run = (root / "run").string();

    CliResult r = run_cli("gen-data --out " + data + " " + kSmallSets);
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(fs::path(data) / "train" / "manifest.json"));
    CHECK(fs::exists(fs::path(data) / "train" / "000005.ppm"));
    CHECK(fs::exists(fs::path(data) / "test" / "000002.regions"));

    const std::string cfg = (fs::path(data) / "effective_config.json").string();
    r = run_cli("train --config " + cfg + " --data " + data + " --out " + run);
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(fs::path(run) / "checkpoint.ftcm"));
    CHECK(fs::exists(fs::path(run) / "train_log.csv"));

    r = run_cli("eval --config " + cfg + " --checkpoint " + run +
                "/checkpoint.ftcm --data " + data + " --out " + (root / "eval").string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("pixel_f") != std::string::npos);

    r = run_cli("bench --config " + cfg + " --checkpoint " + run +
                "/checkpoint.ftcm --data " + data + " --out " + (root / "bench").string() +
                " --set bench_iters=100 --set bench_warmup=10");
    REQUIRE(r.exit_code == 0);
    const std::string csv = read_file(root / "bench" / "bench_report.csv");
    CHECK(csv.rfind("mode,images,mean_ms,p50_ms,p95_ms,max_abs_diff\n", 0) == 0);
    CHECK(csv.find("online") != std::string::npos);
    CHECK(csv.find("offline") != std::string::npos);

    r = run_cli("export-maps --config " + cfg + " --checkpoint " + run +
                "/checkpoint.ftcm --data " + data + " --indices 0,2 --out " +
                (root / "maps").string());
    REQUIRE(r.exit_code == 0);
    size_t pgm_count = 0;
    for (const auto& e : fs::directory_iterator(root / "maps"))
        if (e.path().extension() == ".pgm") ++pgm_count;
    CHECK(pgm_count == 8); // 4 maps x 2 indices

    r = run_cli("grad-check " + kSmallSets);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("max_rel_error") != std::string::npos);
}

TEST_CASE("config roundtrip reproduces identical datasets") {
    const fs::path root = scratch_dir("roundtrip");
    const std::string a = (root / "a").string();
    const std::string b = (root / "b").string();
    REQUIRE(run_cli("gen-data --out " + a + " " + kSmallSets).exit_code == 0);
    REQUIRE(run_cli("gen-data --out " + b + " --config " + a +
                    "/effective_config.json")
                .exit_code == 0);
    CHECK(read_file(fs::path(a) / "train" / "000000.ppm") ==
          read_file(fs::path(b) / "train" / "000000.ppm"));
    CHECK(read_file(fs::path(a) / "test" / "000001.pgm") ==
          read_file(fs::path(b) / "test" / "000001.pgm"));
    CHECK(read_file(fs::path(a) / "effective_config.json") ==
          read_file(fs::path(b) / "effective_config.json"));
}
