#include <catch2/catch_amalgamated.hpp>

#include "fasttcm/encoders.hpp"
#include "fasttcm/model.hpp"
#include "fasttcm/synthgen.hpp"

using namespace ftcm;

namespace {

bool same_values(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a.at(i) != b.at(i)) return false;
    return true;
}

} // namespace

TEST_CASE("config presets carry the published dimensions") {
    const Config desk = Config::desk();
    CHECK(desk.C == 64);
    CHECK(desk.D == 32);
    CHECK(desk.s == 8);
    CHECK(desk.n_prompts == 4);
    const Config paper = Config::paper();
    CHECK(paper.C == 1024);
    CHECK(paper.D == 512);
    CHECK(paper.s == 32);
    CHECK(paper.n_prompts == 4);
    CHECK(paper.vpg_layers == 6);
    CHECK(paper.vpg_heads == 4);
    CHECK(paper.vpg_width == 256);
    CHECK(paper.vpg_ffn == 1024);
    CHECK(paper.tau == 0.07);
    CHECK(paper.lambda == 1.0);
    paper.validate();
}

TEST_CASE("config invariants rejected") {
    Config c = Config::desk();
    c.H = 60; // not divisible by s=8
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = Config::desk();
    c.K = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = Config::desk();
    c.tau = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = Config::desk();
    c.use_predefined = false;
    c.n_prompts = 0; // switches still on
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("image_encode shape contract and determinism") {
    const Config cfg = Config::desk();
    const ImageEncoder enc(cfg, Rng(cfg.seed));
    const Tensor zero(Shape{64, 64, 3});
    const Tensor e = enc.encode(zero);
    CHECK(e.shape() == Shape{8, 8, 64});
    for (size_t i = 0; i < e.size(); ++i) REQUIRE(std::isfinite(e.at(i)));

    Tensor img = Tensor::uninitialized({64, 64, 3});
    Rng rng(5);
    for (size_t i = 0; i < img.size(); ++i) img.at(i) = rng.uniform();
    CHECK(same_values(enc.encode(img), enc.encode(img)));

    const Tensor wrong(Shape{32, 32, 3});
    CHECK_THROWS_AS(enc.encode(wrong), ShapeError);
}

TEST_CASE("image encoder deterministic across constructions with the same seed") {
    const Config cfg = Config::desk();
    const ImageEncoder a(cfg, Rng(cfg.seed));
    const ImageEncoder b(cfg, Rng(cfg.seed));
    Tensor img = Tensor::uninitialized({64, 64, 3});
    Rng rng(6);
    for (size_t i = 0; i < img.size(); ++i) img.at(i) = rng.uniform();
    CHECK(same_values(a.encode(img), b.encode(img)));
}

TEST_CASE("global_pool") {
    Tensor constant(Shape{3, 3, 4}, 2.25);
    const Tensor g = global_pool(constant);
    REQUIRE(g.shape() == Shape{4});
    for (size_t i = 0; i < 4; ++i) CHECK(g.at(i) == 2.25);

    Tensor single = Tensor::from_data({1, 1, 3}, {1.0, -2.0, 3.0});
    const Tensor gs = global_pool(single);
    CHECK(gs.at(0) == 1.0);
    CHECK(gs.at(1) == -2.0);
    CHECK(gs.at(2) == 3.0);

    Rng rng(9);
    Tensor r = Tensor::uninitialized({2, 2, 5});
    for (size_t i = 0; i < r.size(); ++i) r.at(i) = rng.normal();
    const Tensor gr = global_pool(r);
    for (size_t c = 0; c < 5; ++c) {
        double manual = 0.0;
        for (size_t i = 0; i < 4; ++i) manual += r.at(i * 5 + c);
        manual /= 4.0;
        CHECK(std::abs(gr.at(c) - manual) < 1e-12);
    }
}

TEST_CASE("word_embed lookup") {
    const Config cfg = Config::desk();
    const WordEmbedding we(cfg, Rng(cfg.seed));
    const Tensor a = we.lookup("Text");
    const Tensor b = we.lookup("Text");
    CHECK(a.shape() == Shape{1, cfg.D});
    CHECK(same_values(a, b));
    const Tensor other = we.lookup("Background");
    CHECK_FALSE(same_values(a, other));
    CHECK_THROWS_AS(we.lookup("NotAWord"), ValueError);
}

TEST_CASE("text_encode: shape, determinism, prompt sensitivity") {
    const Config cfg = Config::desk();
    const TextEncoder te(cfg, Rng(cfg.seed));
    Tensor prompt = Tensor::uninitialized({cfg.n_prompts + 1, cfg.D});
    Rng rng(12);
    for (size_t i = 0; i < prompt.size(); ++i) prompt.at(i) = rng.normal(0.0, 0.1);
    const Tensor out = te.encode(prompt);
    CHECK(out.shape() == Shape{cfg.C});
    CHECK(same_values(out, te.encode(prompt)));

    Tensor perturbed = prompt.clone();
    perturbed.at(0, 0) += 1e-3;
    const Tensor out2 = te.encode(perturbed);
    double diff = 0.0;
    for (size_t i = 0; i < out.size(); ++i)
        diff = std::max(diff, std::abs(out.at(i) - out2.at(i)));
    CHECK(diff > 0.0);

    const Tensor bad(Shape{3, cfg.D + 1});
    CHECK_THROWS_AS(te.encode(bad), ShapeError);
}

TEST_CASE("text encoder freeze contract: grads reach the prompt, not the weights") {
    const Config cfg = Config::desk();
    const TextEncoder te(cfg, Rng(cfg.seed));
    Tensor prompt = Tensor::uninitialized({2, cfg.D});
    Rng rng(13);
    for (size_t i = 0; i < prompt.size(); ++i) prompt.at(i) = rng.normal(0.0, 0.1);
    prompt.set_requires_grad(true);

    Graph tape;
    const Tensor loss = mean(te.encode(prompt));
    tape.backward(loss);

    REQUIRE(prompt.has_grad());
    double gnorm = 0.0;
    for (double g : prompt.grad()) gnorm += g * g;
    CHECK(gnorm > 0.0);

    ParamMap internals;
    te.collect_params(internals);
    for (const auto& [name, p] : internals) {
        CAPTURE(name);
        CHECK_FALSE(p.requires_grad());
        CHECK_FALSE(p.has_grad());
    }
}

TEST_CASE("lr_factor_text > 0 marks text encoder trainable") {
    Config cfg = Config::desk();
    cfg.lr_factor_text = 0.1;
    const TextEncoder te(cfg, Rng(cfg.seed));
    ParamMap internals;
    te.collect_params(internals);
    for (const auto& [name, p] : internals) CHECK(p.requires_grad());
}

TEST_CASE("model forward shapes on desk preset") {
    const Config cfg = Config::desk();
    const FastTcm model(cfg);
    const SynthSample s = generate_sample(42, GenConfig::from(cfg));
    const FastTcm::Forward f = model.forward(s.image);
    CHECK(f.image_embed.shape() == Shape{8, 8, 64});
    CHECK(f.global_feature.shape() == Shape{64});
    CHECK(f.t_in.shape() == Shape{5, 32});
    CHECK(f.t_out.shape() == Shape{64});
    CHECK(f.match_map.shape() == Shape{8, 8, 1});
    CHECK(f.prob.shape() == Shape{64, 64, 1});
}
