#include <catch2/catch_amalgamated.hpp>

#include "fasttcm/metrics.hpp"
#include "oracles.hpp"

using namespace ftcm;

TEST_CASE("f_measure definition") {
    CHECK(f_measure(1.0, 1.0) == 1.0);
    CHECK(f_measure(0.0, 0.0) == 0.0);
    CHECK(f_measure(1.0, 0.5) == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("pixel counts: perfect, empty, oracle") {
    const Tensor gt = Tensor::from_data({2, 2, 1}, {1, 0, 1, 0});
    PixelCounts perfect;
    perfect.add(gt, gt);
    CHECK(perfect.precision() == 1.0);
    CHECK(perfect.recall() == 1.0);
    CHECK(f_measure(perfect.precision(), perfect.recall()) == 1.0);

    const Tensor zero(Shape{2, 2, 1});
    PixelCounts empty;
    empty.add(zero, gt);
    CHECK(empty.recall() == 0.0);
    CHECK(f_measure(empty.precision(), empty.recall()) == 0.0);

    Rng rng(21);
    Tensor pred = Tensor::uninitialized({6, 5, 1});
    Tensor truth = Tensor::uninitialized({6, 5, 1});
    for (size_t i = 0; i < pred.size(); ++i) {
        pred.at(i) = rng.below(2) ? 1.0 : 0.0;
        truth.at(i) = rng.below(2) ? 1.0 : 0.0;
    }
    PixelCounts pc;
    pc.add(pred, truth);
    const auto want = oracle::pixel_f({pred.data(), pred.data() + pred.size()},
                                      {truth.data(), truth.data() + truth.size()});
    CHECK(pc.precision() == Catch::Approx(want.precision).margin(1e-15));
    CHECK(pc.recall() == Catch::Approx(want.recall).margin(1e-15));
    CHECK(f_measure(pc.precision(), pc.recall()) == Catch::Approx(want.f).margin(1e-15));
}

TEST_CASE("threshold_mask at 0.5") {
    const Tensor prob = Tensor::from_data({4}, {0.49, 0.5, 0.51, 0.0});
    const Tensor mask = threshold_mask(prob);
    CHECK(mask.at(0) == 0.0);
    CHECK(mask.at(1) == 1.0);
    CHECK(mask.at(2) == 1.0);
    CHECK(mask.at(3) == 0.0);
}

TEST_CASE("connected components: 8-connectivity") {
    // two diagonal pixels are one component under 8-connectivity
    Tensor mask(Shape{3, 3, 1});
    mask.at(0) = 1.0;     // (0,0)
    mask.at(4) = 1.0;     // (1,1)
    mask.at(8) = 1.0;     // (2,2)
    auto comps = connected_components(mask);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].size() == 3);

    Tensor two(Shape{3, 3, 1});
    two.at(0) = 1.0; // (0,0)
    two.at(2) = 1.0; // (0,2) separated by a zero column
    comps = connected_components(two);
    CHECK(comps.size() == 2);
}

TEST_CASE("region matching: two truths, one detection gives F = 2/3") {
    // gt regions: rows 0 and 2; prediction covers only row 0
    Tensor pred(Shape{3, 4, 1});
    for (size_t x = 0; x < 4; ++x) pred.at(x) = 1.0;
    std::vector<std::vector<size_t>> gts = {{0, 1, 2, 3}, {8, 9, 10, 11}};
    RegionCounts rc;
    rc.add(connected_components(pred), gts);
    CHECK(rc.matched == 1);
    CHECK(rc.precision() == 1.0);
    CHECK(rc.recall() == 0.5);
    CHECK(f_measure(rc.precision(), rc.recall()) == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("region matching is one-to-one and greedy by IoU") {
    // one big prediction overlapping two gt regions: only one match allowed
    Tensor pred(Shape{2, 6, 1}, 1.0);
    std::vector<std::vector<size_t>> gts = {{0, 1, 2, 6, 7, 8}, {3, 4, 5, 9, 10, 11}};
    RegionCounts rc;
    rc.add(connected_components(pred), gts, 0.4);
    CHECK(rc.matched == 1);
}

TEST_CASE("iou of pixel sets") {
    CHECK(iou_pixel_sets({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(iou_pixel_sets({1, 2}, {3, 4}) == 0.0);
    CHECK(iou_pixel_sets({1, 2, 3, 4}, {3, 4, 5, 6}) == Catch::Approx(2.0 / 6.0));
}
