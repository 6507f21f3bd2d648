#include <catch2/catch_amalgamated.hpp>

#include "fasttcm/gradcheck.hpp"
#include "fasttcm/ops.hpp"
#include "fasttcm/rng.hpp"
#include "oracles.hpp"

using namespace ftcm;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::uninitialized(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("tensor invariants") {
    Tensor t(Shape{2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK(t.at(1, 2) == 1.5);
    CHECK_FALSE(t.requires_grad());
    CHECK_FALSE(t.has_grad());
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK(Tensor::scalar(3.0).item() == 3.0);
    CHECK_THROWS_AS(t.item(), ShapeError);
}

TEST_CASE("matmul identity") {
    const Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    const Tensor out = matmul(eye, eye);
    for (size_t i = 0; i < 4; ++i) CHECK(out.at(i) == eye.at(i));
}

TEST_CASE("matmul hand case") {
    // [[1,2],[3,4]] . [[1],[1]] = [[3],[7]]
    const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    const Tensor b = Tensor::from_data({2, 1}, {1, 1});
    const Tensor out = matmul(a, b);
    CHECK(out.shape() == Shape{2, 1});
    CHECK(out.at(0) == 3.0);
    CHECK(out.at(1) == 7.0);
}

TEST_CASE("matmul vs triple-loop oracle") {
    Rng rng(11);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({4, 2}, rng);
    const Tensor out = matmul(a, b);
    const auto ref = oracle::matmul({a.data(), a.data() + a.size()},
                                    {b.data(), b.data() + b.size()}, 3, 4, 2);
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(std::abs(out.at(i) - ref[i]) < 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    const Tensor a(Shape{2, 3});
    const Tensor b(Shape{2, 3});
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2, 3]") != std::string::npos);
    }
}

TEST_CASE("softmax symmetry and stability") {
    const Tensor z = Tensor::from_data({3}, {0, 0, 0});
    const Tensor s = softmax(z, 0);
    for (size_t i = 0; i < 3; ++i) CHECK(s.at(i) == Catch::Approx(1.0 / 3.0).margin(1e-15));

    const Tensor big = Tensor::from_data({2}, {1000.0, 0.0});
    const Tensor sb = softmax(big, 0);
    CHECK(sb.at(0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(sb.at(1) == Catch::Approx(0.0).margin(1e-12));
    CHECK(std::isfinite(sb.at(0)));
}

TEST_CASE("softmax vs extended-precision oracle") {
    const std::vector<double> x = {1.0, 2.0, 3.0};
    const auto ref = oracle::softmax(x);
    const Tensor s = softmax(Tensor::from_data({3}, x), 0);
    for (size_t i = 0; i < 3; ++i) CHECK(std::abs(s.at(i) - ref[i]) < 1e-12);
}

TEST_CASE("softmax sums to one along reduced axis") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t m = 1 + rng.below(4), n = 1 + rng.below(5);
        const size_t axis = rng.below(2);
        const Tensor x = random_tensor({m, n}, rng, -30.0, 30.0);
        const Tensor s = softmax(x, axis);
        const size_t outer = axis == 0 ? n : m;
        for (size_t o = 0; o < outer; ++o) {
            double sum = 0.0;
            if (axis == 0)
                for (size_t i = 0; i < m; ++i) sum += s.at(i, o);
            else
                for (size_t j = 0; j < n; ++j) sum += s.at(o, j);
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("sigmoid exact and saturated values") {
    const Tensor x = Tensor::from_data({3}, {0.0, 1e6, -1e6});
    const Tensor y = sigmoid(x);
    CHECK(y.at(0) == 0.5);
    CHECK(y.at(1) == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::isfinite(y.at(2)));

    Rng rng(3);
    const Tensor r = random_tensor({10}, rng, -20, 20);
    const Tensor a = sigmoid(r);
    const Tensor b = sigmoid(neg(r));
    for (size_t i = 0; i < r.size(); ++i)
        CHECK(a.at(i) + b.at(i) == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("layer_norm exact cases and oracle") {
    const Tensor gamma(Shape{4}, 1.0);
    const Tensor beta(Shape{4}, 0.0);
    const Tensor constant(Shape{4}, 2.5);
    const Tensor z = layer_norm(constant, gamma, beta);
    for (size_t i = 0; i < 4; ++i) CHECK(std::abs(z.at(i)) < 1e-6);

    const Tensor pm = Tensor::from_data({2}, {1.0, -1.0});
    const Tensor g2(Shape{2}, 1.0), b2(Shape{2}, 0.0);
    const Tensor nz = layer_norm(pm, g2, b2, 1e-12);
    CHECK(nz.at(0) == Catch::Approx(1.0).margin(1e-6));
    CHECK(nz.at(1) == Catch::Approx(-1.0).margin(1e-6));

    Rng rng(17);
    const Tensor x = random_tensor({5}, rng);
    const Tensor g5 = random_tensor({5}, rng, 0.5, 1.5);
    const Tensor b5 = random_tensor({5}, rng);
    const Tensor out = layer_norm(x, g5, b5, 1e-5);
    const auto ref = oracle::layer_norm({x.data(), x.data() + 5},
                                        {g5.data(), g5.data() + 5},
                                        {b5.data(), b5.data() + 5}, 1e-5);
    for (size_t i = 0; i < 5; ++i) CHECK(std::abs(out.at(i) - ref[i]) < 1e-10);
}

TEST_CASE("backward: sum gradient is ones") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}).set_requires_grad(true);
    Graph tape;
    Tensor loss = sum(x);
    tape.backward(loss);
    REQUIRE(x.has_grad());
    for (size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);
}

TEST_CASE("backward: elementwise square gradient") {
    Tensor x = Tensor::from_data({2}, {1, 2}).set_requires_grad(true);
    Graph tape;
    Tensor loss = sum(mul(x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == Catch::Approx(2.0));
    CHECK(x.grad()[1] == Catch::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = Tensor::from_data({2}, {1, 2}).set_requires_grad(true);
    Graph tape;
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("tensor used twice sums both path gradients") {
    // loss = sum(relu(x)) + sum(x * x); manual decomposition at x = [1, -2]
    Tensor x = Tensor::from_data({2}, {1.0, -2.0}).set_requires_grad(true);
    Graph tape;
    Tensor loss = add(sum(relu(x)), sum(mul(x, x)));
    tape.backward(loss);
    // d/dx relu path: [1, 0]; d/dx square path: [2, -4]
    CHECK(x.grad()[0] == Catch::Approx(1.0 + 2.0));
    CHECK(x.grad()[1] == Catch::Approx(0.0 - 4.0));
}

TEST_CASE("repeated backward accumulates") {
    Tensor x = Tensor::from_data({2}, {3.0, 4.0}).set_requires_grad(true);
    Graph tape;
    Tensor loss = sum(x);
    tape.backward(loss);
    tape.backward(loss);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
    x.zero_grad();
    tape.backward(loss);
    CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("requires_grad=false leaves never accumulate gradient") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}).set_requires_grad(true);
    Tensor frozen = Tensor::from_data({2}, {5.0, 6.0});
    Graph tape;
    Tensor loss = sum(mul(x, frozen));
    tape.backward(loss);
    CHECK(x.has_grad());
    CHECK_FALSE(frozen.has_grad());
}

TEST_CASE("grad_check: quadratic form is exact to 1e-8") {
    Rng rng(23);
    Tensor x = random_tensor({4}, rng).set_requires_grad(true);
    const Tensor a = random_tensor({4, 4}, rng);
    auto f = [&]() {
        Tensor xr = reshape(x, {1, 4});
        return reshape(matmul(matmul(xr, a), transpose(xr)), {});
    };
    std::vector<Tensor> params{x};
    const auto res = grad_check(f, params);
    CHECK(res.max_rel_error < 1e-8);
}

TEST_CASE("grad_check: sigmoid-matmul chain under 1e-6") {
    Rng rng(29);
    Tensor w1 = random_tensor({3, 5}, rng).set_requires_grad(true);
    Tensor w2 = random_tensor({5, 2}, rng).set_requires_grad(true);
    const Tensor x = random_tensor({2, 3}, rng);
    auto f = [&]() { return mean(sigmoid(matmul(sigmoid(matmul(x, w1)), w2))); };
    std::vector<Tensor> params{w1, w2};
    const auto res = grad_check(f, params);
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("grad_check reports non-finite probes") {
    Tensor x = Tensor::from_data({1}, {1.0}).set_requires_grad(true);
    auto f = [&]() { return log(add_scalar(x, -1.0)); }; // log(0 +- step)
    std::vector<Tensor> params{x};
    CHECK_THROWS_AS(grad_check(f, params), ValueError);
}

TEST_CASE("deterministic forward across identical seeds") {
    auto build = [] {
        Rng rng(77);
        Tensor a = Tensor::uninitialized({6, 6});
        for (size_t i = 0; i < a.size(); ++i) a.at(i) = rng.normal();
        Tensor b = Tensor::uninitialized({6, 6});
        for (size_t i = 0; i < b.size(); ++i) b.at(i) = rng.normal();
        return sigmoid(matmul(a, b));
    };
    const Tensor r1 = build();
    const Tensor r2 = build();
    for (size_t i = 0; i < r1.size(); ++i) CHECK(r1.at(i) == r2.at(i));
}
