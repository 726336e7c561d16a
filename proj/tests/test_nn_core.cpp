#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "odmn/nn.hpp"
#include "odmn/rng.hpp"
#include "odmn/tape.hpp"

using namespace odmn;

TEST_CASE("Tensor2 basics") {
    Tensor2 t(2, 3, 1.5);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.at(1, 2) == doctest::Approx(1.5));
    t.at(0, 1) = 4.0;
    CHECK(t.at(0, 1) == 4.0);
    CHECK(t.all_finite());
    t.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("dense forward: identity weights pass input through") {
    DenseLayer layer;
    layer.weights = Tensor2(2, 2);
    layer.weights.at(0, 0) = 1.0;
    layer.weights.at(1, 1) = 1.0;
    layer.biases = Tensor2(1, 2);
    layer.activation = Activation::Identity;
    Tensor2 in = Tensor2::row({1.0, 2.0});
    Tensor2 out = forward(layer, in);
    CHECK(out.at(0, 0) == doctest::Approx(1.0));
    CHECK(out.at(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("dense forward: softmax of equal logits is uniform") {
    DenseLayer layer;
    layer.weights = Tensor2(3, 3);
    layer.biases = Tensor2(1, 3);
    layer.activation = Activation::Softmax;
    Tensor2 out = forward(layer, Tensor2::row({0.0, 0.0, 0.0}));
    for (int j = 0; j < 3; ++j) CHECK(out.at(0, j) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("dense forward: sigmoid at zero pre-activation is 0.5") {
    DenseLayer layer;
    layer.weights = Tensor2(1, 1, 0.0);
    layer.biases = Tensor2(1, 1, 0.0);
    layer.activation = Activation::Sigmoid;
    Tensor2 out = forward(layer, Tensor2::row({7.0}));
    CHECK(out.at(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("dense forward: shape mismatch names both shapes") {
    DenseLayer layer;
    layer.weights = Tensor2(4, 2);
    layer.biases = Tensor2(1, 2);
    CHECK_THROWS_AS(forward(layer, Tensor2::row({1.0, 2.0})), ShapeError);
    try {
        forward(layer, Tensor2::row({1.0, 2.0}));
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("(1x2)") != std::string::npos);
        CHECK(msg.find("(4x2)") != std::string::npos);
    }
}

TEST_CASE("backward: d(w*x)/dw equals x") {
    Tape tape;
    const int w = tape.leaf(Tensor2::scalar(2.0));
    const int x = tape.leaf(Tensor2::scalar(3.0));
    const int loss = tape.mul(w, x);
    tape.backward(loss);
    CHECK(tape.grad(w).at(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("backward: stopped branch contributes zero gradient") {
    Tape tape;
    const int w = tape.leaf(Tensor2::scalar(2.0));
    const int stopped = tape.stop_gradient(w);
    const int loss = tape.add(tape.mul(w, w), stopped);  // w^2 + stop(w)
    tape.backward(loss);
    CHECK(tape.grad(w).at(0, 0) == doctest::Approx(4.0));  // only the w^2 path
}

TEST_CASE("backward before recording throws") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(0), StateError);
    Tape tape2;
    const int w = tape2.leaf(Tensor2::scalar(1.0));
    CHECK_THROWS_AS(tape2.grad(w), StateError);
}

namespace {
/// Random 2-layer net with 17 parameters (2->3 relu, 3->2 linear) on a fixed
/// batch; loss is the mean of sigmoided outputs.
ParamSet small_net(uint64_t seed) {
    ParamSet params;
    params.add("w1", init_tensor(2, 3, seed, "w1", false));
    params.add("b1", init_tensor(1, 3, seed, "b1", false));
    params.add("w2", init_tensor(3, 2, seed, "w2", false));
    params.add("b2", init_tensor(1, 2, seed, "b2", false));
    return params;
}

int small_net_loss(Tape& tape, const std::vector<int>& ids) {
    Tensor2 x(4, 2);
    Rng rng(99);
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    const int in = tape.leaf(x);
    const int h = tape.relu(tape.add_rowvec(tape.matmul(in, ids[0]), ids[1]));
    const int out = tape.sigmoid(tape.add_rowvec(tape.matmul(h, ids[2]), ids[3]));
    return tape.mean_all(out);
}
}  // namespace

TEST_CASE("finite differences agree with backward on a random 2-layer net") {
    ParamSet params = small_net(7);
    int n = 0;
    for (int i = 0; i < params.size(); ++i) n += static_cast<int>(params[i].value.size());
    CHECK(n == 17);
    const GradCheckReport report = finite_diff_check(params, small_net_loss);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("gradient correctness holds across 100 random initializations") {
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        ParamSet params = small_net(seed);
        const GradCheckReport report = finite_diff_check(params, small_net_loss);
        REQUIRE(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("finite_diff_check: quadratic loss is exact to 1e-8") {
    ParamSet params;
    params.add("w", Tensor2::scalar(1.7));
    const auto build = [](Tape& tape, const std::vector<int>& ids) {
        return tape.mean_all(tape.mul(ids[0], ids[0]));
    };
    const GradCheckReport report = finite_diff_check(params, build);
    CHECK(report.max_rel_err < 1e-8);
}

TEST_CASE("finite_diff_check: corrupted gradient is flagged") {
    ParamSet params = small_net(3);
    std::vector<Tensor2> analytic = analytic_gradients(params, small_net_loss);
    const std::vector<Tensor2> fd = fd_gradients(params, small_net_loss);
    for (Tensor2& g : analytic)
        for (size_t i = 0; i < g.size(); ++i) g[i] *= 2.0;
    const GradCheckReport report = compare_gradients(params, analytic, fd);
    CHECK(report.max_rel_err > 1e-4);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    ParamSet params;
    params.add("w", Tensor2::scalar(1.25));
    AdamOptimizer adam(params);
    adam.step(params, {Tensor2::scalar(0.0)}, 0.05, 0.1);
    CHECK(params[0].value.at(0, 0) == 1.25);
    CHECK(adam.step_count() == 1);
}

TEST_CASE("adam: first step moves a scalar by about lr") {
    // Hand evaluation: m=0.1, v=1e-3, mhat=1, vhat=1 -> step of lr/(1+eps).
    ParamSet params;
    params.add("w", Tensor2::scalar(1.0));
    AdamOptimizer adam(params);
    adam.step(params, {Tensor2::scalar(1.0)}, 0.05, 0.1);
    CHECK(params[0].value.at(0, 0) == doctest::Approx(0.95).epsilon(1e-6));
}

TEST_CASE("adam: nonnegative projection clamps at zero") {
    ParamSet params;
    params.add("w", Tensor2::scalar(0.01), /*nonnegative=*/true);
    AdamOptimizer adam(params);
    adam.step(params, {Tensor2::scalar(100.0)}, 0.05, 0.1);
    CHECK(params[0].value.at(0, 0) == 0.0);
}

TEST_CASE("adam: non-finite gradient names the tensor") {
    ParamSet params;
    params.add("tower/w", Tensor2::scalar(1.0));
    AdamOptimizer adam(params);
    Tensor2 bad = Tensor2::scalar(std::numeric_limits<double>::infinity());
    try {
        adam.step(params, {bad}, 0.05, 0.1);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("tower/w") != std::string::npos);
    }
}

TEST_CASE("nonnegative tensors stay nonnegative across many steps") {
    ParamSet params;
    params.add("mono/w", init_tensor(4, 3, 11, "mono/w", true), /*nonnegative=*/true);
    AdamOptimizer adam(params);
    Rng rng(5);
    for (int step = 0; step < 1000; ++step) {
        Tensor2 g(4, 3);
        for (size_t i = 0; i < g.size(); ++i) g[i] = rng.normal();
        adam.step(params, {g}, 0.05, 0.1);
        for (size_t i = 0; i < params[0].value.size(); ++i) REQUIRE(params[0].value[i] >= 0.0);
    }
}

TEST_CASE("softmax rows sum to 1 and entries lie in (0,1)") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor2 logits(3, 5);
        for (size_t i = 0; i < logits.size(); ++i) logits[i] = rng.uniform(-15.0, 15.0);
        Tape tape;
        const int sm = tape.softmax_rows(tape.leaf(logits));
        const Tensor2& y = tape.val(sm);
        for (int i = 0; i < y.rows(); ++i) {
            double sum = 0.0;
            for (int j = 0; j < y.cols(); ++j) {
                REQUIRE(y.at(i, j) > 0.0);
                REQUIRE(y.at(i, j) < 1.0);
                sum += y.at(i, j);
            }
            REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("init_tensor is deterministic and order-independent") {
    const Tensor2 a = init_tensor(5, 4, 42, "task0/dct/0/w", false);
    const Tensor2 b = init_tensor(5, 4, 42, "task0/dct/0/w", false);
    for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
    const Tensor2 c = init_tensor(5, 4, 43, "task0/dct/0/w", false);
    bool differs = false;
    for (size_t i = 0; i < a.size(); ++i) differs |= a[i] != c[i];
    CHECK(differs);
}

TEST_CASE("tape: stop replay substitutes captured values") {
    // f(w) = w * stop(w): analytic df/dw = stop(w) = w0; replay keeps the
    // stopped factor fixed during finite differences.
    ParamSet params;
    params.add("w", Tensor2::scalar(3.0));
    const auto build = [](Tape& tape, const std::vector<int>& ids) {
        return tape.mean_all(tape.mul(ids[0], tape.stop_gradient(ids[0])));
    };
    const GradCheckReport report = finite_diff_check(params, build);
    CHECK(report.max_rel_err < 1e-8);
    const std::vector<Tensor2> g = analytic_gradients(params, build);
    CHECK(g[0].at(0, 0) == doctest::Approx(3.0));
}
