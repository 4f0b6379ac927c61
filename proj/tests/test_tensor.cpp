#include <doctest.h>

#include <cmath>
#include <cstring>

#include "contsep/error.hpp"
#include "contsep/optim.hpp"
#include "contsep/rng.hpp"
#include "contsep/tensor.hpp"
#include "test_util.hpp"

using namespace contsep;

TEST_CASE("elementwise add and mul basics") {
    const Tensor a = Tensor::from_data({2}, {1, 2});
    const Tensor b = Tensor::from_data({2}, {3, 4});
    const Tensor c = add(a, b);
    CHECK(c.at({0}) == 4);
    CHECK(c.at({1}) == 6);

    Rng rng(5);
    const Tensor x = Tensor::randn({3, 4}, rng);
    const Tensor y = mul(x, Tensor::ones({3, 4}));
    CHECK(std::memcmp(x.values().data(), y.values().data(), sizeof(double) * 12) == 0);
}

TEST_CASE("abs matches a per-entry loop oracle") {
    Rng rng(17);
    const Tensor x = Tensor::randn({2, 3}, rng);
    const Tensor y = abs(x);
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 3; ++j) CHECK(y.at({i, j}) == std::fabs(x.at({i, j})));
}

TEST_CASE("shape mismatch reports both shapes") {
    const Tensor a = Tensor::zeros({2, 3});
    const Tensor b = Tensor::zeros({4, 5});
    try {
        (void)add(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
}

TEST_CASE("broadcasting follows trailing-dimension rules") {
    const Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor brow = Tensor::from_data({3}, {10, 20, 30});
    const Tensor bcol = Tensor::from_data({2, 1}, {100, 200});
    const Tensor r1 = add(a, brow);
    CHECK(r1.at({0, 0}) == 11);
    CHECK(r1.at({1, 2}) == 36);
    const Tensor r2 = add(a, bcol);
    CHECK(r2.at({0, 2}) == 103);
    CHECK(r2.at({1, 0}) == 204);
    const Tensor r3 = mul(brow, bcol);  // [3] * [2,1] -> [2,3]
    CHECK(r3.shape() == Shape{2, 3});
    CHECK(r3.at({1, 2}) == 6000);
}

TEST_CASE("matmul identity and hand-computed cases") {
    const Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Rng rng(3);
    const Tensor m = Tensor::randn({3, 3}, rng);
    const Tensor im = matmul(eye, m);
    for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 3; ++j) CHECK(im.at({i, j}) == doctest::Approx(m.at({i, j})).epsilon(1e-15));

    const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    const Tensor v = Tensor::from_data({2, 1}, {1, 1});
    const Tensor r = matmul(a, v);
    CHECK(r.at({0, 0}) == 3);
    CHECK(r.at({1, 0}) == 7);
}

TEST_CASE("matmul random case against triple-loop oracle") {
    Rng rng(11);
    const Tensor a = Tensor::randn({4, 5}, rng);
    const Tensor b = Tensor::randn({5, 3}, rng);
    const Tensor c = matmul(a, b);
    for (std::int64_t i = 0; i < 4; ++i) {
        for (std::int64_t j = 0; j < 3; ++j) {
            double want = 0.0;
            for (std::int64_t l = 0; l < 5; ++l) want += a.at({i, l}) * b.at({l, j});
            CHECK(std::fabs(c.at({i, j}) - want) < 1e-12);
        }
    }
    CHECK_THROWS_AS((void)matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), DimensionError);
}

TEST_CASE("softmax sigmoid and l2_normalize basics") {
    const Tensor s = softmax(Tensor::from_data({3}, {0, 0, 0}), 0);
    for (std::int64_t i = 0; i < 3; ++i) CHECK(s.at({i}) == doctest::Approx(1.0 / 3).epsilon(1e-15));

    CHECK(sigmoid(Tensor::scalar(0.0)).item() == doctest::Approx(0.5).epsilon(1e-15));

    Rng rng(23);
    const Tensor v = Tensor::randn({7}, rng);
    const Tensor n = l2_normalize(v, 0);
    double norm2 = 0.0;
    for (std::int64_t i = 0; i < 7; ++i) norm2 += n.at({i}) * n.at({i});
    CHECK(std::fabs(std::sqrt(norm2) - 1.0) <= 1e-12);

    // zero slices pass through unchanged
    const Tensor z = l2_normalize(Tensor::zeros({4}), 0);
    for (std::int64_t i = 0; i < 4; ++i) CHECK(z.at({i}) == 0.0);

    // axis handling: normalize rows of a matrix
    const Tensor m = Tensor::from_data({2, 2}, {3, 4, 0, 5});
    const Tensor mn = l2_normalize(m, 1);
    CHECK(mn.at({0, 0}) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(mn.at({0, 1}) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(mn.at({1, 1}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("log of a negative input raises a numeric error naming the op") {
    try {
        (void)log(Tensor::from_data({2}, {1.0, -1.0}));
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("log") != std::string::npos);
    }
}

TEST_CASE("backward on sum gives ones; sum of squares gives 2x") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3});
    x.set_requires_grad(true);
    backward(sum(x));
    for (std::int64_t i = 0; i < 3; ++i) CHECK(x.grad()[static_cast<std::size_t>(i)] == 1.0);

    Tensor w = Tensor::from_data({2}, {1, 2});
    w.set_requires_grad(true);
    backward(sum(mul(w, w)));
    CHECK(w.grad()[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(w.grad()[1] == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("diamond graph accumulates both paths") {
    // y = x*x + 3x  =>  dy/dx = 2x + 3, checked by hand at x = 5
    Tensor x = Tensor::scalar(5.0);
    x.set_requires_grad(true);
    const Tensor y = add(mul(x, x), mul_scalar(x, 3.0));
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(13.0).epsilon(1e-15));
}

TEST_CASE("repeated backward accumulates until zero_grad") {
    Tensor x = Tensor::from_data({2}, {1, 1});
    x.set_requires_grad(true);
    const Tensor l = sum(x);
    backward(l);
    backward(l);
    CHECK(x.grad()[0] == 2.0);
    x.zero_grad();
    backward(l);
    CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("backward rejects non-scalar roots") {
    Tensor x = Tensor::zeros({3});
    x.set_requires_grad(true);
    CHECK_THROWS_AS(backward(add(x, x)), ContractError);
}

TEST_CASE("gradients match central finite differences across op set") {
    Rng rng(2718);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = Tensor::uniform({2, 3, 4}, rng, -1.0, 1.0);
        Tensor b = Tensor::uniform({3, 4}, rng, 0.1, 1.0);  // positive: feeds div/log
        Tensor c = Tensor::uniform({4, 5}, rng, -1.0, 1.0);
        a.set_requires_grad(true);
        b.set_requires_grad(true);
        c.set_requires_grad(true);

        const auto forward = [&]() {
            Tensor t = add(a, b);                                   // broadcast add
            t = mul(t, sigmoid(a));                                 // elementwise chain
            t = div(t, add_scalar(b, 1.0));                         // broadcast div
            Tensor u = reshape(t, {6, 4});
            u = matmul(u, c);                                       // [6,5]
            u = add(relu(u), abs(u));
            Tensor sm = softmax(u, 1);
            Tensor ln = l2_normalize(u, 1);
            Tensor lsm = log_softmax(u, 1);
            Tensor v = sum_axis(mul(sm, ln), 1, false);
            return mean(add(v, mean(lsm))).item();
        };

        // one graph pass for analytic grads
        {
            Tensor t = add(a, b);
            t = mul(t, sigmoid(a));
            t = div(t, add_scalar(b, 1.0));
            Tensor u = reshape(t, {6, 4});
            u = matmul(u, c);
            u = add(relu(u), abs(u));
            Tensor sm = softmax(u, 1);
            Tensor ln = l2_normalize(u, 1);
            Tensor lsm = log_softmax(u, 1);
            Tensor v = sum_axis(mul(sm, ln), 1, false);
            a.zero_grad();
            b.zero_grad();
            c.zero_grad();
            backward(mean(add(v, mean(lsm))));
        }
        CHECK(testutil::max_grad_error({a, b, c}, forward) < 1e-4);
    }
}

TEST_CASE("gradients of shape ops match finite differences") {
    Rng rng(31415);
    Tensor a = Tensor::uniform({3, 4}, rng, -1.0, 1.0);
    Tensor b = Tensor::uniform({2, 4}, rng, -1.0, 1.0);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    const auto forward = [&]() {
        Tensor cat = concat({a, b}, 0);                        // [5,4]
        Tensor p = permute(cat, {1, 0});                       // [4,5]
        Tensor nr = narrow(p, 1, 1, 3);                        // [4,3]
        Tensor r0 = row(nr, 2);                                // [3]
        Tensor st = stack_rows({r0, row(nr, 0), r0});          // [3,3] with reuse
        return sum(mul(st, st)).item();
    };
    {
        Tensor cat = concat({a, b}, 0);
        Tensor p = permute(cat, {1, 0});
        Tensor nr = narrow(p, 1, 1, 3);
        Tensor r0 = row(nr, 2);
        Tensor st = stack_rows({r0, row(nr, 0), r0});
        backward(sum(mul(st, st)));
    }
    CHECK(testutil::max_grad_error({a, b}, forward) < 1e-4);
}

TEST_CASE("forward results are bitwise deterministic") {
    const auto run = [] {
        Rng rng(99);
        const Tensor a = Tensor::randn({5, 6}, rng);
        const Tensor b = Tensor::randn({6, 7}, rng);
        return matmul(sigmoid(a), softmax(b, 1));
    };
    const Tensor r1 = run();
    const Tensor r2 = run();
    CHECK(std::memcmp(r1.values().data(), r2.values().data(),
                      sizeof(double) * static_cast<std::size_t>(r1.numel())) == 0);
}

TEST_CASE("adam descends on a quadratic and ignores zero gradients") {
    Tensor w = Tensor::scalar(1.0);
    w.set_requires_grad(true);
    Adam opt({w}, {.lr = 0.1});
    const double f0 = w.item() * w.item();
    opt.zero_grad();
    backward(mul(w, w));
    opt.step();
    CHECK(w.item() * w.item() < f0);

    // zero gradient leaves parameters unchanged
    Tensor u = Tensor::scalar(2.5);
    u.set_requires_grad(true);
    Adam opt2({u}, {.lr = 0.1});
    opt2.zero_grad();
    backward(mul_scalar(mul(u, Tensor::scalar(0.0)), 1.0));
    opt2.step();
    CHECK(u.item() == 2.5);

    // missing grad is a contract error
    Tensor z = Tensor::scalar(1.0);
    z.set_requires_grad(true);
    Adam opt3({z}, {});
    CHECK_THROWS_AS(opt3.step(), ContractError);
}

TEST_CASE("adam solves least squares to the closed-form solution") {
    // min ||Xw - y||^2 with the oracle solution w* from the normal equations
    Rng rng(777);
    const std::int64_t n = 12, d = 3;
    const Tensor x = Tensor::randn({n, d}, rng);
    const Tensor wtrue = Tensor::from_data({d, 1}, {0.5, -1.0, 2.0});
    const Tensor y = matmul(x, wtrue);

    // normal-equation oracle: w* = (X^T X)^{-1} X^T y via Gaussian elimination
    double xtx[3][4] = {};
    for (std::int64_t i = 0; i < d; ++i) {
        for (std::int64_t j = 0; j < d; ++j)
            for (std::int64_t r = 0; r < n; ++r) xtx[i][j] += x.at({r, i}) * x.at({r, j});
        for (std::int64_t r = 0; r < n; ++r) xtx[i][3] += x.at({r, i}) * y.at({r, 0});
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r2 = col + 1; r2 < 3; ++r2)
            if (std::fabs(xtx[r2][col]) > std::fabs(xtx[piv][col])) piv = r2;
        std::swap(xtx[col], xtx[piv]);
        for (int r2 = 0; r2 < 3; ++r2) {
            if (r2 == col) continue;
            const double fac = xtx[r2][col] / xtx[col][col];
            for (int c2 = col; c2 < 4; ++c2) xtx[r2][c2] -= fac * xtx[col][c2];
        }
    }
    const double wstar[3] = {xtx[0][3] / xtx[0][0], xtx[1][3] / xtx[1][1], xtx[2][3] / xtx[2][2]};

    Tensor w = Tensor::zeros({d, 1});
    w.set_requires_grad(true);
    Adam opt({w}, {.lr = 0.05});
    for (int step = 0; step < 200; ++step) {
        opt.zero_grad();
        const Tensor resid = sub(matmul(x, w), y);
        backward(mean(mul(resid, resid)));
        opt.step();
    }
    double resid = 0.0;
    for (std::int64_t i = 0; i < d; ++i) resid += std::fabs(w.at({i, 0}) - wstar[i]);
    CHECK(resid < 1e-3);
}

TEST_CASE("detach cuts the graph and old-model style constants get no grad") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    const Tensor frozen = mul_scalar(x, 2.0).detach();
    CHECK_FALSE(frozen.requires_grad());
    backward(sum(mul(x, frozen)));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 4.0);
    CHECK_FALSE(frozen.has_grad());
}
