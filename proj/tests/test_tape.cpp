#include <doctest.h>

#include <cmath>

#include "ctes/params.hpp"
#include "ctes/tape.hpp"

using namespace ctes;

TEST_SUITE("tape") {

TEST_CASE("elementwise ops and gradients") {
    Tape T;
    Var a = T.scalar(3.0);
    Var b = T.scalar(2.0);
    Var y = T.add(T.mul(a, b), T.div(a, b));  // 3*2 + 3/2
    CHECK(T.value(y) == doctest::Approx(7.5));
    T.backward(y);
    CHECK(T.grad(a).v[0] == doctest::Approx(2.0 + 0.5));        // b + 1/b
    CHECK(T.grad(b).v[0] == doctest::Approx(3.0 - 3.0 / 4.0));  // a - a/b^2
}

TEST_CASE("repeated use accumulates gradients") {
    Tape T;
    Var x = T.scalar(1.5);
    Var y = T.add(x, x);
    T.backward(y);
    CHECK(T.grad(x).v[0] == doctest::Approx(2.0));
}

TEST_CASE("scalar broadcast in elementwise ops") {
    Tape T;
    Var v = T.leaf(Tensor::vec({1.0, 2.0, 3.0}));
    Var s = T.scalar(2.0);
    Var y = T.sum(T.mul(v, s));
    CHECK(T.value(y) == doctest::Approx(12.0));
    T.backward(y);
    CHECK(T.grad(s).v[0] == doctest::Approx(6.0));
    CHECK(T.grad(v).v[1] == doctest::Approx(2.0));
}

TEST_CASE("logsumexp is max-stabilized") {
    Tape T;
    Var v = T.leaf(Tensor::vec({1000.0, 1000.0}));
    Var y = T.logsumexp(v);
    CHECK(T.value(y) == doctest::Approx(1000.0 + std::log(2.0)));
    T.backward(y);
    CHECK(T.grad(v).v[0] == doctest::Approx(0.5));
}

TEST_CASE("log of a non-positive value throws") {
    Tape T;
    Var x = T.scalar(-1.0);
    CHECK_THROWS(T.log_(x));
}

TEST_CASE("matvec and unary gradients match finite differences") {
    // two-layer tanh network: y = sum(tanh(W2 tanh(W1 x + b1) + b2))
    ParamStore ps;
    RandomStream rng(11);
    ps.add_uniform("W1", 3, 2, 2, rng);
    ps.add("b1", Tensor::vec({0.1, -0.2, 0.3}));
    ps.add_uniform("W2", 2, 3, 3, rng);
    ps.add("b2", Tensor::vec({0.0, 0.05}));
    CHECK(ps.num_scalars() == 17);

    auto loss = [&]() {
        Tape T;
        Var x = T.leaf(Tensor::vec({0.7, -1.3}));
        Var h = T.tanh_(T.add(T.matvec(T.param(ps, "W1"), x), T.param(ps, "b1")));
        Var y = T.sum(
            T.tanh_(T.add(T.matvec(T.param(ps, "W2"), h), T.param(ps, "b2"))));
        T.backward(y);
        T.accumulate_grads();
        return T.value(y);
    };
    CHECK(grad_check(loss, {&ps}, 1e-5) < 1e-6);
}

TEST_CASE("primitive gradients via grad_check") {
    ParamStore ps;
    ps.add("v", Tensor::vec({0.4, 1.2, -0.7}));
    ps.add("s", Tensor::scalar(0.9));

    auto run = [&](auto&& body) {
        auto loss = [&]() {
            Tape T;
            Var v = T.param(ps, "v");
            Var s = T.param(ps, "s");
            Var y = body(T, v, s);
            T.backward(y);
            T.accumulate_grads();
            return T.value(y);
        };
        CHECK(grad_check(loss, {&ps}, 1e-5) < 1e-6);
        ps.zero_grads();
    };

    run([](Tape& T, Var v, Var s) { return T.sum(T.add(v, s)); });
    run([](Tape& T, Var v, Var s) { return T.sum(T.mul(v, s)); });
    run([](Tape& T, Var v, Var s) { return T.sum(T.div(v, s)); });
    run([](Tape& T, Var v, Var) { return T.logsumexp(v); });
    run([](Tape& T, Var v, Var) { return T.sum(T.sigmoid_(v)); });
    run([](Tape& T, Var v, Var) { return T.sum(T.softplus_(v)); });
    run([](Tape& T, Var v, Var) { return T.sum(T.exp_(T.scale(v, 0.5))); });
    run([](Tape& T, Var v, Var s) { return T.pick(T.concat(v, s), 3); });
    run([](Tape& T, Var v, Var) { return T.dot_const(v, {0.5, -1.0, 2.0}); });
    run([](Tape& T, Var v, Var) {
        return T.sum(T.sqrt_(T.add_const(T.mul(v, v), 0.1)));
    });
}

}  // TEST_SUITE
