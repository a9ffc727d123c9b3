#include <doctest.h>

#include <cmath>

#include "anl/loss_kernels.hpp"

using namespace anl;
using doctest::Approx;

namespace {
ProbVector pv(std::initializer_list<double> xs, double floor = 0.0) {
    Eigen::VectorXd v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs) v[i++] = x;
    return ProbVector(v, floor);
}
ProbVector uniform(int k) { return ProbVector(Eigen::VectorXd::Constant(k, 1.0 / k), 0.0); }
} // namespace

TEST_CASE("cross entropy value and gradient") {
    const auto e = eval_base_loss(BaseLoss::ce(), pv({0.5, 0.25, 0.25}), 0);
    CHECK(e.value == Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(e.grad_p[0] == Approx(-2.0).epsilon(1e-15));
    CHECK(e.grad_p[1] == 0.0);
    CHECK(e.grad_p[2] == 0.0);
}

TEST_CASE("MAE on uniform K=10") {
    for (Index y : {0, 4, 9}) {
        const auto e = eval_base_loss(BaseLoss::mae(), uniform(10), y);
        CHECK(e.value == Approx(1.8).epsilon(1e-14));
        for (Index k = 0; k < 10; ++k) CHECK(e.grad_p[k] == (k == y ? -1.0 : 1.0));
    }
}

TEST_CASE("focal loss with gamma 0 equals cross entropy") {
    const auto p = pv({0.6, 0.3, 0.1});
    for (Index y = 0; y < 3; ++y) {
        const auto fl = eval_base_loss(BaseLoss::fl(0.0), p, y);
        const auto ce = eval_base_loss(BaseLoss::ce(), p, y);
        CHECK(fl.value == Approx(ce.value).epsilon(1e-15));
        CHECK((fl.grad_p - ce.grad_p).norm() < 1e-14);
    }
}

TEST_CASE("GCE and SCE values") {
    CHECK(eval_base_loss(BaseLoss::gce(0.7), pv({1.0, 0.0}), 0).value == 0.0);
    CHECK(eval_base_loss(BaseLoss::gce(0.7), pv({0.5, 0.5}), 0).value ==
          Approx(0.54918256189648836821).epsilon(1e-14));
    CHECK(eval_base_loss(BaseLoss::sce(0.1, 1.0), pv({0.5, 0.5}), 1).value ==
          Approx(2.0693147180559945309).epsilon(1e-14));
    CHECK(eval_base_loss(BaseLoss::rce(), pv({0.25, 0.75}), 0).value == Approx(3.0));
}

TEST_CASE("label out of range") {
    CHECK_THROWS_AS(eval_base_loss(BaseLoss::ce(), uniform(3), 3), IndexError);
}

TEST_CASE("loss ceiling") {
    CHECK(loss_constant_A(BaseLoss::ce(), 1e-7) == Approx(16.118095650958319788).epsilon(1e-15));
    CHECK(loss_constant_A(BaseLoss::fl(0.5), 1e-7) == Approx(16.118094845053517).epsilon(1e-14));
    CHECK(loss_constant_A(BaseLoss::ce(), 1e-3) == Approx(6.9077552789821371).epsilon(1e-15));
    CHECK(loss_constant_A(BaseLoss::fl(2.0), 1e-3) == Approx(6.8939466761794518).epsilon(1e-14));
    CHECK_THROWS_AS(loss_constant_A(BaseLoss::mae(), 1e-7), UnsupportedLoss);
    CHECK_THROWS_AS(loss_constant_A(BaseLoss::rce(), 1e-7), UnsupportedLoss);
    CHECK_THROWS_AS(loss_constant_A(BaseLoss::ce(), 0.0), InvalidInput);
}

TEST_CASE("focal ceiling is the maximum over a dense grid") {
    const BaseLoss fl = BaseLoss::fl(0.5);
    const double a = loss_constant_A(fl, 1e-7);
    for (int i = 0; i <= 100000; ++i) {
        const double p = 1e-7 + (1.0 - 1e-7) * i / 100000.0;
        CHECK_LE(active_term(fl, p), a);
    }
}

TEST_CASE("kind names and parameter validation") {
    CHECK(loss_kind_from_string("gce") == LossKind::GCE);
    CHECK_THROWS_AS(loss_kind_from_string("hinge"), UnsupportedLoss);
    CHECK_THROWS_AS(BaseLoss::from_params(LossKind::GCE, {{"q", 0.0}}), InvalidInput);
    CHECK_THROWS_AS(BaseLoss::from_params(LossKind::FL, {{"gamma", -1.0}}), InvalidInput);
    CHECK_THROWS_AS(BaseLoss::from_params(LossKind::CE, {{"zeta", 1.0}}), InvalidInput);
    CHECK(BaseLoss::from_params(LossKind::FL, {{"gamma", 2.0}}).gamma == 2.0);
}
