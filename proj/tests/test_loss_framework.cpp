#include <doctest.h>

#include <cmath>
#include <vector>

#include "anl/loss_framework.hpp"
#include "anl/rng.hpp"

using namespace anl;
using doctest::Approx;

namespace {
constexpr double kA = 16.118095650958319788;

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}
Eigen::VectorXd uniform(int k) { return Eigen::VectorXd::Constant(k, 1.0 / k); }
} // namespace

TEST_CASE("normalised CE") {
    for (int k : {2, 3, 10, 100}) {
        CHECK(eval_normalized(BaseLoss::ce(), uniform(k), k - 1).value ==
              Approx(1.0 / k).epsilon(1e-14));
    }
    CHECK(eval_normalized(BaseLoss::ce(), vec({0.5, 0.5}), 0).value == Approx(0.5));
    CHECK_THROWS_AS(eval_normalized(BaseLoss::ce(), vec({1.0, 1.0}), 0), DegenerateInput);
}

TEST_CASE("normalised FL") {
    CHECK(eval_normalized(BaseLoss::fl(0.5), vec({0.6, 0.3, 0.1}), 1).value ==
          Approx(0.2865914939286450235).epsilon(1e-14));
    CHECK_THROWS_AS(eval_normalized(BaseLoss::mae(), uniform(3), 0), UnsupportedLoss);
}

TEST_CASE("negative loss") {
    CHECK(eval_nlf(BaseLoss::ce(), kA, uniform(3), 0).value ==
          Approx(30.038966724580420).epsilon(1e-14));
    CHECK(eval_nlf(BaseLoss::ce(), kA, uniform(3), 0).value ==
          Approx(2 * (kA - std::log(3.0))).epsilon(1e-14));

    const Eigen::VectorXd hot = vec({1.0, 1e-7, 1e-7});
    CHECK(std::abs(eval_nlf(BaseLoss::ce(), kA, hot, 0).value) < 1e-12);

    const Eigen::VectorXd p = vec({0.31, 0.07, 0.22, 0.15, 0.25});
    CHECK(eval_nlf(BaseLoss::ce(), kA, p, 2).value == Approx(57.358525239391784047).epsilon(1e-14));

    CHECK_THROWS_AS(eval_nlf(BaseLoss::ce(), 1.0, uniform(3), 0), InvariantViolation);
}

TEST_CASE("negative loss against a direct transcription at random points") {
    Rng rng(11);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd z(5);
        for (Index i = 0; i < 5; ++i) z[i] = 3.0 * rng.normal();
        const Eigen::VectorXd p = clip_probs(softmax(z), 1e-7).values();
        const Index y = static_cast<Index>(rng.below(5));
        double direct = 0.0;
        for (Index k = 0; k < 5; ++k) {
            if (k != y) direct += kA - (-std::log(p[k]));
        }
        CHECK(std::abs(eval_nlf(BaseLoss::ce(), kA, p, y).value - direct) < 1e-10);
    }
}

TEST_CASE("normalised negative CE") {
    CHECK(eval_nnlf(BaseLoss::ce(), kA, uniform(10), 3).value == Approx(0.9).epsilon(1e-14));

    const auto e = eval_nnlf(BaseLoss::ce(), kA, vec({0.7, 0.2, 0.1}), 0);
    CHECK(e.value == Approx(0.642481339973355397).epsilon(1e-14));
    CHECK(e.grad_p[0] == Approx(-0.020819285993960209).epsilon(1e-13));
    CHECK(e.grad_p[1] == Approx(0.040548245822256713).epsilon(1e-13));
    CHECK(e.grad_p[2] == Approx(0.081096491644513425).epsilon(1e-13));

    const double afl = loss_constant_A(BaseLoss::fl(0.5), 1e-7);
    CHECK(eval_nnlf(BaseLoss::fl(0.5), afl, vec({0.6, 0.3, 0.1}), 1).value ==
          Approx(0.66300273194028117804).epsilon(1e-13));
}

TEST_CASE("entropy regulariser values") {
    auto reg = [](Eigen::MatrixXd probs) {
        return eval_entropy_reg(BatchContext::from_probs(std::move(probs)));
    };
    Eigen::MatrixXd half(1, 2);
    half << 0.5, 0.5;
    CHECK(std::abs(reg(half).value) < 1e-15);

    Eigen::MatrixXd skew(2, 2);
    skew << 1.0, 0.0, 0.8, 0.2;
    const auto r = reg(skew);
    CHECK(r.value == Approx(0.36806420716849707).epsilon(1e-14));
    CHECK(r.grad_pi[0] == Approx(std::log(0.9) + 1).epsilon(1e-14));
    CHECK(r.grad_p(1, 1) == Approx(0.5 * (std::log(0.1) + 1)).epsilon(1e-14));

    Eigen::MatrixXd u = Eigen::MatrixXd::Constant(4, 10, 0.1);
    CHECK(std::abs(reg(u).value) < 1e-12);

    Eigen::MatrixXd hot(1, 3);
    hot << 1.0, 1e-7, 1e-7;
    CHECK(reg(hot).value == Approx(std::log(3.0)).epsilon(1e-5));

    Eigen::MatrixXd zero(1, 2);
    zero << 1.0, 0.0;
    CHECK_THROWS_AS(reg(zero), PreconditionError);
}

TEST_CASE("ANL-CE batch value on uniform predictions") {
    const LossSpec spec = FrameworkLossSpec::anl(BaseLoss::ce(), 5, 5);
    const auto ctx = BatchContext::from_probs(Eigen::MatrixXd::Constant(3, 10, 0.1));
    const std::vector<int> y = {0, 5, 9};
    CHECK(eval_framework_loss<double>(spec, ctx, y).value == Approx(5.0).epsilon(1e-14));
}

TEST_CASE("lambda 0 reduces ANL* to ANL") {
    Rng rng(3);
    Eigen::MatrixXd probs(6, 4);
    for (Index n = 0; n < 6; ++n) {
        Eigen::VectorXd z(4);
        for (Index i = 0; i < 4; ++i) z[i] = 2 * rng.normal();
        probs.row(n) = clip_probs(softmax(z), 1e-7).values().transpose();
    }
    const auto ctx = BatchContext::from_probs(probs);
    const std::vector<int> y = {0, 1, 2, 3, 0, 1};
    const auto a = eval_framework_loss<double>(FrameworkLossSpec::anl(BaseLoss::ce(), 5, 5), ctx, y);
    const auto b = eval_framework_loss<double>(FrameworkLossSpec::anl_star(BaseLoss::ce(), 5, 5, 0.0),
                                               ctx, y);
    CHECK(a.value == b.value);
    CHECK(a.grad_p == b.grad_p);

    const auto c = eval_framework_loss<double>(FrameworkLossSpec::anl_star(BaseLoss::ce(), 5, 5, 2.0),
                                               ctx, y);
    CHECK(c.value > a.value);
}

TEST_CASE("framework loss validation") {
    CHECK_THROWS_AS(FrameworkLossSpec::anl(BaseLoss::mae(), 1, 1), ConfigError);
    CHECK_THROWS_AS(FrameworkLossSpec::anl(BaseLoss::ce(), 0, 1), ConfigError);
    CHECK_THROWS_AS(FrameworkLossSpec::anl_star(BaseLoss::ce(), 1, 1, -1), ConfigError);
    auto apl = FrameworkLossSpec::apl(BaseLoss::ce(), BaseLoss::rce(), 1, 1);
    apl.passive.reset();
    const auto ctx = BatchContext::from_probs(Eigen::MatrixXd::Constant(1, 3, 1.0 / 3));
    const std::vector<int> y = {0};
    CHECK_THROWS_AS(eval_framework_loss<double>(LossSpec(apl), ctx, y), ConfigError);

    auto stale = FrameworkLossSpec::anl(BaseLoss::ce(), 1, 1);
    stale.A = 3.0;
    CHECK_THROWS_AS(stale.validate(), ConfigError);
    const std::vector<int> two = {0, 1};
    CHECK_THROWS_AS(eval_framework_loss<double>(LossSpec(FrameworkLossSpec::anl(BaseLoss::ce(), 1, 1)),
                                                ctx, two),
                    ShapeError);
}

TEST_CASE("names") {
    CHECK(describe(FrameworkLossSpec::anl(BaseLoss::ce(), 5, 5)) == "ANL-CE");
    CHECK(describe(FrameworkLossSpec::anl_star(BaseLoss::fl(0.5), 5, 5, 1)) == "ANL-FL*");
    CHECK(describe(FrameworkLossSpec::apl(BaseLoss::ce(), BaseLoss::rce(), 1, 1)) == "NCE+RCE");
    CHECK(describe(FrameworkLossSpec::nnlf(BaseLoss::fl(0.5))) == "NNFL");
    CHECK(describe(BaseLoss::gce(0.7)) == "GCE");
}

TEST_CASE("pairwise sum depends only on values") {
    std::vector<double> xs(1000);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = 1.0 / double(i + 1);
    const double a = pairwise_sum<double>(xs);
    const double b = pairwise_sum<double>(xs);
    CHECK(a == b);
    CHECK(a == Approx(7.4854708605503449127).epsilon(1e-14));
}
