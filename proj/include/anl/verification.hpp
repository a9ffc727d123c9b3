#ifndef ANL_VERIFICATION_HPP
#define ANL_VERIFICATION_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anl/loss_framework.hpp"
#include "anl/rng.hpp"

namespace anl {

// Outcome of one executable property check.
struct CheckReport {
    std::string name;
    long trials = 0;
    long failures = 0;
    double worst_error = 0.0;
    std::optional<std::string> witness; // first failing input, present iff failures > 0
    long resamples = 0;                 // near-tie inputs that were redrawn
    std::string note;

    bool passed() const noexcept { return failures == 0; }
    void fail(double error, std::string what);
};

// Scalar loss of one prediction vector and label.
using PointLoss = std::function<double(const Eigen::VectorXd& p, Index y)>;

// Full gradient dL/dp of one prediction vector and label.
using PointGradient = std::function<Eigen::VectorXd(const Eigen::VectorXd& p, Index y)>;

/*
 * Central differences (L(p + h e_k) - L(p - h e_k)) / 2h per coordinate,
 * with p a free positive vector (no renormalisation).  Requires
 * h in [1e-8, 1e-4] and every entry >= p_min + h.
 */
Eigen::VectorXd finite_diff_grad(const PointLoss& loss, const Eigen::VectorXd& p, Index y,
                                 double h, double p_min);
Eigen::VectorXd finite_diff_grad(const BaseLoss& loss, const ProbVector& p, Index y, double h);
Eigen::VectorXd finite_diff_grad(const LossSpec& spec, const ProbVector& p, Index y, double h);

// max_k |a_k - b_k| / max(max|a|, max|b|, 1e-12).
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

PointLoss point_loss(const LossSpec& spec);

// Random simplex point: softmax of N(0, scale^2) logits, floored at p_min.
ProbVector random_simplex_point(Rng& rng, int classes, double p_min, double logit_scale);

// Direct transcription of the NNCE gradient formula, written independently
// of eval_nnlf.
double nnce_gradient_formula(const Eigen::VectorXd& p, Index y, Index j, double A);

// --- Property checks ----------------------------------------------------------

// sum_y L(p, y) == K - 1 within tol * (K - 1) on random clipped points.
CheckReport check_symmetry(const std::string& name, const PointLoss& loss,
                           std::span<const int> classes, long trials, double tol,
                           std::uint64_t seed, double p_min = kDefaultProbFloor);
CheckReport check_symmetry(const BaseLoss& active, std::span<const int> classes, long trials,
                           double tol, std::uint64_t seed,
                           std::optional<double> A_override = std::nullopt);

// Every value in [0, 1] for every label on the same kind of sweep.
CheckReport check_boundedness(const std::string& name, const PointLoss& loss,
                              std::span<const int> classes, long trials, std::uint64_t seed);

// Analytic batch gradient against central differences of the batch value,
// max relative error per batch < tol.
CheckReport check_gradient_fidelity(const LossSpec& spec, int classes, long trials, double tol,
                                    std::uint64_t seed, int batch = 4);

// MAE gradient equals +1 off the label and -1 on it, exactly.
CheckReport check_mae_gradient(int classes, long trials, std::uint64_t seed);

// eval_nnlf gradient against nnce_gradient_formula within tol (relative).
CheckReport check_nnce_formula(int classes, long trials, double tol, std::uint64_t seed);

// A pair (p1, p2) satisfying the premises of the cross-sample ordering.
struct OrderingPair {
    Eigen::VectorXd p1;
    Eigen::VectorXd p2;
    Index y = 0;
    Index j = 0;
};

// Samples p2, takes y = argmax, picks j != y and moves mass D from the
// remaining classes onto y proportionally.  Returns nullopt when the drawn
// instance violates a premise (caller retries).
std::optional<OrderingPair> make_ordering_pair(Rng& rng, int classes, double p_min);

struct OrderingOptions {
    PointGradient gradient; // defaults to the analytic NNCE gradient
    bool expect_greater = true; // false flips the asserted inequality (negative control)
};

// Within one sample: p(j1) < p(j2) implies dL/dp(j1) > dL/dp(j2), j1, j2 != y.
CheckReport check_class_ordering(std::span<const int> classes, long trials, std::uint64_t seed,
                                 const OrderingOptions& opts = {});

// Across samples built by make_ordering_pair: dL/dp1(j) > dL/dp2(j).
CheckReport check_sample_ordering(int classes, long trials, std::uint64_t seed,
                                  const OrderingOptions& opts = {});

struct OrderingReports {
    CheckReport class_ordering;
    CheckReport sample_ordering;
};
OrderingReports check_gradient_ordering(long trials, std::uint64_t seed,
                                        const OrderingOptions& opts = {});

/*
 * Exact noisy expectation sum_j T(y, j) L(p, j) under symmetric noise
 * against (1 - eta K / (K - 1)) L(p, y) + eta, absolute tolerance tol.
 */
CheckReport check_affine_noisy_risk(const std::string& name, const PointLoss& loss, double eta,
                                    int classes, long trials, std::uint64_t seed,
                                    double tol = 1e-10);

// argmin over candidate sets of the noisy expected loss equals the clean argmin.
CheckReport check_argmin_preservation(const std::string& name, const PointLoss& loss, double eta,
                                      int classes, long sets, int candidates, std::uint64_t seed);

// Noise injector statistics: symmetric realized rate within [eta - band,
// eta + band], and pair-map flips confined to mapped sources with noisy
// marginals inside the 99% chi-square band around T^T m.
CheckReport check_symmetric_noise_rate(double eta, int classes, long samples, double band,
                                       std::uint64_t seed);
CheckReport check_pairmap_marginals(double eta, long per_class, std::uint64_t seed);

// Quantile of the chi-square distribution with dof degrees of freedom.
double chi_square_quantile(int dof, double prob);

// Entropy regulariser: zero at uniform, log K at floored one-hot, and
// gradient log(pi) + 1 against finite differences.
CheckReport check_entropy_regularizer(long trials, std::uint64_t seed);

// The property suite behind the CLI "verify" subcommand.
std::vector<CheckReport> run_verification_suite(std::uint64_t seed);

// One JSON record per line: name, trials, failures, worst_error (+ extras).
void write_reports(std::span<const CheckReport> reports, const std::filesystem::path& path);

// Every loss the library implements, as covered by the gradient checks.
std::vector<std::pair<std::string, LossSpec>> gradient_check_losses();

} // namespace anl

#endif // ANL_VERIFICATION_HPP
