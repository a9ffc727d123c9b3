#ifndef ANL_LOSS_FRAMEWORK_HPP
#define ANL_LOSS_FRAMEWORK_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "anl/error.hpp"
#include "anl/loss_kernels.hpp"
#include "anl/prob.hpp"

namespace anl {

// ---------------------------------------------------------------------------
// Per-sample constructions over an active base loss (CE or FL).
// ---------------------------------------------------------------------------

namespace detail {

inline void require_active(const BaseLoss& loss) {
    if (!loss.is_active()) {
        throw UnsupportedLoss(std::string("expected an active loss (ce or fl), got '") +
                              std::string(to_string(loss.kind)) + "'");
    }
}

// A - l(p_k) for every class, with the ceiling checked against each term.
template <typename Derived>
Vec<typename Derived::Scalar> flipped_terms(const BaseLoss& active, double A,
                                            const Eigen::MatrixBase<Derived>& p) {
    using Scalar = typename Derived::Scalar;
    const Index k = p.size();
    Vec<Scalar> n(k);
    const Scalar ceiling = Scalar(A);
    const Scalar tol = Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
                       std::max(Scalar(1), std::abs(ceiling));
    for (Index i = 0; i < k; ++i) {
        n[i] = ceiling - active_term(active, Scalar(p[i]));
        if (n[i] < -tol) {
            throw InvariantViolation("loss ceiling A=" + std::to_string(A) +
                                     " is below the per-class loss at class " +
                                     std::to_string(i));
        }
    }
    return n;
}

} // namespace detail

/// Normalised active loss l(p_y) / sum_k l(p_k), e.g. NCE and NFL.
template <typename Derived>
LossEval<typename Derived::Scalar> eval_normalized(const BaseLoss& active,
                                                   const Eigen::MatrixBase<Derived>& p, Index y) {
    using Scalar = typename Derived::Scalar;
    detail::require_active(active);
    const Index k = p.size();
    detail::check_label(y, k);

    Vec<Scalar> terms(k);
    Vec<Scalar> slopes(k);
    for (Index i = 0; i < k; ++i) {
        terms[i] = active_term(active, Scalar(p[i]));
        slopes[i] = active_term_derivative(active, Scalar(p[i]));
    }
    const Scalar denom = terms.sum();
    if (!(denom > Scalar(0))) {
        throw DegenerateInput("normalised loss: all per-class losses are zero");
    }

    LossEval<Scalar> out;
    out.value = terms[y] / denom;
    // Quotient rule: d/dp_j = (delta_jy l'(p_y) S - l(p_y) l'(p_j)) / S^2.
    out.grad_p = -(terms[y] / (denom * denom)) * slopes;
    out.grad_p[y] += slopes[y] / denom;
    return out;
}

/// Negative loss sum_{k != y} (A - l(p_k)).
template <typename Derived>
LossEval<typename Derived::Scalar> eval_nlf(const BaseLoss& active, double A,
                                            const Eigen::MatrixBase<Derived>& p, Index y) {
    using Scalar = typename Derived::Scalar;
    detail::require_active(active);
    const Index k = p.size();
    detail::check_label(y, k);

    const Vec<Scalar> n = detail::flipped_terms(active, A, p);
    LossEval<Scalar> out;
    out.value = n.sum() - n[y];
    out.grad_p.resize(k);
    for (Index i = 0; i < k; ++i) {
        out.grad_p[i] = i == y ? Scalar(0) : -active_term_derivative(active, Scalar(p[i]));
    }
    return out;
}

/*
 * Normalised negative loss 1 - (A - l(p_y)) / sum_k (A - l(p_k)).
 *
 * With N_k = A - l(p_k) and S = sum_k N_k the gradient is
 *   j != y :  N_y N'_j / S^2
 *   j == y : -(S - N_y) N'_y / S^2
 * where N'_j = -l'(p_j); for CE N'_j = 1 / p_j.
 */
template <typename Derived>
LossEval<typename Derived::Scalar> eval_nnlf(const BaseLoss& active, double A,
                                             const Eigen::MatrixBase<Derived>& p, Index y) {
    using Scalar = typename Derived::Scalar;
    detail::require_active(active);
    const Index k = p.size();
    detail::check_label(y, k);

    const Vec<Scalar> n = detail::flipped_terms(active, A, p);
    const Scalar s = n.sum();
    if (!(s > Scalar(0))) {
        throw DegenerateInput("normalised negative loss: zero denominator");
    }
    const Scalar s2 = s * s;

    LossEval<Scalar> out;
    out.value = Scalar(1) - n[y] / s;
    out.grad_p.resize(k);
    for (Index i = 0; i < k; ++i) {
        const Scalar dn = -active_term_derivative(active, Scalar(p[i]));
        out.grad_p[i] = i == y ? -(s - n[y]) * dn / s2 : n[y] * dn / s2;
    }
    return out;
}

template <typename Scalar>
LossEval<Scalar> eval_normalized(const BaseLoss& active, const BasicProbVector<Scalar>& p, Index y) {
    return eval_normalized(active, p.values(), y);
}
template <typename Scalar>
LossEval<Scalar> eval_nlf(const BaseLoss& active, double A, const BasicProbVector<Scalar>& p,
                          Index y) {
    return eval_nlf(active, A, p.values(), y);
}
template <typename Scalar>
LossEval<Scalar> eval_nnlf(const BaseLoss& active, double A, const BasicProbVector<Scalar>& p,
                           Index y) {
    return eval_nnlf(active, A, p.values(), y);
}

// ---------------------------------------------------------------------------
// Batch-level entropy regulariser over the mean predicted marginal.
// ---------------------------------------------------------------------------

/// Batch predictions (B x K, one row per sample) and their column mean pi.
template <typename Scalar>
struct BasicBatchContext {
    Mat<Scalar> probs;
    Vec<Scalar> pi;

    static BasicBatchContext from_probs(Mat<Scalar> probs) {
        if (probs.rows() < 1 || probs.cols() < 2) {
            throw InvalidInput("batch context needs B >= 1 and K >= 2");
        }
        BasicBatchContext ctx;
        ctx.pi = probs.colwise().mean().transpose();
        ctx.probs = std::move(probs);
        return ctx;
    }

    Index batch_size() const noexcept { return probs.rows(); }
    Index classes() const noexcept { return probs.cols(); }
};

using BatchContext = BasicBatchContext<double>;

template <typename Scalar>
struct EntropyRegEval {
    Scalar value{};
    Vec<Scalar> grad_pi;
    Mat<Scalar> grad_p; // B x K, d value / d p_n via the batch mean
};

/// log K + sum_k pi_k log pi_k.
template <typename Scalar>
EntropyRegEval<Scalar> eval_entropy_reg(const BasicBatchContext<Scalar>& ctx) {
    using std::log;
    const Index k = ctx.classes();
    if (ctx.pi.size() != k) {
        throw ShapeError("batch context marginal has the wrong length");
    }
    if (!(ctx.pi.minCoeff() > Scalar(0))) {
        throw PreconditionError("entropy regulariser: marginal entry at or below zero");
    }
    EntropyRegEval<Scalar> out;
    Scalar acc = log(Scalar(k));
    for (Index i = 0; i < k; ++i) {
        acc += ctx.pi[i] * log(ctx.pi[i]);
    }
    out.value = acc;
    out.grad_pi = ctx.pi.array().log() + Scalar(1);
    const Scalar inv_b = Scalar(1) / Scalar(ctx.batch_size());
    out.grad_p = (inv_b * out.grad_pi).transpose().replicate(ctx.batch_size(), 1);
    return out;
}

// ---------------------------------------------------------------------------
// Framework specs and batch evaluation.
// ---------------------------------------------------------------------------

enum class Combiner { NormalizedOnly, NnlfOnly, Apl, Anl, AnlStar };

inline std::string_view to_string(Combiner c) {
    switch (c) {
    case Combiner::NormalizedOnly: return "normalized";
    case Combiner::NnlfOnly: return "nnlf";
    case Combiner::Apl: return "apl";
    case Combiner::Anl: return "anl";
    case Combiner::AnlStar: return "anl_star";
    }
    throw ConfigError("unknown combiner");
}

inline Combiner combiner_from_string(std::string_view name) {
    for (Combiner c : {Combiner::NormalizedOnly, Combiner::NnlfOnly, Combiner::Apl,
                       Combiner::Anl, Combiner::AnlStar}) {
        if (to_string(c) == name) {
            return c;
        }
    }
    throw ConfigError("unknown combiner '" + std::string(name) + "'");
}

/*
 * alpha * L_norm + beta * L_nn (+ lambda * L_reg), or the APL / single-term
 * variants.  A is fixed at construction from (active, p_min) and validated
 * afterwards; the loss surface never changes during training.
 */
struct FrameworkLossSpec {
    BaseLoss active = BaseLoss::ce();
    double alpha = 1.0;
    double beta = 1.0;
    double lambda = 0.0;
    double p_min = kDefaultProbFloor;
    double A = 0.0;
    Combiner combiner = Combiner::Anl;
    std::optional<BaseLoss> passive;

    static FrameworkLossSpec make(Combiner combiner, BaseLoss active, double alpha, double beta,
                                  double lambda = 0.0, double p_min = kDefaultProbFloor,
                                  std::optional<BaseLoss> passive = std::nullopt) {
        FrameworkLossSpec s;
        s.combiner = combiner;
        s.active = active;
        s.alpha = alpha;
        s.beta = beta;
        s.lambda = lambda;
        s.p_min = p_min;
        s.passive = passive;
        s.A = active.is_active() && p_min > 0.0 && p_min < 1.0 ? loss_constant_A(active, p_min) : 0.0;
        s.validate();
        return s;
    }

    static FrameworkLossSpec anl(BaseLoss active, double alpha, double beta,
                                 double p_min = kDefaultProbFloor) {
        return make(Combiner::Anl, active, alpha, beta, 0.0, p_min);
    }
    static FrameworkLossSpec anl_star(BaseLoss active, double alpha, double beta, double lambda,
                                      double p_min = kDefaultProbFloor) {
        return make(Combiner::AnlStar, active, alpha, beta, lambda, p_min);
    }
    static FrameworkLossSpec apl(BaseLoss active, BaseLoss passive, double alpha, double beta,
                                 double p_min = kDefaultProbFloor) {
        return make(Combiner::Apl, active, alpha, beta, 0.0, p_min, passive);
    }
    static FrameworkLossSpec normalized(BaseLoss active, double alpha = 1.0,
                                        double p_min = kDefaultProbFloor) {
        return make(Combiner::NormalizedOnly, active, alpha, 1.0, 0.0, p_min);
    }
    static FrameworkLossSpec nnlf(BaseLoss active, double beta = 1.0,
                                  double p_min = kDefaultProbFloor) {
        return make(Combiner::NnlfOnly, active, 1.0, beta, 0.0, p_min);
    }

    bool uses_nnlf() const noexcept {
        return combiner == Combiner::NnlfOnly || combiner == Combiner::Anl ||
               combiner == Combiner::AnlStar;
    }

    void validate() const {
        if (!active.is_active()) {
            throw ConfigError("loss.active", "must be an active loss (ce or fl)");
        }
        active.validate();
        if (!(p_min > 0.0 && p_min < 0.5)) {
            throw ConfigError("loss.p_min", "must lie in (0, 0.5)");
        }
        const bool two_term = combiner == Combiner::Apl || combiner == Combiner::Anl ||
                              combiner == Combiner::AnlStar;
        if (two_term && !(alpha > 0.0 && beta > 0.0)) {
            throw ConfigError("loss.alpha", "alpha and beta must be positive");
        }
        if (combiner == Combiner::NormalizedOnly && !(alpha > 0.0)) {
            throw ConfigError("loss.alpha", "must be positive");
        }
        if (combiner == Combiner::NnlfOnly && !(beta > 0.0)) {
            throw ConfigError("loss.beta", "must be positive");
        }
        if (!(lambda >= 0.0)) {
            throw ConfigError("loss.lambda", "must be nonnegative");
        }
        if (combiner == Combiner::Apl) {
            if (!passive) {
                throw ConfigError("loss.passive", "APL requires a passive loss");
            }
            passive->validate();
        }
        if (uses_nnlf()) {
            const double expect = loss_constant_A(active, p_min);
            if (std::abs(A - expect) > 1e-12 * std::abs(expect)) {
                throw ConfigError("loss.A", "does not match the ceiling of the active loss");
            }
        }
    }
};

// A training objective: a plain base loss or a framework construction.
using LossSpec = std::variant<BaseLoss, FrameworkLossSpec>;

// Short human-readable name, e.g. "ANL-CE", "NCE+RCE", "NNFL", "GCE".
inline std::string describe(const LossSpec& spec) {
    auto upper = [](std::string_view s) {
        std::string r(s);
        for (char& c : r) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return r;
    };
    if (const auto* base = std::get_if<BaseLoss>(&spec)) {
        return upper(to_string(base->kind));
    }
    const auto& f = std::get<FrameworkLossSpec>(spec);
    const std::string a = upper(to_string(f.active.kind));
    switch (f.combiner) {
    case Combiner::NormalizedOnly: return "N" + a;
    case Combiner::NnlfOnly: return "NN" + a;
    case Combiner::Apl: return "N" + a + "+" + upper(to_string(f.passive->kind));
    case Combiner::Anl: return "ANL-" + a;
    case Combiner::AnlStar: return "ANL-" + a + "*";
    }
    return "?";
}

/// Combined per-sample loss, without the batch-level regulariser.
template <typename Derived>
LossEval<typename Derived::Scalar> eval_sample_loss(const LossSpec& spec,
                                                    const Eigen::MatrixBase<Derived>& p, Index y) {
    using Scalar = typename Derived::Scalar;
    if (const auto* base = std::get_if<BaseLoss>(&spec)) {
        return eval_base_loss(*base, p, y);
    }
    const auto& f = std::get<FrameworkLossSpec>(spec);
    const Scalar a = Scalar(f.alpha);
    const Scalar b = Scalar(f.beta);
    switch (f.combiner) {
    case Combiner::NormalizedOnly: {
        auto e = eval_normalized(f.active, p, y);
        e.value *= a;
        e.grad_p *= a;
        return e;
    }
    case Combiner::NnlfOnly: {
        auto e = eval_nnlf(f.active, f.A, p, y);
        e.value *= b;
        e.grad_p *= b;
        return e;
    }
    case Combiner::Apl: {
        if (!f.passive) {
            throw ConfigError("loss.passive", "APL requires a passive loss");
        }
        const auto n = eval_normalized(f.active, p, y);
        const auto q = eval_base_loss(*f.passive, p, y);
        return {a * n.value + b * q.value, a * n.grad_p + b * q.grad_p};
    }
    case Combiner::Anl:
    case Combiner::AnlStar: {
        const auto n = eval_normalized(f.active, p, y);
        const auto nn = eval_nnlf(f.active, f.A, p, y);
        return {a * n.value + b * nn.value, a * n.grad_p + b * nn.grad_p};
    }
    }
    throw ConfigError("unknown combiner");
}

// Sum in a fixed pairwise tree so the result depends only on the length.
template <typename Scalar>
Scalar pairwise_sum(std::span<const Scalar> xs) {
    if (xs.empty()) return Scalar(0);
    if (xs.size() <= 8) {
        Scalar acc = Scalar(0);
        for (Scalar x : xs) acc += x;
        return acc;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

template <typename Scalar>
struct BatchLossEval {
    Scalar value{};
    Mat<Scalar> grad_p; // B x K
};

/*
 * Mean per-sample loss over the batch plus lambda * L_reg (ANL* only),
 * with the gradient of that scalar with respect to every sample's p.
 */
template <typename Scalar>
BatchLossEval<Scalar> eval_framework_loss(const LossSpec& spec,
                                          const BasicBatchContext<Scalar>& ctx,
                                          std::span<const int> labels) {
    const Index b = ctx.batch_size();
    const Index k = ctx.classes();
    if (b < 1) {
        throw InvalidInput("empty batch");
    }
    if (static_cast<Index>(labels.size()) != b) {
        throw ShapeError("label count does not match batch size");
    }
    const auto* f = std::get_if<FrameworkLossSpec>(&spec);
    if (f != nullptr) {
        f->validate();
    } else {
        std::get<BaseLoss>(spec).validate();
    }

    BatchLossEval<Scalar> out;
    out.grad_p.resize(b, k);
    std::vector<Scalar> values(static_cast<std::size_t>(b));
    const Scalar inv_b = Scalar(1) / Scalar(b);
    for (Index n = 0; n < b; ++n) {
        const Vec<Scalar> p = ctx.probs.row(n).transpose();
        auto e = eval_sample_loss(spec, p, labels[static_cast<std::size_t>(n)]);
        values[static_cast<std::size_t>(n)] = e.value;
        out.grad_p.row(n) = inv_b * e.grad_p.transpose();
    }
    out.value = pairwise_sum<Scalar>(values) * inv_b;

    if (f != nullptr && f->combiner == Combiner::AnlStar && f->lambda > 0.0) {
        const auto reg = eval_entropy_reg(ctx);
        const Scalar lam = Scalar(f->lambda);
        out.value += lam * reg.value;
        out.grad_p += lam * reg.grad_p;
    }
    return out;
}

} // namespace anl

#endif // ANL_LOSS_FRAMEWORK_HPP
