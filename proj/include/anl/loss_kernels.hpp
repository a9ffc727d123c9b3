#ifndef ANL_LOSS_KERNELS_HPP
#define ANL_LOSS_KERNELS_HPP

#include <cmath>
#include <map>
#include <string>
#include <string_view>

#include "anl/error.hpp"
#include "anl/prob.hpp"

namespace anl {

enum class LossKind { CE, FL, MAE, GCE, RCE, SCE };

inline std::string_view to_string(LossKind kind) {
    switch (kind) {
    case LossKind::CE: return "ce";
    case LossKind::FL: return "fl";
    case LossKind::MAE: return "mae";
    case LossKind::GCE: return "gce";
    case LossKind::RCE: return "rce";
    case LossKind::SCE: return "sce";
    }
    throw UnsupportedLoss("unknown loss kind");
}

inline LossKind loss_kind_from_string(std::string_view name) {
    for (LossKind k : {LossKind::CE, LossKind::FL, LossKind::MAE, LossKind::GCE,
                       LossKind::RCE, LossKind::SCE}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw UnsupportedLoss("unknown loss kind '" + std::string(name) + "'");
}

/*
 * One base loss with its parameters.
 *
 *   CE   -log p_y
 *   FL   -(1 - p_y)^gamma log p_y
 *   MAE  (1 - p_y) + sum_{k != y} p_k        (= 2(1 - p_y) on the simplex)
 *   GCE  (1 - p_y^q) / q
 *   RCE  a_rce (1 - p_y)
 *   SCE  sce_alpha CE + sce_beta RCE
 *
 * CE and FL are the active kinds: they decompose into a per-class term
 * l(p_k) that is zero off the label, which is what the normalised and
 * negative constructions operate on.
 */
struct BaseLoss {
    LossKind kind = LossKind::CE;
    double gamma = 0.5;
    double q = 0.7;
    double a_rce = 4.0;
    double sce_alpha = 0.1;
    double sce_beta = 1.0;

    static BaseLoss ce() { return {}; }
    static BaseLoss fl(double gamma) {
        BaseLoss l;
        l.kind = LossKind::FL;
        l.gamma = gamma;
        return l;
    }
    static BaseLoss mae() {
        BaseLoss l;
        l.kind = LossKind::MAE;
        return l;
    }
    static BaseLoss gce(double q) {
        BaseLoss l;
        l.kind = LossKind::GCE;
        l.q = q;
        return l;
    }
    static BaseLoss rce(double a_rce = 4.0) {
        BaseLoss l;
        l.kind = LossKind::RCE;
        l.a_rce = a_rce;
        return l;
    }
    static BaseLoss sce(double alpha, double beta, double a_rce = 4.0) {
        BaseLoss l;
        l.kind = LossKind::SCE;
        l.sce_alpha = alpha;
        l.sce_beta = beta;
        l.a_rce = a_rce;
        return l;
    }

    // Builds from a named parameter table; unknown names are rejected.
    static BaseLoss from_params(LossKind kind, const std::map<std::string, double>& params) {
        BaseLoss l;
        l.kind = kind;
        for (const auto& [name, value] : params) {
            if (name == "gamma") l.gamma = value;
            else if (name == "q") l.q = value;
            else if (name == "a_rce") l.a_rce = value;
            else if (name == "alpha") l.sce_alpha = value;
            else if (name == "beta") l.sce_beta = value;
            else throw InvalidInput("unknown loss parameter '" + name + "'");
        }
        l.validate();
        return l;
    }

    bool is_active() const noexcept { return kind == LossKind::CE || kind == LossKind::FL; }

    void validate() const {
        switch (kind) {
        case LossKind::CE:
        case LossKind::MAE:
            return;
        case LossKind::FL:
            if (!(gamma >= 0.0)) throw InvalidInput("FL requires gamma >= 0");
            return;
        case LossKind::GCE:
            if (!(q > 0.0 && q <= 1.0)) throw InvalidInput("GCE requires 0 < q <= 1");
            return;
        case LossKind::RCE:
            if (!(a_rce > 0.0)) throw InvalidInput("RCE requires a_rce > 0");
            return;
        case LossKind::SCE:
            if (!(a_rce > 0.0)) throw InvalidInput("SCE requires a_rce > 0");
            if (!(sce_alpha >= 0.0 && sce_beta >= 0.0))
                throw InvalidInput("SCE weights must be nonnegative");
            return;
        }
        throw UnsupportedLoss("unknown loss kind");
    }
};

template <typename Scalar>
struct LossEval {
    Scalar value{};
    Vec<Scalar> grad_p;
};

// Per-class term l(p_k) of an active loss.
template <typename Scalar>
Scalar active_term(const BaseLoss& loss, Scalar pk) {
    using std::log;
    using std::pow;
    switch (loss.kind) {
    case LossKind::CE:
        return -log(pk);
    case LossKind::FL:
        return -pow(Scalar(1) - pk, Scalar(loss.gamma)) * log(pk);
    default:
        throw UnsupportedLoss(std::string("'") + std::string(to_string(loss.kind)) +
                              "' is not an active loss");
    }
}

// d l(p_k) / d p_k.
template <typename Scalar>
Scalar active_term_derivative(const BaseLoss& loss, Scalar pk) {
    using std::log;
    using std::pow;
    switch (loss.kind) {
    case LossKind::CE:
        return -Scalar(1) / pk;
    case LossKind::FL: {
        const Scalar g = Scalar(loss.gamma);
        const Scalar r = Scalar(1) - pk;
        // (1-p)^(g-1) log p -> 0 as p -> 1 for g > 0.
        const Scalar lead = (g == Scalar(0) || r <= Scalar(0))
                                ? Scalar(0)
                                : g * pow(r, g - Scalar(1)) * log(pk);
        return lead - pow(r, g) / pk;
    }
    default:
        throw UnsupportedLoss(std::string("'") + std::string(to_string(loss.kind)) +
                              "' is not an active loss");
    }
}

namespace detail {
inline void check_label(Index y, Index k) {
    if (y < 0 || y >= k) {
        throw IndexError("label " + std::to_string(y) + " out of range for K=" +
                         std::to_string(k));
    }
}
} // namespace detail

/*
 * Loss value and gradient with respect to p for one sample.
 *
 * p is treated as a free vector in the positive orthant: no simplex
 * projection, so the gradient is the plain partial derivative in every
 * coordinate (composition with the softmax Jacobian happens in the network).
 */
template <typename Derived>
LossEval<typename Derived::Scalar> eval_base_loss(const BaseLoss& loss,
                                                  const Eigen::MatrixBase<Derived>& p, Index y) {
    using Scalar = typename Derived::Scalar;
    using std::log;
    using std::pow;
    const Index k = p.size();
    detail::check_label(y, k);

    LossEval<Scalar> out;
    out.grad_p = Vec<Scalar>::Zero(k);
    const Scalar py = p[y];

    switch (loss.kind) {
    case LossKind::CE:
    case LossKind::FL:
        out.value = active_term(loss, py);
        out.grad_p[y] = active_term_derivative(loss, py);
        break;
    case LossKind::MAE:
        out.value = (Scalar(1) - py) + (p.sum() - py);
        out.grad_p.setOnes();
        out.grad_p[y] = Scalar(-1);
        break;
    case LossKind::GCE: {
        const Scalar q = Scalar(loss.q);
        out.value = (Scalar(1) - pow(py, q)) / q;
        out.grad_p[y] = -pow(py, q - Scalar(1));
        break;
    }
    case LossKind::RCE:
        out.value = Scalar(loss.a_rce) * (Scalar(1) - py);
        out.grad_p[y] = -Scalar(loss.a_rce);
        break;
    case LossKind::SCE: {
        const Scalar a = Scalar(loss.sce_alpha);
        const Scalar b = Scalar(loss.sce_beta);
        const Scalar ar = Scalar(loss.a_rce);
        out.value = a * (-log(py)) + b * ar * (Scalar(1) - py);
        out.grad_p[y] = -a / py - b * ar;
        break;
    }
    default:
        throw UnsupportedLoss("unknown loss kind");
    }
    return out;
}

template <typename Scalar>
LossEval<Scalar> eval_base_loss(const BaseLoss& loss, const BasicProbVector<Scalar>& p, Index y) {
    return eval_base_loss(loss, p.values(), y);
}

/*
 * Loss ceiling A: the largest value the per-class term l(p) takes for
 * p in [p_min, 1].  Both CE and FL terms are nonincreasing in p, so the
 * maximum sits at the floor: A = (1 - p_min)^gamma * (-log p_min).
 */
inline double loss_constant_A(const BaseLoss& loss, double p_min) {
    if (!loss.is_active()) {
        throw UnsupportedLoss(std::string("loss ceiling is defined for active losses only, got '") +
                              std::string(to_string(loss.kind)) + "'");
    }
    if (!(p_min > 0.0 && p_min < 1.0)) {
        throw InvalidInput("loss_constant_A: p_min must lie in (0, 1)");
    }
    return active_term(loss, p_min);
}

} // namespace anl

#endif // ANL_LOSS_KERNELS_HPP
