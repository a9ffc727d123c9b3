#ifndef ANL_PROB_HPP
#define ANL_PROB_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "anl/error.hpp"

namespace anl {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

inline constexpr double kDefaultProbFloor = 1e-7;

/*
 * A point on the K-simplex carrying its probability floor.
 *
 * Entries are >= floor and sum to 1 within K * floor; the floor is applied
 * without renormalisation, so the sum can drift above 1 by at most that
 * amount.  A floor of zero marks an unclipped vector (e.g. raw softmax).
 */
template <typename Scalar>
class BasicProbVector {
public:
    BasicProbVector() = default;

    BasicProbVector(Vec<Scalar> values, Scalar floor)
        : values_(std::move(values)), floor_(floor) {
        const Index k = values_.size();
        if (k < 2) {
            throw InvalidInput("ProbVector needs K >= 2, got " + std::to_string(k));
        }
        if (!(floor_ >= Scalar(0))) {
            throw InvalidInput("ProbVector floor must be nonnegative");
        }
        for (Index i = 0; i < k; ++i) {
            if (!std::isfinite(static_cast<double>(values_[i])) || values_[i] < floor_) {
                throw InvalidInput("ProbVector entry " + std::to_string(i) +
                                   " is below the floor or not finite");
            }
        }
        const Scalar slack = Scalar(k) * floor_ +
                             Scalar(16) * Scalar(k) * std::numeric_limits<Scalar>::epsilon();
        if (std::abs(values_.sum() - Scalar(1)) > slack) {
            throw InvalidInput("ProbVector entries do not sum to 1");
        }
    }

    const Vec<Scalar>& values() const noexcept { return values_; }
    Scalar floor() const noexcept { return floor_; }
    Index size() const noexcept { return values_.size(); }
    Scalar operator[](Index i) const { return values_[i]; }

private:
    Vec<Scalar> values_;
    Scalar floor_ = Scalar(0);
};

using ProbVector = BasicProbVector<double>;

// Target distribution q(.|x). From a hard label this is one-hot.
template <typename Scalar>
struct BasicLabelDistribution {
    Vec<Scalar> values;
};

using LabelDistribution = BasicLabelDistribution<double>;

/// Max-subtracted softmax of a logit vector.
template <typename Derived>
BasicProbVector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    if (logits.size() < 2) {
        throw InvalidInput("softmax needs at least two logits");
    }
    if (!logits.allFinite()) {
        throw InvalidInput("softmax: non-finite logit");
    }
    Vec<Scalar> e = (logits.derived().array() - logits.maxCoeff()).exp().matrix();
    e /= e.sum();
    return BasicProbVector<Scalar>(std::move(e), Scalar(0));
}

// Elementwise floor, no renormalisation.
template <typename Scalar>
BasicProbVector<Scalar> clip_probs(const BasicProbVector<Scalar>& p, Scalar p_min) {
    const Scalar k = Scalar(p.size());
    if (!(p_min > Scalar(0)) || !(p_min < Scalar(1) / k)) {
        throw InvalidInput("clip_probs: p_min must lie in (0, 1/K)");
    }
    Vec<Scalar> v = p.values().cwiseMax(p_min);
    return BasicProbVector<Scalar>(std::move(v), p_min);
}

template <typename Scalar = double>
BasicLabelDistribution<Scalar> one_hot(Index y, Index k) {
    if (k < 1) {
        throw InvalidInput("one_hot: K must be positive");
    }
    if (y < 0 || y >= k) {
        throw IndexError("one_hot: label " + std::to_string(y) + " out of range for K=" +
                         std::to_string(k));
    }
    Vec<Scalar> v = Vec<Scalar>::Zero(k);
    v[y] = Scalar(1);
    return {std::move(v)};
}

} // namespace anl

#endif // ANL_PROB_HPP
