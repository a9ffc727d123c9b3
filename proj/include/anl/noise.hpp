#ifndef ANL_NOISE_HPP
#define ANL_NOISE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anl/network.hpp"

namespace anl {

enum class NoiseKind {
    None,
    Symmetric,
    AsymmetricPairmap,
    AsymmetricCircular,
    InstanceDependent,
    External,
};

std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);

// Default asymmetric flips over the standard CIFAR-10 class order
// (0 airplane, 1 automobile, 2 bird, 3 cat, 4 deer, 5 dog, 6 frog,
// 7 horse, 8 ship, 9 truck): truck->automobile, bird->airplane,
// deer->horse, cat<->dog.
std::map<int, int> cifar10_pair_map();

struct NoiseSpec {
    NoiseKind kind = NoiseKind::None;
    double eta = 0.0;
    std::map<int, int> pair_map = cifar10_pair_map();
    int superclass_size = 5;
    std::uint64_t seed = 0;

    // Symmetric noise at or above (K-1)/K is allowed but falls outside the
    // regime where symmetric losses are noise tolerant.
    bool beyond_tolerance_regime(int classes) const;

    void validate(int classes) const;
};

/// Row-stochastic label-corruption kernel T(i, j) = P(noisy = j | clean = i).
class TransitionMatrix {
public:
    explicit TransitionMatrix(Eigen::MatrixXd rows);

    static TransitionMatrix identity(int classes);

    const Eigen::MatrixXd& matrix() const noexcept { return rows_; }
    double operator()(Index i, Index j) const { return rows_(i, j); }
    int classes() const noexcept { return static_cast<int>(rows_.rows()); }

private:
    Eigen::MatrixXd rows_;
};

TransitionMatrix build_transition(const NoiseSpec& spec, int classes);

struct CorruptionRecord {
    std::vector<int> noisy_labels;
    std::vector<bool> flip_mask;
    double realized_rate = 0.0;
    std::string method;

    std::size_t flip_count() const;
};

/// Each label resampled from its row of T with a draw keyed by (seed, index).
CorruptionRecord corrupt_labels(std::span<const int> labels, const TransitionMatrix& t,
                                std::uint64_t seed);

/*
 * Simplified instance-dependent noise driven by a probe classifier trained
 * on clean data.  This is a surrogate, not the PDN procedure: sample n is
 * flipped to the probe's most likely wrong class with probability
 * min(1, s * (1 - p_probe(y_n | x_n))), s chosen so the expected flip rate
 * equals eta.
 */
CorruptionRecord instance_dependent_corrupt(const Eigen::MatrixXd& features,
                                            std::span<const int> labels, double eta,
                                            const Network& probe, std::uint64_t seed);

/// Class frequencies of a label sequence.
std::vector<double> empirical_marginals(std::span<const int> labels, int classes);

/// Expected noisy-label marginals T^T m for clean marginals m.
std::vector<double> expected_noisy_marginals(std::span<const double> clean,
                                             const TransitionMatrix& t);

inline constexpr std::string_view kInstanceNoiseMethod =
    "instance_dependent_probe_surrogate_non_pdn";

} // namespace anl

#endif // ANL_NOISE_HPP
