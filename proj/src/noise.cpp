#include "anl/noise.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "anl/error.hpp"
#include "anl/rng.hpp"

namespace anl {

std::string_view to_string(NoiseKind kind) {
    switch (kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::Symmetric: return "symmetric";
    case NoiseKind::AsymmetricPairmap: return "asymmetric_pairmap";
    case NoiseKind::AsymmetricCircular: return "asymmetric_circular";
    case NoiseKind::InstanceDependent: return "instance_dependent";
    case NoiseKind::External: return "external";
    }
    throw ConfigError("unknown noise kind");
}

NoiseKind noise_kind_from_string(std::string_view name) {
    for (NoiseKind k : {NoiseKind::None, NoiseKind::Symmetric, NoiseKind::AsymmetricPairmap,
                        NoiseKind::AsymmetricCircular, NoiseKind::InstanceDependent,
                        NoiseKind::External}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("noise.kind", "unknown noise kind '" + std::string(name) + "'");
}

std::map<int, int> cifar10_pair_map() {
    return {{9, 1}, {2, 0}, {4, 7}, {3, 5}, {5, 3}};
}

bool NoiseSpec::beyond_tolerance_regime(int classes) const {
    return kind == NoiseKind::Symmetric &&
           eta >= static_cast<double>(classes - 1) / static_cast<double>(classes);
}

void NoiseSpec::validate(int classes) const {
    if (classes < 2) throw ConfigError("noise", "need at least two classes");
    if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("noise.eta", "must lie in [0, 1)");
    if (kind == NoiseKind::AsymmetricPairmap) {
        std::set<int> targets;
        for (const auto& [src, dst] : pair_map) {
            if (src < 0 || src >= classes || dst < 0 || dst >= classes) {
                throw ConfigError("noise.pair_map", "class index out of range for K=" +
                                                        std::to_string(classes));
            }
            if (src == dst) throw ConfigError("noise.pair_map", "class maps to itself");
            if (!targets.insert(dst).second) {
                throw ConfigError("noise.pair_map", "map is not injective");
            }
        }
    }
    if (kind == NoiseKind::AsymmetricCircular) {
        if (superclass_size < 2 || classes % superclass_size != 0) {
            throw ConfigError("noise.superclass_size", "must be >= 2 and divide K");
        }
    }
}

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
    if (rows_.rows() != rows_.cols() || rows_.rows() < 2) {
        throw InvalidInput("transition matrix must be square with K >= 2");
    }
    if (!rows_.allFinite() || rows_.minCoeff() < 0.0) {
        throw InvalidInput("transition matrix has negative or non-finite entries");
    }
    for (Index i = 0; i < rows_.rows(); ++i) {
        if (std::abs(rows_.row(i).sum() - 1.0) > 1e-12) {
            throw InvalidInput("transition matrix row " + std::to_string(i) + " does not sum to 1");
        }
    }
}

TransitionMatrix TransitionMatrix::identity(int classes) {
    return TransitionMatrix(Eigen::MatrixXd::Identity(classes, classes));
}

TransitionMatrix build_transition(const NoiseSpec& spec, int classes) {
    spec.validate(classes);
    const double eta = spec.eta;
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(classes, classes);
    switch (spec.kind) {
    case NoiseKind::None:
        break;
    case NoiseKind::Symmetric:
        t.setConstant(eta / static_cast<double>(classes - 1));
        t.diagonal().setConstant(1.0 - eta);
        break;
    case NoiseKind::AsymmetricPairmap:
        for (const auto& [src, dst] : spec.pair_map) {
            t(src, src) = 1.0 - eta;
            t(src, dst) = eta;
        }
        break;
    case NoiseKind::AsymmetricCircular: {
        const int s = spec.superclass_size;
        for (int i = 0; i < classes; ++i) {
            const int base = (i / s) * s;
            const int next = base + (i - base + 1) % s;
            t(i, i) = 1.0 - eta;
            t(i, next) = eta;
        }
        break;
    }
    case NoiseKind::InstanceDependent:
    case NoiseKind::External:
        throw ConfigError("noise.kind", std::string(to_string(spec.kind)) +
                                            " noise has no class-conditional transition matrix");
    }
    return TransitionMatrix(std::move(t));
}

std::size_t CorruptionRecord::flip_count() const {
    return static_cast<std::size_t>(std::count(flip_mask.begin(), flip_mask.end(), true));
}

CorruptionRecord corrupt_labels(std::span<const int> labels, const TransitionMatrix& t,
                                std::uint64_t seed) {
    const int k = t.classes();
    CorruptionRecord rec;
    rec.method = "class_conditional";
    rec.noisy_labels.resize(labels.size());
    rec.flip_mask.resize(labels.size());
    std::size_t flips = 0;
    for (std::size_t n = 0; n < labels.size(); ++n) {
        const int y = labels[n];
        if (y < 0 || y >= k) {
            throw IndexError("label " + std::to_string(y) + " at index " + std::to_string(n) +
                             " out of range for K=" + std::to_string(k));
        }
        const double u = keyed_uniform(seed, stream::noise, n);
        int pick = k - 1;
        double cdf = 0.0;
        for (int j = 0; j < k; ++j) {
            cdf += t(y, j);
            if (u < cdf) {
                pick = j;
                break;
            }
        }
        // Guard against the rounding tail landing on a zero-probability class.
        if (t(y, pick) == 0.0) pick = y;
        rec.noisy_labels[n] = pick;
        rec.flip_mask[n] = pick != y;
        flips += pick != y;
    }
    rec.realized_rate =
        labels.empty() ? 0.0 : static_cast<double>(flips) / static_cast<double>(labels.size());
    return rec;
}

CorruptionRecord instance_dependent_corrupt(const Eigen::MatrixXd& features,
                                            std::span<const int> labels, double eta,
                                            const Network& probe, std::uint64_t seed) {
    if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("noise.eta", "must lie in [0, 1)");
    if (features.rows() != static_cast<Index>(labels.size())) {
        throw ConfigError("noise", "feature rows and label count differ");
    }
    if (probe.config().input_dim != features.cols()) {
        throw ConfigError("noise.probe", "probe input dimension does not match the features");
    }
    const int k = static_cast<int>(probe.config().classes);
    for (int y : labels) {
        if (y < 0 || y >= k) throw ConfigError("noise.probe", "probe output dimension is smaller than the label range");
    }

    const Eigen::MatrixXd probs = probe.predict(features);
    const std::size_t n_samples = labels.size();
    std::vector<double> err(n_samples);
    std::vector<int> target(n_samples);
    double mean_err = 0.0;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const auto row = static_cast<Index>(n);
        const int y = labels[n];
        err[n] = std::clamp(1.0 - probs(row, y), 0.0, 1.0);
        int best = y == 0 ? 1 : 0;
        for (int j = 0; j < k; ++j) {
            if (j != y && probs(row, j) > probs(row, best)) best = j;
        }
        target[n] = best;
        mean_err += err[n];
    }
    mean_err = n_samples ? mean_err / static_cast<double>(n_samples) : 0.0;

    // Flip probabilities min(1, s * err_n) with s found by bisection so their
    // mean equals eta.  If the probe is perfectly confident everywhere the
    // errors carry no signal and the rate falls back to uniform eta.
    std::vector<double> prob(n_samples, eta);
    if (eta > 0.0 && mean_err > 0.0) {
        auto mean_at = [&](double s) {
            double acc = 0.0;
            for (double e : err) acc += std::min(1.0, s * e);
            return acc / static_cast<double>(n_samples);
        };
        double lo = 0.0;
        double hi = eta / mean_err;
        while (mean_at(hi) < eta && hi < 1e12) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mean_at(mid) < eta ? lo : hi) = mid;
        }
        for (std::size_t n = 0; n < n_samples; ++n) prob[n] = std::min(1.0, hi * err[n]);
    }

    CorruptionRecord rec;
    rec.method = std::string(kInstanceNoiseMethod);
    rec.noisy_labels.assign(labels.begin(), labels.end());
    rec.flip_mask.assign(n_samples, false);
    std::size_t flips = 0;
    for (std::size_t n = 0; n < n_samples; ++n) {
        if (eta > 0.0 && keyed_uniform(seed, stream::probe, n) < prob[n]) {
            rec.noisy_labels[n] = target[n];
            rec.flip_mask[n] = true;
            ++flips;
        }
    }
    rec.realized_rate =
        n_samples ? static_cast<double>(flips) / static_cast<double>(n_samples) : 0.0;
    return rec;
}

std::vector<double> empirical_marginals(std::span<const int> labels, int classes) {
    if (labels.empty()) throw InvalidInput("empirical_marginals: empty label sequence");
    std::vector<double> m(static_cast<std::size_t>(classes), 0.0);
    for (int y : labels) {
        if (y < 0 || y >= classes) throw IndexError("label out of range");
        m[static_cast<std::size_t>(y)] += 1.0;
    }
    for (double& v : m) v /= static_cast<double>(labels.size());
    return m;
}

std::vector<double> expected_noisy_marginals(std::span<const double> clean,
                                             const TransitionMatrix& t) {
    if (static_cast<int>(clean.size()) != t.classes()) {
        throw ShapeError("marginal length does not match the transition matrix");
    }
    const Eigen::Map<const Eigen::VectorXd> m(clean.data(), static_cast<Index>(clean.size()));
    const Eigen::VectorXd out = t.matrix().transpose() * m;
    return {out.data(), out.data() + out.size()};
}

} // namespace anl
