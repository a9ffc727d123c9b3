#ifndef ANL_NETWORK_HPP
#define ANL_NETWORK_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "anl/prob.hpp"

namespace anl {

enum class Activation { Relu, Tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct NetworkConfig {
    Index input_dim = 0;
    std::vector<Index> hidden_dims; // empty -> multinomial logistic regression
    Index classes = 0;
    Activation activation = Activation::Relu;
    std::uint64_t init_seed = 0;
    double p_min = kDefaultProbFloor;

    void validate() const;
};

// Dense layer: outputs = inputs * weight + bias^T, weight is (fan_in x fan_out).
struct Layer {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

// Parameter-shaped container for gradients and momentum buffers.
struct ParamSet {
    std::vector<Layer> layers;

    static ParamSet zeros_like(const std::vector<Layer>& shape);
    double squared_norm() const;
    ParamSet& operator*=(double s);
};

/*
 * Feedforward classifier with a softmax head.
 *
 * forward() fills a cache of pre-activations and activations that
 * backward() consumes; any mutation of the parameters marks the cache
 * stale, and backward() on a stale or missing cache throws StateError.
 */
class Network {
public:
    explicit Network(NetworkConfig cfg);

    // All weights and biases zero; forward yields uniform probabilities.
    static Network zeros(NetworkConfig cfg);

    const NetworkConfig& config() const noexcept { return cfg_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    Layer& mutable_layer(std::size_t i);
    Index parameter_count() const;

    // Clipped probabilities for a (B x input_dim) batch; populates the cache.
    const Eigen::MatrixXd& forward(const Eigen::MatrixXd& batch);

    // Same probabilities without touching the cache.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& batch) const;

    // Raw logits (B x K), no cache.
    Eigen::MatrixXd logits(const Eigen::MatrixXd& batch) const;

    // Parameter gradients of sum_n grad_p(n,:) . p_n.
    ParamSet backward(const Eigen::MatrixXd& grad_p) const;

    // Applies params -= update layer by layer; invalidates the cache.
    void apply_update(const ParamSet& update);

    bool has_cache() const noexcept { return cache_valid_; }

    // Little-endian "ANL1" checkpoint.
    void save(const std::filesystem::path& path) const;
    static Network load(const std::filesystem::path& path);

private:
    struct NoInit {};
    Network(NetworkConfig cfg, NoInit);

    Eigen::MatrixXd activate(const Eigen::MatrixXd& z) const;

    NetworkConfig cfg_;
    std::vector<Layer> layers_;

    // Forward cache.
    std::vector<Eigen::MatrixXd> inputs_; // input to each layer
    std::vector<Eigen::MatrixXd> pre_;    // pre-activation of each layer
    Eigen::MatrixXd softmax_;             // unclipped
    Eigen::MatrixXd probs_;               // clipped
    bool cache_valid_ = false;
};

Network init_network(const NetworkConfig& cfg);

} // namespace anl

#endif // ANL_NETWORK_HPP
