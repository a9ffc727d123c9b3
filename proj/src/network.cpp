#include "anl/network.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "anl/error.hpp"
#include "anl/rng.hpp"

namespace anl {

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    }
    throw ConfigError("unknown activation");
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    throw ConfigError("model.activation", "unknown activation '" + std::string(name) + "'");
}

void NetworkConfig::validate() const {
    if (input_dim < 1) throw ConfigError("model.input_dim", "must be positive");
    if (classes < 2) throw ConfigError("model.classes", "need at least two classes");
    for (Index h : hidden_dims) {
        if (h < 1) throw ConfigError("model.hidden", "hidden widths must be positive");
    }
    if (!(p_min > 0.0 && p_min < 1.0 / static_cast<double>(classes))) {
        throw ConfigError("model.p_min", "must lie in (0, 1/K)");
    }
}

ParamSet ParamSet::zeros_like(const std::vector<Layer>& shape) {
    ParamSet out;
    out.layers.reserve(shape.size());
    for (const Layer& l : shape) {
        out.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                              Eigen::VectorXd::Zero(l.bias.size())});
    }
    return out;
}

double ParamSet::squared_norm() const {
    double acc = 0.0;
    for (const Layer& l : layers) {
        acc += l.weight.squaredNorm() + l.bias.squaredNorm();
    }
    return acc;
}

ParamSet& ParamSet::operator*=(double s) {
    for (Layer& l : layers) {
        l.weight *= s;
        l.bias *= s;
    }
    return *this;
}

Network::Network(NetworkConfig cfg, NoInit) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Index fan_in = cfg_.input_dim;
    std::vector<Index> widths = cfg_.hidden_dims;
    widths.push_back(cfg_.classes);
    for (Index w : widths) {
        layers_.push_back({Eigen::MatrixXd::Zero(fan_in, w), Eigen::VectorXd::Zero(w)});
        fan_in = w;
    }
}

// Weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), each entry keyed by
// (seed, layer, flat index); biases zero.
Network::Network(NetworkConfig cfg) : Network(std::move(cfg), NoInit{}) {
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        Eigen::MatrixXd& w = layers_[li].weight;
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows()));
        const std::uint64_t layer_key = keyed(cfg_.init_seed, stream::init, li);
        for (Index c = 0; c < w.cols(); ++c) {
            for (Index r = 0; r < w.rows(); ++r) {
                const auto flat = static_cast<std::uint64_t>(r * w.cols() + c);
                w(r, c) = limit * (2.0 * keyed_uniform(layer_key, 0, flat) - 1.0);
            }
        }
    }
}

Network Network::zeros(NetworkConfig cfg) { return Network(std::move(cfg), NoInit{}); }

Network init_network(const NetworkConfig& cfg) { return Network(cfg); }

Layer& Network::mutable_layer(std::size_t i) {
    cache_valid_ = false;
    return layers_.at(i);
}

Index Network::parameter_count() const {
    Index n = 0;
    for (const Layer& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

Eigen::MatrixXd Network::activate(const Eigen::MatrixXd& z) const {
    switch (cfg_.activation) {
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    }
    return z;
}

namespace {

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd e = (z.colwise() - z.rowwise().maxCoeff()).array().exp().matrix();
    const Eigen::VectorXd sums = e.rowwise().sum();
    return sums.cwiseInverse().asDiagonal() * e;
}

} // namespace

Eigen::MatrixXd Network::logits(const Eigen::MatrixXd& batch) const {
    if (batch.cols() != cfg_.input_dim) {
        throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                         " features, network expects " + std::to_string(cfg_.input_dim));
    }
    Eigen::MatrixXd a = batch;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        Eigen::MatrixXd z = (a * layers_[li].weight).rowwise() + layers_[li].bias.transpose();
        a = li + 1 < layers_.size() ? activate(z) : std::move(z);
    }
    return a;
}

Eigen::MatrixXd Network::predict(const Eigen::MatrixXd& batch) const {
    return row_softmax(logits(batch)).cwiseMax(cfg_.p_min);
}

const Eigen::MatrixXd& Network::forward(const Eigen::MatrixXd& batch) {
    if (batch.cols() != cfg_.input_dim) {
        throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                         " features, network expects " + std::to_string(cfg_.input_dim));
    }
    inputs_.assign(layers_.size(), {});
    pre_.assign(layers_.size(), {});
    Eigen::MatrixXd a = batch;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        inputs_[li] = a;
        pre_[li] = (a * layers_[li].weight).rowwise() + layers_[li].bias.transpose();
        if (li + 1 < layers_.size()) a = activate(pre_[li]);
    }
    softmax_ = row_softmax(pre_.back());
    probs_ = softmax_.cwiseMax(cfg_.p_min);
    cache_valid_ = true;
    return probs_;
}

ParamSet Network::backward(const Eigen::MatrixXd& grad_p) const {
    if (!cache_valid_) {
        throw StateError("backward: no forward cache for the current parameters");
    }
    if (grad_p.rows() != softmax_.rows() || grad_p.cols() != softmax_.cols()) {
        throw StateError("backward: gradient shape does not match the cached batch");
    }
    // Clipped entries are constant in the logits.
    const Eigen::MatrixXd g =
        (softmax_.array() >= cfg_.p_min).select(grad_p, Eigen::MatrixXd::Zero(grad_p.rows(), grad_p.cols()));
    // Softmax Jacobian diag(p) - p p^T, applied row by row.
    const Eigen::VectorXd gp = (g.cwiseProduct(softmax_)).rowwise().sum();
    Eigen::MatrixXd dz = softmax_.cwiseProduct(g.colwise() - gp);

    ParamSet out = ParamSet::zeros_like(layers_);
    for (std::size_t li = layers_.size(); li-- > 0;) {
        out.layers[li].weight.noalias() = inputs_[li].transpose() * dz;
        out.layers[li].bias = dz.colwise().sum().transpose();
        if (li == 0) break;
        Eigen::MatrixXd da = dz * layers_[li].weight.transpose();
        const Eigen::MatrixXd& z = pre_[li - 1];
        switch (cfg_.activation) {
        case Activation::Relu:
            dz = (z.array() > 0.0).select(da, 0.0);
            break;
        case Activation::Tanh:
            dz = da.cwiseProduct((1.0 - z.array().tanh().square()).matrix());
            break;
        }
    }
    return out;
}

void Network::apply_update(const ParamSet& update) {
    if (update.layers.size() != layers_.size()) {
        throw ShapeError("parameter update has the wrong number of layers");
    }
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        if (update.layers[li].weight.rows() != layers_[li].weight.rows() ||
            update.layers[li].weight.cols() != layers_[li].weight.cols() ||
            update.layers[li].bias.size() != layers_[li].bias.size()) {
            throw ShapeError("parameter update shape mismatch at layer " + std::to_string(li));
        }
        layers_[li].weight -= update.layers[li].weight;
        layers_[li].bias -= update.layers[li].bias;
    }
    cache_valid_ = false;
}

// ---------------------------------------------------------------------------
// Checkpoint: "ANL1", then u64 input_dim, u64 hidden count, u64 per hidden
// width, u64 classes, u64 activation, u64 init_seed, f64 p_min, then each
// layer's weight (row-major, fan_in x fan_out) followed by its bias, all
// little-endian.
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic{'A', 'N', 'L', '1'};

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

template <typename T>
T get_le(std::istream& is, const std::filesystem::path& path) {
    static_assert(sizeof(T) == 8);
    unsigned char buf[8];
    const auto offset = static_cast<long long>(is.tellg());
    if (!is.read(reinterpret_cast<char*>(buf), 8)) {
        throw FormatError(path.string() + ": truncated checkpoint at offset " +
                          std::to_string(offset));
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
}

} // namespace

void Network::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(cfg_.input_dim));
    put_le<std::uint64_t>(os, cfg_.hidden_dims.size());
    for (Index h : cfg_.hidden_dims) put_le<std::uint64_t>(os, static_cast<std::uint64_t>(h));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(cfg_.classes));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(cfg_.activation));
    put_le<std::uint64_t>(os, cfg_.init_seed);
    put_le<double>(os, cfg_.p_min);
    for (const Layer& l : layers_) {
        for (Index r = 0; r < l.weight.rows(); ++r)
            for (Index c = 0; c < l.weight.cols(); ++c) put_le<double>(os, l.weight(r, c));
        for (Index i = 0; i < l.bias.size(); ++i) put_le<double>(os, l.bias[i]);
    }
    if (!os) throw IoError("write failed for " + path.string());
}

Network Network::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
        throw FormatError(path.string() + ": bad checkpoint magic at offset 0");
    }
    NetworkConfig cfg;
    cfg.input_dim = static_cast<Index>(get_le<std::uint64_t>(is, path));
    const auto n_hidden = get_le<std::uint64_t>(is, path);
    if (n_hidden > 1024) throw FormatError(path.string() + ": implausible hidden layer count");
    for (std::uint64_t i = 0; i < n_hidden; ++i) {
        cfg.hidden_dims.push_back(static_cast<Index>(get_le<std::uint64_t>(is, path)));
    }
    cfg.classes = static_cast<Index>(get_le<std::uint64_t>(is, path));
    const auto act = get_le<std::uint64_t>(is, path);
    if (act > 1) throw FormatError(path.string() + ": unknown activation code");
    cfg.activation = static_cast<Activation>(act);
    cfg.init_seed = get_le<std::uint64_t>(is, path);
    cfg.p_min = get_le<double>(is, path);

    Network net(cfg, NoInit{});
    for (Layer& l : net.layers_) {
        for (Index r = 0; r < l.weight.rows(); ++r)
            for (Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = get_le<double>(is, path);
        for (Index i = 0; i < l.bias.size(); ++i) l.bias[i] = get_le<double>(is, path);
    }
    return net;
}

} // namespace anl
