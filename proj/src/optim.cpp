#include "anl/optim.hpp"

#include <cmath>
#include <numbers>

#include "anl/error.hpp"

namespace anl {

void OptimizerConfig::validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("optimizer.lr", "must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer.momentum", "must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay", "must be nonnegative");
    if (!(l1_coeff >= 0.0)) throw ConfigError("optimizer.l1", "must be nonnegative");
    if (!(clip_norm > 0.0)) throw ConfigError("optimizer.clip_norm", "must be positive");
    if (epochs < 1) throw ConfigError("optimizer.epochs", "must be positive");
    if (batch_size < 1) throw ConfigError("optimizer.batch_size", "must be positive");
}

namespace {

Eigen::MatrixXd sign_of(const Eigen::MatrixXd& w) {
    return w.unaryExpr([](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); });
}

} // namespace

StepInfo sgd_step(Network& net, const ParamSet& grads, const OptimizerConfig& opt,
                  MomentumState& state, double lr) {
    const auto& layers = net.layers();
    if (grads.layers.size() != layers.size()) {
        throw ShapeError("sgd_step: gradient has the wrong number of layers");
    }
    if (state.velocity.layers.empty()) {
        state.velocity = ParamSet::zeros_like(layers);
    }

    ParamSet g = grads;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Layer& w = layers[li];
        Layer& gl = g.layers[li];
        if (gl.weight.rows() != w.weight.rows() || gl.weight.cols() != w.weight.cols() ||
            gl.bias.size() != w.bias.size()) {
            throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(li));
        }
        if (opt.weight_decay != 0.0) {
            gl.weight += opt.weight_decay * w.weight;
            gl.bias += opt.weight_decay * w.bias;
        }
        if (opt.l1_coeff != 0.0) {
            gl.weight += opt.l1_coeff * sign_of(w.weight);
            gl.bias += opt.l1_coeff * sign_of(w.bias);
        }
    }

    StepInfo info;
    info.grad_norm = std::sqrt(g.squared_norm());
    if (info.grad_norm > opt.clip_norm) {
        info.clip_scale = opt.clip_norm / info.grad_norm;
        g *= info.clip_scale;
    }

    ParamSet update = ParamSet::zeros_like(layers);
    for (std::size_t li = 0; li < layers.size(); ++li) {
        Layer& v = state.velocity.layers[li];
        v.weight = opt.momentum * v.weight + g.layers[li].weight;
        v.bias = opt.momentum * v.bias + g.layers[li].bias;
        update.layers[li].weight = lr * v.weight;
        update.layers[li].bias = lr * v.bias;
    }
    net.apply_update(update);
    return info;
}

double cosine_lr(int epoch, int total_epochs, double lr0) {
    if (total_epochs < 1 || epoch < 0 || epoch > total_epochs) {
        throw InvalidInput("cosine_lr: need 0 <= epoch <= total_epochs");
    }
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

} // namespace anl
