#ifndef ANL_OPTIM_HPP
#define ANL_OPTIM_HPP

#include "anl/network.hpp"

namespace anl {

struct OptimizerConfig {
    double lr0 = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0; // L2 coefficient
    double l1_coeff = 0.0;     // delta
    double clip_norm = 5.0;
    int epochs = 120;
    int batch_size = 128;

    void validate() const;
};

struct MomentumState {
    ParamSet velocity;
};

struct StepInfo {
    double grad_norm = 0.0; // global norm after decay/L1, before clipping
    double clip_scale = 1.0;
};

/*
 * One SGD step, in this order:
 *   g += weight_decay * w + l1_coeff * sign(w)     (sign(0) = 0)
 *   g *= min(1, clip_norm / ||g||)                  (global norm, all params)
 *   v  = momentum * v + g
 *   w -= lr * v
 * Decay and L1 apply to every parameter, biases included.
 */
StepInfo sgd_step(Network& net, const ParamSet& grads, const OptimizerConfig& opt,
                  MomentumState& state, double lr);

/// lr0 * (1 + cos(pi * epoch / total_epochs)) / 2.
double cosine_lr(int epoch, int total_epochs, double lr0);

} // namespace anl

#endif // ANL_OPTIM_HPP
