#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace sdfrecon {

struct AdamState {
    Eigen::VectorXd m;  // first moment
    Eigen::VectorXd v;  // second moment
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;

    explicit AdamState(Eigen::Index n = 0)
        : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

// One Adam update with bias correction. Throws std::runtime_error on a
// non-finite gradient; parameters are left untouched in that case.
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                      AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    if (!grads.allFinite())
        throw std::runtime_error("adam_step: non-finite gradient, step rejected");
    state.step += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
    state.v = state.beta2 * state.v +
              (1.0 - state.beta2) * grads.cwiseProduct(grads);
    const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
    params.array() -= lr * (state.m.array() / c1) /
                      ((state.v.array() / c2).sqrt() + state.eps);
}

}  // namespace sdfrecon
