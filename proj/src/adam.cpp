// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/adam.hpp"

#include <cmath>

namespace msplat {

void Adam::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw NumericalError("Adam::step: parameter/gradient size mismatch");
    }
    ++step_count_;
    const double bias1 = 1.0 - std::pow(beta1_, step_count_);
    const double bias2 = 1.0 - std::pow(beta2_, step_count_);
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const double g = grads[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double m_hat = m_[i] / bias1;
        const double v_hat = v_[i] / bias2;
        params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
}

void Adam::reset() {
    step_count_ = 0;
    std::fill(m_.begin(), m_.end(), 0.0);
    std::fill(v_.begin(), v_.end(), 0.0);
}

} // namespace msplat
