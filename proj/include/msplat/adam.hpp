// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/common.hpp"

#include <span>

namespace msplat {

// Bias-corrected adaptive moment estimation over a flat parameter vector.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads);

    void reset();
    double learning_rate() const { return lr_; }
    std::size_t size() const { return m_.size(); }
    int step_count() const { return step_count_; }

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    int step_count_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

} // namespace msplat
