#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fpqe/autodiff.hpp"
#include "fpqe/tensor.hpp"

namespace fpqe {

// Bias-corrected Adam moments for one parameter tensor.
struct AdamState {
    Tensor first_moment;
    Tensor second_moment;
    std::int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double learning_rate = 1e-3;
};

inline AdamState make_adam_state(const std::vector<std::int64_t>& shape, double lr) {
    AdamState s;
    s.first_moment = Tensor(shape);
    s.second_moment = Tensor(shape);
    s.learning_rate = lr;
    return s;
}

inline void adam_step(Tensor& param, const Tensor& grad, AdamState& st) {
    check_same_shape(param, grad, "adam_step param/grad");
    check_same_shape(param, st.first_moment, "adam_step param/moment");
    st.step_count += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
    for (std::int64_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        st.first_moment[i] = st.beta1 * st.first_moment[i] + (1.0 - st.beta1) * g;
        st.second_moment[i] = st.beta2 * st.second_moment[i] + (1.0 - st.beta2) * g * g;
        const double mhat = st.first_moment[i] / bc1;
        const double vhat = st.second_moment[i] / bc2;
        param[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.eps);
    }
}

// Convenience wrapper driving adam_step over a set of tape leaves.
class AdamOptimizer {
public:
    explicit AdamOptimizer(std::vector<ad::Var> params, double lr) : params_(std::move(params)) {
        states_.reserve(params_.size());
        for (auto& p : params_) states_.push_back(make_adam_state(p.value().shape, lr));
    }

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            adam_step(params_[i].value_mut(), params_[i].grad(), states_[i]);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

private:
    std::vector<ad::Var> params_;
    std::vector<AdamState> states_;
};

}  // namespace fpqe
