#include "opicl/ndmath/adam.hpp"

#include <cmath>

#include "opicl/errors.hpp"

namespace opicl::ndmath {

namespace {

template <typename Span>
AdamState zero_state(std::span<const Span> blocks) {
    AdamState s;
    for (const auto& b : blocks) {
        s.first_moment.emplace_back(b.size(), 0.0);
        s.second_moment.emplace_back(b.size(), 0.0);
    }
    return s;
}

std::string block_label(std::size_t i, std::span<const std::string> names) {
    if (i < names.size()) return "'" + names[i] + "'";
    return "#" + std::to_string(i);
}

} // namespace

AdamState AdamState::for_blocks(std::span<const std::span<const double>> blocks) { return zero_state(blocks); }

AdamState AdamState::for_blocks(std::span<const std::span<double>> blocks) { return zero_state(blocks); }

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, double lr, std::span<const std::string> block_names) {
    if (!(lr > 0.0)) throw InvalidArgument("adam_step: learning rate must be positive");
    if (!(state.beta1 >= 0.0 && state.beta1 < 1.0 && state.beta2 >= 0.0 && state.beta2 < 1.0) ||
        !(state.epsilon > 0.0)) {
        throw InvalidArgument("adam_step: invalid moment constants");
    }
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw ShapeError("adam_step: block count mismatch");
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != grads[b].size() || params[b].size() != state.first_moment[b].size() ||
            params[b].size() != state.second_moment[b].size()) {
            throw ShapeError("adam_step: block " + block_label(b, block_names) + " shape mismatch");
        }
        for (double g : grads[b]) {
            if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in block " + block_label(b, block_names));
        }
    }

    const std::int64_t t = state.step_count + 1;
    const double bias1 = 1.0 - std::pow(state.beta1, double(t));
    const double bias2 = 1.0 - std::pow(state.beta2, double(t));
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        auto g = grads[b];
        auto& m = state.first_moment[b];
        auto& v = state.second_moment[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
    state.step_count = t;
}

} // namespace opicl::ndmath
