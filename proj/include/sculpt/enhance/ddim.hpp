// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "sculpt/enhance/predictor.hpp"

namespace sculpt {

/// Cumulative signal levels alpha_bar_0..alpha_bar_T with alpha_bar_0 = 1.
struct DiffusionSchedule {
    std::vector<double> alpha_bar;

    int steps() const { return static_cast<int>(alpha_bar.size()) - 1; }
    /// Noise-to-signal ratio sqrt((1 - a) / a); zero at t = 0.
    double sigma(int t) const { return std::sqrt((1.0 - alpha_bar[t]) / alpha_bar[t]); }

    void validate() const {
        if (alpha_bar.size() < 2) throw InvalidArgument("schedule needs at least one step");
        if (alpha_bar[0] != 1.0) throw InvalidArgument("schedule must start at alpha_bar = 1");
        for (std::size_t t = 1; t < alpha_bar.size(); ++t)
            if (!(alpha_bar[t] > 0.0 && alpha_bar[t] < alpha_bar[t - 1]))
                throw InvalidArgument("alpha_bar must be positive and strictly decreasing (index " + std::to_string(t) + ")");
    }
};

inline DiffusionSchedule make_linear_beta_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw InvalidArgument("schedule step count must be at least 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw InvalidArgument("betas must satisfy 0 < beta_start <= beta_end < 1");
    DiffusionSchedule s;
    s.alpha_bar.resize(T + 1);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double beta = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * (t - 1) / (T - 1);
        s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - beta);
    }
    s.validate();
    return s;
}

namespace detail {

inline void require_step(const DiffusionSchedule& s, int t, int lo, int hi) {
    if (t < lo || t > hi)
        throw InvalidArgument("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

// sqrt(a_to) * x0_hat(x, eps, t) + sqrt(1 - a_to) * eps
inline Latent ddim_move(const Latent& x, const Latent& eps, int t, int to, const DiffusionSchedule& s) {
    require_same_shape(x, eps, "epsilon");
    const double a = s.alpha_bar[t], b = s.alpha_bar[to];
    Latent out = x;
    const Eigen::ArrayXd x0 = (x.values - std::sqrt(1.0 - a) * eps.values) / std::sqrt(a);
    out.values = std::sqrt(b) * x0 + std::sqrt(1.0 - b) * eps.values;
    return out;
}

} // namespace detail

/// Deterministic (eta = 0) reverse step x_t -> x_{t-1}.
inline Latent ddim_denoise_step(const Latent& x_t, const Latent& eps, int t, const DiffusionSchedule& s) {
    detail::require_step(s, t, 1, s.steps());
    return detail::ddim_move(x_t, eps, t, t - 1, s);
}

/// Inversion step x_t -> x_{t+1} using epsilon predicted at x_t.
inline Latent ddim_invert_step(const Latent& x_t, const Latent& eps, int t, const DiffusionSchedule& s) {
    detail::require_step(s, t, 0, s.steps() - 1);
    return detail::ddim_move(x_t, eps, t, t + 1, s);
}

/// Point on a DDIM path, held in the normalized coordinate z = x / sqrt(alpha_bar_t).
/// A step from t to t' is then z += (sigma(t') - sigma(t)) * eps, which is the
/// same recurrence as the two step functions above and leaves z untouched when
/// eps is zero, so a zero-noise round trip is exact.
struct DiffusionState {
    int t = 0;
    Latent z;

    Latent x(const DiffusionSchedule& s) const {
        Latent out = z;
        if (t != 0) out.values *= std::sqrt(s.alpha_bar[t]);
        return out;
    }
};

inline DiffusionState make_state(const Latent& x, int t, const DiffusionSchedule& s) {
    detail::require_step(s, t, 0, s.steps());
    DiffusionState st{t, x};
    if (t != 0) st.z.values /= std::sqrt(s.alpha_bar[t]);
    return st;
}

inline void advance(DiffusionState& st, const Latent& eps, int to, const DiffusionSchedule& s) {
    detail::require_step(s, to, 0, s.steps());
    require_same_shape(st.z, eps, "epsilon");
    st.z.values += (s.sigma(to) - s.sigma(st.t)) * eps.values;
    st.t = to;
}

namespace detail {

inline PredictorOutput evaluate_at(const Predictor& p, const Latent& x, const Conditioning& c, int t,
                                   const Overrides& o = {}) {
    try {
        auto out = p.evaluate(x, c, t, o);
        check_output(p, x, out);
        return out;
    } catch (const EnhancementError&) {
        throw;
    } catch (const std::exception& e) {
        throw EnhancementError(t, e.what());
    }
}

} // namespace detail

/// DDIM inversion of x_0. Returns the states for t = 0..T.
inline std::vector<DiffusionState> ddim_invert(const Latent& x0, const Predictor& p, const Conditioning& c,
                                               const DiffusionSchedule& s) {
    s.validate();
    require_finite(x0, "latent");
    std::vector<DiffusionState> traj;
    traj.reserve(s.steps() + 1);
    traj.push_back(make_state(x0, 0, s));
    for (int t = 0; t < s.steps(); ++t) {
        DiffusionState next = traj.back();
        const auto out = detail::evaluate_at(p, next.x(s), c, t);
        advance(next, out.epsilon, t + 1, s);
        traj.push_back(std::move(next));
    }
    return traj;
}

/// Plain DDIM sampling from a state down to t = 0.
inline Latent ddim_denoise(DiffusionState st, const Predictor& p, const Conditioning& c, const DiffusionSchedule& s) {
    s.validate();
    while (st.t > 0) {
        const auto out = detail::evaluate_at(p, st.x(s), c, st.t);
        advance(st, out.epsilon, st.t - 1, s);
    }
    return st.z;
}

} // namespace sculpt
