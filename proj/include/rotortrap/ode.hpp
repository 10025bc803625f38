#pragma once

// Thin wrapper around an adaptive Dormand-Prince 5(4) integrator with dense
// output.  All simulation modules integrate through these helpers so step
// control, error mapping, and sampling conventions stay in one place.

#include "rotortrap/errors.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace rotortrap {

struct OdeSettings {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_dt = 0.0; // 0 means "no explicit cap"
};

namespace detail {

template <typename State, typename System>
auto make_stepper(const OdeSettings& s) {
    using boost::numeric::odeint::make_dense_output;
    using boost::numeric::odeint::runge_kutta_dopri5;
    const double cap = s.max_dt > 0.0 ? s.max_dt
                                      : std::numeric_limits<double>::max();
    return make_dense_output(s.abs_tol, s.rel_tol, cap, runge_kutta_dopri5<State>());
}

} // namespace detail

// Integrate from t0 to t1 and return the final state.  Throws StepFailure if
// the controller cannot meet the tolerance with a representable step size.
template <typename State, typename System>
State integrate_to(System&& sys, State state, double t0, double t1,
                   const OdeSettings& settings = {}) {
    if (t1 == t0) return state;
    auto stepper = detail::make_stepper<State, System>(settings);
    try {
        boost::numeric::odeint::integrate_adaptive(stepper, std::forward<System>(sys),
                                                   state, t0, t1, (t1 - t0) / 1024.0);
    } catch (const std::exception& e) {
        throw StepFailure(std::string("adaptive step control failed: ") + e.what());
    }
    return state;
}

// Integrate from t0 and record the state at uniformly spaced sample times
// t0 + k*dt_sample for k = 0..n_samples-1, using dense interpolation between
// accepted steps.  The observer receives (state, time) for every sample.
template <typename State, typename System, typename Observer>
void integrate_sampled(System&& sys, State state, double t0, double dt_sample,
                       std::size_t n_samples, Observer&& observe,
                       const OdeSettings& settings = {}) {
    if (n_samples == 0) return;
    if (dt_sample <= 0.0) throw StepFailure("sample spacing must be positive");
    auto stepper = detail::make_stepper<State, System>(settings);
    const double dt_init = settings.max_dt > 0.0 ? settings.max_dt : dt_sample;
    stepper.initialize(state, t0, dt_init);
    observe(stepper.current_state(), t0);
    std::size_t emitted = 1;
    try {
        while (emitted < n_samples) {
            stepper.do_step(sys);
            const double t_hi = stepper.current_time();
            while (emitted < n_samples) {
                const double t_next = t0 + static_cast<double>(emitted) * dt_sample;
                if (t_next > t_hi) break;
                State interp;
                stepper.calc_state(t_next, interp);
                observe(interp, t_next);
                ++emitted;
            }
        }
    } catch (const StepFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw StepFailure(std::string("adaptive step control failed: ") + e.what());
    }
}

} // namespace rotortrap
