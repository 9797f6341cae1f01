#pragma once

// Classic cart-pole balancing task with the standard benchmark constants
// and explicit Euler integration.

#include <cmath>

#include "certirl/errors.hpp"
#include "certirl/netio.hpp"
#include "certirl/rng.hpp"

namespace certirl::envs {

struct CartpoleParams {
    double gravity = 9.8;
    double cart_mass = 1.0;
    double pole_mass = 0.1;
    double half_length = 0.5;
    double force = 10.0;
    double tau = 0.02;
    double theta_limit = 12.0 * 2.0 * M_PI / 360.0;
    double x_limit = 2.4;
    int max_steps = 200;
    double reset_range = 0.05;
};

struct CartpoleState {
    double x = 0.0;          // m
    double v = 0.0;          // m/s
    double theta = 0.0;      // rad, 0 = upright
    double theta_dot = 0.0;  // rad/s
    int step_count = 0;
};

enum class CartpoleAction : int { left = 0, right = 1 };

struct CartpoleStep {
    CartpoleState state;
    double reward;
    bool done;
};

inline bool cartpole_terminal(const CartpoleState& s, const CartpoleParams& p = {}) {
    return std::abs(s.theta) > p.theta_limit || std::abs(s.x) > p.x_limit || s.step_count >= p.max_steps;
}

inline CartpoleState cartpole_reset(Rng& rng, const CartpoleParams& p = {}) {
    CartpoleState s;
    s.x = rng.uniform(-p.reset_range, p.reset_range);
    s.v = rng.uniform(-p.reset_range, p.reset_range);
    s.theta = rng.uniform(-p.reset_range, p.reset_range);
    s.theta_dot = rng.uniform(-p.reset_range, p.reset_range);
    return s;
}

/// One 0.02 s step under a +/-10 N push. Reward 1 for every step taken, so
/// an episode's return is its length (at most max_steps).
inline CartpoleStep cartpole_step(const CartpoleState& s, int action, const CartpoleParams& p = {}) {
    if (cartpole_terminal(s, p)) throw ContractViolation("cartpole_step called on a finished episode");
    if (action != 0 && action != 1) throw ContractViolation("cartpole action must be 0 (left) or 1 (right)");

    const double total_mass = p.cart_mass + p.pole_mass;
    const double pole_moment = p.pole_mass * p.half_length;
    const double f = action == 1 ? p.force : -p.force;
    const double cos_t = std::cos(s.theta);
    const double sin_t = std::sin(s.theta);

    const double temp = (f + pole_moment * s.theta_dot * s.theta_dot * sin_t) / total_mass;
    const double theta_acc = (p.gravity * sin_t - cos_t * temp) /
                             (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_moment * theta_acc * cos_t / total_mass;

    CartpoleState n;
    n.x = s.x + p.tau * s.v;
    n.v = s.v + p.tau * x_acc;
    n.theta = s.theta + p.tau * s.theta_dot;
    n.theta_dot = s.theta_dot + p.tau * theta_acc;
    n.step_count = s.step_count + 1;
    return {n, 1.0, cartpole_terminal(n, p)};
}

/// [x, v, theta, theta_dot].
inline Observation cartpole_observe(const CartpoleState& s) {
    Observation o(4);
    o << s.x, s.v, s.theta, s.theta_dot;
    return o;
}

}  // namespace certirl::envs
