#pragma once

// Two-agent collision avoidance: a unicycle ego agent steering toward its
// goal at 1 m/s while a second agent moves under a cooperative,
// non-cooperative or adversarial behavior model.

#include <cmath>
#include <string>

#include "certirl/errors.hpp"
#include "certirl/netio.hpp"
#include "certirl/rng.hpp"

namespace certirl::envs {

inline constexpr int kCaActions = 11;
inline constexpr double kCaMaxTurn = M_PI / 6.0;
/// Observation layout tag embedded in weight-file meta.
inline constexpr const char* kCaLayoutTag =
    "ego_frame_v1:goal_dx,goal_dy,r_ego,r_obs,obs_px,obs_py,obs_vx,obs_vy";
/// Indices of the obstacle's relative position in the observation.
inline constexpr int kCaObsPx = 4;
inline constexpr int kCaObsPy = 5;

struct ScenarioConfig {
    double dt = 0.1;
    int max_steps = 200;
    double ego_speed = 1.0;
    double ego_radius_min = 0.2, ego_radius_max = 0.5;
    double obs_radius_min = 0.2, obs_radius_max = 0.5;
    double goal_distance_min = 4.0, goal_distance_max = 8.0;
    double obs_speed_min = 0.5, obs_speed_max = 1.0;
    double crossing_fraction_min = 0.3, crossing_fraction_max = 0.7;
    double heading_noise = 0.5;       // rad, ego initial heading offset from goal bearing
    double lambda = 0.0;              // collaboration coefficient in [-1, 0.5]
    double decision_period = 1.0;     // s, Bernoulli window for adversarial behavior
    double projection_horizon = 1.0;  // s, constant-velocity ego extrapolation when aiming
    double avoid_margin = 0.2;        // m, extra clearance the cooperative model aims for
    double avoid_horizon = 3.0;       // s
};

enum class CaOutcome { running, goal, collision, timeout };

inline const char* to_string(CaOutcome o) {
    switch (o) {
        case CaOutcome::running: return "running";
        case CaOutcome::goal: return "goal";
        case CaOutcome::collision: return "collision";
        case CaOutcome::timeout: return "timeout";
    }
    return "?";
}

struct CollisionAvoidanceState {
    // ego (world frame)
    double ego_x = 0, ego_y = 0, ego_heading = 0, ego_radius = 0.3;
    double goal_x = 0, goal_y = 0;
    // other agent
    double obs_x = 0, obs_y = 0, obs_vx = 0, obs_vy = 0, obs_radius = 0.3;
    double obs_goal_x = 0, obs_goal_y = 0, obs_speed = 1.0;
    double lambda = 0.0;
    bool aiming = false;
    double time = 0.0;
    int step_count = 0;
    CaOutcome outcome = CaOutcome::running;
    Rng behavior_rng{0};

    bool done() const { return outcome != CaOutcome::running; }
};

struct CaStep {
    CollisionAvoidanceState state;
    double reward;
    bool done;
};

/// Heading change for action index a: 11 values evenly spaced over [-pi/6, pi/6].
inline double ca_heading_change(int action) {
    if (action < 0 || action >= kCaActions)
        throw ContractViolation("collision-avoidance action must be in [0, 11), got " + std::to_string(action));
    return -kCaMaxTurn + action * (2.0 * kCaMaxTurn / (kCaActions - 1));
}

inline double ca_distance(double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); }

inline bool ca_colliding(const CollisionAvoidanceState& s) {
    return ca_distance(s.ego_x, s.ego_y, s.obs_x, s.obs_y) < s.ego_radius + s.obs_radius;
}

inline void check_lambda(double lambda) {
    if (!(lambda >= -1.0 && lambda <= 0.5))
        throw ValidationError("collaboration coefficient lambda must be in [-1, 0.5], got " + std::to_string(lambda));
}

struct VelocityCommand {
    double vx = 0, vy = 0;
    bool aiming = false;
};

namespace detail {

inline VelocityCommand toward(double fx, double fy, double tx, double ty, double speed, double dt) {
    const double dx = tx - fx, dy = ty - fy;
    const double dist = std::hypot(dx, dy);
    if (dist < 1e-9) return {};
    const double v = std::min(speed, dist / dt);
    return {v * dx / dist, v * dy / dist, false};
}

}  // namespace detail

inline CollisionAvoidanceState ca_reset(std::uint64_t seed, const ScenarioConfig& cfg = {}) {
    check_lambda(cfg.lambda);
    Rng rng(seed);
    CollisionAvoidanceState s;
    s.ego_radius = rng.uniform(cfg.ego_radius_min, cfg.ego_radius_max);
    s.obs_radius = rng.uniform(cfg.obs_radius_min, cfg.obs_radius_max);

    const double goal_dist = rng.uniform(cfg.goal_distance_min, cfg.goal_distance_max);
    const double bearing = rng.uniform(-M_PI, M_PI);
    s.goal_x = goal_dist * std::cos(bearing);
    s.goal_y = goal_dist * std::sin(bearing);
    s.ego_heading = bearing + rng.uniform(-cfg.heading_noise, cfg.heading_noise);

    // The other agent crosses the ego's straight-line path roughly when the
    // ego would get there.
    s.obs_speed = rng.uniform(cfg.obs_speed_min, cfg.obs_speed_max);
    const double frac = rng.uniform(cfg.crossing_fraction_min, cfg.crossing_fraction_max);
    const double px = frac * s.goal_x, py = frac * s.goal_y;
    const double t_cross = frac * goal_dist / cfg.ego_speed;
    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double cross_angle = bearing + side * rng.uniform(M_PI / 6.0, M_PI);
    const double ux = std::cos(cross_angle), uy = std::sin(cross_angle);
    double lead = std::max(s.obs_speed * t_cross, 1.0);
    s.obs_x = px - ux * lead;
    s.obs_y = py - uy * lead;
    while (ca_distance(s.obs_x, s.obs_y, 0.0, 0.0) < s.ego_radius + s.obs_radius + 1.0) {
        lead += 0.5;
        s.obs_x = px - ux * lead;
        s.obs_y = py - uy * lead;
    }
    s.obs_goal_x = px + ux * lead;
    s.obs_goal_y = py + uy * lead;

    const auto v0 = detail::toward(s.obs_x, s.obs_y, s.obs_goal_x, s.obs_goal_y, s.obs_speed, cfg.dt);
    s.obs_vx = v0.vx;
    s.obs_vy = v0.vy;
    s.lambda = cfg.lambda;
    s.behavior_rng = Rng::stream(seed, 0x0b57ac1eULL);
    return s;
}


/// Velocity command for the other agent.
///   lambda > 0: heads to goal but takes a `lambda` share of the sideways
///               correction needed to clear the ego (0.5 = half the effort).
///   lambda = 0: straight to goal at constant speed.
///   lambda < 0: every decision period draws Bernoulli(|lambda|); on success
///               aims at the ego's position projected `projection_horizon`
///               seconds ahead, otherwise heads to goal.
inline VelocityCommand obstacle_policy(const CollisionAvoidanceState& s, const ScenarioConfig& cfg, Rng& rng) {
    check_lambda(s.lambda);
    const double dt = cfg.dt;
    VelocityCommand to_goal = detail::toward(s.obs_x, s.obs_y, s.obs_goal_x, s.obs_goal_y, s.obs_speed, dt);
    const double ego_vx = cfg.ego_speed * std::cos(s.ego_heading);
    const double ego_vy = cfg.ego_speed * std::sin(s.ego_heading);

    if (s.lambda < 0.0) {
        const int period = std::max(1, static_cast<int>(std::lround(cfg.decision_period / dt)));
        bool aiming = s.aiming;
        if (s.step_count % period == 0) aiming = rng.bernoulli(-s.lambda);
        if (!aiming) return to_goal;
        const double tx = s.ego_x + ego_vx * cfg.projection_horizon;
        const double ty = s.ego_y + ego_vy * cfg.projection_horizon;
        VelocityCommand cmd = detail::toward(s.obs_x, s.obs_y, tx, ty, s.obs_speed, dt);
        cmd.aiming = true;
        return cmd;
    }
    if (s.lambda == 0.0) return to_goal;

    // Cooperative: closest approach under current intents.
    const double rx = s.obs_x - s.ego_x, ry = s.obs_y - s.ego_y;
    const double wx = to_goal.vx - ego_vx, wy = to_goal.vy - ego_vy;
    const double w2 = wx * wx + wy * wy;
    if (w2 < 1e-12) return to_goal;
    const double t_star = std::clamp(-(rx * wx + ry * wy) / w2, 0.0, cfg.avoid_horizon);
    if (t_star <= 0.0) return to_goal;
    const double mx = rx + wx * t_star, my = ry + wy * t_star;
    const double miss = std::hypot(mx, my);
    const double needed = s.ego_radius + s.obs_radius + cfg.avoid_margin;
    if (miss >= needed) return to_goal;

    // Push sideways (perpendicular to the relative velocity) on the side the
    // closest-approach offset already points to.
    const double wn = std::sqrt(w2);
    double nx = -wy / wn, ny = wx / wn;
    if (nx * mx + ny * my < 0.0) {
        nx = -nx;
        ny = -ny;
    }
    const double push = s.lambda * (needed - miss) / std::max(t_star, dt);
    double vx = to_goal.vx + push * nx, vy = to_goal.vy + push * ny;
    const double speed = std::hypot(vx, vy);
    if (speed > s.obs_speed) {
        vx *= s.obs_speed / speed;
        vy *= s.obs_speed / speed;
    }
    return {vx, vy, false};
}

/// Applies the heading change, moves both agents for one dt, then scores:
/// collision -0.25, goal +1, timeout 0.
inline CaStep ca_step(const CollisionAvoidanceState& s, int action, const ScenarioConfig& cfg = {}) {
    if (s.done()) throw ContractViolation("ca_step called on a finished episode");
    const double turn = ca_heading_change(action);

    CollisionAvoidanceState n = s;
    const VelocityCommand cmd = obstacle_policy(s, cfg, n.behavior_rng);
    n.aiming = cmd.aiming;
    n.obs_vx = cmd.vx;
    n.obs_vy = cmd.vy;

    n.ego_heading = std::remainder(s.ego_heading + turn, 2.0 * M_PI);
    n.ego_x += cfg.ego_speed * std::cos(n.ego_heading) * cfg.dt;
    n.ego_y += cfg.ego_speed * std::sin(n.ego_heading) * cfg.dt;
    n.obs_x += n.obs_vx * cfg.dt;
    n.obs_y += n.obs_vy * cfg.dt;
    n.time += cfg.dt;
    n.step_count += 1;

    double reward = 0.0;
    if (ca_colliding(n)) {
        n.outcome = CaOutcome::collision;
        reward = -0.25;
    } else if (ca_distance(n.ego_x, n.ego_y, n.goal_x, n.goal_y) < n.ego_radius) {
        n.outcome = CaOutcome::goal;
        reward = 1.0;
    } else if (n.step_count >= cfg.max_steps) {
        n.outcome = CaOutcome::timeout;
    }
    return {n, reward, n.done()};
}

/// 8-dim observation in the ego frame (origin at the ego, x axis along its
/// heading): [goal_dx, goal_dy, r_ego, r_obs, obs_px, obs_py, obs_vx, obs_vy].
inline Observation ca_observe(const CollisionAvoidanceState& s) {
    const double c = std::cos(s.ego_heading), sn = std::sin(s.ego_heading);
    auto rotate = [&](double x, double y) { return std::pair{c * x + sn * y, -sn * x + c * y}; };
    const auto [gx, gy] = rotate(s.goal_x - s.ego_x, s.goal_y - s.ego_y);
    const auto [px, py] = rotate(s.obs_x - s.ego_x, s.obs_y - s.ego_y);
    const auto [vx, vy] = rotate(s.obs_vx, s.obs_vy);
    Observation o(8);
    o << gx, gy, s.ego_radius, s.obs_radius, px, py, vx, vy;
    return o;
}

/// eps vector that perturbs only the obstacle position coordinates.
inline Vector ca_position_mask(double eps) {
    Vector e = Vector::Zero(8);
    e(kCaObsPx) = eps;
    e(kCaObsPy) = eps;
    return e;
}

}  // namespace certirl::envs
