#pragma once

// Action selection on top of certified bounds.

#include <string>

#include "certirl/certify.hpp"
#include "certirl/rng.hpp"

namespace certirl {

enum class DecisionRule { carrl, reduced_sensitivity, policy_logit, nominal };

inline const char* to_string(DecisionRule r) {
    switch (r) {
        case DecisionRule::carrl: return "carrl";
        case DecisionRule::reduced_sensitivity: return "rs";
        case DecisionRule::policy_logit: return "policy";
        case DecisionRule::nominal: return "nominal";
    }
    return "?";
}

inline DecisionRule parse_rule(const std::string& s) {
    if (s == "carrl") return DecisionRule::carrl;
    if (s == "rs" || s == "reduced_sensitivity") return DecisionRule::reduced_sensitivity;
    if (s == "policy" || s == "policy_logit") return DecisionRule::policy_logit;
    if (s == "nominal") return DecisionRule::nominal;
    throw ValidationError("unknown decision rule '" + s + "' (expected carrl|rs|policy|nominal)");
}

struct RobustDecision {
    std::size_t action_index = 0;
    Vector q_lower;
    Vector q_upper;
    double certificate = 0.0;
    DecisionRule rule = DecisionRule::carrl;
};

/// argmax with lowest-index tie breaking.
inline std::size_t argmax_first(const Vector& v) {
    if (v.size() == 0) throw ContractViolation("argmax of an empty vector");
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
    return best;
}

inline std::size_t argmin_first(const Vector& v) { return argmax_first(-v); }

/// (max_j Q_u) - Q_l(chosen): bounds Q(s0, a**) - Q(s0, chosen) whenever the
/// true state s0 is inside the ball the bounds were computed on.
inline double suboptimality_certificate(const BoundsResult& bounds, std::size_t chosen) {
    if (chosen >= static_cast<std::size_t>(bounds.q_lower.size()))
        throw ContractViolation("chosen action out of range");
    const double cert = bounds.q_upper.maxCoeff() - bounds.q_lower(static_cast<Eigen::Index>(chosen));
    // q_upper >= q_lower holds elementwise, so this is only ever rounding.
    return cert < 0.0 ? 0.0 : cert;
}

namespace detail {

inline RobustDecision decision_from(const BoundsResult& bounds, std::size_t chosen, DecisionRule rule) {
    return {chosen, bounds.q_lower, bounds.q_upper, suboptimality_certificate(bounds, chosen), rule};
}

}  // namespace detail

/// a_CARRL = argmax_j Q_l(s_adv, a_j).
inline RobustDecision carrl_action(const BoundsResult& bounds) {
    return detail::decision_from(bounds, argmax_first(bounds.q_lower), DecisionRule::carrl);
}

/// argmax_j [Q_l - lambda_sens (Q_u - Q_l)].
inline RobustDecision reduced_sensitivity_action(const BoundsResult& bounds, double lambda_sens) {
    if (!(lambda_sens >= 0.0)) throw ContractViolation("lambda_sens must be >= 0");
    const Vector width = bounds.q_upper - bounds.q_lower;
    const Vector score = bounds.q_lower - lambda_sens * width;
    return detail::decision_from(bounds, argmax_first(score), DecisionRule::reduced_sensitivity);
}

/// Same rule as carrl_action, with the outputs read as policy logits.
inline RobustDecision policy_logit_action(const BoundsResult& logit_bounds) {
    return detail::decision_from(logit_bounds, argmax_first(logit_bounds.q_lower),
                                 DecisionRule::policy_logit);
}

/// Stochastic variant: a ~ softmax(mu_l), temperature 1.
inline std::size_t sample_policy_logit_action(const BoundsResult& logit_bounds, Rng& rng) {
    const Vector probs = softmax(logit_bounds.q_lower);
    double u = rng.uniform();
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (u < probs(i)) return static_cast<std::size_t>(i);
        u -= probs(i);
    }
    return static_cast<std::size_t>(probs.size() - 1);
}

/// Plain DQN: argmax_j Q(obs, a_j), certificate 0.
inline RobustDecision nominal_action(const NetworkSpec& net, const Observation& obs) {
    const Vector q = forward(net, obs);
    const std::size_t chosen = argmax_first(q);
    return {chosen, q, q, q.maxCoeff() - q(static_cast<Eigen::Index>(chosen)), DecisionRule::nominal};
}

/// Runs one decision: bounds over `ball` (centered on the observation),
/// then the rule. The nominal rule skips bound computation.
inline RobustDecision decide(DecisionRule rule, const NetworkSpec& net, const EpsBall& ball,
                             double lambda_sens = 0.0) {
    if (rule == DecisionRule::nominal) return nominal_action(net, ball.center);
    const BoundsResult bounds = bounds_all_actions(net, ball);
    switch (rule) {
        case DecisionRule::reduced_sensitivity: return reduced_sensitivity_action(bounds, lambda_sens);
        case DecisionRule::policy_logit: return policy_logit_action(bounds);
        default: return carrl_action(bounds);
    }
}

}  // namespace certirl
