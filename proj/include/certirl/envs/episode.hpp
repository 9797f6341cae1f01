#pragma once

#include <string>
#include <vector>

#include "certirl/netio.hpp"

namespace certirl::envs {

enum class EnvKind { cartpole, collision_avoidance };

inline const char* to_string(EnvKind e) {
    return e == EnvKind::cartpole ? "cartpole" : "collision_avoidance";
}

inline EnvKind parse_env(const std::string& s) {
    if (s == "cartpole") return EnvKind::cartpole;
    if (s == "collision_avoidance" || s == "ca") return EnvKind::collision_avoidance;
    throw ValidationError("unknown env '" + s + "' (expected cartpole|collision_avoidance)");
}

/// Terminal accounting. Cartpole maps "pole fell / cart left the track" to
/// failure and "survived to the step cap" to goal.
enum class EpisodeOutcome { goal, collision, timeout, failure };

inline const char* to_string(EpisodeOutcome o) {
    switch (o) {
        case EpisodeOutcome::goal: return "goal";
        case EpisodeOutcome::collision: return "collision";
        case EpisodeOutcome::timeout: return "timeout";
        case EpisodeOutcome::failure: return "failure";
    }
    return "?";
}

struct StepRecord {
    Observation true_obs;      // observation of the true state s0
    Observation observed;      // what the agent saw after perturbation
    std::size_t action = 0;
    double reward = 0.0;
    double certificate = 0.0;
    Vector q_lower;
    Vector q_upper;

    bool operator==(const StepRecord& o) const {
        return true_obs == o.true_obs && observed == o.observed && action == o.action && reward == o.reward &&
               certificate == o.certificate && q_lower == o.q_lower && q_upper == o.q_upper;
    }
};

struct EpisodeRecord {
    EnvKind env = EnvKind::cartpole;
    std::vector<StepRecord> steps;
    EpisodeOutcome outcome = EpisodeOutcome::timeout;
    double total_reward = 0.0;

    std::size_t length() const { return steps.size(); }
    double mean_certificate() const {
        if (steps.empty()) return 0.0;
        double s = 0.0;
        for (const auto& st : steps) s += st.certificate;
        return s / static_cast<double>(steps.size());
    }
    bool operator==(const EpisodeRecord& o) const {
        return env == o.env && steps == o.steps && outcome == o.outcome && total_reward == o.total_reward;
    }
};

}  // namespace certirl::envs
