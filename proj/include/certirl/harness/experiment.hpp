#pragma once

// Episode runner and the Cartesian eps_rob x perturbation x behavior sweep.

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "certirl/adversary.hpp"
#include "certirl/certify.hpp"
#include "certirl/decide.hpp"
#include "certirl/envs/cartpole.hpp"
#include "certirl/envs/collision_avoidance.hpp"
#include "certirl/envs/episode.hpp"
#include "certirl/netio.hpp"
#include "certirl/rng.hpp"

namespace certirl::harness {

using envs::EnvKind;
using envs::EpisodeOutcome;
using envs::EpisodeRecord;

struct EpisodeSettings {
    EnvKind env = EnvKind::cartpole;
    DecisionRule rule = DecisionRule::carrl;
    double lambda_sens = 0.0;
    Vector eps_rob;  // per-dimension defender radius
    double p_rob = kInf;
    PerturbationSpec perturbation;
    double behavior_lambda = 0.0;  // collision avoidance only
    envs::ScenarioConfig scenario;
    envs::CartpoleParams cartpole;
    bool record_steps = true;
};

/// Default perturbation mask: every dimension for cartpole, the other
/// agent's position for collision avoidance.
inline Vector default_mask(EnvKind env) {
    if (env == EnvKind::cartpole) return Vector::Ones(4);
    return envs::ca_position_mask(1.0);
}

inline std::size_t env_obs_dim(EnvKind env) { return env == EnvKind::cartpole ? 4 : 8; }
inline std::size_t env_actions(EnvKind env) { return env == EnvKind::cartpole ? 2 : envs::kCaActions; }

/// eps_rob = k * sigma: covers a Gaussian sensor with per-dimension standard
/// deviation sigma to the confidence level k implies (k = 2 gives ~95%).
inline Vector sigma_to_eps(const Vector& sigma, double k) {
    if (!(k >= 0.0)) throw ContractViolation("confidence multiplier k must be >= 0");
    return k * sigma;
}

inline void check_settings(const NetworkSpec& net, const EpisodeSettings& s) {
    const std::size_t dim = env_obs_dim(s.env);
    const std::string env = envs::to_string(s.env);
    if (net.input_dim != dim)
        throw ValidationError(env + " emits " + std::to_string(dim) + "-dim observations but the network expects " +
                              std::to_string(net.input_dim));
    if (net.output_dim() != env_actions(s.env))
        throw ValidationError(env + " has " + std::to_string(env_actions(s.env)) +
                              " actions but the network has " + std::to_string(net.output_dim()) + " outputs");
    if (static_cast<std::size_t>(s.eps_rob.size()) != dim)
        throw ValidationError("eps_rob has length " + std::to_string(s.eps_rob.size()) + ", " + env +
                              " observations have length " + std::to_string(dim));
    if (s.perturbation.kind == PerturbationKind::fgst &&
        static_cast<std::size_t>(s.perturbation.eps_adv.size()) != dim)
        throw ValidationError("eps_adv has length " + std::to_string(s.perturbation.eps_adv.size()) +
                              ", expected " + std::to_string(dim));
    if (s.perturbation.kind == PerturbationKind::uniform_noise &&
        static_cast<std::size_t>(s.perturbation.sigma.size()) != dim)
        throw ValidationError("sigma has length " + std::to_string(s.perturbation.sigma.size()) + ", expected " +
                              std::to_string(dim));
}

/// One closed-loop episode: true state -> perturbation -> bounds over the
/// eps_rob ball around the perturbed observation -> decision rule -> step.
/// (seed, episode) fixes the initial condition, the noise stream and the
/// other agent's behavior stream.
inline EpisodeRecord run_episode(const NetworkSpec& net, const EpisodeSettings& settings, std::uint64_t seed,
                                 std::uint64_t episode = 0) {
    check_settings(net, settings);
    Rng init_rng = Rng::stream(seed, 2 * episode);
    Rng noise_rng = Rng::stream(seed, 2 * episode + 1);

    EpisodeRecord rec;
    rec.env = settings.env;

    auto act = [&](const Observation& s0) {
        const Observation seen = apply(settings.perturbation, net, s0, noise_rng);
        const EpsBall ball(seen, settings.eps_rob, settings.p_rob);
        const RobustDecision d = decide(settings.rule, net, ball, settings.lambda_sens);
        envs::StepRecord st;
        st.action = d.action_index;
        st.certificate = d.certificate;
        if (settings.record_steps) {
            st.true_obs = s0;
            st.observed = seen;
            st.q_lower = d.q_lower;
            st.q_upper = d.q_upper;
        }
        return st;
    };

    if (settings.env == EnvKind::cartpole) {
        auto state = envs::cartpole_reset(init_rng, settings.cartpole);
        while (true) {
            auto st = act(envs::cartpole_observe(state));
            const auto step = envs::cartpole_step(state, static_cast<int>(st.action), settings.cartpole);
            st.reward = step.reward;
            rec.total_reward += step.reward;
            rec.steps.push_back(std::move(st));
            state = step.state;
            if (step.done) break;
        }
        rec.outcome = state.step_count >= settings.cartpole.max_steps && !(std::abs(state.theta) > settings.cartpole.theta_limit ||
                                                                          std::abs(state.x) > settings.cartpole.x_limit)
                          ? EpisodeOutcome::goal
                          : EpisodeOutcome::failure;
    } else {
        envs::ScenarioConfig cfg = settings.scenario;
        cfg.lambda = settings.behavior_lambda;
        auto state = envs::ca_reset(init_rng(), cfg);
        while (true) {
            auto st = act(envs::ca_observe(state));
            const auto step = envs::ca_step(state, static_cast<int>(st.action), cfg);
            st.reward = step.reward;
            rec.total_reward += step.reward;
            rec.steps.push_back(std::move(st));
            state = step.state;
            if (step.done) break;
        }
        switch (state.outcome) {
            case envs::CaOutcome::goal: rec.outcome = EpisodeOutcome::goal; break;
            case envs::CaOutcome::collision: rec.outcome = EpisodeOutcome::collision; break;
            default: rec.outcome = EpisodeOutcome::timeout; break;
        }
    }
    return rec;
}

struct ExperimentConfig {
    EnvKind env = EnvKind::cartpole;
    std::string weights;
    DecisionRule rule = DecisionRule::carrl;
    double lambda_sens = 0.0;
    std::vector<double> eps_rob{0.0};
    double p_rob = kInf;
    PerturbationKind attack = PerturbationKind::none;
    std::vector<double> eps_adv{0.0};
    std::vector<double> sigma{0.0};
    std::vector<double> lambdas{0.0};
    std::size_t episodes = 10;
    std::vector<std::uint64_t> seeds{0};
    std::string out = "results";
    bool plots = true;
    std::optional<Vector> mask;  // per-dimension 0/1 applied to eps_rob, eps_adv and sigma
    envs::ScenarioConfig scenario;
    unsigned threads = 0;  // 0 = hardware concurrency

    Vector effective_mask() const { return mask ? *mask : default_mask(env); }

    void validate() const {
        if (eps_rob.empty()) throw ValidationError("eps_rob list is empty");
        if (lambdas.empty()) throw ValidationError("lambda list is empty");
        if (seeds.empty()) throw ValidationError("seeds list is empty");
        if (episodes < 1) throw ValidationError("episodes must be >= 1");
        if (attack == PerturbationKind::fgst && eps_adv.empty()) throw ValidationError("eps_adv list is empty");
        if (attack == PerturbationKind::uniform_noise && sigma.empty()) throw ValidationError("sigma list is empty");
        if (!(lambda_sens >= 0.0)) throw ValidationError("lambda_sens must be >= 0");
        for (double e : eps_rob)
            if (!(e >= 0.0)) throw ValidationError("eps_rob entries must be >= 0");
        for (double l : lambdas) envs::check_lambda(l);
        if (mask && static_cast<std::size_t>(mask->size()) != env_obs_dim(env))
            throw ValidationError("mask has length " + std::to_string(mask->size()) + ", expected " +
                                  std::to_string(env_obs_dim(env)));
    }

    /// Perturbation magnitudes swept for the configured attack kind.
    std::vector<double> magnitudes() const {
        switch (attack) {
            case PerturbationKind::fgst: return eps_adv;
            case PerturbationKind::uniform_noise: return sigma;
            default: return {0.0};
        }
    }
};

struct CellKey {
    double eps_rob = 0.0;
    PerturbationKind kind = PerturbationKind::none;
    double magnitude = 0.0;  // eps_adv for fgst, sigma for noise
    double lambda = 0.0;

    double eps_adv() const { return kind == PerturbationKind::fgst ? magnitude : 0.0; }
    double sigma() const { return kind == PerturbationKind::uniform_noise ? magnitude : 0.0; }
};

struct SeedRow {
    CellKey cell;
    std::uint64_t seed = 0;
    double mean_reward = 0.0;
    double collision_rate = 0.0;
    double goal_rate = 0.0;
    double timeout_rate = 0.0;
    double failure_rate = 0.0;
    double mean_certificate = 0.0;
};

struct CellSummary {
    CellKey cell;
    double mean_reward = 0.0, std_reward = 0.0;
    double collision_rate = 0.0, std_collision_rate = 0.0;
    double goal_rate = 0.0, timeout_rate = 0.0, failure_rate = 0.0;
    double mean_certificate = 0.0;
};

struct SweepResult {
    EnvKind env = EnvKind::cartpole;
    DecisionRule rule = DecisionRule::carrl;
    double p_rob = kInf;
    std::vector<SeedRow> rows;       // cell-major, then seed
    std::vector<CellSummary> cells;  // same cell order as rows
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {m, 0.0};
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    return {m, std::sqrt(v / static_cast<double>(xs.size() - 1))};
}

}  // namespace detail

inline std::vector<CellKey> sweep_cells(const ExperimentConfig& cfg) {
    std::vector<CellKey> cells;
    for (double lam : cfg.lambdas)
        for (double mag : cfg.magnitudes())
            for (double e : cfg.eps_rob) cells.push_back({e, cfg.attack, mag, lam});
    return cells;
}

inline EpisodeSettings settings_for(const ExperimentConfig& cfg, const CellKey& cell) {
    const Vector mask = cfg.effective_mask();
    EpisodeSettings s;
    s.env = cfg.env;
    s.rule = cfg.rule;
    s.lambda_sens = cfg.lambda_sens;
    s.eps_rob = cell.eps_rob * mask;
    s.p_rob = cfg.p_rob;
    s.perturbation.kind = cell.kind;
    s.perturbation.eps_adv = cell.eps_adv() * mask;
    s.perturbation.sigma = cell.sigma() * mask;
    s.behavior_lambda = cell.lambda;
    s.scenario = cfg.scenario;
    s.record_steps = false;
    return s;
}

/// Runs every (cell, seed, episode). Per-seed rows average over episodes;
/// cell summaries are mean and sample std of the per-seed averages.
/// Deterministic for a given config regardless of thread count.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const NetworkSpec& net) {
    cfg.validate();
    const auto cells = sweep_cells(cfg);
    const std::size_t n_seeds = cfg.seeds.size();
    const std::size_t per_cell = n_seeds * cfg.episodes;

    std::vector<EpisodeSettings> settings;
    settings.reserve(cells.size());
    for (const auto& c : cells) {
        settings.push_back(settings_for(cfg, c));
        check_settings(net, settings.back());
    }

    struct Outcome {
        double reward = 0.0;
        EpisodeOutcome outcome = EpisodeOutcome::timeout;
        double certificate = 0.0;
    };
    std::vector<Outcome> outcomes(cells.size() * per_cell);
    detail::parallel_for(outcomes.size(), cfg.threads, [&](std::size_t i) {
        const std::size_t c = i / per_cell;
        const std::size_t seed_idx = (i % per_cell) / cfg.episodes;
        const std::size_t ep = i % cfg.episodes;
        const auto rec = run_episode(net, settings[c], cfg.seeds[seed_idx], ep);
        outcomes[i] = {rec.total_reward, rec.outcome, rec.mean_certificate()};
    });

    SweepResult res;
    res.env = cfg.env;
    res.rule = cfg.rule;
    res.p_rob = cfg.p_rob;
    const double n_ep = static_cast<double>(cfg.episodes);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> rewards, collisions;
        CellSummary sum;
        sum.cell = cells[c];
        for (std::size_t si = 0; si < n_seeds; ++si) {
            SeedRow row;
            row.cell = cells[c];
            row.seed = cfg.seeds[si];
            for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
                const auto& o = outcomes[c * per_cell + si * cfg.episodes + ep];
                row.mean_reward += o.reward / n_ep;
                row.mean_certificate += o.certificate / n_ep;
                row.collision_rate += (o.outcome == EpisodeOutcome::collision) / n_ep;
                row.goal_rate += (o.outcome == EpisodeOutcome::goal) / n_ep;
                row.timeout_rate += (o.outcome == EpisodeOutcome::timeout) / n_ep;
                row.failure_rate += (o.outcome == EpisodeOutcome::failure) / n_ep;
            }
            rewards.push_back(row.mean_reward);
            collisions.push_back(row.collision_rate);
            sum.goal_rate += row.goal_rate / static_cast<double>(n_seeds);
            sum.timeout_rate += row.timeout_rate / static_cast<double>(n_seeds);
            sum.failure_rate += row.failure_rate / static_cast<double>(n_seeds);
            sum.mean_certificate += row.mean_certificate / static_cast<double>(n_seeds);
            res.rows.push_back(row);
        }
        std::tie(sum.mean_reward, sum.std_reward) = detail::mean_std(rewards);
        std::tie(sum.collision_rate, sum.std_collision_rate) = detail::mean_std(collisions);
        res.cells.push_back(sum);
    }
    return res;
}

struct BestEpsRob {
    PerturbationKind kind = PerturbationKind::none;
    double magnitude = 0.0;
    double lambda = 0.0;
    double eps_rob = 0.0;
    double mean_reward = 0.0;
};

/// Per (perturbation kind, magnitude, lambda): the eps_rob with the highest
/// mean reward, ties going to the smaller eps_rob.
inline std::vector<BestEpsRob> best_eps_rob(const SweepResult& sweep) {
    std::vector<BestEpsRob> out;
    for (const auto& c : sweep.cells) {
        auto it = std::find_if(out.begin(), out.end(), [&](const BestEpsRob& b) {
            return b.kind == c.cell.kind && b.magnitude == c.cell.magnitude && b.lambda == c.cell.lambda;
        });
        if (it == out.end()) {
            out.push_back({c.cell.kind, c.cell.magnitude, c.cell.lambda, c.cell.eps_rob, c.mean_reward});
            continue;
        }
        if (c.mean_reward > it->mean_reward ||
            (c.mean_reward == it->mean_reward && c.cell.eps_rob < it->eps_rob)) {
            it->eps_rob = c.cell.eps_rob;
            it->mean_reward = c.mean_reward;
        }
    }
    return out;
}

}  // namespace certirl::harness
