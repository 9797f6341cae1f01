// certirl: certified Q bounds, robust action selection and experiment sweeps.
//
//   certirl run --config FILE [overrides...]
//   certirl certify --weights PATH --obs 0.1,0,0.02,0 --eps-rob 0.05 --p-rob inf
//   certirl verify-bounds --trials 200 --seed 0
//
// Exit codes: 0 success, 1 validation / input error, 2 failed verification.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

#include "certirl/certirl.hpp"

using namespace certirl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitVerifyFailed = 2;

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// A single value is broadcast to every input dimension.
Vector broadcast(const std::vector<double>& v, std::size_t dim, const char* what) {
    if (v.size() == 1) return Vector::Constant(static_cast<Eigen::Index>(dim), v.front());
    if (v.size() != dim)
        throw ValidationError(std::string(what) + " has " + std::to_string(v.size()) +
                              " entries; expected 1 or " + std::to_string(dim));
    return to_vector(v);
}

struct RunArgs {
    std::string config;
    std::vector<std::pair<std::string, std::string>> overrides;
    bool no_plots = false;
};

int cmd_run(const RunArgs& args) {
    harness::ExperimentConfig cfg = args.config.empty() ? harness::ExperimentConfig{} : harness::load_config(args.config);
    for (const auto& [key, value] : args.overrides) harness::set_field(cfg, key, value);
    if (args.no_plots) cfg.plots = false;
    if (cfg.weights.empty()) throw ValidationError("no weights given (config key 'weights' or --weights)");
    const NetworkSpec net = load_network(cfg.weights);

    const auto t0 = std::chrono::steady_clock::now();
    const auto sweep = harness::run_sweep(cfg, net);
    const auto files = harness::emit_outputs(sweep, cfg.out, cfg.plots);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::printf("%-9s %-9s %-8s %-8s %10s %8s %9s %6s\n", "eps_rob", "eps_adv", "sigma", "lambda", "reward", "+-std",
                "collision", "cert");
    for (const auto& c : sweep.cells)
        std::printf("%-9.4g %-9.4g %-8.4g %-8.4g %10.3f %8.3f %9.3f %6.3f\n", c.cell.eps_rob, c.cell.eps_adv(),
                    c.cell.sigma(), c.cell.lambda, c.mean_reward, c.std_reward, c.collision_rate + c.failure_rate,
                    c.mean_certificate);
    for (const auto& f : files) std::printf("wrote %s\n", f.c_str());
    std::fprintf(stderr, "%zu cells x %zu seeds x %zu episodes in %.1f s\n", sweep.cells.size(), cfg.seeds.size(),
                 cfg.episodes, secs);
    return kExitOk;
}

struct CertifyArgs {
    std::string weights;
    std::vector<double> obs;
    std::vector<double> eps_rob;
    std::string p_rob = "inf";
    std::string rule = "carrl";
    double lambda_sens = 0.0;
};

int cmd_certify(const CertifyArgs& args) {
    const NetworkSpec net = load_network(args.weights);
    const Observation obs = to_vector(args.obs);
    check_input(net, obs);
    const Vector eps = broadcast(args.eps_rob, net.input_dim, "--eps-rob");
    const double p = harness::parse_p(args.p_rob, "--p-rob");
    const EpsBall ball(obs, eps, p);

    const BoundsResult b = bounds_all_actions(net, ball, Execution::parallel);
    const DecisionRule rule = parse_rule(args.rule);
    const RobustDecision d = rule == DecisionRule::nominal ? nominal_action(net, obs)
                             : rule == DecisionRule::reduced_sensitivity
                                 ? reduced_sensitivity_action(b, args.lambda_sens)
                                 : carrl_action(b);
    const Vector q = forward(net, obs);

    std::printf("%-6s %-12s %22s %22s %22s\n", "action", "label", "q_lower", "q_nominal", "q_upper");
    for (std::size_t j = 0; j < net.output_dim(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        std::printf("%-6zu %-12s %22.15g %22.15g %22.15g\n", j, net.action_labels[j].c_str(), b.q_lower(i), q(i),
                    b.q_upper(i));
    }
    const std::size_t undecided = b.layer_bounds.undecided_count();
    std::printf("chosen action: %zu (%s, rule %s)\n", d.action_index, net.action_labels[d.action_index].c_str(),
                to_string(d.rule));
    std::printf("certificate: %.17g\n", d.certificate);
    std::printf("undecided relus: %zu\n", undecided);
    return kExitOk;
}

int cmd_verify(std::size_t trials, std::uint64_t seed, std::size_t grid, std::size_t samples) {
    oracle::SoundnessOptions opt;
    opt.trials = trials;
    opt.seed = seed;
    opt.grid_resolution = grid;
    opt.mc_samples = samples;
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = oracle::verify_soundness(opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("networks: %zu  balls: %zu  forward evaluations: %zu  time: %.1f s\n", rep.networks, rep.balls,
                rep.evaluations, secs);
    std::printf("worst excess over bounds: %.3g (tolerance %.1g)\n", rep.worst_excess, opt.tolerance);
    if (!rep.passed()) {
        std::printf("FAIL: %zu violations; first: %s\n", rep.violations, rep.first_failure.c_str());
        return kExitVerifyFailed;
    }
    std::printf("PASS\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"certified Q bounds and robust action selection"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "run an eps_rob x perturbation sweep and write sweep.csv and plots");
    run_cmd->add_option("--config", run.config, "flat key = value config file");
    // every override maps one-for-one onto a config key
    const std::pair<const char*, const char*> flags[] = {
        {"--env", "env"},         {"--weights", "weights"},   {"--rule", "rule"},
        {"--lambda-sens", "lambda_sens"}, {"--eps-rob", "eps_rob"}, {"--p-rob", "p_rob"},
        {"--attack", "attack"},   {"--eps-adv", "eps_adv"},   {"--sigma", "sigma"},
        {"--lambda", "lambda"},   {"--episodes", "episodes"}, {"--seeds", "seeds"},
        {"--out", "out"},         {"--mask", "mask"},         {"--threads", "threads"},
    };
    std::vector<std::string> values(std::size(flags));
    for (std::size_t i = 0; i < std::size(flags); ++i)
        run_cmd->add_option(flags[i].first, values[i], std::string("overrides config key '") + flags[i].second + "'");
    run_cmd->add_flag("--no-plots", run.no_plots, "skip SVG plots");

    CertifyArgs cert;
    auto* cert_cmd = app.add_subcommand("certify", "print certified Q bounds and the robust action for one observation");
    cert_cmd->add_option("--weights", cert.weights, "network JSON")->required();
    cert_cmd->add_option("--obs", cert.obs, "observation, comma separated")->required()->delimiter(',');
    cert_cmd->add_option("--eps-rob", cert.eps_rob, "radius (one value or one per dimension)")
        ->required()
        ->delimiter(',');
    cert_cmd->add_option("--p-rob", cert.p_rob, "norm order: 1, 2, ... or inf");
    cert_cmd->add_option("--rule", cert.rule, "carrl|rs|nominal");
    cert_cmd->add_option("--lambda-sens", cert.lambda_sens, "reduced-sensitivity weight");

    std::size_t trials = 200, grid = 41, samples = 10000;
    std::uint64_t seed = 0;
    auto* ver_cmd = app.add_subcommand("verify-bounds", "check bound soundness on seeded random networks");
    ver_cmd->add_option("--trials", trials, "number of random networks");
    ver_cmd->add_option("--seed", seed, "master seed");
    ver_cmd->add_option("--grid", grid, "grid points per dimension");
    ver_cmd->add_option("--samples", samples, "Monte-Carlo samples per ball");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*run_cmd) {
            for (std::size_t i = 0; i < std::size(flags); ++i)
                if (run_cmd->count(flags[i].first) > 0) run.overrides.emplace_back(flags[i].second, values[i]);
            return cmd_run(run);
        }
        if (*cert_cmd) return cmd_certify(cert);
        if (*ver_cmd) return cmd_verify(trials, seed, grid, samples);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvalid;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvalid;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitVerifyFailed;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvalid;
    }
    return kExitOk;
}
