// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fail.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "certirl/certirl.hpp"

using namespace certirl;
using namespace certirl::harness;

namespace {

std::string fixture(const std::string& name) { return std::string(CERTIRL_FIXTURES) + "/" + name; }

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(const char* id, const char* name, double budget_s, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0 && secs > budget_s) {
        o.pass = false;
        o.detail += " (over the " + std::to_string(static_cast<int>(budget_s)) + " s budget)";
    }
    if (!o.pass) ++failures;
    std::printf("%s %-3s %-34s %7.1fs  %s\n", o.pass ? "PASS" : "FAIL", id, name, secs, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

NetworkSpec net_for(std::uint64_t seed, const oracle::RandomNetOptions& opt = {}) {
    Rng rng = Rng::stream(seed, 0);
    return oracle::random_network(rng, opt);
}

Outcome soundness() {
    oracle::SoundnessOptions opt;
    opt.trials = 200;
    opt.seed = 2024;
    const auto r = oracle::verify_soundness(opt);
    return {r.passed() && r.networks == 200 && r.balls == 1800,
            fmt("%.0f nets, %.0f balls, %.3g evaluations, worst excess %.2e", static_cast<double>(r.networks),
                static_cast<double>(r.balls), static_cast<double>(r.evaluations), r.worst_excess) +
                (r.first_failure.empty() ? "" : "; " + r.first_failure)};
}

Outcome zero_eps() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto net = net_for(1000 + seed);
        Rng rng(seed);
        const Observation c = oracle::random_center(rng, net.input_dim);
        const Vector f = forward(net, c);
        for (double p : {1.0, 2.0, kInf}) {
            const auto b = bounds_all_actions(net, EpsBall(c, Vector::Zero(net.input_dim), p));
            for (Eigen::Index j = 0; j < f.size(); ++j) {
                const double tol = 1e-12 * (1 + std::abs(f(j)));
                worst = std::max({worst, std::abs(b.q_lower(j) - f(j)) / tol, std::abs(b.q_upper(j) - f(j)) / tol});
            }
        }
    }
    return {worst <= 1.0, fmt("worst error / tolerance = %.3g over 200 nets x 3 norms", worst)};
}

Outcome decided_tightness() {
    std::size_t instances = 0, bound_ok = 0, action_ok = 0, tried = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; instances < 100 && seed < 100000; ++seed) {
        const auto net = net_for(5000 + seed, {.max_hidden = 2, .max_width = 8, .min_actions = 2});
        Rng rng(seed);
        const EpsBall ball(oracle::random_center(rng, net.input_dim),
                           Vector::Constant(net.input_dim, rng.uniform(0.001, 0.05)));
        ++tried;
        const auto b = bounds_all_actions(net, ball);
        if (!b.layer_bounds.all_decided()) continue;
        ++instances;
        const auto corners = oracle::corner_extrema(net, ball);
        const double err = (b.q_lower - *corners.corner_min).cwiseAbs().maxCoeff();
        worst = std::max(worst, err);
        bound_ok += err <= 1e-9;
        action_ok += carrl_action(b).action_index == argmax_first(*corners.corner_min);
    }
    return {instances == 100 && bound_ok == 100 && action_ok == 100,
            fmt("%.0f decided instances (of %.0f tried): %.0f bounds within 1e-9 (worst %.2e), ",
                static_cast<double>(instances), static_cast<double>(tried), static_cast<double>(bound_ok), worst) +
                fmt("%.0f actions match", static_cast<double>(action_ok))};
}

Outcome monotonicity() {
    const double eps[] = {0.0, 0.01, 0.05, 0.1, 0.3};
    std::size_t violations = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto net = net_for(9000 + seed);
        Rng rng(seed);
        const Observation c = oracle::random_center(rng, net.input_dim);
        Vector shape(net.input_dim);
        for (Eigen::Index i = 0; i < shape.size(); ++i) shape(i) = rng.uniform(0.5, 1.5);
        for (double p : {1.0, 2.0, kInf}) {
            Vector lo_prev, hi_prev;
            for (double e : eps) {
                const auto b = bounds_all_actions(net, EpsBall(c, e * shape, p));
                if (lo_prev.size()) {
                    violations += ((b.q_lower.array() > lo_prev.array() + 1e-12).count());
                    violations += ((b.q_upper.array() < hi_prev.array() - 1e-12).count());
                }
                lo_prev = b.q_lower;
                hi_prev = b.q_upper;
            }
        }
    }
    return {violations == 0, fmt("%.0f violations over 200 nets x 5 nested radii x 3 norms",
                                 static_cast<double>(violations))};
}

Outcome linear_dual_norm() {
    double worst = 0.0;
    Rng rng(77);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng.below(6), m = 1 + rng.below(4);
        NetworkSpec net;
        net.input_dim = n;
        DenseLayer layer{Matrix(m, n), Vector(m)};
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = rng.uniform(-2, 2);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = rng.uniform(-1, 1);
        net.layers.push_back(layer);
        for (std::size_t j = 0; j < m; ++j) net.action_labels.push_back("a" + std::to_string(j));
        validate(net);
        const Observation c = oracle::random_center(rng, n);
        Vector eps(n);
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.uniform(0, 0.5);
        for (double p : {1.0, 2.0, kInf}) {
            const auto b = bounds_all_actions(net, EpsBall(c, eps, p));
            for (std::size_t j = 0; j < m; ++j) {
                const Vector w = layer.weights.row(static_cast<Eigen::Index>(j)).transpose();
                const Vector scaled = eps.cwiseProduct(w);
                const double q = p == 1.0 ? kInf : p == 2.0 ? 2.0 : 1.0;
                const double nominal = w.dot(c) + layer.bias(static_cast<Eigen::Index>(j));
                const double spread = lp_norm(scaled, q);
                const double scale = 1.0 + std::abs(nominal) + spread;
                worst = std::max({worst, std::abs(b.q_lower(j) - (nominal - spread)) / scale,
                                  std::abs(b.q_upper(j) - (nominal + spread)) / scale});
            }
        }
    }
    return {worst <= 1e-12, fmt("worst relative error %.2e over 100 affine nets x 3 norms", worst)};
}

double ce_loss(const NetworkSpec& net, const Observation& s, const Vector& y) {
    const Vector p = softmax(forward(net, s));
    double l = 0.0;
    for (Eigen::Index j = 0; j < y.size(); ++j)
        if (y(j) > 0) l -= y(j) * std::log(p(j));
    return l;
}

Outcome gradient_and_fgst() {
    std::size_t checked = 0, grad_bad = 0, perimeter_bad = 0;
    for (std::uint64_t seed = 0; checked < 50 && seed < 5000; ++seed) {
        const auto net = net_for(20000 + seed, {.min_actions = 2});
        Rng rng(seed);
        const Observation s = oracle::random_center(rng, net.input_dim);
        double kink = kInf;
        const auto pre = preactivations(net, s);
        for (std::size_t k = 0; k + 1 < pre.size(); ++k) kink = std::min(kink, pre[k].cwiseAbs().minCoeff());
        if (kink < 1e-3) continue;
        ++checked;
        Vector y = Vector::Zero(net.output_dim());
        y(static_cast<Eigen::Index>(argmin_first(forward(net, s)))) = 1.0;
        const Vector g = input_gradient(net, s, y);
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            Observation sp = s, sm = s;
            sp(i) += h;
            sm(i) -= h;
            const double fd = (ce_loss(net, sp, y) - ce_loss(net, sm, y)) / (2 * h);
            grad_bad += std::abs(fd - g(i)) > 1e-4 * std::max(1.0, std::abs(fd));
        }
        const Vector eps = Vector::Constant(net.input_dim, 0.1);
        const Observation adv = fgst_perturb(net, s, eps);
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (g(i) != 0.0) perimeter_bad += std::abs(std::abs(adv(i) - s(i)) - 0.1) > 1e-12 * (1 + std::abs(s(i)));
    }
    return {checked == 50 && grad_bad == 0 && perimeter_bad == 0,
            fmt("%.0f nets: %.0f gradient mismatches, %.0f FGST coordinates off the perimeter",
                static_cast<double>(checked), static_cast<double>(grad_bad), static_cast<double>(perimeter_bad))};
}

Outcome certificate_claim() {
    const auto net = load_network(fixture("cartpole_dqn.json"));
    EpisodeSettings s;
    s.env = EnvKind::cartpole;
    s.eps_rob = Vector::Constant(4, 0.075);
    s.perturbation = {PerturbationKind::fgst, Vector::Constant(4, 0.075), Vector::Zero(4)};
    std::size_t steps = 0, bad = 0;
    double worst = -kInf;
    for (std::uint64_t ep = 0; ep < 200; ++ep) {
        for (const auto& st : run_episode(net, s, 0, ep).steps) {
            ++steps;
            const Vector q = forward(net, st.true_obs);
            const double gap = q.maxCoeff() - q(static_cast<Eigen::Index>(st.action));
            worst = std::max(worst, gap - st.certificate);
            bad += !(gap >= 0.0 && gap <= st.certificate + 1e-9);
        }
    }
    return {bad == 0, fmt("%.0f steps over 200 episodes, %.0f violations, max(gap - certificate) = %.3g",
                          static_cast<double>(steps), static_cast<double>(bad), worst)};
}

double cell_reward(const SweepResult& sw, double eps_rob, double mag) {
    for (const auto& c : sw.cells)
        if (c.cell.eps_rob == eps_rob && c.cell.magnitude == mag) return c.mean_reward;
    throw std::runtime_error("missing cell");
}

Outcome cartpole_trend() {
    const auto net = load_network(fixture("cartpole_dqn.json"));
    ExperimentConfig cfg;
    cfg.episodes = 1;
    cfg.seeds.clear();
    for (std::uint64_t s = 0; s < 200; ++s) cfg.seeds.push_back(s);
    cfg.threads = 0;

    cfg.eps_rob = {0.0};
    const double clean = run_sweep(cfg, net).cells.front().mean_reward;

    cfg.attack = PerturbationKind::fgst;
    cfg.eps_adv = {0.075};
    cfg.eps_rob = {0.0, 0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2, 5.0};
    const auto sw = run_sweep(cfg, net);
    const double r0 = cell_reward(sw, 0.0, 0.075);
    double best = r0, best_eps = 0.0;
    for (double e : cfg.eps_rob) {
        if (e == 5.0) continue;
        const double r = cell_reward(sw, e, 0.075);
        if (r > best) best = r, best_eps = e;
    }
    const double r5 = cell_reward(sw, 5.0, 0.075);
    const bool i = r0 <= 0.8 * clean;
    const bool ii = best_eps > 0.0 && best >= 1.1 * r0;
    const bool iii = r5 <= 0.8 * best;
    return {i && ii && iii, fmt("clean %.1f, attacked eps_rob=0 %.1f, ", clean, r0) +
                                fmt("best %.1f at eps_rob=%.3g, eps_rob=5 %.1f", best, best_eps, r5) +
                                fmt(" [i %.0f ii %.0f iii %.0f]", i, ii, iii)};
}

Outcome collision_trend() {
    const auto net = load_network(fixture("collision_avoidance_dqn.json"));
    ExperimentConfig cfg;
    cfg.env = EnvKind::collision_avoidance;
    cfg.episodes = 100;
    cfg.seeds = {0, 1, 2, 3, 4};
    cfg.attack = PerturbationKind::fgst;
    cfg.eps_adv = {0.1, 0.2};
    cfg.eps_rob = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25};
    cfg.lambdas = {0.0};
    const auto sw = run_sweep(cfg, net);
    auto collisions = [](const SweepResult& s, double e, double mag) {
        for (const auto& c : s.cells)
            if (c.cell.eps_rob == e && c.cell.magnitude == mag) return c.collision_rate;
        throw std::runtime_error("missing cell");
    };
    std::ostringstream detail;
    bool ok = true;
    for (double mag : cfg.eps_adv) {
        const double c0 = collisions(sw, 0.0, mag);
        double best = kInf, best_eps = 0;
        for (double e : cfg.eps_rob)
            if (e > 0 && collisions(sw, e, mag) < best) best = collisions(sw, e, mag), best_eps = e;
        ok = ok && best < c0;
        detail << "eps_adv " << mag << ": " << c0 << " -> " << best << " at eps_rob " << best_eps << "; ";
    }

    ExperimentConfig adv = cfg;
    adv.eps_rob = {0.0};
    adv.lambdas = {-1.0};
    const auto swa = run_sweep(adv, net);
    for (double mag : cfg.eps_adv) {
        const double c_adv = collisions(swa, 0.0, mag), c_non = collisions(sw, 0.0, mag);
        ok = ok && c_adv > c_non;
        detail << "lambda -1 vs 0 @" << mag << ": " << c_adv << " vs " << c_non << "; ";
    }
    return {ok, detail.str()};
}

Outcome determinism() {
    namespace fs = std::filesystem;
    const fs::path work = fs::temp_directory_path() / "certirl_acceptance_determinism";
    fs::remove_all(work);
    fs::create_directories(work);
    {
        std::ofstream cfg(work / "run.ini");
        cfg << "env = cartpole\nweights = " << fixture("cartpole_dqn.json")
            << "\nrule = carrl\neps_rob = 0, 0.05, 0.1\np_rob = inf\nattack = noise\nsigma = 0.05, 0.1\n"
               "episodes = 5\nseeds = 0, 1, 2\nplots = false\n";
    }
    std::string csv[2];
    for (int k = 0; k < 2; ++k) {
        const fs::path out = work / ("out" + std::to_string(k));
        const std::string cmd = std::string("\"") + CERTIRL_CLI + "\" run --config \"" + (work / "run.ini").string() +
                                "\" --out \"" + out.string() + "\" --threads " + (k == 0 ? "1" : "4") +
                                " > /dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) return {false, "certirl run exited nonzero"};
        std::ifstream in(out / "sweep.csv", std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        csv[k] = ss.str();
    }
    fs::remove_all(work);
    const bool same = !csv[0].empty() && csv[0] == csv[1];
    return {same, fmt("two runs (1 and 4 threads), %.0f bytes, ", static_cast<double>(csv[0].size())) +
                      (same ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
    run("1", "bound soundness", 120, soundness);
    run("2", "zero-radius exactness", 0, zero_eps);
    run("3", "decided-ReLU tightness", 0, decided_tightness);
    run("4", "monotonicity in radius", 0, monotonicity);
    run("5", "affine dual-norm closed form", 0, linear_dual_norm);
    run("6", "input gradient and FGST", 0, gradient_and_fgst);
    run("7", "certificate bounds true gap", 60, certificate_claim);
    run("8", "cartpole eps_rob trend", 300, cartpole_trend);
    run("9", "collision-avoidance trend", 0, collision_trend);
    run("10", "run determinism", 0, determinism);
    std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
