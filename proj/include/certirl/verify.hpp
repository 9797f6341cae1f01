#pragma once

// Seeded random networks and the bound soundness sweep: certified bounds
// against grid and Monte-Carlo extrema of the forward pass.

#include <sstream>
#include <string>
#include <vector>

#include "certirl/certify.hpp"
#include "certirl/netio.hpp"
#include "certirl/oracle.hpp"
#include "certirl/rng.hpp"

namespace certirl::oracle {

struct RandomNetOptions {
    std::size_t min_hidden = 1, max_hidden = 3;
    std::size_t min_width = 1, max_width = 16;
    std::size_t min_input = 1, max_input = 4;
    std::size_t min_actions = 1, max_actions = 4;
    double weight_scale = 2.0;  // weights ~ U(-s, s) / sqrt(fan_in)
    double bias_scale = 0.5;
};

inline NetworkSpec random_network(Rng& rng, const RandomNetOptions& o = {}) {
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); };
    NetworkSpec net;
    net.input_dim = pick(o.min_input, o.max_input);
    const std::size_t hidden = pick(o.min_hidden, o.max_hidden);
    const std::size_t actions = pick(o.min_actions, o.max_actions);
    std::size_t fan_in = net.input_dim;
    for (std::size_t k = 0; k <= hidden; ++k) {
        const std::size_t rows = k == hidden ? actions : pick(o.min_width, o.max_width);
        DenseLayer layer{Matrix(rows, fan_in), Vector(rows)};
        const double s = o.weight_scale / std::sqrt(static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = rng.uniform(-s, s);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = rng.uniform(-o.bias_scale, o.bias_scale);
        net.layers.push_back(std::move(layer));
        fan_in = rows;
    }
    for (std::size_t j = 0; j < actions; ++j) net.action_labels.push_back("a" + std::to_string(j));
    validate(net);
    return net;
}

inline Observation random_center(Rng& rng, std::size_t dim, double scale = 1.0) {
    Observation c(dim);
    for (std::size_t i = 0; i < dim; ++i) c(static_cast<Eigen::Index>(i)) = rng.uniform(-scale, scale);
    return c;
}

struct SoundnessOptions {
    std::size_t trials = 200;
    std::uint64_t seed = 0;
    std::vector<double> eps_values{0.01, 0.1, 0.5};
    std::vector<double> p_values{1.0, 2.0, kInf};
    std::size_t grid_resolution = 41;
    std::size_t mc_samples = 10000;
    double tolerance = 1e-9;
    bool vector_eps = true;  // per-dimension eps_i = eps * U(0.5, 1.5)
};

struct SoundnessReport {
    std::size_t networks = 0;
    std::size_t balls = 0;
    std::size_t evaluations = 0;
    std::size_t violations = 0;
    double worst_excess = 0.0;  // max over checks of (Q - q_upper) or (q_lower - Q)
    std::string first_failure;

    bool passed() const { return violations == 0; }
};

/// For each seeded random network and each (eps, p): q_lower - tol <= Q(s)
/// <= q_upper + tol for every grid point and Monte-Carlo sample in the ball.
inline SoundnessReport verify_soundness(const SoundnessOptions& opt) {
    SoundnessReport rep;
    for (std::size_t trial = 0; trial < opt.trials; ++trial) {
        Rng rng = Rng::stream(opt.seed, trial);
        const NetworkSpec net = random_network(rng);
        const Observation center = random_center(rng, net.input_dim);
        ++rep.networks;
        for (std::size_t ei = 0; ei < opt.eps_values.size(); ++ei) {
            const double e = opt.eps_values[ei];
            Vector eps = Vector::Constant(static_cast<Eigen::Index>(net.input_dim), e);
            if (opt.vector_eps)
                for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = e * rng.uniform(0.5, 1.5);
            const auto grids = grid_extrema_multi(net, center, eps, opt.p_values, opt.grid_resolution);
            for (std::size_t k = 0; k < opt.p_values.size(); ++k) {
                const EpsBall ball(center, eps, opt.p_values[k]);
                const BoundsResult b = bounds_all_actions(net, ball);
                Rng mc_rng = Rng::stream(opt.seed ^ 0x5eedf00dULL, (trial * 16 + ei) * 16 + k);
                const auto mc = monte_carlo_extrema(net, ball, opt.mc_samples, mc_rng);
                ++rep.balls;
                rep.evaluations += grids[k].num_samples + mc.num_samples;
                for (const OracleReport* r : {&grids[k], &mc}) {
                    const double lo_excess = (b.q_lower - r->sampled_min).maxCoeff();
                    const double hi_excess = (r->sampled_max - b.q_upper).maxCoeff();
                    const double excess = std::max(lo_excess, hi_excess);
                    rep.worst_excess = std::max(rep.worst_excess, excess);
                    if (excess > opt.tolerance) {
                        ++rep.violations;
                        if (rep.first_failure.empty()) {
                            std::ostringstream os;
                            os << "trial " << trial << " eps " << e << " p " << opt.p_values[k] << " ("
                               << (r == &mc ? "monte carlo" : "grid") << "): bound exceeded by " << excess;
                            rep.first_failure = os.str();
                        }
                    }
                }
            }
        }
    }
    return rep;
}

}  // namespace certirl::oracle
