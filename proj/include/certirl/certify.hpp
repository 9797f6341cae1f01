#pragma once

// Certified lower/upper bounds on every network output over a vector-eps
// l_p ball, via the Fast-Lin linear relaxation of ReLU units.

#include <cmath>
#include <future>
#include <limits>
#include <string>
#include <vector>

#include "certirl/errors.hpp"
#include "certirl/netio.hpp"

namespace certirl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Dual exponent q with 1/p + 1/q = 1.
inline double dual_exponent(double p) {
    if (!(p >= 1.0)) throw ContractViolation("norm order p must be >= 1");
    if (std::isinf(p)) return 1.0;
    if (p == 1.0) return kInf;
    return p / (p - 1.0);
}

inline double lp_norm(const Vector& x, double p) {
    if (x.size() == 0) return 0.0;
    if (std::isinf(p)) return x.cwiseAbs().maxCoeff();
    if (p == 1.0) return x.cwiseAbs().sum();
    if (p == 2.0) return x.norm();
    return std::pow(x.cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

/// B_p(center, eps): states whose eps-rescaled offset from center has l_p
/// norm <= 1. Dimensions with eps_i = 0 are pinned to the center.
struct EpsBall {
    Observation center;
    Vector eps;
    double p = kInf;

    EpsBall() = default;
    EpsBall(Observation c, Vector e, double order = kInf)
        : center(std::move(c)), eps(std::move(e)), p(order) {
        validate();
    }

    void validate() const {
        if (center.size() != eps.size())
            throw ValidationError("eps has length " + std::to_string(eps.size()) +
                                  " but the center has length " + std::to_string(center.size()));
        if (!center.allFinite()) throw ValidationError("ball center must be finite");
        for (Eigen::Index i = 0; i < eps.size(); ++i)
            if (!(eps(i) >= 0.0) || !std::isfinite(eps(i)))
                throw ValidationError("eps[" + std::to_string(i) + "] must be finite and >= 0");
        if (!(p >= 1.0)) throw ValidationError("norm order p must be >= 1");
    }

    Vector box_lower() const { return center - eps; }
    Vector box_upper() const { return center + eps; }

    /// Number of dimensions with eps_i > 0.
    std::size_t free_dims() const { return static_cast<std::size_t>((eps.array() > 0.0).count()); }

    /// Membership test; `tol` absorbs rounding in the rescaled norm.
    bool contains(const Observation& s, double tol = 1e-12) const {
        if (s.size() != center.size()) return false;
        Vector scaled = Vector::Zero(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const double d = s(i) - center(i);
            if (eps(i) == 0.0) {
                if (d != 0.0) return false;
            } else {
                scaled(i) = d / eps(i);
            }
        }
        return lp_norm(scaled, p) <= 1.0 + tol;
    }
};

enum class ReluStatus { active, inactive, undecided };

inline const char* to_string(ReluStatus s) {
    switch (s) {
        case ReluStatus::active: return "active";
        case ReluStatus::inactive: return "inactive";
        case ReluStatus::undecided: return "undecided";
    }
    return "?";
}

/// Linear envelope slope*z + lower_intercept <= relu(z) <= slope*z + upper_intercept on [l, u].
struct ReluRelaxation {
    ReluStatus status;
    double slope;            // D entry
    double lower_intercept;  // always 0 (same-slope relaxation)
    double upper_intercept;  // -D*l when undecided, else 0
};

/// Classification is an exact sign test: l >= 0 is active, u <= 0 inactive.
inline ReluRelaxation relu_relaxation(double l, double u) {
    if (!(l <= u)) throw ContractViolation("relu_relaxation requires l <= u");
    if (l >= 0.0) return {ReluStatus::active, 1.0, 0.0, 0.0};
    if (u <= 0.0) return {ReluStatus::inactive, 0.0, 0.0, 0.0};
    const double slope = u / (u - l);
    return {ReluStatus::undecided, slope, 0.0, -slope * l};
}

/// Pre-activation intervals [l^(k), u^(k)] for the hidden layers k = 1..m-1
/// (index 0 here is the first hidden layer).
struct LayerBounds {
    std::vector<Vector> lower;
    std::vector<Vector> upper;
    std::vector<std::vector<ReluStatus>> status;

    std::size_t undecided_count() const {
        std::size_t n = 0;
        for (const auto& layer : status)
            for (auto s : layer) n += s == ReluStatus::undecided;
        return n;
    }
    bool all_decided() const { return undecided_count() == 0; }
};

struct BoundsResult {
    Vector q_lower;
    Vector q_upper;
    LayerBounds layer_bounds;
    EpsBall ball;
};

enum class PreboundMode {
    fast_lin,  // closed-form bound per hidden neuron, intersected with interval bounds
    interval,  // plain interval arithmetic (debug reference)
};

enum class Execution { sequential, parallel };

namespace detail {

inline void check_ball(const NetworkSpec& net, const EpsBall& ball) {
    ball.validate();
    if (static_cast<std::size_t>(ball.center.size()) != net.input_dim)
        throw ValidationError("ball has dimension " + std::to_string(ball.center.size()) +
                              " but the network expects " + std::to_string(net.input_dim));
}

/// Lower/upper bounds for selected rows of layer `target`'s pre-activation,
/// given intervals for every hidden layer before it. Each row is a
/// temporary output; the relaxed network is minimized/maximized over the
/// ball in closed form with the dual norm.
struct RowBounds {
    Vector lower;
    Vector upper;
};

inline RowBounds backsubstitute(const NetworkSpec& net, const LayerBounds& pre, std::size_t target,
                                const Matrix& rows_w, const Vector& rows_b, const EpsBall& ball,
                                double p) {
    const Eigen::Index r = rows_w.rows();
    // coeff holds A^(k) W^(k): the linear map from layer k-1's ReLU outputs.
    Matrix coeff = rows_w;
    Vector gamma_lower = rows_b;
    Vector gamma_upper = rows_b;

    for (std::size_t k = target; k-- > 0;) {
        const auto& status = pre.status[k];
        const Vector& l = pre.lower[k];
        const Vector& u = pre.upper[k];
        const Eigen::Index width = l.size();

        Vector slope(width);
        for (Eigen::Index i = 0; i < width; ++i) slope(i) = relu_relaxation(l(i), u(i)).slope;

        // A^(k) = A^(k+1) W^(k+1) D^(k) first, then H^(k) from the signs of A^(k)
        // (reference Fast-Lin ordering; checked only by the soundness oracles).
        Matrix a = coeff * slope.asDiagonal();
        gamma_lower += a * net.layers[k].bias;
        gamma_upper += a * net.layers[k].bias;
        for (Eigen::Index i = 0; i < width; ++i) {
            if (status[i] != ReluStatus::undecided) continue;
            for (Eigen::Index j = 0; j < r; ++j) {
                const double aji = a(j, i);
                if (aji < 0.0) gamma_lower(j) -= aji * l(i);
                else if (aji > 0.0) gamma_upper(j) -= aji * l(i);
            }
        }
        coeff = a * net.layers[k].weights;
    }

    // coeff is now A^(0): linear in the network input.
    const double q = dual_exponent(p);
    Vector base = coeff * ball.center;
    RowBounds out{Vector(r), Vector(r)};
    for (Eigen::Index j = 0; j < r; ++j) {
        const Vector scaled = coeff.row(j).transpose().cwiseProduct(ball.eps);
        const double spread = lp_norm(scaled, q);
        out.lower(j) = base(j) - spread + gamma_lower(j);
        out.upper(j) = base(j) + spread + gamma_upper(j);
    }
    return out;
}

inline void set_status(LayerBounds& lb, std::size_t k) {
    const auto& l = lb.lower[k];
    const auto& u = lb.upper[k];
    lb.status[k].resize(l.size());
    for (Eigen::Index i = 0; i < l.size(); ++i) lb.status[k][i] = relu_relaxation(l(i), u(i)).status;
}

}  // namespace detail

/// Sound pre-activation intervals for every hidden neuron over the ball's
/// enclosing box (the l_p shape only enters the final output step).
inline LayerBounds layer_prebounds(const NetworkSpec& net, const EpsBall& ball,
                                   PreboundMode mode = PreboundMode::fast_lin) {
    detail::check_ball(net, ball);
    const std::size_t hidden = net.num_layers() - 1;
    LayerBounds lb;
    lb.lower.resize(hidden);
    lb.upper.resize(hidden);
    lb.status.resize(hidden);

    // Interval bounds are carried alongside: cheap, and intersecting with them
    // keeps the Fast-Lin intervals inside the interval-arithmetic ones.
    Vector h_lo, h_hi;  // post-ReLU box of the previous layer
    for (std::size_t k = 0; k < hidden; ++k) {
        const auto& L = net.layers[k];
        Vector lo, hi;
        if (k == 0) {
            // Exact for an affine layer: W c + b -/+ |W| eps.
            const Vector z = L.weights * ball.center + L.bias;
            const Vector spread = L.weights.cwiseAbs() * ball.eps;
            lo = z - spread;
            hi = z + spread;
        } else {
            const Matrix pos = L.weights.cwiseMax(0.0);
            const Matrix neg = L.weights.cwiseMin(0.0);
            lo = pos * h_lo + neg * h_hi + L.bias;
            hi = pos * h_hi + neg * h_lo + L.bias;
        }

        if (mode == PreboundMode::fast_lin && k > 0) {
            const auto fl = detail::backsubstitute(net, lb, k, L.weights, L.bias, ball, kInf);
            for (Eigen::Index i = 0; i < lo.size(); ++i) {
                double a = std::max(lo(i), fl.lower(i));
                double b = std::min(hi(i), fl.upper(i));
                // Both are sound; crossing can only come from rounding.
                if (a > b) std::swap(a, b);
                lo(i) = a;
                hi(i) = b;
            }
        }
        lb.lower[k] = lo;
        lb.upper[k] = hi;
        detail::set_status(lb, k);
        h_lo = lo.cwiseMax(0.0);
        h_hi = hi.cwiseMax(0.0);
    }
    return lb;
}

inline void check_action(const NetworkSpec& net, std::size_t j) {
    if (j >= net.output_dim())
        throw ContractViolation("action index " + std::to_string(j) + " out of range [0, " +
                                std::to_string(net.output_dim()) + ")");
}

/// Q_l for one action given precomputed layer bounds.
inline std::pair<double, double> output_bounds(const NetworkSpec& net, const EpsBall& ball,
                                               const LayerBounds& pre, std::size_t j) {
    check_action(net, j);
    const auto& out = net.layers.back();
    const Matrix row = out.weights.row(static_cast<Eigen::Index>(j));
    const Vector bias = out.bias.segment(static_cast<Eigen::Index>(j), 1);
    const auto rb = detail::backsubstitute(net, pre, net.num_layers() - 1, row, bias, ball, ball.p);
    return {rb.lower(0), rb.upper(0)};
}

/// Guaranteed lower bound on Q(s, a_j) over every s in the ball.
inline double lower_bound_output(const NetworkSpec& net, const EpsBall& ball, std::size_t j) {
    return output_bounds(net, ball, layer_prebounds(net, ball), j).first;
}

/// Guaranteed upper bound on Q(s, a_j) over every s in the ball.
inline double upper_bound_output(const NetworkSpec& net, const EpsBall& ball, std::size_t j) {
    return output_bounds(net, ball, layer_prebounds(net, ball), j).second;
}

/// Bounds for every action. The per-action work shares one set of layer
/// bounds and gives identical results under either execution mode.
inline BoundsResult bounds_all_actions(const NetworkSpec& net, const EpsBall& ball,
                                       Execution exec = Execution::sequential,
                                       PreboundMode mode = PreboundMode::fast_lin) {
    BoundsResult res;
    res.layer_bounds = layer_prebounds(net, ball, mode);
    res.ball = ball;
    const std::size_t d = net.output_dim();
    res.q_lower.resize(d);
    res.q_upper.resize(d);

    if (exec == Execution::parallel && d > 1) {
        std::vector<std::future<std::pair<double, double>>> jobs;
        jobs.reserve(d);
        for (std::size_t j = 0; j < d; ++j)
            jobs.push_back(std::async(std::launch::async, [&, j] {
                return output_bounds(net, ball, res.layer_bounds, j);
            }));
        for (std::size_t j = 0; j < d; ++j) std::tie(res.q_lower(j), res.q_upper(j)) = jobs[j].get();
    } else {
        for (std::size_t j = 0; j < d; ++j)
            std::tie(res.q_lower(j), res.q_upper(j)) = output_bounds(net, ball, res.layer_bounds, j);
    }
    if (!res.q_lower.allFinite() || !res.q_upper.allFinite())
        throw NumericError("certified bounds are not finite");
    return res;
}

}  // namespace certirl
