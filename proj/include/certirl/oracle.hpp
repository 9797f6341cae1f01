#pragma once

// Brute-force reference computations used to check the certified bounds.
// Nothing here calls into certify.hpp; the ball type and forward pass are
// the only shared pieces.

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

#include "certirl/certify.hpp"
#include "certirl/netio.hpp"
#include "certirl/rng.hpp"

namespace certirl::oracle {

inline constexpr std::size_t kMaxGridDims = 4;

struct OracleReport {
    Vector sampled_min;
    Vector sampled_max;
    std::size_t resolution = 0;   // grid points per free dimension (0 for Monte Carlo)
    std::size_t num_samples = 0;  // forward evaluations that landed inside the ball
    std::optional<Vector> corner_min;
    std::optional<Vector> corner_max;
};

struct Interval {
    Vector lower;
    Vector upper;
};

namespace detail {

inline void check_ball(const NetworkSpec& net, const EpsBall& ball) {
    ball.validate();
    if (static_cast<std::size_t>(ball.center.size()) != net.input_dim)
        throw ValidationError("ball dimension does not match the network input");
}

inline std::vector<Eigen::Index> free_dims(const EpsBall& ball) {
    std::vector<Eigen::Index> dims;
    for (Eigen::Index i = 0; i < ball.eps.size(); ++i)
        if (ball.eps(i) > 0.0) dims.push_back(i);
    return dims;
}

/// Accumulates per-action extrema over column batches of points.
class Extrema {
public:
    Extrema(const NetworkSpec& net, std::size_t batch)
        : net_(net), batch_(batch), points_(net.input_dim, batch),
          min_(Vector::Constant(net.output_dim(), std::numeric_limits<double>::infinity())),
          max_(Vector::Constant(net.output_dim(), -std::numeric_limits<double>::infinity())) {}

    void add(const Vector& s) {
        points_.col(static_cast<Eigen::Index>(fill_++)) = s;
        ++count_;
        if (fill_ == batch_) flush();
    }

    void flush() {
        if (fill_ == 0) return;
        const Matrix q = forward_batch(net_, points_.leftCols(static_cast<Eigen::Index>(fill_)));
        min_ = min_.cwiseMin(q.rowwise().minCoeff());
        max_ = max_.cwiseMax(q.rowwise().maxCoeff());
        fill_ = 0;
    }

    std::size_t count() const { return count_; }
    const Vector& min() const { return min_; }
    const Vector& max() const { return max_; }

private:
    const NetworkSpec& net_;
    std::size_t batch_;
    Matrix points_;
    std::size_t fill_ = 0;
    std::size_t count_ = 0;
    Vector min_, max_;
};

}  // namespace detail

/// Forward Q over a regular grid on the box [center - eps, center + eps],
/// evaluated once and reduced separately for each norm order in `ps`
/// (points outside the l_p ball are dropped). sampled_min is an upper
/// bound on the true minimum over the ball (and sampled_max a lower bound
/// on the maximum). Grid coordinates are center + eps * (2i/(n-1) - 1), so
/// a grid with 2(n-1)+1 points per dimension contains every point of the
/// n-point grid.
inline std::vector<OracleReport> grid_extrema_multi(const NetworkSpec& net, const Observation& center,
                                                    const Vector& eps, const std::vector<double>& ps,
                                                    std::size_t resolution) {
    for (double p : ps) detail::check_ball(net, EpsBall(center, eps, p));
    EpsBall box(center, eps, kInf);
    const auto dims = detail::free_dims(box);
    if (dims.size() > kMaxGridDims)
        throw ValidationError("grid_extrema supports at most " + std::to_string(kMaxGridDims) +
                              " perturbable dimensions (got " + std::to_string(dims.size()) +
                              "); use monte_carlo_extrema instead");
    if (resolution < 2 && !dims.empty()) throw ValidationError("grid resolution must be >= 2");

    const std::size_t n = dims.size();
    const std::size_t res = dims.empty() ? 1 : resolution;
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= res;

    std::vector<double> ticks(res, 0.0);
    for (std::size_t i = 0; i < res && res > 1; ++i)
        ticks[i] = static_cast<double>(2 * static_cast<long>(i) - static_cast<long>(res - 1)) /
                   static_cast<double>(res - 1);

    const std::size_t m = net.output_dim();
    std::vector<OracleReport> reps(ps.size());
    for (auto& r : reps) {
        r.sampled_min = Vector::Constant(m, std::numeric_limits<double>::infinity());
        r.sampled_max = Vector::Constant(m, -std::numeric_limits<double>::infinity());
        r.resolution = resolution;
    }

    constexpr std::size_t kBatch = 4096;
    Matrix points(net.input_dim, kBatch);
    std::vector<Vector> norms(ps.size(), Vector(kBatch));  // rescaled l_p norm of each point
    Vector t(n);
    for (std::size_t begin = 0; begin < total; begin += kBatch) {
        const std::size_t count = std::min(kBatch, total - begin);
        for (std::size_t c = 0; c < count; ++c) {
            std::size_t rem = begin + c;
            auto col = points.col(static_cast<Eigen::Index>(c));
            col = center;
            for (std::size_t d = 0; d < n; ++d) {
                t(static_cast<Eigen::Index>(d)) = ticks[rem % res];
                rem /= res;
                col(dims[d]) = center(dims[d]) + eps(dims[d]) * t(static_cast<Eigen::Index>(d));
            }
            for (std::size_t k = 0; k < ps.size(); ++k) norms[k](static_cast<Eigen::Index>(c)) = lp_norm(t, ps[k]);
        }
        const Matrix q = forward_batch(net, points.leftCols(static_cast<Eigen::Index>(count)));
        for (std::size_t k = 0; k < ps.size(); ++k) {
            auto& r = reps[k];
            for (std::size_t c = 0; c < count; ++c) {
                if (!(norms[k](static_cast<Eigen::Index>(c)) <= 1.0 + 1e-12)) continue;
                r.sampled_min = r.sampled_min.cwiseMin(q.col(static_cast<Eigen::Index>(c)));
                r.sampled_max = r.sampled_max.cwiseMax(q.col(static_cast<Eigen::Index>(c)));
                ++r.num_samples;
            }
        }
    }
    return reps;
}

inline OracleReport grid_extrema(const NetworkSpec& net, const EpsBall& ball, std::size_t resolution) {
    detail::check_ball(net, ball);
    return grid_extrema_multi(net, ball.center, ball.eps, {ball.p}, resolution).front();
}

/// Forward Q at i.i.d. uniform points of the ball (rejection from the box
/// when p < inf).
inline OracleReport monte_carlo_extrema(const NetworkSpec& net, const EpsBall& ball, std::size_t samples,
                                        Rng& rng) {
    detail::check_ball(net, ball);
    if (samples == 0) throw ValidationError("monte_carlo_extrema needs at least one sample");
    const auto dims = detail::free_dims(ball);

    detail::Extrema acc(net, 4096);
    Vector s = ball.center;
    while (acc.count() < samples) {
        for (auto dim : dims) s(dim) = ball.center(dim) + ball.eps(dim) * (2.0 * rng.uniform() - 1.0);
        if (std::isinf(ball.p) || ball.contains(s)) acc.add(s);
    }
    acc.flush();

    OracleReport rep;
    rep.sampled_min = acc.min();
    rep.sampled_max = acc.max();
    rep.num_samples = acc.count();
    return rep;
}

/// Exact min of c.s + gamma over the box [lo, hi].
inline double corner_min_linear(const Vector& c, double gamma, const Vector& lo, const Vector& hi) {
    double v = gamma;
    for (Eigen::Index i = 0; i < c.size(); ++i) v += std::min(c(i) * lo(i), c(i) * hi(i));
    return v;
}

/// Exact max of c.s + gamma over the box [lo, hi].
inline double corner_max_linear(const Vector& c, double gamma, const Vector& lo, const Vector& hi) {
    return -corner_min_linear(-c, -gamma, lo, hi);
}

/// Forward Q at all 2^n corners of the enclosing box (n free dimensions).
/// Exact extrema over an l_inf ball whenever the network is affine there.
inline OracleReport corner_extrema(const NetworkSpec& net, const EpsBall& ball) {
    detail::check_ball(net, ball);
    const auto dims = detail::free_dims(ball);
    if (dims.size() > 20) throw ValidationError("corner_extrema: too many perturbable dimensions");
    detail::Extrema acc(net, 1024);
    Vector s = ball.center;
    const std::size_t total = std::size_t{1} << dims.size();
    for (std::size_t mask = 0; mask < total; ++mask) {
        for (std::size_t d = 0; d < dims.size(); ++d) {
            const auto dim = dims[d];
            s(dim) = (mask >> d) & 1U ? ball.center(dim) + ball.eps(dim) : ball.center(dim) - ball.eps(dim);
        }
        acc.add(s);
    }
    acc.flush();
    OracleReport rep;
    rep.sampled_min = acc.min();
    rep.sampled_max = acc.max();
    rep.num_samples = acc.count();
    rep.corner_min = acc.min();
    rep.corner_max = acc.max();
    return rep;
}

/// Plain interval arithmetic through every affine layer (pre-activations,
/// output layer included) and ReLU. Sound but loose.
inline std::vector<Interval> naive_interval_bounds(const NetworkSpec& net, const EpsBall& ball) {
    detail::check_ball(net, ball);
    std::vector<Interval> out;
    Vector lo = ball.center - ball.eps;
    Vector hi = ball.center + ball.eps;
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
        const auto& W = net.layers[k].weights;
        const auto& b = net.layers[k].bias;
        Interval z{Vector(W.rows()), Vector(W.rows())};
        for (Eigen::Index i = 0; i < W.rows(); ++i) {
            double zl = b(i), zu = b(i);
            for (Eigen::Index j = 0; j < W.cols(); ++j) {
                const double w = W(i, j);
                zl += w >= 0.0 ? w * lo(j) : w * hi(j);
                zu += w >= 0.0 ? w * hi(j) : w * lo(j);
            }
            z.lower(i) = zl;
            z.upper(i) = zu;
        }
        lo = z.lower.cwiseMax(0.0);
        hi = z.upper.cwiseMax(0.0);
        out.push_back(std::move(z));
    }
    return out;
}

}  // namespace certirl::oracle
