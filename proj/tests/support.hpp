#pragma once

#include <string>

#include "certirl/certirl.hpp"

namespace testing_support {

using namespace certirl;

inline std::string fixture(const std::string& name) { return std::string(CERTIRL_FIXTURES) + "/" + name; }

inline NetworkSpec make_net(std::size_t input_dim, std::vector<std::pair<Matrix, Vector>> layers) {
    NetworkSpec net;
    net.input_dim = input_dim;
    for (auto& [w, b] : layers) net.layers.push_back({std::move(w), std::move(b)});
    for (std::size_t j = 0; j < net.output_dim(); ++j) net.action_labels.push_back("a" + std::to_string(j));
    validate(net);
    return net;
}

inline Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = static_cast<Eigen::Index>(rows.begin()->size());
    Matrix m(r, c);
    Eigen::Index i = 0;
    for (const auto& row : rows) {
        Eigen::Index j = 0;
        for (double x : row) m(i, j++) = x;
        ++i;
    }
    return m;
}

inline NetworkSpec random_net(std::uint64_t seed, const oracle::RandomNetOptions& opt = {}) {
    Rng rng = Rng::stream(seed, 0);
    return oracle::random_network(rng, opt);
}

/// Scalar-eps, p = inf Fast-Lin written with plain loops and std::vector,
/// kept independent from the library's matrix formulation.
struct ScalarBounds {
    std::vector<double> lower, upper;
};

inline ScalarBounds scalar_fast_lin(const NetworkSpec& net, const Observation& c, double eps) {
    using V = std::vector<double>;
    using M = std::vector<V>;
    const std::size_t m = net.num_layers();
    auto W = [&](std::size_t k) {  // 0-based layer
        const auto& w = net.layers[k].weights;
        M out(w.rows(), V(w.cols()));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) out[i][j] = w(i, j);
        return out;
    };
    auto b = [&](std::size_t k) {
        const auto& v = net.layers[k].bias;
        return V(v.data(), v.data() + v.size());
    };
    std::vector<V> L, U;  // hidden pre-activation bounds

    // Bound of row vector `a` applied to layer `top` pre-activation, through the
    // first `top` layers.
    auto bound = [&](const V& a_top, std::size_t top, bool upper) {
        V A = a_top;                   // over units of layer `top` output
        double gamma = 0.0;
        {
            const V bt = b(top);
            for (std::size_t i = 0; i < A.size(); ++i) gamma += A[i] * bt[i];
        }
        for (std::size_t k = top; k-- > 0;) {
            const M w = W(k + 1);
            // A over pre-activation of layer k: (A W^{k+1}) D^k
            V pre(w[0].size(), 0.0);
            for (std::size_t i = 0; i < A.size(); ++i)
                for (std::size_t r = 0; r < pre.size(); ++r) pre[r] += A[i] * w[i][r];
            const V bk = b(k);
            V next(pre.size());
            for (std::size_t r = 0; r < pre.size(); ++r) {
                const double l = L[k][r], u = U[k][r];
                double d;
                if (l >= 0) d = 1.0;
                else if (u <= 0) d = 0.0;
                else d = u / (u - l);
                next[r] = pre[r] * d;
                double h = 0.0;
                if (l < 0 && u > 0 && (upper ? next[r] > 0 : next[r] < 0)) h = l;
                gamma += next[r] * (bk[r] - h);
            }
            A = next;
        }
        const M w0 = W(0);
        V a0(net.input_dim, 0.0);
        for (std::size_t i = 0; i < A.size(); ++i)
            for (std::size_t j = 0; j < a0.size(); ++j) a0[j] += A[i] * w0[i][j];
        double lin = 0.0, l1 = 0.0;
        for (std::size_t j = 0; j < a0.size(); ++j) {
            lin += a0[j] * c(static_cast<Eigen::Index>(j));
            l1 += std::abs(a0[j]);
        }
        return upper ? lin + eps * l1 + gamma : lin - eps * l1 + gamma;
    };

    for (std::size_t k = 0; k + 1 < m; ++k) {
        const std::size_t n = net.width(k);
        V lo(n), hi(n);
        for (std::size_t r = 0; r < n; ++r) {
            V e(n, 0.0);
            e[r] = 1.0;
            // first layer through the same closed form: A0 = W row, no hidden layers
            if (k == 0) {
                const M w0 = W(0);
                double lin = b(0)[r], l1 = 0.0;
                for (std::size_t j = 0; j < net.input_dim; ++j) {
                    lin += w0[r][j] * c(static_cast<Eigen::Index>(j));
                    l1 += std::abs(w0[r][j]);
                }
                lo[r] = lin - eps * l1;
                hi[r] = lin + eps * l1;
            } else {
                // intersect with interval arithmetic, as the library does
                const M w = W(k);
                double il = b(k)[r], ih = b(k)[r];
                for (std::size_t j = 0; j < w[r].size(); ++j) {
                    const double pl = std::max(L[k - 1][j], 0.0), ph = std::max(U[k - 1][j], 0.0);
                    il += w[r][j] >= 0 ? w[r][j] * pl : w[r][j] * ph;
                    ih += w[r][j] >= 0 ? w[r][j] * ph : w[r][j] * pl;
                }
                lo[r] = std::max(il, bound(e, k, false));
                hi[r] = std::min(ih, bound(e, k, true));
                if (lo[r] > hi[r]) std::swap(lo[r], hi[r]);
            }
        }
        L.push_back(lo);
        U.push_back(hi);
    }
    ScalarBounds out;
    for (std::size_t j = 0; j < net.output_dim(); ++j) {
        V e(net.output_dim(), 0.0);
        e[j] = 1.0;
        out.lower.push_back(bound(e, m - 1, false));
        out.upper.push_back(bound(e, m - 1, true));
    }
    return out;
}

}  // namespace testing_support
