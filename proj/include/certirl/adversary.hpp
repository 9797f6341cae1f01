#pragma once

// Observation perturbations: the fast gradient sign attack (FGST) and
// uniform sensor noise.

#include <string>

#include "certirl/decide.hpp"
#include "certirl/netio.hpp"
#include "certirl/rng.hpp"

namespace certirl {

enum class PerturbationKind { none, fgst, uniform_noise };

inline const char* to_string(PerturbationKind k) {
    switch (k) {
        case PerturbationKind::none: return "none";
        case PerturbationKind::fgst: return "fgst";
        case PerturbationKind::uniform_noise: return "noise";
    }
    return "?";
}

inline PerturbationKind parse_perturbation_kind(const std::string& s) {
    if (s == "none") return PerturbationKind::none;
    if (s == "fgst") return PerturbationKind::fgst;
    if (s == "noise" || s == "uniform_noise") return PerturbationKind::uniform_noise;
    throw ValidationError("unknown perturbation kind '" + s + "' (expected none|fgst|noise)");
}

struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::none;
    Vector eps_adv;  // fgst radius per dimension (l_inf)
    Vector sigma;    // uniform noise half-width per dimension
};

namespace detail {

inline void check_same_dim(const Observation& s0, const Vector& v, const char* what) {
    if (v.size() != s0.size())
        throw ValidationError(std::string(what) + " has length " + std::to_string(v.size()) +
                              " but the observation has length " + std::to_string(s0.size()));
}

inline void check_nonnegative(const Vector& v, const char* what) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!(v(i) >= 0.0)) throw ContractViolation(std::string(what) + " must be >= 0");
}

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

/// s_adv = s0 - eps_adv .* sign(grad_s CE(onehot(argmin_j Q(s0)), softmax(Q(s0)))).
/// Pushes the observation toward making the nominally worst action look
/// best; every coordinate with a nonzero gradient lands on the l_inf
/// perimeter, coordinates with a zero gradient stay put.
inline Observation fgst_perturb(const NetworkSpec& net, const Observation& s0, const Vector& eps_adv) {
    check_input(net, s0);
    detail::check_same_dim(s0, eps_adv, "eps_adv");
    detail::check_nonnegative(eps_adv, "eps_adv");

    const Vector q = forward(net, s0);
    Vector target = Vector::Zero(q.size());
    target(static_cast<Eigen::Index>(argmin_first(q))) = 1.0;
    const Vector grad = input_gradient(net, s0, target);

    Observation s = s0;
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) -= eps_adv(i) * detail::sign(grad(i));
    return s;
}

/// Each coordinate i.i.d. uniform in [s0 - sigma, s0 + sigma].
inline Observation uniform_noise_perturb(const Observation& s0, const Vector& sigma, Rng& rng) {
    detail::check_same_dim(s0, sigma, "sigma");
    detail::check_nonnegative(sigma, "sigma");
    Observation s = s0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (sigma(i) > 0.0) s(i) += sigma(i) * (2.0 * rng.uniform() - 1.0);
    return s;
}

inline Observation apply(const PerturbationSpec& spec, const NetworkSpec& net, const Observation& s0,
                         Rng& rng) {
    switch (spec.kind) {
        case PerturbationKind::none: return s0;
        case PerturbationKind::fgst: return fgst_perturb(net, s0, spec.eps_adv);
        case PerturbationKind::uniform_noise: return uniform_noise_perturb(s0, spec.sigma, rng);
    }
    return s0;
}

}  // namespace certirl
