#pragma once

// sweep.csv and SVG figures.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "certirl/harness/experiment.hpp"

namespace certirl::harness {

inline constexpr const char* kSweepHeader =
    "env,rule,eps_rob,p_rob,kind,eps_adv,sigma,lambda,seed,mean_reward,collision_rate,goal_rate,timeout_rate,"
    "mean_certificate";

/// Shortest round-trip decimal; "inf" for infinity.
inline std::string num(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), r.ptr);
}

inline std::string sweep_csv(const SweepResult& sweep) {
    std::ostringstream os;
    os << kSweepHeader << '\n';
    for (const auto& r : sweep.rows) {
        // cartpole failures (pole down / off track) are reported in collision_rate
        const double collision = r.collision_rate + r.failure_rate;
        os << envs::to_string(sweep.env) << ',' << to_string(sweep.rule) << ',' << num(r.cell.eps_rob) << ','
           << num(sweep.p_rob) << ',' << to_string(r.cell.kind) << ',' << num(r.cell.eps_adv()) << ','
           << num(r.cell.sigma()) << ',' << num(r.cell.lambda) << ',' << r.seed << ',' << num(r.mean_reward) << ','
           << num(collision) << ',' << num(r.goal_rate) << ',' << num(r.timeout_rate) << ','
           << num(r.mean_certificate) << '\n';
    }
    return os.str();
}

namespace svg {

struct Series {
    std::string label;
    std::vector<double> x, y, lo, hi;  // lo/hi empty -> no band
};

inline const char* color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return palette[i % 10];
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

/// Line (or scatter) chart with optional shaded bands, linear axes.
inline std::string chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                         const std::vector<Series>& series, bool scatter = false) {
    const double W = 640, H = 420, L = 70, R = 170, T = 40, B = 55;
    double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min({y0, s.y[i], s.lo.empty() ? s.y[i] : s.lo[i]});
            y1 = std::max({y1, s.y[i], s.hi.empty() ? s.y[i] : s.hi[i]});
        }
    }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << (L + (W - L - R) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(title) << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        char bx[32], by[32];
        std::snprintf(bx, sizeof bx, "%.3g", xv);
        std::snprintf(by, sizeof by, "%.3g", yv);
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << bx
           << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << by << "</text>\n";
    }
    os << "<text x=\"" << (L + (W - L - R) / 2) << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
       << escape(xlabel) << "</text>\n";
    os << "<text transform=\"translate(18," << (T + (H - T - B) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(ylabel) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        if (!s.lo.empty() && s.x.size() > 1) {
            os << "<polygon fill=\"" << color(k) << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.hi[i]) << ' ';
            for (std::size_t i = s.x.size(); i-- > 0;) os << px(s.x[i]) << ',' << py(s.lo[i]) << ' ';
            os << "\"/>\n";
        }
        if (!scatter && s.x.size() > 1) {
            os << "<polyline fill=\"none\" stroke=\"" << color(k) << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            os << "\"/>\n";
        }
        for (std::size_t i = 0; i < s.x.size(); ++i)
            os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << color(k)
               << "\"/>\n";
        const double ly = T + 10 + 18.0 * static_cast<double>(k);
        os << "<rect x=\"" << W - R + 12 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"10\" fill=\""
           << color(k) << "\"/>\n";
        os << "<text x=\"" << W - R + 30 << "\" y=\"" << ly + 1 << "\">" << escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace svg

inline std::string magnitude_label(PerturbationKind kind, double magnitude, double lambda, bool show_lambda) {
    std::string s;
    switch (kind) {
        case PerturbationKind::fgst: s = "eps_adv=" + num(magnitude); break;
        case PerturbationKind::uniform_noise: s = "sigma=" + num(magnitude); break;
        default: s = "no attack"; break;
    }
    if (show_lambda) s += " lambda=" + num(lambda);
    return s;
}

/// One series per (perturbation magnitude, lambda) over eps_rob.
inline std::vector<svg::Series> eps_rob_family(const SweepResult& sweep, bool collisions) {
    std::map<std::pair<double, double>, svg::Series> groups;
    std::vector<std::pair<double, double>> order;
    std::set<double> lambdas;
    for (const auto& c : sweep.cells) lambdas.insert(c.cell.lambda);
    for (const auto& c : sweep.cells) {
        const auto key = std::make_pair(c.cell.lambda, c.cell.magnitude);
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh) {
            order.push_back(key);
            it->second.label = magnitude_label(c.cell.kind, c.cell.magnitude, c.cell.lambda, lambdas.size() > 1);
        }
        const double m = collisions ? c.collision_rate : c.mean_reward;
        const double s = collisions ? c.std_collision_rate : c.std_reward;
        it->second.x.push_back(c.cell.eps_rob);
        it->second.y.push_back(m);
        it->second.lo.push_back(m - s);
        it->second.hi.push_back(m + s);
    }
    std::vector<svg::Series> out;
    for (const auto& k : order) {
        auto s = groups[k];
        std::vector<std::size_t> idx(s.x.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.x[a] < s.x[b]; });
        svg::Series sorted{s.label, {}, {}, {}, {}};
        for (auto i : idx) {
            sorted.x.push_back(s.x[i]);
            sorted.y.push_back(s.y[i]);
            sorted.lo.push_back(s.lo[i]);
            sorted.hi.push_back(s.hi[i]);
        }
        out.push_back(std::move(sorted));
    }
    return out;
}

/// Writes sweep.csv and, when plots is set, reward_vs_eps_rob.svg,
/// best_eps_rob.svg and (collision avoidance) collision_vs_eps_rob.svg.
/// Returns the paths written.
inline std::vector<std::string> emit_outputs(const SweepResult& sweep, const std::string& dir, bool plots) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> written;
    auto write = [&](const std::string& name, const std::string& body) {
        const auto path = (fs::path(dir) / name).string();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ValidationError("cannot write " + path);
        f << body;
        written.push_back(path);
    };
    write("sweep.csv", sweep_csv(sweep));
    if (!plots) return written;

    const std::string env = envs::to_string(sweep.env);
    const std::string rule = to_string(sweep.rule);
    write("reward_vs_eps_rob.svg",
          svg::chart(env + " (" + rule + "): reward vs eps_rob", "eps_rob", "mean reward", eps_rob_family(sweep, false)));
    if (sweep.env == EnvKind::collision_avoidance)
        write("collision_vs_eps_rob.svg", svg::chart(env + " (" + rule + "): collisions vs eps_rob", "eps_rob",
                                                     "collision rate", eps_rob_family(sweep, true)));

    std::map<double, svg::Series> by_lambda;
    for (const auto& b : best_eps_rob(sweep)) {
        auto& s = by_lambda[b.lambda];
        s.label = "lambda=" + num(b.lambda);
        s.x.push_back(b.magnitude);
        s.y.push_back(b.eps_rob);
    }
    std::vector<svg::Series> best;
    for (auto& [lam, s] : by_lambda) best.push_back(std::move(s));
    const PerturbationKind kind = sweep.cells.empty() ? PerturbationKind::none : sweep.cells.front().cell.kind;
    const std::string xl = kind == PerturbationKind::uniform_noise ? "sigma" : "eps_adv";
    write("best_eps_rob.svg", svg::chart(env + ": reward-maximizing eps_rob", xl, "best eps_rob", best, true));
    return written;
}

}  // namespace certirl::harness
