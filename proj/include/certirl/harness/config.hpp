#pragma once

// Flat INI experiment config. Keys mirror ExperimentConfig field names;
// list values are comma separated.
//
//   env = cartpole
//   weights = tests/fixtures/cartpole_dqn.json
//   rule = carrl
//   eps_rob = 0, 0.05, 0.1
//   p_rob = inf
//   attack = fgst
//   eps_adv = 0.075
//   episodes = 100
//   seeds = 0, 1, 2, 3, 4

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "certirl/errors.hpp"
#include "certirl/harness/experiment.hpp"

namespace certirl::harness {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& raw, const std::string& field) {
    const std::string s = trim(raw);
    if (s == "inf" || s == "Inf" || s == "INF") return kInf;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(field, "expected a number, got '" + s + "'");
    }
}

inline std::vector<double> parse_double_list(const std::string& raw, const std::string& field) {
    std::vector<double> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(parse_double(item, field));
    }
    if (out.empty()) throw ParseError(field, "empty list");
    return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& raw, const std::string& field) {
    std::vector<std::uint64_t> out;
    for (double v : parse_double_list(raw, field)) {
        if (!(v >= 0.0) || v != std::floor(v) || v > 9.007199254740992e15)
            throw ParseError(field, "seeds must be nonnegative integers");
        out.push_back(static_cast<std::uint64_t>(v));
    }
    return out;
}

inline double parse_p(const std::string& raw, const std::string& field) {
    const double p = parse_double(raw, field);
    if (!(p >= 1.0)) throw ValidationError(field + " must be >= 1 or inf");
    return p;
}

inline bool parse_bool(const std::string& raw, const std::string& field) {
    const std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ParseError(field, "expected true|false, got '" + s + "'");
}

/// Applies one key = value pair. Shared by the config file and the CLI
/// overrides so both accept exactly the same syntax.
inline void set_field(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto& sc = cfg.scenario;
    auto num = [&] { return parse_double(value, key); };
    if (key == "env") cfg.env = envs::parse_env(trim(value));
    else if (key == "weights") cfg.weights = trim(value);
    else if (key == "rule") cfg.rule = parse_rule(trim(value));
    else if (key == "lambda_sens") cfg.lambda_sens = num();
    else if (key == "eps_rob") cfg.eps_rob = parse_double_list(value, key);
    else if (key == "p_rob") cfg.p_rob = parse_p(value, key);
    else if (key == "attack" || key == "kind") cfg.attack = parse_perturbation_kind(trim(value));
    else if (key == "eps_adv") cfg.eps_adv = parse_double_list(value, key);
    else if (key == "sigma") cfg.sigma = parse_double_list(value, key);
    else if (key == "lambda") cfg.lambdas = parse_double_list(value, key);
    else if (key == "episodes") {
        const double e = num();
        if (!(e >= 1.0) || e != std::floor(e)) throw ValidationError("episodes must be an integer >= 1");
        cfg.episodes = static_cast<std::size_t>(e);
    } else if (key == "seeds") cfg.seeds = parse_seed_list(value, key);
    else if (key == "out") cfg.out = trim(value);
    else if (key == "plots") cfg.plots = parse_bool(value, key);
    else if (key == "threads") cfg.threads = static_cast<unsigned>(num());
    else if (key == "mask") {
        const auto m = parse_double_list(value, key);
        cfg.mask = Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size()));
    }
    else if (key == "dt") sc.dt = num();
    else if (key == "max_steps") sc.max_steps = static_cast<int>(num());
    else if (key == "ego_speed") sc.ego_speed = num();
    else if (key == "ego_radius_min") sc.ego_radius_min = num();
    else if (key == "ego_radius_max") sc.ego_radius_max = num();
    else if (key == "obs_radius_min") sc.obs_radius_min = num();
    else if (key == "obs_radius_max") sc.obs_radius_max = num();
    else if (key == "goal_distance_min") sc.goal_distance_min = num();
    else if (key == "goal_distance_max") sc.goal_distance_max = num();
    else if (key == "obs_speed_min") sc.obs_speed_min = num();
    else if (key == "obs_speed_max") sc.obs_speed_max = num();
    else if (key == "crossing_fraction_min") sc.crossing_fraction_min = num();
    else if (key == "crossing_fraction_max") sc.crossing_fraction_max = num();
    else if (key == "heading_noise") sc.heading_noise = num();
    else if (key == "decision_period") sc.decision_period = num();
    else if (key == "projection_horizon") sc.projection_horizon = num();
    else if (key == "avoid_margin") sc.avoid_margin = num();
    else if (key == "avoid_horizon") sc.avoid_horizon = num();
    else throw ParseError(key, "unknown config key");
}

inline ExperimentConfig parse_config_stream(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ParseError("config", "line " + std::to_string(e.line()) + ": " + e.message());
    }
    ExperimentConfig cfg;
    for (const auto& [key, node] : tree) {
        if (!node.empty()) throw ParseError(key, "sections are not supported; the config is a flat key = value file");
        set_field(cfg, key, node.data());
    }
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config_stream(in);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config", "cannot open " + path);
    return parse_config_stream(in);
}

}  // namespace certirl::harness
