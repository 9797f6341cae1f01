#pragma once

// Network data model, the portable JSON weight format, exact forward
// evaluation and input gradients.

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "certirl/errors.hpp"

namespace certirl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Observation vector s. Units are task specific.
using Observation = Vector;

struct DenseLayer {
    Matrix weights;  // rows = units of this layer, cols = units of the previous one
    Vector bias;
};

/// m-layer feedforward network: ReLU on every hidden layer, linear output.
struct NetworkSpec {
    std::size_t input_dim = 0;
    std::vector<std::string> action_labels;
    std::vector<DenseLayer> layers;
    nlohmann::json meta = nlohmann::json::object();

    std::size_t num_layers() const { return layers.size(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weights.rows(); }
    std::size_t width(std::size_t layer) const { return layers[layer].weights.rows(); }
};

/// Throws ValidationError (with 1-based layer index where applicable) if the
/// network breaks any invariant.
inline void validate(const NetworkSpec& net) {
    if (net.layers.empty()) throw ValidationError("network has no layers");
    if (net.input_dim == 0) throw ValidationError("input_dim must be positive");
    std::size_t prev = net.input_dim;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& L = net.layers[k];
        const long idx = static_cast<long>(k) + 1;
        if (L.weights.rows() == 0)
            throw ValidationError("layer " + std::to_string(idx) + " has no units", idx);
        if (static_cast<std::size_t>(L.weights.cols()) != prev) {
            // Report the layer whose output feeds the mismatched input.
            const long at = k == 0 ? 1 : idx - 1;
            throw ValidationError("dimension mismatch at layer " + std::to_string(at) + ": layer " +
                                      std::to_string(idx) + " expects " +
                                      std::to_string(L.weights.cols()) + " inputs, got " +
                                      std::to_string(prev),
                                  at);
        }
        if (L.bias.size() != L.weights.rows())
            throw ValidationError("layer " + std::to_string(idx) + " bias length " +
                                      std::to_string(L.bias.size()) + " != rows " +
                                      std::to_string(L.weights.rows()),
                                  idx);
        if (!L.weights.allFinite() || !L.bias.allFinite())
            throw ValidationError("layer " + std::to_string(idx) + " has non-finite entries", idx);
        prev = L.weights.rows();
    }
    if (net.action_labels.size() != prev)
        throw ValidationError("action_labels has " + std::to_string(net.action_labels.size()) +
                                  " entries but the output layer has " + std::to_string(prev),
                              static_cast<long>(net.layers.size()));
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + key, "missing");
    return *it;
}

inline double number(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError(path, "expected a number");
    return v.get<double>();
}

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace detail

/// Parses the weight-file JSON document.
inline NetworkSpec parse_network(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("<root>", "expected a JSON object");
    NetworkSpec net;

    const auto& dim = detail::require(doc, "input_dim", "");
    if (!dim.is_number_integer() || dim.get<long long>() <= 0)
        throw ParseError("input_dim", "expected a positive integer");
    net.input_dim = dim.get<std::size_t>();

    const auto& labels = detail::require(doc, "action_labels", "");
    if (!labels.is_array()) throw ParseError("action_labels", "expected an array of strings");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i].is_string())
            throw ParseError("action_labels[" + std::to_string(i) + "]", "expected a string");
        net.action_labels.push_back(labels[i].get<std::string>());
    }

    const auto& layers = detail::require(doc, "layers", "");
    if (!layers.is_array()) throw ParseError("layers", "expected an array");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const std::string path = "layers[" + std::to_string(k) + "].";
        const auto& L = layers[k];
        if (!L.is_object()) throw ParseError("layers[" + std::to_string(k) + "]", "expected an object");
        const auto& w = detail::require(L, "weights", path);
        const auto& b = detail::require(L, "bias", path);
        if (!w.is_array() || w.empty()) throw ParseError(path + "weights", "expected a non-empty 2-D array");
        if (!b.is_array()) throw ParseError(path + "bias", "expected an array");

        const std::size_t rows = w.size();
        const std::size_t cols = w[0].is_array() ? w[0].size() : 0;
        DenseLayer layer{Matrix(rows, cols), Vector(b.size())};
        for (std::size_t i = 0; i < rows; ++i) {
            const std::string rp = path + "weights[" + std::to_string(i) + "]";
            if (!w[i].is_array() || w[i].size() != cols)
                throw ParseError(rp, "ragged row (expected " + std::to_string(cols) + " entries)");
            for (std::size_t j = 0; j < cols; ++j)
                layer.weights(i, j) = detail::number(w[i][j], rp + "[" + std::to_string(j) + "]");
        }
        for (std::size_t i = 0; i < b.size(); ++i)
            layer.bias(i) = detail::number(b[i], path + "bias[" + std::to_string(i) + "]");
        net.layers.push_back(std::move(layer));
    }

    if (auto it = doc.find("meta"); it != doc.end()) net.meta = *it;
    validate(net);
    return net;
}

inline NetworkSpec parse_network(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("<document>", e.what());
    }
    return parse_network(doc);
}

inline NetworkSpec load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("<file>", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_network(ss.str());
}

/// Serializes in the weight-file format with 17 significant digits so that
/// every double round-trips bit-exactly.
inline std::string to_json_text(const NetworkSpec& net) {
    std::ostringstream out;
    out << "{\n  \"input_dim\": " << net.input_dim << ",\n  \"action_labels\": [";
    for (std::size_t i = 0; i < net.action_labels.size(); ++i)
        out << (i ? ", " : "") << nlohmann::json(net.action_labels[i]).dump();
    out << "],\n  \"layers\": [\n";
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& L = net.layers[k];
        out << "    {\"weights\": [";
        for (Eigen::Index i = 0; i < L.weights.rows(); ++i) {
            out << (i ? ", [" : "[");
            for (Eigen::Index j = 0; j < L.weights.cols(); ++j)
                out << (j ? ", " : "") << detail::fmt17(L.weights(i, j));
            out << "]";
        }
        out << "],\n     \"bias\": [";
        for (Eigen::Index i = 0; i < L.bias.size(); ++i) out << (i ? ", " : "") << detail::fmt17(L.bias(i));
        out << "]}" << (k + 1 < net.layers.size() ? "," : "") << "\n";
    }
    out << "  ]";
    if (!net.meta.empty()) out << ",\n  \"meta\": " << net.meta.dump();
    out << "\n}\n";
    return out.str();
}

inline void save_network(const NetworkSpec& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("<file>", "cannot write " + path);
    out << to_json_text(net);
}

inline void check_input(const NetworkSpec& net, const Observation& obs) {
    if (static_cast<std::size_t>(obs.size()) != net.input_dim)
        throw ValidationError("observation has length " + std::to_string(obs.size()) +
                              " but the network expects " + std::to_string(net.input_dim));
}

/// Exact Q(s, a_j) for every action.
inline Vector forward(const NetworkSpec& net, const Observation& obs) {
    check_input(net, obs);
    Vector h = obs;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        Vector z = net.layers[k].weights * h + net.layers[k].bias;
        h = (k + 1 < net.layers.size()) ? Vector(z.cwiseMax(0.0)) : z;
    }
    if (!h.allFinite()) throw NumericError("forward produced a non-finite value");
    return h;
}

/// Column-batched forward pass: each column of `inputs` is one observation.
/// No finiteness check; used by the oracles on large grids.
inline Matrix forward_batch(const NetworkSpec& net, const Matrix& inputs) {
    Matrix h = inputs;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        Matrix z = net.layers[k].weights * h;
        z.colwise() += net.layers[k].bias;
        if (k + 1 < net.layers.size()) z = z.cwiseMax(0.0);
        h = std::move(z);
    }
    return h;
}

/// Pre-activations z^(k) of every layer (including the output layer).
inline std::vector<Vector> preactivations(const NetworkSpec& net, const Observation& obs) {
    check_input(net, obs);
    std::vector<Vector> zs;
    Vector h = obs;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        zs.push_back(net.layers[k].weights * h + net.layers[k].bias);
        h = zs.back().cwiseMax(0.0);
    }
    return zs;
}

inline Vector softmax(const Vector& logits) {
    const double top = logits.maxCoeff();
    Vector e = (logits.array() - top).exp().matrix();
    return e / e.sum();
}

/// Gradient of cross_entropy(target, softmax(Q(s))) with respect to s.
/// Subgradient 0 at ReLU kinks (pre-activation exactly 0).
inline Vector input_gradient(const NetworkSpec& net, const Observation& obs, const Vector& target) {
    const auto zs = preactivations(net, obs);
    if (static_cast<std::size_t>(target.size()) != net.output_dim())
        throw ValidationError("target has length " + std::to_string(target.size()) +
                              " but the network has " + std::to_string(net.output_dim()) + " outputs");
    const Vector& q = zs.back();
    if (!q.allFinite()) throw NumericError("forward produced a non-finite value");

    Vector grad = softmax(q) - target;
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        grad = net.layers[k].weights.transpose() * grad;
        if (k > 0) grad = grad.cwiseProduct((zs[k - 1].array() > 0.0).cast<double>().matrix());
    }
    return grad;
}

}  // namespace certirl
