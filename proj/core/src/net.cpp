#include "orthomerge/net.hpp"

#include <algorithm>
#include <cmath>

#include "orthomerge/rng.hpp"

namespace ortho {
namespace {

struct Trace {
    // activations[0] = x, activations[l] = output of layer l-1 (post-tanh
    // for hidden layers, raw logits for the last).
    std::vector<std::vector<double>> activations;
};

Trace run_forward(const ParameterSet& params, std::span<const double> x) {
    if (x.size() != params.spec.input_dim)
        throw ShapeMismatch("forward: input length != input_dim");
    Trace t;
    t.activations.emplace_back(x.begin(), x.end());
    const std::size_t L = params.layers.size();
    for (std::size_t l = 0; l < L; ++l) {
        auto z = params.layers[l].weight.apply_transposed(t.activations.back());
        if (l + 1 < L)
            for (double& v : z) v = std::tanh(v);
        t.activations.push_back(std::move(z));
    }
    return t;
}

// Backprop a gradient w.r.t. the logits down through the net.
std::vector<Mat> backprop(const ParameterSet& params, const Trace& t,
                          std::vector<double> dlogits) {
    const std::size_t L = params.layers.size();
    std::vector<Mat> grads(L);
    std::vector<double> delta = std::move(dlogits);
    for (std::size_t l = L; l-- > 0;) {
        const Mat& w = params.layers[l].weight;
        const auto& a_in = t.activations[l];
        Mat g(w.rows(), w.cols());
        for (std::size_t i = 0; i < w.rows(); ++i)
            for (std::size_t j = 0; j < w.cols(); ++j)
                g(i, j) = a_in[i] * delta[j];
        grads[l] = std::move(g);
        if (l > 0) {
            std::vector<double> prev = w.apply(delta);
            // through tanh: a = tanh(z) => dz = da * (1 - a^2)
            const auto& a = t.activations[l];
            for (std::size_t i = 0; i < prev.size(); ++i)
                prev[i] *= (1.0 - a[i] * a[i]);
            delta = std::move(prev);
        }
    }
    return grads;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> ModelSpec::layer_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    std::size_t fan_in = input_dim;
    for (std::size_t h : hidden_dims) {
        shapes.emplace_back(fan_in, h);
        fan_in = h;
    }
    shapes.emplace_back(fan_in, num_classes);
    return shapes;
}

std::size_t ModelSpec::param_count() const {
    std::size_t p = 0;
    for (auto [r, c] : layer_shapes()) p += r * c;
    return p;
}

void ModelSpec::validate() const {
    if (input_dim < 1 || num_classes < 1)
        throw ShapeMismatch("ModelSpec: dims must be >= 1");
    for (std::size_t h : hidden_dims)
        if (h < 1) throw ShapeMismatch("ModelSpec: hidden dim must be >= 1");
}

std::size_t ParameterSet::param_count() const {
    std::size_t p = 0;
    for (const auto& l : layers) p += l.weight.size();
    return p;
}

std::vector<double> ParameterSet::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto& l : layers)
        flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
    return flat;
}

const Layer& ParameterSet::layer(const std::string& name) const {
    for (const auto& l : layers)
        if (l.name == name) return l;
    throw ShapeMismatch("no layer named " + name);
}

ParameterSet init_params(const ModelSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    ParameterSet params;
    params.spec = spec;
    std::size_t idx = 0;
    for (auto [fan_in, fan_out] : spec.layer_shapes()) {
        Mat w(fan_in, fan_out);
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w.data()) v = std_dev * rng.gaussian();
        params.layers.push_back({"layer" + std::to_string(idx++), std::move(w)});
    }
    return params;
}

std::vector<double> forward(const ParameterSet& params, std::span<const double> x) {
    return run_forward(params, x).activations.back();
}

double scalar_forward(const ParameterSet& params, std::span<const double> x,
                      std::size_t class_index) {
    auto logits = forward(params, x);
    if (class_index >= logits.size())
        throw ShapeMismatch("scalar_forward: class index out of range");
    return logits[class_index];
}

Gradients backward(const ParameterSet& params, std::span<const double> x,
                   LogitSlice slice, std::size_t y_local) {
    if (y_local >= slice.length)
        throw ShapeMismatch("backward: label outside slice");
    if (slice.offset + slice.length > params.spec.num_classes)
        throw ShapeMismatch("backward: slice outside head");
    Trace t = run_forward(params, x);
    const auto& logits = t.activations.back();

    // softmax over the task's slice only
    double mx = logits[slice.offset];
    for (std::size_t c = 1; c < slice.length; ++c)
        mx = std::max(mx, logits[slice.offset + c]);
    double denom = 0.0;
    std::vector<double> p(slice.length);
    for (std::size_t c = 0; c < slice.length; ++c) {
        p[c] = std::exp(logits[slice.offset + c] - mx);
        denom += p[c];
    }
    for (double& v : p) v /= denom;

    std::vector<double> dlogits(logits.size(), 0.0);
    for (std::size_t c = 0; c < slice.length; ++c)
        dlogits[slice.offset + c] = p[c] - (c == y_local ? 1.0 : 0.0);

    Gradients g;
    g.loss = -std::log(std::max(p[y_local], 1e-300));
    g.by_layer = backprop(params, t, std::move(dlogits));
    return g;
}

JacobianRecord jacobian(const ParameterSet& params, std::span<const double> x,
                        std::size_t class_index) {
    if (class_index >= params.spec.num_classes)
        throw ShapeMismatch("jacobian: class index out of range");
    Trace t = run_forward(params, x);
    std::vector<double> dlogits(t.activations.back().size(), 0.0);
    dlogits[class_index] = 1.0;
    JacobianRecord rec;
    rec.scalar_class = class_index;
    rec.by_layer = backprop(params, t, std::move(dlogits));
    return rec;
}

std::vector<double> JacobianRecord::flatten() const {
    std::vector<double> flat;
    for (const auto& m : by_layer)
        flat.insert(flat.end(), m.data().begin(), m.data().end());
    return flat;
}

double linearized_forward(const ParameterSet& theta0,
                          const std::vector<Mat>& tau_layers,
                          std::span<const double> x, std::size_t class_index) {
    if (tau_layers.size() != theta0.layers.size())
        throw ShapeMismatch("linearized_forward: layer count mismatch");
    JacobianRecord j = jacobian(theta0, x, class_index);
    double correction = 0.0;
    for (std::size_t l = 0; l < tau_layers.size(); ++l)
        correction += frobenius_inner(tau_layers[l], j.by_layer[l]);
    return scalar_forward(theta0, x, class_index) + correction;
}

}  // namespace ortho
