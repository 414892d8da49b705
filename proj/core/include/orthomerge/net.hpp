#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "orthomerge/mat.hpp"

namespace ortho {

/// Architecture of the shared-trunk classifier. Hidden layers use tanh,
/// the final layer is linear logits. May have zero hidden layers (purely
/// linear model). No biases anywhere: every parameter is a column of
/// some weight matrix.
struct ModelSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t num_classes = 0;
    std::uint64_t seed = 0;

    std::vector<std::pair<std::size_t, std::size_t>> layer_shapes() const;
    std::size_t num_layers() const { return hidden_dims.size() + 1; }
    std::size_t param_count() const;
    void validate() const;
};

struct Layer {
    std::string name;
    Mat weight;  // fan_in x fan_out; columns are feature extractors
};

struct ParameterSet {
    ModelSpec spec;
    std::vector<Layer> layers;

    std::size_t param_count() const;
    std::vector<double> flatten() const;
    const Layer& layer(const std::string& name) const;
};

/// Logit slice owned by one task inside the shared head.
struct LogitSlice {
    std::size_t offset = 0;
    std::size_t length = 0;
};

struct Gradients {
    std::vector<Mat> by_layer;
    double loss = 0.0;
};

struct JacobianRecord {
    std::vector<Mat> by_layer;
    std::size_t scalar_class = 0;  // global logit index that was scalarized

    std::vector<double> flatten() const;
};

ParameterSet init_params(const ModelSpec& spec);

std::vector<double> forward(const ParameterSet& params, std::span<const double> x);

/// Scalarized output: the logit at global index `class_index`.
double scalar_forward(const ParameterSet& params, std::span<const double> x,
                      std::size_t class_index);

/// Cross-entropy over the task's logit slice; y_local indexes within the
/// slice. Returns per-layer dL/dW and the loss value.
Gradients backward(const ParameterSet& params, std::span<const double> x,
                   LogitSlice slice, std::size_t y_local);

/// d(logit_class)/dW for every layer.
JacobianRecord jacobian(const ParameterSet& params, std::span<const double> x,
                        std::size_t class_index);

/// f(x; theta0) + <tau, J(x)> on the scalarized output.
double linearized_forward(const ParameterSet& theta0,
                          const std::vector<Mat>& tau_layers,
                          std::span<const double> x, std::size_t class_index);

}  // namespace ortho
