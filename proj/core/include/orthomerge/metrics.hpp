#pragma once

#include <map>
#include <string>
#include <vector>

#include "orthomerge/arith.hpp"
#include "orthomerge/net.hpp"
#include "orthomerge/synth.hpp"

namespace ortho {

/// Fraction of argmax-correct predictions on the task's own logit slice.
double accuracy(const ParameterSet& params, const TaskDataset& dataset,
                LogitSlice slice);

/// Mean over tasks of merged/single accuracy ratios, as a percentage.
double normalized_accuracy(const std::vector<double>& merged_acc,
                           const std::vector<double>& single_acc);

struct InterferenceStats {
    double mean_abs = 0.0;   // mean |tau_j^T J(x)|
    double mean_cos = 0.0;   // mean |cos angle(tau_j, J(x))|
    std::size_t skipped = 0; // samples with ||J|| < 1e-12
};

/// Linearized interference of tau_j against another task's domain, with the
/// Jacobian scalarized at each sample's true-class logit.
InterferenceStats interference(const TaskVector& tau_j, const ParameterSet& theta0,
                               const TaskDataset& dataset_t, LogitSlice slice_t);

/// Mean |f(x; theta0+tau_t+tau_j) - f(x; theta0+tau_t)| on the true-class
/// logit, full nonlinear model.
double disentanglement_gap(const ParameterSet& theta0, const TaskVector& tau_t,
                           const TaskVector& tau_j, const TaskDataset& dataset_t,
                           LogitSlice slice_t);

/// Typical scalarized output magnitude of theta0+tau_t on its domain;
/// the denominator for relative gap reporting.
double output_scale(const ParameterSet& theta0, const TaskVector& tau_t,
                    const TaskDataset& dataset_t, LogitSlice slice_t);

/// NTK Gram K_ik = J(x_i)^T J(x_k); rows from a, cols from b. Each input
/// carries the global logit index to scalarize at.
struct ScalarizedInput {
    std::vector<double> x;
    std::size_t class_index = 0;
};
Mat ntk_gram(const ParameterSet& theta0, const std::vector<ScalarizedInput>& a,
             const std::vector<ScalarizedInput>& b);

struct AngleHistogram {
    std::vector<double> bin_edges;   // bins+1 edges over [0, 180]
    std::vector<std::size_t> counts;
    double mean_dev_from_90 = 0.0;   // mean |angle - 90|
    double std_dev = 0.0;            // std of angles
};
AngleHistogram angle_histogram(const Mat& weight_or_delta, std::size_t bins);

/// Structured result bundle serialized by the CLI.
struct MetricsReport {
    std::vector<double> per_task_accuracy;
    double normalized_acc = 0.0;
    Mat interference_abs;  // eta(t, j)
    Mat interference_cos;
    Mat cosine_matrix;
    double mean_abs_cos = 0.0;
    double ntk_localization_ratio = 0.0;
    std::map<std::string, double> meta;
};

/// off-task-block mean |K| / on-task-block mean |K| for a suite, with
/// per-sample true-class scalarization at the anchor.
double ntk_localization_ratio(const ParameterSet& theta0, const SynthSuite& suite,
                              Split split, std::size_t max_per_task);

}  // namespace ortho
