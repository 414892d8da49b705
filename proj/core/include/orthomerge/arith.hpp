#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "orthomerge/net.hpp"

namespace ortho {

/// Parameter-space delta theta* - theta0, same layer structure as the
/// anchor it was extracted against.
struct TaskVector {
    std::vector<Layer> layers;
    std::string task_id;
    double lambda = 0.0;
    std::uint64_t seed = 0;

    std::vector<double> flatten() const;
    double norm() const;
};

TaskVector extract(const ParameterSet& theta0, const ParameterSet& theta_star,
                   const std::string& task_id);

/// theta0 + sum_t alpha_t * tau_t, accumulated pairwise per entry so the
/// result is independent of task order to ~1e-15.
ParameterSet merge(const ParameterSet& theta0, const std::vector<TaskVector>& taus,
                   const std::vector<double>& alphas);
ParameterSet merge_uniform(const ParameterSet& theta0,
                           const std::vector<TaskVector>& taus, double alpha);

/// theta0 - alpha * tau.
ParameterSet negate(const ParameterSet& theta0, const TaskVector& tau, double alpha);

/// The 21-point grid {0.00, 0.05, ..., 1.00}.
std::vector<double> alpha_grid();

struct AlphaTableRow {
    double alpha = 0.0;
    double objective = 0.0;
    std::vector<double> per_task;  // optional extra columns (per-task accuracies)
};

struct GridSearchResult {
    double best_alpha = 0.0;
    double best_objective = 0.0;
    std::vector<AlphaTableRow> table;
};

/// Maximize eval_fn over the uniform alpha grid; ties break toward the
/// smaller alpha. eval_fn sees the merged parameters and returns the
/// objective plus optional per-task columns for the report table.
using MergedEval = std::function<std::pair<double, std::vector<double>>(const ParameterSet&)>;
GridSearchResult grid_search_alpha(const ParameterSet& theta0,
                                   const std::vector<TaskVector>& taus,
                                   const MergedEval& eval_fn);

/// Negation selection: minimize target accuracy subject to control
/// accuracy >= control_floor, over theta0 - alpha*tau on the same grid.
/// Infeasible grid => alpha 0 (leave the model alone).
struct NegationEval {
    std::function<double(const ParameterSet&)> target_acc;
    std::function<double(const ParameterSet&)> control_acc;
};
GridSearchResult select_negation_alpha(const ParameterSet& theta0,
                                       const TaskVector& tau,
                                       const NegationEval& eval,
                                       double control_floor);

/// T x T matrix of cos angles between flattened task vectors.
Mat cosine_similarity_matrix(const std::vector<TaskVector>& taus);

}  // namespace ortho
