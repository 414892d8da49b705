#include "orthomerge/arith.hpp"

#include <cmath>

namespace ortho {
namespace {

void check_structure(const ParameterSet& theta0, const std::vector<Layer>& layers) {
    if (layers.size() != theta0.layers.size())
        throw ShapeMismatch("task vector: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].name != theta0.layers[l].name ||
            !layers[l].weight.same_shape(theta0.layers[l].weight))
            throw ShapeMismatch("task vector: layer " + layers[l].name +
                                " does not match anchor");
    }
}

}  // namespace

std::vector<double> TaskVector::flatten() const {
    std::vector<double> flat;
    for (const auto& l : layers)
        flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
    return flat;
}

double TaskVector::norm() const {
    const auto flat = flatten();
    return std::sqrt(dot(flat, flat));
}

TaskVector extract(const ParameterSet& theta0, const ParameterSet& theta_star,
                   const std::string& task_id) {
    check_structure(theta0, theta_star.layers);
    TaskVector tau;
    tau.task_id = task_id;
    for (std::size_t l = 0; l < theta0.layers.size(); ++l)
        tau.layers.push_back({theta0.layers[l].name,
                              theta_star.layers[l].weight - theta0.layers[l].weight});
    return tau;
}

ParameterSet merge(const ParameterSet& theta0, const std::vector<TaskVector>& taus,
                   const std::vector<double>& alphas) {
    if (alphas.size() != taus.size())
        throw ShapeMismatch("merge: |alphas| != |taus|");
    for (const auto& tau : taus) check_structure(theta0, tau.layers);

    ParameterSet out = theta0;
    std::vector<double> terms(taus.size());
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        Mat& w = out.layers[l].weight;
        for (std::size_t e = 0; e < w.size(); ++e) {
            for (std::size_t t = 0; t < taus.size(); ++t)
                terms[t] = alphas[t] * taus[t].layers[l].weight.data()[e];
            w.data()[e] += pairwise_sum(terms);
        }
    }
    return out;
}

ParameterSet merge_uniform(const ParameterSet& theta0,
                           const std::vector<TaskVector>& taus, double alpha) {
    return merge(theta0, taus, std::vector<double>(taus.size(), alpha));
}

ParameterSet negate(const ParameterSet& theta0, const TaskVector& tau, double alpha) {
    if (alpha < 0.0) throw ShapeMismatch("negate: alpha must be >= 0");
    return merge(theta0, {tau}, {-alpha});
}

std::vector<double> alpha_grid() {
    std::vector<double> grid;
    grid.reserve(21);
    for (int i = 0; i <= 20; ++i) grid.push_back(0.05 * i);
    return grid;
}

GridSearchResult grid_search_alpha(const ParameterSet& theta0,
                                   const std::vector<TaskVector>& taus,
                                   const MergedEval& eval_fn) {
    GridSearchResult result;
    bool first = true;
    for (double alpha : alpha_grid()) {
        ParameterSet merged = merge_uniform(theta0, taus, alpha);
        auto [objective, per_task] = eval_fn(merged);
        result.table.push_back({alpha, objective, std::move(per_task)});
        if (first || objective > result.best_objective) {  // ties keep smaller alpha
            result.best_alpha = alpha;
            result.best_objective = objective;
            first = false;
        }
    }
    return result;
}

GridSearchResult select_negation_alpha(const ParameterSet& theta0,
                                       const TaskVector& tau,
                                       const NegationEval& eval,
                                       double control_floor) {
    GridSearchResult result;
    bool found = false;
    for (double alpha : alpha_grid()) {
        ParameterSet edited = negate(theta0, tau, alpha);
        const double tgt = eval.target_acc(edited);
        const double ctl = eval.control_acc(edited);
        result.table.push_back({alpha, tgt, {ctl}});
        if (ctl >= control_floor && (!found || tgt < result.best_objective)) {
            result.best_alpha = alpha;
            result.best_objective = tgt;
            found = true;
        }
    }
    if (!found) {
        result.best_alpha = 0.0;
        result.best_objective = result.table.front().objective;
    }
    return result;
}

Mat cosine_similarity_matrix(const std::vector<TaskVector>& taus) {
    const std::size_t T = taus.size();
    if (T < 1) throw ShapeMismatch("cosine matrix: no task vectors");
    std::vector<std::vector<double>> flats(T);
    std::vector<double> norms(T);
    for (std::size_t t = 0; t < T; ++t) {
        flats[t] = taus[t].flatten();
        norms[t] = std::sqrt(dot(flats[t], flats[t]));
        if (norms[t] <= 0.0)
            throw ZeroVector("cosine matrix: task vector " + taus[t].task_id +
                             " is zero");
    }
    Mat s(T, T);
    for (std::size_t t = 0; t < T; ++t) {
        s(t, t) = 1.0;
        for (std::size_t j = t + 1; j < T; ++j) {
            const double c = dot(flats[t], flats[j]) / (norms[t] * norms[j]);
            s(t, j) = c;
            s(j, t) = c;
        }
    }
    return s;
}

}  // namespace ortho
