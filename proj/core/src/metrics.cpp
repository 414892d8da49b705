#include "orthomerge/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "orthomerge/linalg.hpp"

namespace ortho {
namespace {

std::vector<Mat> tau_mats(const TaskVector& tau) {
    std::vector<Mat> mats;
    mats.reserve(tau.layers.size());
    for (const auto& l : tau.layers) mats.push_back(l.weight);
    return mats;
}

ParameterSet shifted(const ParameterSet& theta0, const TaskVector& tau) {
    ParameterSet out = theta0;
    for (std::size_t l = 0; l < out.layers.size(); ++l)
        out.layers[l].weight += tau.layers[l].weight;
    return out;
}

}  // namespace

double accuracy(const ParameterSet& params, const TaskDataset& dataset,
                LogitSlice slice) {
    if (dataset.inputs.empty()) throw EmptyDataset("accuracy: empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dataset.inputs.size(); ++i) {
        const auto logits = forward(params, dataset.inputs[i]);
        std::size_t best = 0;
        for (std::size_t c = 1; c < slice.length; ++c)
            if (logits[slice.offset + c] > logits[slice.offset + best]) best = c;
        if (best == dataset.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.inputs.size());
}

double normalized_accuracy(const std::vector<double>& merged_acc,
                           const std::vector<double>& single_acc) {
    if (merged_acc.size() != single_acc.size() || merged_acc.empty())
        throw ShapeMismatch("normalized_accuracy: length mismatch");
    std::vector<double> ratios(merged_acc.size());
    for (std::size_t t = 0; t < merged_acc.size(); ++t) {
        if (single_acc[t] <= 0.0)
            throw ZeroDenominator("normalized_accuracy: zero single-task accuracy");
        ratios[t] = merged_acc[t] / single_acc[t];
    }
    return pairwise_sum(ratios) / static_cast<double>(ratios.size()) * 100.0;
}

InterferenceStats interference(const TaskVector& tau_j, const ParameterSet& theta0,
                               const TaskDataset& dataset_t, LogitSlice slice_t) {
    const auto tau_flat = tau_j.flatten();
    const double tau_norm = std::sqrt(dot(tau_flat, tau_flat));

    std::vector<double> abs_terms, cos_terms;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < dataset_t.inputs.size(); ++i) {
        const std::size_t cls = slice_t.offset + dataset_t.labels[i];
        JacobianRecord rec = jacobian(theta0, dataset_t.inputs[i], cls);
        const auto j_flat = rec.flatten();
        const double ip = dot(tau_flat, j_flat);
        abs_terms.push_back(std::fabs(ip));
        const double j_norm = std::sqrt(dot(j_flat, j_flat));
        if (j_norm < 1e-12 || tau_norm <= 0.0) {
            ++skipped;
        } else {
            cos_terms.push_back(std::fabs(ip) / (tau_norm * j_norm));
        }
    }
    InterferenceStats stats;
    stats.skipped = skipped;
    if (!abs_terms.empty())
        stats.mean_abs = pairwise_sum(abs_terms) / static_cast<double>(abs_terms.size());
    if (!cos_terms.empty())
        stats.mean_cos = pairwise_sum(cos_terms) / static_cast<double>(cos_terms.size());
    return stats;
}

double disentanglement_gap(const ParameterSet& theta0, const TaskVector& tau_t,
                           const TaskVector& tau_j, const TaskDataset& dataset_t,
                           LogitSlice slice_t) {
    ParameterSet with_t = shifted(theta0, tau_t);
    ParameterSet with_both = shifted(with_t, tau_j);
    std::vector<double> gaps;
    gaps.reserve(dataset_t.inputs.size());
    for (std::size_t i = 0; i < dataset_t.inputs.size(); ++i) {
        const std::size_t cls = slice_t.offset + dataset_t.labels[i];
        gaps.push_back(std::fabs(scalar_forward(with_both, dataset_t.inputs[i], cls) -
                                 scalar_forward(with_t, dataset_t.inputs[i], cls)));
    }
    if (gaps.empty()) return 0.0;
    return pairwise_sum(gaps) / static_cast<double>(gaps.size());
}

double output_scale(const ParameterSet& theta0, const TaskVector& tau_t,
                    const TaskDataset& dataset_t, LogitSlice slice_t) {
    ParameterSet with_t = shifted(theta0, tau_t);
    std::vector<double> mags;
    mags.reserve(dataset_t.inputs.size());
    for (std::size_t i = 0; i < dataset_t.inputs.size(); ++i) {
        const std::size_t cls = slice_t.offset + dataset_t.labels[i];
        mags.push_back(std::fabs(scalar_forward(with_t, dataset_t.inputs[i], cls)));
    }
    if (mags.empty()) return 0.0;
    return pairwise_sum(mags) / static_cast<double>(mags.size());
}

Mat ntk_gram(const ParameterSet& theta0, const std::vector<ScalarizedInput>& a,
             const std::vector<ScalarizedInput>& b) {
    std::vector<std::vector<double>> ja(a.size()), jb;
    for (std::size_t i = 0; i < a.size(); ++i)
        ja[i] = jacobian(theta0, a[i].x, a[i].class_index).flatten();
    const bool same = (&a == &b);
    if (!same) {
        jb.resize(b.size());
        for (std::size_t i = 0; i < b.size(); ++i)
            jb[i] = jacobian(theta0, b[i].x, b[i].class_index).flatten();
    }
    const auto& rhs = same ? ja : jb;
    Mat k(a.size(), rhs.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < rhs.size(); ++j) {
            if (same && j < i) {
                k(i, j) = k(j, i);
                continue;
            }
            k(i, j) = dot(ja[i], rhs[j]);
        }
    return k;
}

AngleHistogram angle_histogram(const Mat& weight_or_delta, std::size_t bins) {
    if (bins < 2) throw ShapeMismatch("angle_histogram: bins must be >= 2");
    const auto angles = column_angles(weight_or_delta);
    AngleHistogram h;
    h.bin_edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.bin_edges[i] = 180.0 * static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    std::vector<double> devs(angles.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < angles.size(); ++i) {
        auto bin = static_cast<std::size_t>(angles[i] / 180.0 * static_cast<double>(bins));
        bin = std::min(bin, bins - 1);
        ++h.counts[bin];
        devs[i] = std::fabs(angles[i] - 90.0);
        mean += angles[i];
    }
    if (!angles.empty()) {
        mean /= static_cast<double>(angles.size());
        h.mean_dev_from_90 = pairwise_sum(devs) / static_cast<double>(devs.size());
        double var = 0.0;
        for (double a : angles) var += (a - mean) * (a - mean);
        h.std_dev = std::sqrt(var / static_cast<double>(angles.size()));
    }
    return h;
}

double ntk_localization_ratio(const ParameterSet& theta0, const SynthSuite& suite,
                              Split split, std::size_t max_per_task) {
    const std::size_t T = suite.spec.num_tasks;
    std::vector<ScalarizedInput> inputs;
    std::vector<std::size_t> task_of;
    for (std::size_t t = 0; t < T; ++t) {
        const TaskDataset& ds = suite.at(t, split);
        const std::size_t n = std::min(max_per_task, ds.inputs.size());
        for (std::size_t i = 0; i < n; ++i) {
            inputs.push_back({ds.inputs[i],
                              slice_offset(suite.spec, t) + ds.labels[i]});
            task_of.push_back(t);
        }
    }
    Mat k = ntk_gram(theta0, inputs, inputs);
    double on_sum = 0.0, off_sum = 0.0;
    std::size_t on_n = 0, off_n = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        for (std::size_t j = 0; j < inputs.size(); ++j) {
            if (task_of[i] == task_of[j]) {
                on_sum += std::fabs(k(i, j));
                ++on_n;
            } else {
                off_sum += std::fabs(k(i, j));
                ++off_n;
            }
        }
    if (on_n == 0 || on_sum <= 0.0)
        throw NumericalFailure("ntk_localization_ratio: empty on-task block");
    const double on_mean = on_sum / static_cast<double>(on_n);
    const double off_mean = off_n ? off_sum / static_cast<double>(off_n) : 0.0;
    return off_mean / on_mean;
}

}  // namespace ortho
