#include "orthomerge/synth.hpp"

#include <algorithm>
#include <cmath>

#include "orthomerge/rng.hpp"

namespace ortho {
namespace {

// Task domains concentrate on the task's own feature set: off-feature
// coordinates carry reduced amplitude, so D_t genuinely occupies a
// task-specific slice of input space instead of the full Gaussian ball.
constexpr double kOffFeatureScale = 0.05;

std::vector<std::size_t> feature_set_for(const SynthTaskSpec& spec, std::size_t task) {
    const std::size_t k = spec.shared_count();
    const std::size_t priv = spec.features_per_task - k;
    std::vector<std::size_t> idx;
    idx.reserve(spec.features_per_task);
    for (std::size_t i = 0; i < k; ++i) idx.push_back(i);
    const std::size_t base = k + task * priv;
    for (std::size_t i = 0; i < priv; ++i) idx.push_back(base + i);
    return idx;  // already sorted
}

// Inputs and label noise come from separate streams so that labels can be
// re-derived from (templates, noise seed) without replaying input draws.
TaskDataset make_split(const SynthTaskSpec& spec, std::size_t task,
                       const std::vector<std::size_t>& features, Split split,
                       std::size_t n, std::uint64_t input_seed,
                       std::uint64_t noise_seed, const Mat& templates) {
    Rng input_rng(input_seed);
    Rng noise_rng(noise_seed);
    TaskDataset ds;
    ds.task_id = "task" + std::to_string(task);
    ds.feature_set = features;
    ds.split = split;
    ds.inputs.reserve(n);
    ds.labels.reserve(n);
    const std::size_t C = spec.classes_per_task;
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> x(spec.input_dim);
        for (std::size_t i = 0; i < spec.input_dim; ++i) {
            const double g = input_rng.gaussian();
            x[i] = std::binary_search(features.begin(), features.end(), i)
                       ? g
                       : kOffFeatureScale * g;
        }
        std::vector<double> logits(C, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            double acc = 0.0;
            for (std::size_t f = 0; f < features.size(); ++f)
                acc += templates(c, f) * x[features[f]];
            logits[c] = acc + spec.noise_std * noise_rng.gaussian();
        }
        const std::size_t label = static_cast<std::size_t>(
            std::max_element(logits.begin(), logits.end()) - logits.begin());
        ds.inputs.push_back(std::move(x));
        ds.labels.push_back(label);
    }
    return ds;
}

}  // namespace

std::size_t SynthTaskSpec::shared_count() const {
    return static_cast<std::size_t>(
        std::lround(overlap_ratio * static_cast<double>(features_per_task)));
}

void SynthTaskSpec::validate() const {
    if (num_tasks < 1 || features_per_task < 1 || classes_per_task < 2 ||
        input_dim < 1 || samples_per_task < 1)
        throw InfeasibleSpec("synth spec: degenerate sizes");
    if (overlap_ratio < 0.0 || overlap_ratio > 1.0)
        throw InfeasibleSpec("synth spec: overlap_ratio outside [0,1]");
    const std::size_t k = shared_count();
    const std::size_t budget = k + num_tasks * (features_per_task - k);
    if (budget > input_dim)
        throw InfeasibleSpec("synth spec: feature index budget " +
                             std::to_string(budget) + " exceeds input_dim " +
                             std::to_string(input_dim));
}

Mat task_templates(const SynthTaskSpec& spec, std::size_t task) {
    Rng template_rng(derive_seed(derive_seed(spec.seed, task), 0));
    Mat templates(spec.classes_per_task, spec.features_per_task);
    for (double& v : templates.data()) v = template_rng.gaussian();
    return templates;
}

std::uint64_t split_noise_seed(const SynthTaskSpec& spec, std::size_t task,
                               Split split) {
    return derive_seed(derive_seed(spec.seed, task),
                       4 + static_cast<std::uint64_t>(split));
}

std::vector<TaskDataset> generate_suite(const SynthTaskSpec& spec) {
    spec.validate();
    std::vector<TaskDataset> out;
    for (std::size_t t = 0; t < spec.num_tasks; ++t) {
        const auto features = feature_set_for(spec, t);
        const std::uint64_t task_seed = derive_seed(spec.seed, t);
        const Mat templates = task_templates(spec, t);

        const std::size_t n_train = spec.samples_per_task;
        const std::size_t n_eval = std::max<std::size_t>(1, spec.samples_per_task / 2);
        out.push_back(make_split(spec, t, features, Split::train, n_train,
                                 derive_seed(task_seed, 1),
                                 split_noise_seed(spec, t, Split::train), templates));
        out.push_back(make_split(spec, t, features, Split::val, n_eval,
                                 derive_seed(task_seed, 2),
                                 split_noise_seed(spec, t, Split::val), templates));
        out.push_back(make_split(spec, t, features, Split::test, n_eval,
                                 derive_seed(task_seed, 3),
                                 split_noise_seed(spec, t, Split::test), templates));
    }
    return out;
}

SynthSuite standardize(const SynthTaskSpec& spec, std::vector<TaskDataset> datasets) {
    const std::size_t m = spec.input_dim;
    std::vector<double> mean(m, 0.0), var(m, 0.0);
    std::size_t n = 0;
    for (const auto& ds : datasets) {
        if (ds.split != Split::train) continue;
        for (const auto& x : ds.inputs) {
            for (std::size_t i = 0; i < m; ++i) mean[i] += x[i];
            ++n;
        }
    }
    if (n == 0) throw EmptyDataset("standardize: no training samples");
    for (double& v : mean) v /= static_cast<double>(n);
    for (const auto& ds : datasets) {
        if (ds.split != Split::train) continue;
        for (const auto& x : ds.inputs)
            for (std::size_t i = 0; i < m; ++i) {
                const double c = x[i] - mean[i];
                var[i] += c * c;
            }
    }
    SynthSuite suite;
    suite.spec = spec;
    suite.mean = mean;
    suite.scale.assign(m, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        var[i] /= static_cast<double>(n);
        if (var[i] < 1e-24) {
            suite.zero_variance_coords.push_back(i);  // centered only
        } else {
            suite.scale[i] = 1.0 / std::sqrt(var[i]);
        }
    }
    for (auto& ds : datasets)
        for (auto& x : ds.inputs)
            for (std::size_t i = 0; i < m; ++i)
                x[i] = (x[i] - mean[i]) * suite.scale[i];
    suite.datasets = std::move(datasets);
    return suite;
}

SynthSuite make_suite(const SynthTaskSpec& spec) {
    return standardize(spec, generate_suite(spec));
}

TaskDataset& SynthSuite::at(std::size_t task, Split split) {
    return datasets.at(task * 3 + static_cast<std::size_t>(split));
}

const TaskDataset& SynthSuite::at(std::size_t task, Split split) const {
    return datasets.at(task * 3 + static_cast<std::size_t>(split));
}

std::size_t slice_offset(const SynthTaskSpec& spec, std::size_t task) {
    return task * spec.classes_per_task;
}

}  // namespace ortho
