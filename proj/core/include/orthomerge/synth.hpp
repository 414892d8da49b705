#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orthomerge/mat.hpp"

namespace ortho {

enum class Split { train, val, test };

struct SynthTaskSpec {
    std::size_t num_tasks = 2;
    std::size_t input_dim = 32;
    std::size_t features_per_task = 8;
    double overlap_ratio = 0.0;  // rho in [0,1]
    std::size_t classes_per_task = 3;
    std::size_t samples_per_task = 256;  // training samples; val/test are half
    double noise_std = 0.1;
    std::uint64_t seed = 0;

    std::size_t shared_count() const;
    void validate() const;  // throws InfeasibleSpec
};

struct TaskDataset {
    std::string task_id;
    std::vector<std::vector<double>> inputs;
    std::vector<std::size_t> labels;  // task-local
    std::vector<std::size_t> feature_set;  // sorted indices I_t
    Split split = Split::train;
};

/// All splits of all tasks, plus the standardization statistics so that
/// fresh inputs can be mapped into the same space.
struct SynthSuite {
    SynthTaskSpec spec;
    std::vector<TaskDataset> datasets;  // T * 3, grouped by task, order train/val/test
    std::vector<double> mean;           // per-coordinate train statistics
    std::vector<double> scale;          // 1/stddev (1.0 for flagged coords)
    std::vector<std::size_t> zero_variance_coords;

    TaskDataset& at(std::size_t task, Split split);
    const TaskDataset& at(std::size_t task, Split split) const;
};

/// Raw (un-standardized) suite generation: labels are the argmax of a
/// seeded Gaussian class-template applied to the task's feature slice,
/// plus label noise.
std::vector<TaskDataset> generate_suite(const SynthTaskSpec& spec);

/// Standardize per coordinate with train-split statistics, pooled over
/// all tasks. Constant coordinates are flagged and only centered.
SynthSuite standardize(const SynthTaskSpec& spec, std::vector<TaskDataset> datasets);

/// generate_suite + standardize.
SynthSuite make_suite(const SynthTaskSpec& spec);

/// Logit slice for task t: tasks own consecutive equal slices of the head.
std::size_t slice_offset(const SynthTaskSpec& spec, std::size_t task);

/// Class-template matrix G_t (classes_per_task x features_per_task) used
/// to derive labels, and the noise stream seed for one split. Together
/// these let labels be re-derived independently of the input stream.
Mat task_templates(const SynthTaskSpec& spec, std::size_t task);
std::uint64_t split_noise_seed(const SynthTaskSpec& spec, std::size_t task, Split split);

}  // namespace ortho
