#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orthomerge/net.hpp"
#include "orthomerge/synth.hpp"

namespace ortho {

enum class UpdateMode { full, low_rank };

struct OrthoConfig {
    double lambda = 0.0;
    std::vector<std::string> regularized_layers;  // empty = all layers
    UpdateMode update_mode = UpdateMode::full;
    std::size_t rank = 1;  // low_rank only

    bool regularizes(const std::string& layer_name) const;
};

struct TrainConfig {
    std::size_t epochs = 30;
    double lr = 0.05;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double momentum = 0.9;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double task_loss = 0.0;
    double ortho_loss = 0.0;
    double val_acc = 0.0;
};

struct FinetuneResult {
    ParameterSet theta_star;
    std::vector<Mat> delta;  // composed per-layer update
    std::vector<EpochRecord> history;
};

/// Sum over layers of ||G_l - I||_F^2 where G_l is the Gram of the update
/// along its smaller dimension (W^T W for tall, W W^T for wide).
double ortho_loss(const std::vector<Mat>& delta_weights);
double ortho_loss_single(const Mat& delta);

/// Analytic gradient of ortho_loss: 4 W (W^T W - I) for tall matrices,
/// 4 (W W^T - I) W for wide ones.
std::vector<Mat> ortho_loss_grad(const std::vector<Mat>& delta_weights);
Mat ortho_loss_grad_single(const Mat& delta);

/// Fine-tune delta on one task with L = L_task(theta0 + delta) +
/// lambda * L_ortho(delta). theta0 stays frozen; SGD with momentum.
FinetuneResult finetune_task(const ParameterSet& theta0,
                             const TaskDataset& train_data,
                             const TaskDataset& val_data, LogitSlice slice,
                             const OrthoConfig& ortho, const TrainConfig& train);

/// Plain multi-task training over several datasets (used to build a
/// non-random anchor for negation experiments). Round-robins batches
/// across tasks; no ortho penalty.
ParameterSet pretrain_multitask(const ParameterSet& init,
                                const std::vector<const TaskDataset*>& train_sets,
                                const std::vector<LogitSlice>& slices,
                                const TrainConfig& train);

}  // namespace ortho
