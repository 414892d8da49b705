#include "orthomerge/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "orthomerge/metrics.hpp"
#include "orthomerge/rng.hpp"

namespace ortho {
namespace {

bool is_tall(const Mat& m) { return m.rows() >= m.cols(); }

ParameterSet apply_delta(const ParameterSet& theta0, const std::vector<Mat>& delta) {
    ParameterSet out = theta0;
    for (std::size_t l = 0; l < out.layers.size(); ++l)
        out.layers[l].weight += delta[l];
    return out;
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.index(i)]);
}

}  // namespace

bool OrthoConfig::regularizes(const std::string& layer_name) const {
    if (regularized_layers.empty()) return true;
    return std::find(regularized_layers.begin(), regularized_layers.end(),
                     layer_name) != regularized_layers.end();
}

double ortho_loss_single(const Mat& delta) {
    if (!delta.all_finite())
        throw NumericalFailure("ortho_loss: non-finite update matrix");
    const Mat g = is_tall(delta) ? delta.transpose() * delta
                                 : delta * delta.transpose();
    double acc = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) {
            const double v = g(i, j) - (i == j ? 1.0 : 0.0);
            acc += v * v;
        }
    return acc;
}

double ortho_loss(const std::vector<Mat>& delta_weights) {
    double total = 0.0;
    for (const auto& d : delta_weights) total += ortho_loss_single(d);
    return total;
}

Mat ortho_loss_grad_single(const Mat& delta) {
    if (is_tall(delta)) {
        Mat g = delta.transpose() * delta;
        for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
        return (delta * g).scaled(4.0);
    }
    Mat g = delta * delta.transpose();
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return (g * delta).scaled(4.0);
}

std::vector<Mat> ortho_loss_grad(const std::vector<Mat>& delta_weights) {
    std::vector<Mat> grads;
    grads.reserve(delta_weights.size());
    for (const auto& d : delta_weights) grads.push_back(ortho_loss_grad_single(d));
    return grads;
}

FinetuneResult finetune_task(const ParameterSet& theta0,
                             const TaskDataset& train_data,
                             const TaskDataset& val_data, LogitSlice slice,
                             const OrthoConfig& ortho, const TrainConfig& train) {
    if (train_data.inputs.empty()) throw EmptyDataset("finetune: empty train set");
    const std::size_t L = theta0.layers.size();

    const bool low_rank = ortho.update_mode == UpdateMode::low_rank;
    std::vector<Mat> delta(L), vel(L);
    std::vector<Mat> lora_b(L), lora_a(L), vel_b(L), vel_a(L);
    Rng init_rng(derive_seed(train.seed, 0x10a4));
    for (std::size_t l = 0; l < L; ++l) {
        const Mat& w = theta0.layers[l].weight;
        delta[l] = Mat(w.rows(), w.cols());
        vel[l] = Mat(w.rows(), w.cols());
        if (low_rank) {
            const std::size_t r = ortho.rank;
            if (r < 1 || r > std::min(w.rows(), w.cols()))
                throw ShapeMismatch("finetune: rank outside [1, min(dims)]");
            lora_b[l] = Mat(w.rows(), r);  // zero init => delta starts at 0
            lora_a[l] = Mat(r, w.cols());
            const double std_dev = 1.0 / std::sqrt(static_cast<double>(r));
            for (double& v : lora_a[l].data()) v = std_dev * init_rng.gaussian();
            vel_b[l] = Mat(w.rows(), r);
            vel_a[l] = Mat(r, w.cols());
        }
    }

    auto composed = [&]() {
        if (!low_rank) return delta;
        std::vector<Mat> d(L);
        for (std::size_t l = 0; l < L; ++l) d[l] = lora_b[l] * lora_a[l];
        return d;
    };

    FinetuneResult result;
    Rng shuffle_rng(derive_seed(train.seed, 0x5b));
    std::vector<std::size_t> order(train_data.inputs.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
            const std::size_t end = std::min(order.size(), start + train.batch_size);
            const double inv_n = 1.0 / static_cast<double>(end - start);

            std::vector<Mat> cur = composed();
            ParameterSet theta = apply_delta(theta0, cur);
            std::vector<Mat> grad(L);
            for (std::size_t l = 0; l < L; ++l)
                grad[l] = Mat(cur[l].rows(), cur[l].cols());
            double batch_loss = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const std::size_t i = order[s];
                Gradients g = backward(theta, train_data.inputs[i], slice,
                                       train_data.labels[i]);
                batch_loss += g.loss;
                for (std::size_t l = 0; l < L; ++l)
                    grad[l] += g.by_layer[l].scaled(inv_n);
            }
            batch_loss *= inv_n;
            if (ortho.lambda > 0.0) {
                for (std::size_t l = 0; l < L; ++l) {
                    if (!ortho.regularizes(theta0.layers[l].name)) continue;
                    grad[l] += ortho_loss_grad_single(cur[l]).scaled(ortho.lambda);
                    batch_loss += ortho.lambda * ortho_loss_single(cur[l]);
                }
            }
            if (!std::isfinite(batch_loss))
                throw DivergenceDetected("finetune: non-finite loss",
                                         static_cast<int>(epoch));
            epoch_loss += batch_loss;
            ++n_batches;

            if (!low_rank) {
                for (std::size_t l = 0; l < L; ++l) {
                    vel[l] *= train.momentum;
                    vel[l] -= grad[l].scaled(train.lr);
                    delta[l] += vel[l];
                }
            } else {
                for (std::size_t l = 0; l < L; ++l) {
                    Mat gb = grad[l] * lora_a[l].transpose();
                    Mat ga = lora_b[l].transpose() * grad[l];
                    vel_b[l] *= train.momentum;
                    vel_b[l] -= gb.scaled(train.lr);
                    lora_b[l] += vel_b[l];
                    vel_a[l] *= train.momentum;
                    vel_a[l] -= ga.scaled(train.lr);
                    lora_a[l] += vel_a[l];
                }
            }
        }

        std::vector<Mat> cur = composed();
        double pen = 0.0;
        for (std::size_t l = 0; l < L; ++l)
            if (ortho.regularizes(theta0.layers[l].name))
                pen += ortho_loss_single(cur[l]);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.task_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(1, n_batches));
        rec.ortho_loss = pen;
        rec.val_acc = val_data.inputs.empty()
                          ? 0.0
                          : accuracy(apply_delta(theta0, cur), val_data, slice);
        result.history.push_back(rec);
    }

    result.delta = composed();
    result.theta_star = apply_delta(theta0, result.delta);
    return result;
}

ParameterSet pretrain_multitask(const ParameterSet& init,
                                const std::vector<const TaskDataset*>& train_sets,
                                const std::vector<LogitSlice>& slices,
                                const TrainConfig& train) {
    if (train_sets.size() != slices.size())
        throw ShapeMismatch("pretrain: datasets/slices length mismatch");
    const std::size_t L = init.layers.size();
    ParameterSet theta = init;
    std::vector<Mat> vel(L);
    for (std::size_t l = 0; l < L; ++l)
        vel[l] = Mat(theta.layers[l].weight.rows(), theta.layers[l].weight.cols());

    Rng shuffle_rng(derive_seed(train.seed, 0x77));
    std::vector<std::vector<std::size_t>> orders(train_sets.size());
    for (std::size_t t = 0; t < train_sets.size(); ++t) {
        orders[t].resize(train_sets[t]->inputs.size());
        std::iota(orders[t].begin(), orders[t].end(), 0);
    }

    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
        for (auto& o : orders) shuffle_indices(o, shuffle_rng);
        std::size_t max_n = 0;
        for (const auto& o : orders) max_n = std::max(max_n, o.size());
        for (std::size_t start = 0; start < max_n; start += train.batch_size) {
            for (std::size_t t = 0; t < train_sets.size(); ++t) {
                const auto& o = orders[t];
                if (start >= o.size()) continue;
                const std::size_t end = std::min(o.size(), start + train.batch_size);
                const double inv_n = 1.0 / static_cast<double>(end - start);
                std::vector<Mat> grad(L);
                for (std::size_t l = 0; l < L; ++l)
                    grad[l] = Mat(theta.layers[l].weight.rows(),
                                  theta.layers[l].weight.cols());
                double batch_loss = 0.0;
                for (std::size_t s = start; s < end; ++s) {
                    Gradients g = backward(theta, train_sets[t]->inputs[o[s]],
                                           slices[t], train_sets[t]->labels[o[s]]);
                    batch_loss += g.loss;
                    for (std::size_t l = 0; l < L; ++l)
                        grad[l] += g.by_layer[l].scaled(inv_n);
                }
                if (!std::isfinite(batch_loss))
                    throw DivergenceDetected("pretrain: non-finite loss",
                                             static_cast<int>(epoch));
                for (std::size_t l = 0; l < L; ++l) {
                    vel[l] *= train.momentum;
                    vel[l] -= grad[l].scaled(train.lr);
                    theta.layers[l].weight += vel[l];
                }
            }
        }
    }
    return theta;
}

}  // namespace ortho
