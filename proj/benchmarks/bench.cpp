#include <benchmark/benchmark.h>

#include "orthomerge/arith.hpp"
#include "orthomerge/finetune.hpp"
#include "orthomerge/linalg.hpp"
#include "orthomerge/metrics.hpp"
#include "orthomerge/net.hpp"
#include "orthomerge/rng.hpp"
#include "orthomerge/synth.hpp"

using namespace ortho;

namespace {

Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed) {
    Mat m(r, c);
    Rng rng(seed);
    for (double& v : m.data()) v = rng.gaussian();
    return m;
}

ParameterSet random_params(const ModelSpec& spec, std::uint64_t seed) {
    ParameterSet p = init_params(spec);
    Rng rng(seed);
    for (auto& l : p.layers)
        for (double& v : l.weight.data()) v = 0.3 * rng.gaussian();
    return p;
}

void bm_svd(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Mat a = random_mat(n, n / 2, 1);
    for (auto _ : state) benchmark::DoNotOptimize(svd(a));
}
BENCHMARK(bm_svd)->Arg(16)->Arg(32)->Arg(64);

void bm_polar(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Mat a = random_mat(n, n / 2, 2);
    for (auto _ : state) benchmark::DoNotOptimize(polar_decompose(a));
}
BENCHMARK(bm_polar)->Arg(16)->Arg(32);

void bm_forward(benchmark::State& state) {
    ModelSpec spec{32, {static_cast<std::size_t>(state.range(0))}, 12, 3};
    ParameterSet p = random_params(spec, 4);
    Rng rng(5);
    std::vector<double> x(32);
    for (double& v : x) v = rng.gaussian();
    for (auto _ : state) benchmark::DoNotOptimize(forward(p, x));
}
BENCHMARK(bm_forward)->Arg(32)->Arg(128);

void bm_backward(benchmark::State& state) {
    ModelSpec spec{32, {static_cast<std::size_t>(state.range(0))}, 12, 6};
    ParameterSet p = random_params(spec, 7);
    Rng rng(8);
    std::vector<double> x(32);
    for (double& v : x) v = rng.gaussian();
    for (auto _ : state) benchmark::DoNotOptimize(backward(p, x, {0, 3}, 1));
}
BENCHMARK(bm_backward)->Arg(32)->Arg(128);

void bm_ortho_grad(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<Mat> delta{random_mat(n, n, 9)};
    for (auto _ : state) benchmark::DoNotOptimize(ortho_loss_grad(delta));
}
BENCHMARK(bm_ortho_grad)->Arg(32)->Arg(64);

void bm_train_epoch(benchmark::State& state) {
    SynthTaskSpec sp;
    sp.num_tasks = 1;
    sp.input_dim = 12;
    sp.features_per_task = 6;
    sp.classes_per_task = 3;
    sp.samples_per_task = 256;
    sp.seed = 10;
    SynthSuite suite = make_suite(sp);
    ModelSpec ms{12, {32}, 3, 11};
    ParameterSet theta0 = init_params(ms);
    OrthoConfig oc;
    oc.lambda = 1e-3;
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 12;
    for (auto _ : state)
        benchmark::DoNotOptimize(finetune_task(theta0, suite.at(0, Split::train),
                                               suite.at(0, Split::val), {0, 3},
                                               oc, tc));
}
BENCHMARK(bm_train_epoch)->Unit(benchmark::kMillisecond);

void bm_ntk_gram(benchmark::State& state) {
    ModelSpec spec{24, {32}, 6, 13};
    ParameterSet p = random_params(spec, 14);
    Rng rng(15);
    std::vector<ScalarizedInput> xs;
    for (int i = 0; i < 32; ++i) {
        ScalarizedInput si;
        si.x.resize(24);
        for (double& v : si.x) v = rng.gaussian();
        si.class_index = static_cast<std::size_t>(i % 6);
        xs.push_back(std::move(si));
    }
    for (auto _ : state) benchmark::DoNotOptimize(ntk_gram(p, xs, xs));
}
BENCHMARK(bm_ntk_gram)->Unit(benchmark::kMillisecond);

void bm_merge(benchmark::State& state) {
    ModelSpec spec{40, {32}, 12, 16};
    ParameterSet theta0 = random_params(spec, 17);
    std::vector<TaskVector> taus;
    std::vector<double> alphas;
    for (std::uint64_t t = 0; t < 4; ++t) {
        taus.push_back(extract(theta0, random_params(spec, 18 + t), "t"));
        alphas.push_back(0.4);
    }
    for (auto _ : state) benchmark::DoNotOptimize(merge(theta0, taus, alphas));
}
BENCHMARK(bm_merge);

}  // namespace

BENCHMARK_MAIN();
