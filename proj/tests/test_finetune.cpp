#include <doctest.h>

#include <cmath>

#include "orthomerge/finetune.hpp"
#include "orthomerge/linalg.hpp"
#include "orthomerge/metrics.hpp"
#include "orthomerge/rng.hpp"

using namespace ortho;

namespace {

Mat random_mat(std::size_t m, std::size_t n, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Mat a(m, n);
    for (double& v : a.data()) v = scale * rng.gaussian();
    return a;
}

// Binary variant with a wide margin; plain SGD comfortably clears 95%.
SynthTaskSpec easy_spec(std::uint64_t seed) {
    SynthTaskSpec spec;
    spec.num_tasks = 1;
    spec.input_dim = 12;
    spec.features_per_task = 4;
    spec.classes_per_task = 2;
    spec.samples_per_task = 512;
    spec.noise_std = 0.0;
    spec.seed = seed;
    return spec;
}

SynthTaskSpec toy_spec(std::uint64_t seed) {
    SynthTaskSpec spec;
    spec.num_tasks = 1;
    spec.input_dim = 12;
    spec.features_per_task = 6;
    spec.classes_per_task = 3;
    spec.samples_per_task = 256;
    spec.noise_std = 0.0;  // cleanly separable
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("ortho loss on hand-checkable matrices") {
    CHECK(ortho_loss_single(Mat::identity(2)) == doctest::Approx(0.0));
    // 2I: gram = 4I, ||3I||_F^2 = 18
    CHECK(ortho_loss_single(Mat::identity(2).scaled(2.0)) == doctest::Approx(18.0));
    // [[1,1],[0,1]]: gram - I = [[0,1],[1,1]], squared norm 3
    CHECK(ortho_loss_single(Mat(2, 2, {1, 1, 0, 1})) == doctest::Approx(3.0));
}

TEST_CASE("ortho loss uses the smaller-dimension Gram for wide matrices") {
    // wide 2x3 orthonormal rows: W W^T = I_2 -> zero penalty
    Mat wide(2, 3, {1, 0, 0, 0, 1, 0});
    CHECK(ortho_loss_single(wide) == doctest::Approx(0.0));
    // column Gram of the same matrix would be singular, penalty nonzero
    CHECK(ortho_loss_single(wide.transpose()) == doctest::Approx(0.0));
}

TEST_CASE("ortho gradient on diagonal cases") {
    CHECK(ortho_loss_grad_single(Mat::identity(3)).max_abs() == 0.0);
    // 2I_2: 4*2I*(4I-I) = 24 I
    Mat g = ortho_loss_grad_single(Mat::identity(2).scaled(2.0));
    CHECK((g - Mat::identity(2).scaled(24.0)).max_abs() < 1e-12);
}

TEST_CASE("ortho gradient matches finite differences") {
    for (auto [m, n] : {std::pair<std::size_t, std::size_t>{5, 3}, {3, 5}, {4, 4}}) {
        Mat w = random_mat(m, n, 31 + m * 10 + n);
        Mat g = ortho_loss_grad_single(w);
        const double h = 1e-6;
        for (std::size_t e = 0; e < w.size(); ++e) {
            Mat plus = w, minus = w;
            plus.data()[e] += h;
            minus.data()[e] -= h;
            const double fd =
                (ortho_loss_single(plus) - ortho_loss_single(minus)) / (2 * h);
            CHECK(std::fabs(fd - g.data()[e]) / std::max(1.0, std::fabs(g.data()[e]))
                  < 1e-5);
        }
    }
}

TEST_CASE("composite gradient (task + lambda*ortho) matches finite differences") {
    ModelSpec mspec{6, {5}, 3, 2};
    ParameterSet theta0 = init_params(mspec);
    Rng rng(55);
    std::vector<double> x(6);
    for (double& v : x) v = rng.gaussian();
    const double lambda = 0.7;

    // delta displaced from zero so the ortho gradient is active
    std::vector<Mat> delta;
    for (const auto& l : theta0.layers)
        delta.push_back(random_mat(l.weight.rows(), l.weight.cols(), 77, 0.3));

    auto composite = [&](const std::vector<Mat>& d) {
        ParameterSet theta = theta0;
        for (std::size_t l = 0; l < d.size(); ++l) theta.layers[l].weight += d[l];
        Gradients g = backward(theta, x, {0, 3}, 1);
        return g.loss + lambda * ortho_loss(d);
    };

    ParameterSet theta = theta0;
    for (std::size_t l = 0; l < delta.size(); ++l) theta.layers[l].weight += delta[l];
    Gradients task_g = backward(theta, x, {0, 3}, 1);
    auto ortho_g = ortho_loss_grad(delta);

    const double h = 1e-5;
    for (std::size_t l = 0; l < delta.size(); ++l) {
        for (std::size_t e = 0; e < delta[l].size(); ++e) {
            auto plus = delta, minus = delta;
            plus[l].data()[e] += h;
            minus[l].data()[e] -= h;
            const double fd = (composite(plus) - composite(minus)) / (2 * h);
            const double an = task_g.by_layer[l].data()[e] +
                              lambda * ortho_g[l].data()[e];
            CHECK(std::fabs(fd - an) / std::max(1e-8, std::fabs(an)) < 1e-4);
        }
    }
}

TEST_CASE("zero epochs returns theta0 exactly") {
    SynthSuite suite = make_suite(toy_spec(3));
    ModelSpec mspec{12, {8}, 3, 4};
    ParameterSet theta0 = init_params(mspec);
    TrainConfig tc;
    tc.epochs = 0;
    FinetuneResult ft = finetune_task(theta0, suite.at(0, Split::train),
                                      suite.at(0, Split::val), {0, 3}, {}, tc);
    for (std::size_t l = 0; l < theta0.layers.size(); ++l)
        CHECK((ft.theta_star.layers[l].weight - theta0.layers[l].weight).max_abs() == 0.0);
    CHECK(ft.history.empty());
}

TEST_CASE("plain fine-tuning reaches 95% validation accuracy on a separable task") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SynthSuite suite = make_suite(easy_spec(seed));
        ModelSpec mspec{12, {32}, 2, seed + 10};
        ParameterSet theta0 = init_params(mspec);
        TrainConfig tc;
        tc.lr = 0.1;
        tc.seed = seed;
        FinetuneResult ft = finetune_task(theta0, suite.at(0, Split::train),
                                          suite.at(0, Split::val), {0, 2}, {}, tc);
        CHECK(ft.history.back().val_acc >= 0.95);
    }
}

TEST_CASE("huge lambda drives the update toward orthonormal columns") {
    SynthSuite suite = make_suite(toy_spec(5));
    ModelSpec mspec{12, {16}, 3, 9};
    ParameterSet theta0 = init_params(mspec);
    OrthoConfig ortho;
    ortho.lambda = 1e6;
    TrainConfig tc;
    tc.epochs = 80;
    tc.lr = 1e-7;  // penalty curvature scales with lambda; keep steps stable
    tc.momentum = 0.0;
    tc.seed = 5;
    FinetuneResult ft = finetune_task(theta0, suite.at(0, Split::train),
                                      suite.at(0, Split::val), {0, 3}, ortho, tc);
    CHECK(ft.history.back().ortho_loss < 0.1);
    // column angles of each update concentrate near 90 degrees
    for (const auto& d : ft.delta) {
        const Mat& tall = d.rows() >= d.cols() ? d : d.transpose();
        for (double ang : column_angles(tall)) CHECK(std::fabs(ang - 90.0) < 5.0);
    }
}

TEST_CASE("final penalty is non-increasing across the lambda range") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SynthSuite suite = make_suite(toy_spec(seed + 20));
        ModelSpec mspec{12, {16}, 3, seed};
        ParameterSet theta0 = init_params(mspec);
        double prev = -1.0;
        for (double lambda : {0.0, 0.1, 1.0, 10.0, 100.0}) {
            OrthoConfig ortho;
            ortho.lambda = lambda;
            TrainConfig tc;
            tc.epochs = 30;
            tc.lr = 1e-4;
            tc.momentum = 0.0;
            tc.seed = seed;
            FinetuneResult ft = finetune_task(theta0, suite.at(0, Split::train),
                                              suite.at(0, Split::val), {0, 3},
                                              ortho, tc);
            const double pen = ft.history.back().ortho_loss;
            if (prev >= 0.0) CHECK(pen <= prev * 1.05 + 1e-9);
            prev = pen;
        }
    }
}

TEST_CASE("trained layers satisfy the norm bound with their own deviation") {
    SynthSuite suite = make_suite(toy_spec(7));
    ModelSpec mspec{12, {16}, 3, 7};
    ParameterSet theta0 = init_params(mspec);
    for (double lambda : {0.0, 1.0, 100.0}) {
        OrthoConfig ortho;
        ortho.lambda = lambda;
        TrainConfig tc;
        tc.epochs = 25;
        tc.lr = 1e-4;
        tc.momentum = 0.0;
        tc.seed = 7;
        FinetuneResult ft = finetune_task(theta0, suite.at(0, Split::train),
                                          suite.at(0, Split::val), {0, 3}, ortho, tc);
        for (const auto& d : ft.delta) {
            const Mat& tall = d.rows() >= d.cols() ? d : d.transpose();
            const double dim = static_cast<double>(tall.cols());
            Mat g = gram(tall);
            for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
            const double xi = g.frobenius_norm() * g.frobenius_norm();
            const double fro2 = tall.frobenius_norm() * tall.frobenius_norm();
            CHECK(fro2 <= dim + std::sqrt(dim * xi) + 1e-9);
        }
    }
}

TEST_CASE("fixed seeds reproduce checkpoints bit-identically") {
    SynthSuite suite = make_suite(toy_spec(9));
    ModelSpec mspec{12, {8}, 3, 1};
    ParameterSet theta0 = init_params(mspec);
    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 33;
    OrthoConfig ortho;
    ortho.lambda = 1.0;
    FinetuneResult a = finetune_task(theta0, suite.at(0, Split::train),
                                     suite.at(0, Split::val), {0, 3}, ortho, tc);
    FinetuneResult b = finetune_task(theta0, suite.at(0, Split::train),
                                     suite.at(0, Split::val), {0, 3}, ortho, tc);
    for (std::size_t l = 0; l < a.theta_star.layers.size(); ++l)
        CHECK((a.theta_star.layers[l].weight - b.theta_star.layers[l].weight)
                  .max_abs() == 0.0);
}

TEST_CASE("low-rank mode trains a rank-limited update") {
    SynthSuite suite = make_suite(easy_spec(2));
    ModelSpec mspec{12, {32}, 2, 12};
    ParameterSet theta0 = init_params(mspec);
    OrthoConfig ortho;
    ortho.update_mode = UpdateMode::low_rank;
    ortho.rank = 2;
    ortho.lambda = 0.1;
    TrainConfig tc;
    tc.epochs = 80;
    tc.lr = 0.1;
    tc.seed = 2;
    FinetuneResult ft = finetune_task(theta0, suite.at(0, Split::train),
                                      suite.at(0, Split::val), {0, 2}, ortho, tc);
    CHECK(ft.history.back().val_acc >= 0.9);
    // the composed update has rank at most 2
    for (const auto& d : ft.delta) {
        SvdResult sv = svd(d);
        for (std::size_t i = 2; i < sv.s.size(); ++i)
            CHECK(sv.s[i] < 1e-10 * std::max(1.0, sv.s[0]));
    }
}

TEST_CASE("low-rank rejects out-of-range rank") {
    SynthSuite suite = make_suite(toy_spec(1));
    ModelSpec mspec{12, {4}, 3, 2};
    ParameterSet theta0 = init_params(mspec);
    OrthoConfig ortho;
    ortho.update_mode = UpdateMode::low_rank;
    ortho.rank = 5;  // > min(4, 3)
    TrainConfig tc;
    tc.epochs = 1;
    CHECK_THROWS_AS(finetune_task(theta0, suite.at(0, Split::train),
                                  suite.at(0, Split::val), {0, 3}, ortho, tc),
                    ShapeMismatch);
}

TEST_CASE("divergence is detected and reported with the epoch") {
    SynthSuite suite = make_suite(toy_spec(2));
    ModelSpec mspec{12, {8}, 3, 3};
    ParameterSet theta0 = init_params(mspec);
    OrthoConfig ortho;
    ortho.lambda = 1e6;  // penalty grows as ||delta||^4, so big steps overflow fast
    TrainConfig tc;
    tc.epochs = 50;
    tc.lr = 0.05;
    tc.seed = 2;
    try {
        finetune_task(theta0, suite.at(0, Split::train), suite.at(0, Split::val),
                      {0, 3}, ortho, tc);
        FAIL("expected DivergenceDetected");
    } catch (const DivergenceDetected& e) {
        CHECK(e.epoch >= 0);
    }
}

TEST_CASE("regularized_layers restricts the penalty to a subset") {
    SynthSuite suite = make_suite(toy_spec(4));
    ModelSpec mspec{12, {8}, 3, 6};
    ParameterSet theta0 = init_params(mspec);
    OrthoConfig ortho;
    ortho.lambda = 1e5;
    ortho.regularized_layers = {"layer1"};
    TrainConfig tc;
    tc.epochs = 80;
    tc.lr = 1e-6;
    tc.momentum = 0.0;
    tc.seed = 4;
    FinetuneResult ft = finetune_task(theta0, suite.at(0, Split::train),
                                      suite.at(0, Split::val), {0, 3}, ortho, tc);
    // only layer1's update is pushed toward orthonormality
    CHECK(ortho_loss_single(ft.delta[1]) < 0.5);
    CHECK(ortho_loss_single(ft.delta[0]) > 1.0);
}
