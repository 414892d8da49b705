#include <doctest.h>

#include <cmath>

#include "orthomerge/linalg.hpp"
#include "orthomerge/metrics.hpp"
#include "orthomerge/rng.hpp"

using namespace ortho;

namespace {

ParameterSet random_params(const ModelSpec& spec, std::uint64_t seed) {
    ParameterSet p = init_params(spec);
    Rng rng(seed);
    for (auto& l : p.layers)
        for (double& v : l.weight.data()) v = rng.gaussian();
    return p;
}

TaskVector random_tau(const ParameterSet& anchor, std::uint64_t seed,
                      double scale = 0.5) {
    ParameterSet star = anchor;
    Rng rng(seed);
    for (auto& l : star.layers)
        for (double& v : l.weight.data()) v += scale * rng.gaussian();
    return extract(anchor, star, "t");
}

TaskVector zero_tau(const ParameterSet& anchor) {
    return extract(anchor, anchor, "z");
}

TaskDataset tiny_dataset(std::size_t n, std::size_t dim, std::size_t classes,
                         std::uint64_t seed) {
    TaskDataset ds;
    ds.task_id = "task0";
    Rng rng(seed);
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> x(dim);
        for (double& v : x) v = rng.gaussian();
        ds.inputs.push_back(std::move(x));
        ds.labels.push_back(rng.index(classes));
    }
    return ds;
}

}  // namespace

TEST_CASE("accuracy of a perfect and a constant predictor") {
    // single linear layer, identity weights: logits echo the input
    ModelSpec spec{3, {}, 3, 1};
    ParameterSet id = init_params(spec);
    id.layers[0].weight = Mat::identity(3);

    TaskDataset ds;
    ds.task_id = "task0";
    for (std::size_t s = 0; s < 30; ++s) {
        std::vector<double> x(3, 0.0);
        x[s % 3] = 1.0;
        ds.inputs.push_back(x);
        ds.labels.push_back(s % 3);
    }
    CHECK(accuracy(id, ds, {0, 3}) == 1.0);

    // constant predictor (always class 0) against uniform labels: 1/C
    ParameterSet constant = init_params(spec);
    constant.layers[0].weight = Mat(3, 3);
    TaskDataset uniform = ds;
    for (std::size_t s = 0; s < 30; ++s) uniform.labels[s] = s % 3;
    // ties at zero logits resolve to the first class; 10 of 30 labels are 0
    CHECK(accuracy(constant, uniform, {0, 3}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("accuracy rejects an empty dataset") {
    ModelSpec spec{3, {}, 3, 1};
    ParameterSet p = init_params(spec);
    TaskDataset empty;
    CHECK_THROWS_AS(accuracy(p, empty, {0, 3}), EmptyDataset);
}

TEST_CASE("normalized accuracy ratios") {
    CHECK(normalized_accuracy({0.8, 0.6}, {0.8, 0.6}) == doctest::Approx(100.0));
    CHECK(normalized_accuracy({0.5}, {1.0}) == doctest::Approx(50.0));
    CHECK(normalized_accuracy({1.0}, {0.9}) == doctest::Approx(111.11111).epsilon(1e-4));
    // scale covariance
    CHECK(normalized_accuracy({0.4, 0.9}, {0.5, 0.8}) ==
          doctest::Approx(normalized_accuracy({0.2, 0.45}, {0.25, 0.4})));
    CHECK_THROWS_AS(normalized_accuracy({0.5}, {0.0}), ZeroDenominator);
    CHECK_THROWS_AS(normalized_accuracy({0.5, 0.5}, {0.5}), ShapeMismatch);
}

TEST_CASE("interference vanishes for a zero task vector") {
    ModelSpec spec{4, {5}, 4, 3};
    ParameterSet theta0 = random_params(spec, 4);
    TaskDataset ds = tiny_dataset(16, 4, 2, 5);
    InterferenceStats st = interference(zero_tau(theta0), theta0, ds, {0, 2});
    CHECK(st.mean_abs == 0.0);
}

TEST_CASE("interference is absolutely homogeneous in tau") {
    ModelSpec spec{4, {5}, 4, 6};
    ParameterSet theta0 = random_params(spec, 7);
    TaskDataset ds = tiny_dataset(24, 4, 2, 8);
    TaskVector tau = random_tau(theta0, 9);
    InterferenceStats base = interference(tau, theta0, ds, {0, 2});

    TaskVector scaled = tau;
    for (auto& l : scaled.layers) l.weight = l.weight.scaled(3.0);
    InterferenceStats big = interference(scaled, theta0, ds, {0, 2});
    CHECK(big.mean_abs == doctest::Approx(3.0 * base.mean_abs).epsilon(1e-12));
    CHECK(big.mean_cos == doctest::Approx(base.mean_cos).epsilon(1e-12));
}

TEST_CASE("interference skips dead-Jacobian samples and sees disjoint support") {
    ModelSpec spec{4, {5}, 4, 10};
    ParameterSet theta0 = random_params(spec, 11);

    // zero inputs kill the first-layer Jacobian block; a tau supported only
    // there produces zero interference and a fully-skipped cosine
    TaskDataset zeros;
    zeros.task_id = "task0";
    for (int s = 0; s < 8; ++s) {
        zeros.inputs.push_back(std::vector<double>(4, 0.0));
        zeros.labels.push_back(0);
    }
    TaskVector tau = random_tau(theta0, 12);
    std::fill(tau.layers[1].weight.data().begin(),
              tau.layers[1].weight.data().end(), 0.0);
    InterferenceStats st = interference(tau, theta0, zeros, {0, 2});
    CHECK(st.mean_abs == 0.0);
    // the head Jacobian is nonzero at zero input only via hidden biases,
    // which this model lacks: tanh(0) = 0, so J vanishes entirely
    CHECK(st.skipped == 8);
}

TEST_CASE("disentanglement gap identities") {
    ModelSpec spec{4, {6}, 4, 13};
    ParameterSet theta0 = random_params(spec, 14);
    TaskDataset ds = tiny_dataset(12, 4, 2, 15);
    TaskVector tau_t = random_tau(theta0, 16);

    CHECK(disentanglement_gap(theta0, tau_t, zero_tau(theta0), ds, {0, 2}) == 0.0);

    // tau_j on a dead path: zero input rows feed the hidden layer nothing
    TaskDataset zeros;
    zeros.task_id = "task0";
    for (int s = 0; s < 6; ++s) {
        zeros.inputs.push_back(std::vector<double>(4, 0.0));
        zeros.labels.push_back(1);
    }
    TaskVector tau_j = random_tau(theta0, 17);
    std::fill(tau_j.layers[1].weight.data().begin(),
              tau_j.layers[1].weight.data().end(), 0.0);
    CHECK(disentanglement_gap(theta0, zero_tau(theta0), tau_j, zeros, {0, 2}) == 0.0);

    // generic tau_j produces a positive gap
    CHECK(disentanglement_gap(theta0, tau_t, tau_j, ds, {0, 2}) > 0.0);
}

TEST_CASE("output scale is positive for a generic model") {
    ModelSpec spec{4, {6}, 4, 18};
    ParameterSet theta0 = random_params(spec, 19);
    TaskDataset ds = tiny_dataset(12, 4, 2, 20);
    CHECK(output_scale(theta0, random_tau(theta0, 21), ds, {0, 2}) > 0.0);
}

TEST_CASE("ntk gram diagonal, symmetry, and PSD") {
    ModelSpec spec{5, {6}, 4, 22};
    ParameterSet theta0 = random_params(spec, 23);
    Rng rng(24);
    std::vector<ScalarizedInput> xs;
    for (int s = 0; s < 10; ++s) {
        ScalarizedInput si;
        si.x.resize(5);
        for (double& v : si.x) v = rng.gaussian();
        si.class_index = static_cast<std::size_t>(s % 4);
        xs.push_back(std::move(si));
    }

    Mat k = ntk_gram(theta0, xs, xs);
    REQUIRE(k.rows() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        JacobianRecord rec = jacobian(theta0, xs[i].x, xs[i].class_index);
        double sq = 0.0;
        for (double v : rec.flatten()) sq += v * v;
        CHECK(k(i, i) == doctest::Approx(sq).epsilon(1e-10));
        CHECK(k(i, i) >= 0.0);
        for (std::size_t j = 0; j < 10; ++j)
            CHECK(k(i, j) == doctest::Approx(k(j, i)).epsilon(1e-10));
    }
    SymEigResult eig = sym_eig(k);
    for (double ev : eig.values) CHECK(ev >= -1e-8);
}

TEST_CASE("ntk localization ratio is small on a disjoint-feature suite") {
    SynthTaskSpec sspec;
    sspec.num_tasks = 2;
    sspec.input_dim = 24;
    sspec.features_per_task = 6;
    sspec.overlap_ratio = 0.0;
    sspec.classes_per_task = 3;
    sspec.samples_per_task = 64;
    sspec.seed = 25;
    SynthSuite suite = make_suite(sspec);

    // anchor whose first layer routes each task's features to its own
    // hidden block, with a head matched to the blocks: the Jacobians of
    // different tasks then share no coordinates at all
    ModelSpec mspec{24, {8}, 6, 26};
    ParameterSet theta0 = init_params(mspec);
    for (auto& l : theta0.layers)
        std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0);
    for (std::size_t t = 0; t < 2; ++t) {
        const auto& feats = suite.at(t, Split::train).feature_set;
        for (std::size_t f = 0; f < feats.size(); ++f)
            theta0.layers[0].weight(feats[f], t * 4 + (f % 4)) = 0.7;
        for (std::size_t h = 0; h < 4; ++h)
            for (std::size_t c = 0; c < 3; ++c)
                theta0.layers[1].weight(t * 4 + h, t * 3 + c) = 0.5 + 0.1 * h;
    }
    const double ratio = ntk_localization_ratio(theta0, suite, Split::train, 16);
    CHECK(ratio < 0.2);

    // a dense random anchor has no such structure
    ParameterSet dense = random_params(mspec, 27);
    CHECK(ntk_localization_ratio(dense, suite, Split::train, 16) > ratio);
}

TEST_CASE("angle histogram of orthonormal and degenerate column sets") {
    AngleHistogram ortho90 = angle_histogram(sample_stiefel(8, 4, 28), 18);
    REQUIRE(ortho90.bin_edges.size() == 19);
    CHECK(ortho90.bin_edges.front() == 0.0);
    CHECK(ortho90.bin_edges.back() == 180.0);
    std::size_t total = 0;
    for (std::size_t c : ortho90.counts) total += c;
    CHECK(total == 6);  // C(4,2) column pairs
    CHECK(ortho90.mean_dev_from_90 < 1e-9);

    // identical columns: every pairwise angle is 0
    Mat same(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) same(i, j) = i == 1 ? 2.0 : 1.0;
    AngleHistogram zero = angle_histogram(same, 4);
    CHECK(zero.counts[0] == 3);
    CHECK(zero.mean_dev_from_90 == doctest::Approx(90.0));
    CHECK(zero.std_dev == doctest::Approx(0.0));

    CHECK_THROWS_AS(angle_histogram(Mat(3, 2), 4), DegenerateColumn);
    CHECK_THROWS_AS(angle_histogram(sample_stiefel(4, 3, 1), 1), ShapeMismatch);
}
