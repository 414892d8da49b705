#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orthomerge/arith.hpp"
#include "orthomerge/finetune.hpp"
#include "orthomerge/io.hpp"
#include "orthomerge/linalg.hpp"
#include "orthomerge/metrics.hpp"
#include "orthomerge/net.hpp"
#include "orthomerge/rng.hpp"
#include "orthomerge/synth.hpp"
#include "orthomerge/theory.hpp"

namespace fs = std::filesystem;
using namespace ortho;

namespace {

// Exit codes: 0 ok, 1 validation/metric failure, 2 usage error, 3 numerical.
constexpr int kExitOk = 0;
constexpr int kExitValidationFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::string join_args(int argc, char** argv) {
    std::string out;
    for (int i = 0; i < argc; ++i) {
        if (i) out += ' ';
        out += argv[i];
    }
    return out;
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::size_t thread_cap() {
    const char* env = std::getenv("ORTHOMERGE_THREADS");
    if (!env) return 1;
    const long v = std::atol(env);
    return v > 0 ? static_cast<std::size_t>(v) : 1;
}

struct ManifestBuilder {
    io::RunManifest m;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void input(const fs::path& p) { m.inputs.push_back(p.string()); }
    void output(const fs::path& p) { m.outputs.push_back(p.string()); }
    void seed(std::uint64_t s) { m.seeds.push_back(s); }
    void write(const fs::path& out_dir) {
        m.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - start)
                              .count();
        io::write_manifest(out_dir / "manifest.json", m);
    }
};

std::pair<ParameterSet, io::CheckpointMeta> load_model(const fs::path& path) {
    if (!fs::exists(path))
        throw std::runtime_error("missing model file: " + path.string());
    return io::load_checkpoint(path);
}

std::pair<TaskVector, ModelSpec> load_tau(const fs::path& path) {
    if (!fs::exists(path))
        throw std::runtime_error("missing task vector file: " + path.string());
    return io::load_task_vector(path);
}

TaskDataset load_data(const fs::path& path) {
    if (!fs::exists(path))
        throw std::runtime_error("missing dataset file: " + path.string());
    return io::load_dataset(path);
}

LogitSlice make_slice(const ModelSpec& spec, std::size_t offset, std::size_t len) {
    if (len == 0) {
        if (offset >= spec.num_classes)
            throw ShapeMismatch("slice offset beyond head width");
        len = spec.num_classes - offset;
    }
    if (offset + len > spec.num_classes)
        throw ShapeMismatch("logit slice exceeds head width");
    return {offset, len};
}

std::string suite_to_json(const SynthSuite& suite) {
    const SynthTaskSpec& sp = suite.spec;
    std::string out = "{\"spec\":{";
    out += "\"num_tasks\":" + std::to_string(sp.num_tasks);
    out += ",\"input_dim\":" + std::to_string(sp.input_dim);
    out += ",\"features_per_task\":" + std::to_string(sp.features_per_task);
    out += ",\"overlap_ratio\":" + io::fmt_double(sp.overlap_ratio);
    out += ",\"classes_per_task\":" + std::to_string(sp.classes_per_task);
    out += ",\"samples_per_task\":" + std::to_string(sp.samples_per_task);
    out += ",\"noise_std\":" + io::fmt_double(sp.noise_std);
    out += ",\"seed\":" + std::to_string(sp.seed);
    out += "},\"mean\":[";
    for (std::size_t i = 0; i < suite.mean.size(); ++i) {
        if (i) out += ',';
        out += io::fmt_double(suite.mean[i]);
    }
    out += "],\"scale\":[";
    for (std::size_t i = 0; i < suite.scale.size(); ++i) {
        if (i) out += ',';
        out += io::fmt_double(suite.scale[i]);
    }
    out += "],\"zero_variance_coords\":[";
    for (std::size_t i = 0; i < suite.zero_variance_coords.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(suite.zero_variance_coords[i]);
    }
    out += "]}\n";
    return out;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

// ---------------------------------------------------------------- gen

struct GenArgs {
    SynthTaskSpec spec;
    std::string out;
};

int cmd_gen(const GenArgs& a, ManifestBuilder& mb) {
    SynthSuite suite = make_suite(a.spec);
    const fs::path dir(a.out);
    mb.seed(a.spec.seed);
    for (std::size_t t = 0; t < a.spec.num_tasks; ++t)
        for (Split s : {Split::train, Split::val, Split::test}) {
            const fs::path p =
                dir / ("task" + std::to_string(t) + "_" + split_name(s) + ".json");
            io::write_dataset(p, suite.at(t, s));
            mb.output(p);
        }
    io::atomic_write(dir / "suite.json", suite_to_json(suite));
    mb.output(dir / "suite.json");
    mb.write(dir);
    std::printf("gen: %zu tasks x 3 splits -> %s\n", a.spec.num_tasks,
                a.out.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------- init

struct InitArgs {
    ModelSpec spec;
    std::string hidden;  // comma-separated
    std::string out;
};

int cmd_init(InitArgs a, ManifestBuilder& mb) {
    if (!a.hidden.empty()) {
        std::stringstream ss(a.hidden);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty())
                a.spec.hidden_dims.push_back(
                    static_cast<std::size_t>(std::stoul(item)));
    }
    a.spec.validate();
    ParameterSet theta0 = init_params(a.spec);
    const fs::path dir(a.out);
    io::CheckpointMeta meta;
    meta.seed = a.spec.seed;
    io::write_checkpoint(dir / "theta0.json", theta0, meta);
    mb.seed(a.spec.seed);
    mb.output(dir / "theta0.json");
    mb.write(dir);
    std::printf("init: %zu params -> %s\n", theta0.param_count(),
                (dir / "theta0.json").string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string theta0, task, val, out;
    double lambda = 0.0;
    std::string mode = "full";
    std::size_t rank = 1;
    std::string layers = "all";
    TrainConfig train;
    std::size_t slice_offset = 0, slice_len = 0;
};

int cmd_train(const TrainArgs& a, ManifestBuilder& mb) {
    auto [theta0, meta0] = load_model(a.theta0);
    TaskDataset train_set = load_data(a.task);
    TaskDataset val_set = a.val.empty() ? train_set : load_data(a.val);
    mb.input(a.theta0);
    mb.input(a.task);
    if (!a.val.empty()) mb.input(a.val);
    mb.seed(a.train.seed);

    OrthoConfig ortho;
    ortho.lambda = a.lambda;
    ortho.update_mode = a.mode == "low-rank" ? UpdateMode::low_rank : UpdateMode::full;
    ortho.rank = a.rank;
    if (a.layers != "all") {
        std::stringstream ss(a.layers);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) ortho.regularized_layers.push_back(item);
    }
    const LogitSlice slice =
        make_slice(theta0.spec, a.slice_offset, a.slice_len);

    FinetuneResult ft = finetune_task(theta0, train_set, val_set, slice, ortho,
                                      a.train);
    const fs::path dir(a.out);
    io::CheckpointMeta meta;
    meta.seed = a.train.seed;
    meta.lambda = a.lambda;
    meta.task_id = train_set.task_id;
    io::write_checkpoint(dir / "checkpoint.json", ft.theta_star, meta);
    io::write_task_vector(dir / "tau.json", theta0.spec,
                          extract(theta0, ft.theta_star, train_set.task_id));
    io::atomic_write(dir / "history.csv", io::history_to_csv(ft.history));
    mb.output(dir / "checkpoint.json");
    mb.output(dir / "tau.json");
    mb.output(dir / "history.csv");
    mb.write(dir);
    const double final_acc =
        ft.history.empty() ? 0.0 : ft.history.back().val_acc;
    std::printf("train: task=%s lambda=%g epochs=%zu final_val_acc=%.4f\n",
                train_set.task_id.c_str(), a.lambda, a.train.epochs, final_acc);
    return kExitOk;
}

// ------------------------------------------------------- merge / negate

struct MergeArgs {
    std::string theta0, out;
    std::vector<std::string> taus;
    std::vector<double> alphas;
};

std::vector<double> broadcast_alphas(const std::vector<double>& alphas,
                                     std::size_t n) {
    if (alphas.empty()) return std::vector<double>(n, 1.0);
    if (alphas.size() == 1) return std::vector<double>(n, alphas[0]);
    if (alphas.size() != n)
        throw ShapeMismatch("got " + std::to_string(alphas.size()) +
                            " alphas for " + std::to_string(n) + " task vectors");
    return alphas;
}

int cmd_merge(const MergeArgs& a, ManifestBuilder& mb) {
    auto [theta0, meta0] = load_model(a.theta0);
    mb.input(a.theta0);
    std::vector<TaskVector> taus;
    for (const auto& p : a.taus) {
        taus.push_back(load_tau(p).first);
        mb.input(p);
    }
    const std::vector<double> alphas = broadcast_alphas(a.alphas, taus.size());
    ParameterSet merged = merge(theta0, taus, alphas);
    const fs::path dir(a.out);
    // keep theta0's meta so an alpha=0 merge reproduces the input bytes
    io::write_checkpoint(dir / "merged.json", merged, meta0);
    mb.output(dir / "merged.json");
    mb.write(dir);
    std::printf("merge: %zu task vectors -> %s\n", taus.size(),
                (dir / "merged.json").string().c_str());
    return kExitOk;
}

struct NegateArgs {
    std::string theta0, tau, out;
    double alpha = 1.0;
};

int cmd_negate(const NegateArgs& a, ManifestBuilder& mb) {
    auto [theta0, meta0] = load_model(a.theta0);
    auto [tau, spec] = load_tau(a.tau);
    mb.input(a.theta0);
    mb.input(a.tau);
    ParameterSet negated = negate(theta0, tau, a.alpha);
    const fs::path dir(a.out);
    io::write_checkpoint(dir / "negated.json", negated, meta0);
    mb.output(dir / "negated.json");
    mb.write(dir);
    std::printf("negate: alpha=%g -> %s\n", a.alpha,
                (dir / "negated.json").string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------- sweep-alpha

struct SweepArgs {
    std::string theta0, out;
    std::vector<std::string> taus, datas;
    std::size_t classes = 0;
};

int cmd_sweep_alpha(const SweepArgs& a, ManifestBuilder& mb) {
    auto [theta0, meta0] = load_model(a.theta0);
    mb.input(a.theta0);
    std::vector<TaskVector> taus;
    for (const auto& p : a.taus) {
        taus.push_back(load_tau(p).first);
        mb.input(p);
    }
    if (a.datas.size() != a.taus.size())
        throw ShapeMismatch("need one dataset per task vector");
    std::vector<TaskDataset> sets;
    for (const auto& p : a.datas) {
        sets.push_back(load_data(p));
        mb.input(p);
    }
    const std::size_t C = a.classes;
    if (C * taus.size() > theta0.spec.num_classes)
        throw ShapeMismatch("per-task classes exceed the model head");

    auto eval = [&](const ParameterSet& merged)
        -> std::pair<double, std::vector<double>> {
        std::vector<double> accs(sets.size());
        for (std::size_t t = 0; t < sets.size(); ++t)
            accs[t] = accuracy(merged, sets[t], {t * C, C});
        return {pairwise_sum(accs) / static_cast<double>(sets.size()), accs};
    };
    GridSearchResult gs = grid_search_alpha(theta0, taus, eval);
    const fs::path dir(a.out);
    io::atomic_write(dir / "alpha_table.csv", io::alpha_table_to_csv(gs));
    ParameterSet best = merge_uniform(theta0, taus, gs.best_alpha);
    io::write_checkpoint(dir / "merged_best.json", best, meta0);
    mb.output(dir / "alpha_table.csv");
    mb.output(dir / "merged_best.json");
    mb.write(dir);
    std::printf("sweep-alpha: best_alpha=%.2f objective=%.6f\n", gs.best_alpha,
                gs.best_objective);
    return kExitOk;
}

// ----------------------------------------------------------------- eval

void write_metrics(const fs::path& dir, const MetricsReport& report,
                   const std::string& csv, ManifestBuilder& mb) {
    io::atomic_write(dir / "report.json", io::metrics_report_to_json(report));
    io::atomic_write(dir / "report.csv", csv);
    mb.output(dir / "report.json");
    mb.output(dir / "report.csv");
}

struct EvalCommon {
    std::string out;
    bool svg = false;
};

int cmd_eval_accuracy(const std::string& model, const std::string& data,
                      std::size_t offset, std::size_t len, const EvalCommon& c,
                      ManifestBuilder& mb) {
    auto [params, meta] = load_model(model);
    TaskDataset ds = load_data(data);
    mb.input(model);
    mb.input(data);
    const double acc = accuracy(params, ds, make_slice(params.spec, offset, len));
    MetricsReport report;
    report.per_task_accuracy = {acc};
    report.meta["accuracy"] = acc;
    write_metrics(c.out, report, "metric,value\naccuracy," + io::fmt_double(acc) + "\n", mb);
    mb.write(c.out);
    std::printf("accuracy %.6f\n", acc);
    return kExitOk;
}

int cmd_eval_norm_acc(const std::string& merged,
                      const std::vector<std::string>& singles,
                      const std::vector<std::string>& datas, std::size_t classes,
                      const EvalCommon& c, ManifestBuilder& mb) {
    if (singles.size() != datas.size())
        throw ShapeMismatch("need one dataset per single-task model");
    auto [merged_params, meta] = load_model(merged);
    mb.input(merged);
    std::vector<double> merged_acc, single_acc;
    for (std::size_t t = 0; t < singles.size(); ++t) {
        auto [single, smeta] = load_model(singles[t]);
        TaskDataset ds = load_data(datas[t]);
        mb.input(singles[t]);
        mb.input(datas[t]);
        const LogitSlice slice{t * classes, classes};
        merged_acc.push_back(accuracy(merged_params, ds, slice));
        single_acc.push_back(accuracy(single, ds, slice));
    }
    const double na = normalized_accuracy(merged_acc, single_acc);
    MetricsReport report;
    report.per_task_accuracy = merged_acc;
    report.normalized_acc = na;
    std::string csv = "task,merged_acc,single_acc\n";
    for (std::size_t t = 0; t < merged_acc.size(); ++t)
        csv += std::to_string(t) + "," + io::fmt_double(merged_acc[t]) + "," +
               io::fmt_double(single_acc[t]) + "\n";
    write_metrics(c.out, report, csv, mb);
    mb.write(c.out);
    std::printf("norm-acc %.2f\n", na);
    return kExitOk;
}

int cmd_eval_similarity(const std::vector<std::string>& tau_paths,
                        const EvalCommon& c, ManifestBuilder& mb) {
    std::vector<TaskVector> taus;
    for (const auto& p : tau_paths) {
        taus.push_back(load_tau(p).first);
        mb.input(p);
    }
    Mat s = cosine_similarity_matrix(taus);
    double off = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.rows(); ++i)
        for (std::size_t j = 0; j < s.cols(); ++j)
            if (i != j) {
                off += std::fabs(s(i, j));
                ++pairs;
            }
    MetricsReport report;
    report.cosine_matrix = s;
    report.mean_abs_cos = pairs ? off / static_cast<double>(pairs) : 0.0;
    write_metrics(c.out, report, io::matrix_to_csv(s), mb);
    if (c.svg) {
        io::atomic_write(fs::path(c.out) / "similarity.svg", io::heatmap_to_svg(s));
        mb.output(fs::path(c.out) / "similarity.svg");
    }
    mb.write(c.out);
    std::printf("similarity: %zux%zu mean_abs_cos=%.6f\n", s.rows(), s.cols(),
                report.mean_abs_cos);
    return kExitOk;
}

int cmd_eval_angles(const std::string& tau_path, const std::string& layer,
                    std::size_t bins, const EvalCommon& c, ManifestBuilder& mb) {
    auto [params, meta] = load_model(tau_path);  // checkpoint or task vector
    mb.input(tau_path);
    AngleHistogram h = angle_histogram(params.layer(layer).weight, bins);
    MetricsReport report;
    report.meta["mean_dev_from_90"] = h.mean_dev_from_90;
    report.meta["std_dev"] = h.std_dev;
    write_metrics(c.out, report, io::histogram_to_csv(h), mb);
    if (c.svg) {
        io::atomic_write(fs::path(c.out) / "angles.svg", io::histogram_to_svg(h));
        mb.output(fs::path(c.out) / "angles.svg");
    }
    mb.write(c.out);
    std::printf("angles: layer=%s mean_dev_from_90=%.4f\n", layer.c_str(),
                h.mean_dev_from_90);
    return kExitOk;
}

int cmd_eval_interference(const std::string& theta0_path, const std::string& tau_path,
                          const std::string& data, std::size_t offset,
                          std::size_t len, const EvalCommon& c,
                          ManifestBuilder& mb) {
    auto [theta0, meta] = load_model(theta0_path);
    auto [tau, spec] = load_tau(tau_path);
    TaskDataset ds = load_data(data);
    mb.input(theta0_path);
    mb.input(tau_path);
    mb.input(data);
    InterferenceStats st =
        interference(tau, theta0, ds, make_slice(theta0.spec, offset, len));
    MetricsReport report;
    report.interference_abs = Mat(1, 1, {st.mean_abs});
    report.interference_cos = Mat(1, 1, {st.mean_cos});
    report.meta["mean_abs"] = st.mean_abs;
    report.meta["mean_cos"] = st.mean_cos;
    report.meta["skipped"] = static_cast<double>(st.skipped);
    std::string csv = "metric,value\nmean_abs," + io::fmt_double(st.mean_abs) +
                      "\nmean_cos," + io::fmt_double(st.mean_cos) + "\nskipped," +
                      std::to_string(st.skipped) + "\n";
    write_metrics(c.out, report, csv, mb);
    mb.write(c.out);
    std::printf("interference: mean_abs=%.6g mean_cos=%.6g skipped=%zu\n",
                st.mean_abs, st.mean_cos, st.skipped);
    return kExitOk;
}

int cmd_eval_ntk(const std::string& theta0_path, const SynthTaskSpec& spec,
                 std::size_t max_per_task, const EvalCommon& c,
                 ManifestBuilder& mb) {
    auto [theta0, meta] = load_model(theta0_path);
    mb.input(theta0_path);
    mb.seed(spec.seed);
    SynthSuite suite = make_suite(spec);
    const double ratio =
        ntk_localization_ratio(theta0, suite, Split::train, max_per_task);
    MetricsReport report;
    report.ntk_localization_ratio = ratio;
    write_metrics(c.out, report,
                  "metric,value\nntk_localization_ratio," + io::fmt_double(ratio) + "\n",
                  mb);
    mb.write(c.out);
    std::printf("ntk: localization_ratio=%.6f\n", ratio);
    return kExitOk;
}

int cmd_eval_gap(const std::string& theta0_path, const std::string& tau_t_path,
                 const std::string& tau_j_path, const std::string& data,
                 std::size_t offset, std::size_t len, const EvalCommon& c,
                 ManifestBuilder& mb) {
    auto [theta0, meta] = load_model(theta0_path);
    auto [tau_t, spec_t] = load_tau(tau_t_path);
    auto [tau_j, spec_j] = load_tau(tau_j_path);
    TaskDataset ds = load_data(data);
    mb.input(theta0_path);
    mb.input(tau_t_path);
    mb.input(tau_j_path);
    mb.input(data);
    const LogitSlice slice = make_slice(theta0.spec, offset, len);
    const double gap = disentanglement_gap(theta0, tau_t, tau_j, ds, slice);
    const double scale = output_scale(theta0, tau_t, ds, slice);
    MetricsReport report;
    report.meta["gap"] = gap;
    report.meta["output_scale"] = scale;
    report.meta["relative_gap"] = scale > 0.0 ? gap / scale : 0.0;
    std::string csv = "metric,value\ngap," + io::fmt_double(gap) +
                      "\noutput_scale," + io::fmt_double(scale) + "\nrelative_gap," +
                      io::fmt_double(report.meta["relative_gap"]) + "\n";
    write_metrics(c.out, report, csv, mb);
    mb.write(c.out);
    std::printf("gap: abs=%.6g relative=%.6g\n", gap, report.meta["relative_gap"]);
    return kExitOk;
}

// ------------------------------------------------------------- validate

int cmd_validate(const std::string& which, std::size_t trials,
                 std::uint64_t seed, const std::string& out,
                 ManifestBuilder& mb) {
    std::vector<ValidationReport> reports;
    auto want = [&](const char* name) { return which == name || which == "all"; };
    if (want("norm-bound")) reports.push_back(validate_norm_bound(trials, 8, 4, seed));
    if (want("psd")) reports.push_back(validate_psd_inequality(trials, 5, seed));
    if (want("stiefel")) reports.push_back(validate_stiefel_inner(trials, 16, 4, seed));
    if (want("polar"))
        reports.push_back(
            validate_polar_error_terms(12, 5, {0.0, 0.1, 1.0}, 200, seed));
    if (want("alignment"))
        reports.push_back(validate_directional_alignment(default_tfs_experiment()));
    if (want("tfs")) reports.push_back(validate_tfs_chain(default_tfs_experiment()));
    if (want("angle-control"))
        reports.push_back(validate_angle_control(default_angle_experiment()));

    bool all_pass = true;
    for (const auto& r : reports) {
        std::printf("%s", r.summary().c_str());
        if (!out.empty()) {
            const fs::path p = fs::path(out) / (r.name + ".json");
            io::atomic_write(p, io::validation_report_to_json(r));
            mb.output(p);
        }
        mb.seed(r.seed);
        all_pass = all_pass && r.passed;
    }
    if (!out.empty()) mb.write(out);
    return all_pass ? kExitOk : kExitValidationFail;
}

}  // namespace

int main(int argc, char** argv) {
    (void)thread_cap();  // parsed for interface stability; core is single-threaded

    CLI::App app{"orthomerge: task-vector arithmetic laboratory"};
    app.require_subcommand(1);
    ManifestBuilder mb;
    mb.m.command_line = join_args(argc, argv);
    mb.m.config_hash = fnv1a_hex(mb.m.command_line);

    std::function<int()> action;

    // gen
    auto gen_args = std::make_shared<GenArgs>();
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic task suite");
    gen->add_option("--tasks", gen_args->spec.num_tasks);
    gen->add_option("--input-dim", gen_args->spec.input_dim);
    gen->add_option("--feat-per-task", gen_args->spec.features_per_task);
    gen->add_option("--overlap", gen_args->spec.overlap_ratio);
    gen->add_option("--classes", gen_args->spec.classes_per_task);
    gen->add_option("--samples", gen_args->spec.samples_per_task);
    gen->add_option("--noise", gen_args->spec.noise_std);
    gen->add_option("--seed", gen_args->spec.seed);
    gen->add_option("--out", gen_args->out)->required();
    gen->callback([&, gen_args] { action = [&, gen_args] { return cmd_gen(*gen_args, mb); }; });

    // init
    auto init_args = std::make_shared<InitArgs>();
    CLI::App* ini = app.add_subcommand("init", "create a random anchor checkpoint");
    ini->add_option("--input-dim", init_args->spec.input_dim)->required();
    ini->add_option("--hidden", init_args->hidden);
    ini->add_option("--classes", init_args->spec.num_classes)->required();
    ini->add_option("--seed", init_args->spec.seed);
    ini->add_option("--out", init_args->out)->required();
    ini->callback([&, init_args] { action = [&, init_args] { return cmd_init(*init_args, mb); }; });

    // train
    auto train_args = std::make_shared<TrainArgs>();
    CLI::App* train = app.add_subcommand("train", "fine-tune one task from an anchor");
    train->add_option("--theta0", train_args->theta0)->required();
    train->add_option("--task", train_args->task)->required();
    train->add_option("--val", train_args->val);
    train->add_option("--lambda", train_args->lambda);
    train->add_option("--mode", train_args->mode)
        ->check(CLI::IsMember({"full", "low-rank"}));
    train->add_option("--rank", train_args->rank);
    train->add_option("--layers", train_args->layers);
    train->add_option("--epochs", train_args->train.epochs);
    train->add_option("--lr", train_args->train.lr);
    train->add_option("--momentum", train_args->train.momentum);
    train->add_option("--batch", train_args->train.batch_size);
    train->add_option("--seed", train_args->train.seed);
    train->add_option("--slice-offset", train_args->slice_offset);
    train->add_option("--slice-len", train_args->slice_len);
    train->add_option("--out", train_args->out)->required();
    train->callback(
        [&, train_args] { action = [&, train_args] { return cmd_train(*train_args, mb); }; });

    // merge
    auto merge_args = std::make_shared<MergeArgs>();
    CLI::App* mrg = app.add_subcommand("merge", "theta0 + sum alpha_t tau_t");
    mrg->add_option("--theta0", merge_args->theta0)->required();
    mrg->add_option("--tau", merge_args->taus)->required();
    mrg->add_option("--alpha", merge_args->alphas);
    mrg->add_option("--out", merge_args->out)->required();
    mrg->callback(
        [&, merge_args] { action = [&, merge_args] { return cmd_merge(*merge_args, mb); }; });

    // negate
    auto negate_args = std::make_shared<NegateArgs>();
    CLI::App* neg = app.add_subcommand("negate", "theta0 - alpha tau");
    neg->add_option("--theta0", negate_args->theta0)->required();
    neg->add_option("--tau", negate_args->tau)->required();
    neg->add_option("--alpha", negate_args->alpha);
    neg->add_option("--out", negate_args->out)->required();
    neg->callback(
        [&, negate_args] { action = [&, negate_args] { return cmd_negate(*negate_args, mb); }; });

    // sweep-alpha
    auto sweep_args = std::make_shared<SweepArgs>();
    CLI::App* sweep = app.add_subcommand("sweep-alpha", "21-point merge grid search");
    sweep->add_option("--theta0", sweep_args->theta0)->required();
    sweep->add_option("--tau", sweep_args->taus)->required();
    sweep->add_option("--data", sweep_args->datas)->required();
    sweep->add_option("--classes", sweep_args->classes)->required();
    sweep->add_option("--out", sweep_args->out)->required();
    sweep->callback([&, sweep_args] {
        action = [&, sweep_args] { return cmd_sweep_alpha(*sweep_args, mb); };
    });

    // eval
    CLI::App* eval = app.add_subcommand("eval", "metric reports");
    eval->require_subcommand(1);
    {
        auto c = std::make_shared<EvalCommon>();
        auto model = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto off = std::make_shared<std::size_t>(0);
        auto len = std::make_shared<std::size_t>(0);
        CLI::App* sub = eval->add_subcommand("accuracy", "slice accuracy of a model");
        sub->add_option("--model", *model)->required();
        sub->add_option("--data", *data)->required();
        sub->add_option("--slice-offset", *off);
        sub->add_option("--slice-len", *len);
        sub->add_option("--out", c->out)->required();
        sub->callback([&, c, model, data, off, len] {
            action = [&, c, model, data, off, len] {
                return cmd_eval_accuracy(*model, *data, *off, *len, *c, mb);
            };
        });
    }
    {
        auto c = std::make_shared<EvalCommon>();
        auto merged = std::make_shared<std::string>();
        auto singles = std::make_shared<std::vector<std::string>>();
        auto datas = std::make_shared<std::vector<std::string>>();
        auto classes = std::make_shared<std::size_t>(0);
        CLI::App* sub = eval->add_subcommand("norm-acc", "normalized accuracy of a merge");
        sub->add_option("--merged", *merged)->required();
        sub->add_option("--single", *singles)->required();
        sub->add_option("--data", *datas)->required();
        sub->add_option("--classes", *classes)->required();
        sub->add_option("--out", c->out)->required();
        sub->callback([&, c, merged, singles, datas, classes] {
            action = [&, c, merged, singles, datas, classes] {
                return cmd_eval_norm_acc(*merged, *singles, *datas, *classes, *c, mb);
            };
        });
    }
    {
        auto c = std::make_shared<EvalCommon>();
        auto taus = std::make_shared<std::vector<std::string>>();
        CLI::App* sub = eval->add_subcommand("similarity", "task-vector cosine matrix");
        sub->add_option("--tau", *taus)->required();
        sub->add_flag("--svg", c->svg);
        sub->add_option("--out", c->out)->required();
        sub->callback([&, c, taus] {
            action = [&, c, taus] { return cmd_eval_similarity(*taus, *c, mb); };
        });
    }
    {
        auto c = std::make_shared<EvalCommon>();
        auto tau = std::make_shared<std::string>();
        auto layer = std::make_shared<std::string>();
        auto bins = std::make_shared<std::size_t>(18);
        CLI::App* sub = eval->add_subcommand("angles", "column-angle histogram of a layer");
        sub->add_option("--tau", *tau)->required();
        sub->add_option("--layer", *layer)->required();
        sub->add_option("--bins", *bins);
        sub->add_flag("--svg", c->svg);
        sub->add_option("--out", c->out)->required();
        sub->callback([&, c, tau, layer, bins] {
            action = [&, c, tau, layer, bins] {
                return cmd_eval_angles(*tau, *layer, *bins, *c, mb);
            };
        });
    }
    {
        auto c = std::make_shared<EvalCommon>();
        auto theta0 = std::make_shared<std::string>();
        auto tau = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto off = std::make_shared<std::size_t>(0);
        auto len = std::make_shared<std::size_t>(0);
        CLI::App* sub = eval->add_subcommand("interference", "tau_j against a domain");
        sub->add_option("--theta0", *theta0)->required();
        sub->add_option("--tau", *tau)->required();
        sub->add_option("--data", *data)->required();
        sub->add_option("--slice-offset", *off);
        sub->add_option("--slice-len", *len);
        sub->add_option("--out", c->out)->required();
        sub->callback([&, c, theta0, tau, data, off, len] {
            action = [&, c, theta0, tau, data, off, len] {
                return cmd_eval_interference(*theta0, *tau, *data, *off, *len, *c, mb);
            };
        });
    }
    {
        auto c = std::make_shared<EvalCommon>();
        auto theta0 = std::make_shared<std::string>();
        auto spec = std::make_shared<SynthTaskSpec>();
        auto cap = std::make_shared<std::size_t>(16);
        CLI::App* sub = eval->add_subcommand("ntk", "NTK localization ratio on a suite");
        sub->add_option("--theta0", *theta0)->required();
        sub->add_option("--tasks", spec->num_tasks);
        sub->add_option("--input-dim", spec->input_dim);
        sub->add_option("--feat-per-task", spec->features_per_task);
        sub->add_option("--overlap", spec->overlap_ratio);
        sub->add_option("--classes", spec->classes_per_task);
        sub->add_option("--samples", spec->samples_per_task);
        sub->add_option("--noise", spec->noise_std);
        sub->add_option("--seed", spec->seed);
        sub->add_option("--max-per-task", *cap);
        sub->add_option("--out", c->out)->required();
        sub->callback([&, c, theta0, spec, cap] {
            action = [&, c, theta0, spec, cap] {
                return cmd_eval_ntk(*theta0, *spec, *cap, *c, mb);
            };
        });
    }
    {
        auto c = std::make_shared<EvalCommon>();
        auto theta0 = std::make_shared<std::string>();
        auto tau_t = std::make_shared<std::string>();
        auto tau_j = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto off = std::make_shared<std::size_t>(0);
        auto len = std::make_shared<std::size_t>(0);
        CLI::App* sub = eval->add_subcommand("gap", "disentanglement gap");
        sub->add_option("--theta0", *theta0)->required();
        sub->add_option("--tau-t", *tau_t)->required();
        sub->add_option("--tau-j", *tau_j)->required();
        sub->add_option("--data", *data)->required();
        sub->add_option("--slice-offset", *off);
        sub->add_option("--slice-len", *len);
        sub->add_option("--out", c->out)->required();
        sub->callback([&, c, theta0, tau_t, tau_j, data, off, len] {
            action = [&, c, theta0, tau_t, tau_j, data, off, len] {
                return cmd_eval_gap(*theta0, *tau_t, *tau_j, *data, *off, *len, *c, mb);
            };
        });
    }

    // validate
    auto val_which = std::make_shared<std::string>();
    auto val_trials = std::make_shared<std::size_t>(10000);
    auto val_seed = std::make_shared<std::uint64_t>(1);
    auto val_out = std::make_shared<std::string>();
    CLI::App* val = app.add_subcommand("validate", "run theory validators");
    val->add_option("which", *val_which)
        ->required()
        ->check(CLI::IsMember({"norm-bound", "psd", "stiefel", "polar", "alignment",
                               "tfs", "angle-control", "all"}));
    val->add_option("--trials", *val_trials);
    val->add_option("--seed", *val_seed);
    val->add_option("--out", *val_out);
    val->callback([&, val_which, val_trials, val_seed, val_out] {
        action = [&, val_which, val_trials, val_seed, val_out] {
            return cmd_validate(*val_which, *val_trials, *val_seed, *val_out, mb);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        return action ? action() : kExitUsage;
    } catch (const DivergenceDetected& e) {
        std::fprintf(stderr, "numerical failure: %s (epoch %d)\n", e.what(), e.epoch);
        return kExitNumerical;
    } catch (const NumericalFailure& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const TrainingFailed& e) {
        std::fprintf(stderr, "validation failure: %s\n", e.what());
        return kExitValidationFail;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
}
