#include "orthomerge/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ortho::io {
namespace {

using nlohmann::json;

void append_double_array(std::string& out, const std::vector<double>& xs) {
    out += '[';
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt_double(xs[i]);
    }
    out += ']';
}

std::string quote(const std::string& s) {
    return json(s).dump();  // handles escaping
}

}  // namespace

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string checkpoint_to_json(const ParameterSet& params, const CheckpointMeta& meta) {
    std::string out = "{\"spec\":{";
    out += "\"input_dim\":" + std::to_string(params.spec.input_dim);
    out += ",\"hidden_dims\":[";
    for (std::size_t i = 0; i < params.spec.hidden_dims.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(params.spec.hidden_dims[i]);
    }
    out += "],\"num_classes\":" + std::to_string(params.spec.num_classes);
    out += ",\"activation\":\"tanh\"";
    out += ",\"seed\":" + std::to_string(params.spec.seed);
    out += "},\"layers\":[";
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        if (l) out += ',';
        const auto& layer = params.layers[l];
        out += "{\"name\":" + quote(layer.name);
        out += ",\"rows\":" + std::to_string(layer.weight.rows());
        out += ",\"cols\":" + std::to_string(layer.weight.cols());
        out += ",\"data\":";
        append_double_array(out, layer.weight.data());
        out += '}';
    }
    out += "],\"meta\":{\"seed\":" + std::to_string(meta.seed);
    out += ",\"lambda\":" + fmt_double(meta.lambda);
    out += ",\"task_id\":" + (meta.task_id ? quote(*meta.task_id) : std::string("null"));
    out += ",\"kind\":" + quote(meta.kind);
    out += "}}\n";
    return out;
}

void write_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                      const CheckpointMeta& meta) {
    atomic_write(path, checkpoint_to_json(params, meta));
}

std::pair<ParameterSet, CheckpointMeta> load_checkpoint(const std::filesystem::path& path) {
    json j = json::parse(read_file(path));
    ParameterSet params;
    params.spec.input_dim = j.at("spec").at("input_dim").get<std::size_t>();
    params.spec.hidden_dims =
        j.at("spec").at("hidden_dims").get<std::vector<std::size_t>>();
    params.spec.num_classes = j.at("spec").at("num_classes").get<std::size_t>();
    params.spec.seed = j.at("spec").at("seed").get<std::uint64_t>();
    for (const auto& lj : j.at("layers")) {
        Layer layer;
        layer.name = lj.at("name").get<std::string>();
        layer.weight = Mat(lj.at("rows").get<std::size_t>(),
                           lj.at("cols").get<std::size_t>(),
                           lj.at("data").get<std::vector<double>>());
        params.layers.push_back(std::move(layer));
    }
    CheckpointMeta meta;
    const auto& mj = j.at("meta");
    meta.seed = mj.at("seed").get<std::uint64_t>();
    meta.lambda = mj.at("lambda").get<double>();
    if (!mj.at("task_id").is_null())
        meta.task_id = mj.at("task_id").get<std::string>();
    meta.kind = mj.value("kind", "checkpoint");
    return {std::move(params), std::move(meta)};
}

void write_task_vector(const std::filesystem::path& path, const ModelSpec& spec,
                       const TaskVector& tau) {
    ParameterSet as_params;
    as_params.spec = spec;
    as_params.layers = tau.layers;
    CheckpointMeta meta;
    meta.seed = tau.seed;
    meta.lambda = tau.lambda;
    meta.task_id = tau.task_id;
    meta.kind = "task_vector";
    write_checkpoint(path, as_params, meta);
}

std::pair<TaskVector, ModelSpec> load_task_vector(const std::filesystem::path& path) {
    auto [params, meta] = load_checkpoint(path);
    if (meta.kind != "task_vector")
        throw std::runtime_error(path.string() + " is not a task vector (kind=" +
                                 meta.kind + ")");
    TaskVector tau;
    tau.layers = std::move(params.layers);
    tau.task_id = meta.task_id.value_or("");
    tau.lambda = meta.lambda;
    tau.seed = meta.seed;
    return {std::move(tau), params.spec};
}

void write_dataset(const std::filesystem::path& path, const TaskDataset& ds) {
    std::string out = "{\"task_id\":" + quote(ds.task_id);
    out += ",\"feature_set\":[";
    for (std::size_t i = 0; i < ds.feature_set.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(ds.feature_set[i]);
    }
    out += "],\"inputs\":[";
    for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
        if (i) out += ',';
        append_double_array(out, ds.inputs[i]);
    }
    out += "],\"labels\":[";
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(ds.labels[i]);
    }
    out += "]}\n";
    atomic_write(path, out);
}

TaskDataset load_dataset(const std::filesystem::path& path) {
    json j = json::parse(read_file(path));
    TaskDataset ds;
    ds.task_id = j.at("task_id").get<std::string>();
    ds.feature_set = j.at("feature_set").get<std::vector<std::size_t>>();
    ds.inputs = j.at("inputs").get<std::vector<std::vector<double>>>();
    ds.labels = j.at("labels").get<std::vector<std::size_t>>();
    return ds;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,task_loss,ortho_loss,val_acc\n";
    for (const auto& rec : history) {
        out += std::to_string(rec.epoch) + "," + fmt_double(rec.task_loss) + "," +
               fmt_double(rec.ortho_loss) + "," + fmt_double(rec.val_acc) + "\n";
    }
    return out;
}

std::string alpha_table_to_csv(const GridSearchResult& result) {
    std::size_t extra = 0;
    for (const auto& row : result.table) extra = std::max(extra, row.per_task.size());
    std::string out = "alpha,objective";
    for (std::size_t i = 0; i < extra; ++i) out += ",col" + std::to_string(i);
    out += "\n";
    for (const auto& row : result.table) {
        out += fmt_double(row.alpha) + "," + fmt_double(row.objective);
        for (std::size_t i = 0; i < extra; ++i)
            out += "," + (i < row.per_task.size() ? fmt_double(row.per_task[i])
                                                  : std::string(""));
        out += "\n";
    }
    return out;
}

std::string matrix_to_csv(const Mat& m) {
    std::string out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += fmt_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

std::string histogram_to_csv(const AngleHistogram& h) {
    std::string out = "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out += fmt_double(h.bin_edges[i]) + "," + fmt_double(h.bin_edges[i + 1]) +
               "," + std::to_string(h.counts[i]) + "\n";
    return out;
}

std::string validation_report_to_json(const ValidationReport& report) {
    std::string out = "{\"name\":" + quote(report.name);
    out += ",\"trials\":" + std::to_string(report.trials);
    out += ",\"seed\":" + std::to_string(report.seed);
    out += ",\"verdict\":" + std::string(report.passed ? "\"pass\"" : "\"fail\"");
    out += ",\"checks\":[";
    for (std::size_t i = 0; i < report.checks.size(); ++i) {
        if (i) out += ',';
        const auto& c = report.checks[i];
        out += "{\"name\":" + quote(c.name) + ",\"value\":" + fmt_double(c.value) +
               ",\"bound\":" + fmt_double(c.bound) +
               ",\"pass\":" + (c.pass ? "true" : "false") +
               ",\"asserted\":" + (c.asserted ? "true" : "false") + "}";
    }
    out += "],\"stats\":{";
    bool first = true;
    for (const auto& [k, v] : report.stats) {
        if (!first) out += ',';
        first = false;
        out += quote(k) + ":" + fmt_double(v);
    }
    out += "}}\n";
    return out;
}

std::string metrics_report_to_json(const MetricsReport& report) {
    std::string out = "{\"per_task_accuracy\":";
    append_double_array(out, report.per_task_accuracy);
    out += ",\"normalized_accuracy\":" + fmt_double(report.normalized_acc);
    auto mat_json = [](const Mat& m) {
        std::string s = "[";
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (i) s += ',';
            s += '[';
            for (std::size_t j = 0; j < m.cols(); ++j) {
                if (j) s += ',';
                s += fmt_double(m(i, j));
            }
            s += ']';
        }
        return s + "]";
    };
    out += ",\"interference_abs\":" + mat_json(report.interference_abs);
    out += ",\"interference_cos\":" + mat_json(report.interference_cos);
    out += ",\"cosine_matrix\":" + mat_json(report.cosine_matrix);
    out += ",\"mean_abs_cos\":" + fmt_double(report.mean_abs_cos);
    out += ",\"ntk_localization_ratio\":" + fmt_double(report.ntk_localization_ratio);
    out += ",\"meta\":{";
    bool first = true;
    for (const auto& [k, v] : report.meta) {
        if (!first) out += ',';
        first = false;
        out += quote(k) + ":" + fmt_double(v);
    }
    out += "}}\n";
    return out;
}

std::string heatmap_to_svg(const Mat& m) {
    const int cell = 24;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << m.cols() * cell
       << "\" height=\"" << m.rows() * cell << "\">\n";
    double lo = 1e300, hi = -1e300;
    for (double v : m.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double t = (m(i, j) - lo) / span;
            const int r = static_cast<int>(255 * t);
            const int b = static_cast<int>(255 * (1.0 - t));
            os << "<rect x=\"" << j * cell << "\" y=\"" << i * cell << "\" width=\""
               << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << r << ",64,"
               << b << ")\"/>\n";
        }
    os << "</svg>\n";
    return os.str();
}

std::string histogram_to_svg(const AngleHistogram& h) {
    const int w = 8, height = 120;
    std::size_t max_count = 1;
    for (auto c : h.counts) max_count = std::max(max_count, c);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << h.counts.size() * w
       << "\" height=\"" << height << "\">\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const int bar = static_cast<int>(
            height * static_cast<double>(h.counts[i]) / static_cast<double>(max_count));
        os << "<rect x=\"" << i * w << "\" y=\"" << height - bar << "\" width=\""
           << w - 1 << "\" height=\"" << bar << "\" fill=\"rgb(60,90,200)\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string manifest_to_json(const RunManifest& m) {
    std::string out = "{\"command_line\":" + quote(m.command_line);
    out += ",\"config_hash\":" + quote(m.config_hash);
    out += ",\"seeds\":[";
    for (std::size_t i = 0; i < m.seeds.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(m.seeds[i]);
    }
    out += "],\"inputs\":[";
    for (std::size_t i = 0; i < m.inputs.size(); ++i) {
        if (i) out += ',';
        out += quote(m.inputs[i]);
    }
    out += "],\"outputs\":[";
    for (std::size_t i = 0; i < m.outputs.size(); ++i) {
        if (i) out += ',';
        out += quote(m.outputs[i]);
    }
    out += "],\"artifact_version\":" + quote(m.artifact_version);
    out += ",\"wall_clock_ms\":" + std::to_string(m.wall_clock_ms);
    out += "}\n";
    return out;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    atomic_write(path, manifest_to_json(m));
}

}  // namespace ortho::io
