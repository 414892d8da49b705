#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "orthomerge/arith.hpp"
#include "orthomerge/metrics.hpp"
#include "orthomerge/net.hpp"
#include "orthomerge/synth.hpp"
#include "orthomerge/theory.hpp"

namespace ortho::io {

/// %.17g — round-trips every double and keeps files byte-stable.
std::string fmt_double(double v);

/// Write via temp file + rename in the target directory.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

struct CheckpointMeta {
    std::uint64_t seed = 0;
    double lambda = 0.0;
    std::optional<std::string> task_id;
    std::string kind = "checkpoint";  // or "task_vector"
};

std::string checkpoint_to_json(const ParameterSet& params, const CheckpointMeta& meta);
void write_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                      const CheckpointMeta& meta);
std::pair<ParameterSet, CheckpointMeta> load_checkpoint(const std::filesystem::path& path);

void write_task_vector(const std::filesystem::path& path, const ModelSpec& spec,
                       const TaskVector& tau);
std::pair<TaskVector, ModelSpec> load_task_vector(const std::filesystem::path& path);

void write_dataset(const std::filesystem::path& path, const TaskDataset& ds);
TaskDataset load_dataset(const std::filesystem::path& path);

std::string history_to_csv(const std::vector<EpochRecord>& history);
std::string alpha_table_to_csv(const GridSearchResult& result);
std::string matrix_to_csv(const Mat& m);
std::string histogram_to_csv(const AngleHistogram& h);

std::string validation_report_to_json(const ValidationReport& report);
std::string metrics_report_to_json(const MetricsReport& report);

/// Minimal SVG renderings; CSV stays the canonical output.
std::string heatmap_to_svg(const Mat& m);
std::string histogram_to_svg(const AngleHistogram& h);

struct RunManifest {
    std::string command_line;
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string artifact_version = "0.1.0";
    long long wall_clock_ms = 0;
};
std::string manifest_to_json(const RunManifest& m);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);

}  // namespace ortho::io
