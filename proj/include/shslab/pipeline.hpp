#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shslab/detection.hpp"
#include "shslab/experiment.hpp"
#include "shslab/grid_model.hpp"
#include "shslab/io.hpp"
#include "shslab/probing.hpp"
#include "shslab/segmentation.hpp"
#include "shslab/ssbuild.hpp"

namespace shslab {

/// Everything an end-to-end run needs, read from an experiment document.
struct PipelineConfig {
    std::string network_path;  ///< resolved against the config file's directory
    NetworkModel network;
    Assignment assignment;
    std::map<SegmentId, BusId> measured_load_bus;
    SegmentId monitored_segment = 0;
    BuildOptions build;
    std::vector<ContingencySpec> contingencies;
    MamiOptions probe;
    /// Overrides the designed R when set (0 switches the probe off).
    std::optional<double> probe_magnitude;
    ExperimentConfig experiment;
    nlohmann::json document;  ///< verbatim config echo
};

PipelineConfig parse_pipeline_config(const nlohmann::json& doc, const std::string& base_dir);
PipelineConfig load_pipeline_config(const std::string& path);

ContingencySpec parse_contingency(const nlohmann::json& obj, const std::string& where);
nlohmann::json contingency_to_json(const ContingencySpec& c);

/// Segments with the configured measured-load overrides applied.
std::vector<SegmentModel> build_segments(const PipelineConfig& config);

/// One family per segment: Normal plus every configured contingency on an internal line
/// of that segment, in configuration order.
std::vector<ScenarioFamily> build_families(const PipelineConfig& config, const std::vector<SegmentModel>& segments);

/// Index of the family whose segment id matches; throws ValidationError when absent.
std::size_t family_index(const std::vector<ScenarioFamily>& families, SegmentId id);

/// MaMI design on a family, with mu0 taken from scenario 0's operating point.
ProbeRecord design_probe(const ScenarioFamily& family, const MamiOptions& options);

struct PipelineRun {
    std::vector<SegmentModel> segments;
    FamilyBundle bundle;
    ProbeRecord probe;
    ExperimentConfig experiment;  ///< as executed, with the probe magnitude filled in
    ExperimentResult result;
};

/// Build every family, design the probe for the monitored one, then simulate and detect.
/// The configured probe magnitude, when present, replaces the designed R.
PipelineRun run_pipeline(const PipelineConfig& config);

} // namespace shslab
