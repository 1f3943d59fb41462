#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "shslab/detection.hpp"
#include "shslab/experiment.hpp"
#include "shslab/probing.hpp"
#include "shslab/ssbuild.hpp"

namespace shslab {

// Dense matrices are stored as {"rows", "cols", "data"} with data in row-major order.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& where);

struct FamilyBundle {
    SegmentId monitored_segment = 0;
    std::vector<ScenarioFamily> families;

    const ScenarioFamily& monitored() const;
};

nlohmann::json family_to_json(const ScenarioFamily& family);
ScenarioFamily family_from_json(const nlohmann::json& j);
nlohmann::json bundle_to_json(const FamilyBundle& bundle);
FamilyBundle bundle_from_json(const nlohmann::json& j);
FamilyBundle load_bundle(const std::string& path);

/// Probe design plus the sampling it was computed at.
struct ProbeRecord {
    double mu0 = 0, mu1 = 0, delta_min = 0, R0 = 0, R = 0, margin = 0;
    ProbeChannel channel = ProbeChannel::Delta;
    double tau0 = 0, ts = 0;
    std::pair<std::size_t, std::size_t> argmin{0, 0};
    GapMode mode = GapMode::Aggregate;

    static ProbeRecord from_design(const ProbingDesign& design, double ts, GapMode mode);
};

nlohmann::json probe_to_json(const ProbeRecord& probe);
ProbeRecord probe_from_json(const nlohmann::json& j);
ProbeRecord load_probe(const std::string& path);

std::string to_string(GapMode mode);
GapMode gap_mode_from_string(const std::string& text);

/// alpha,name,re,im with one row per eigenvalue.
std::string eigen_csv(const EigenReport& report);

/// One row per sample: window,k,t, outputs, u1_d,u1_delta,u1_ma, aux inputs.
std::string window_csv(const MeasurementWindow& w, std::size_t index, const std::vector<std::string>& output_labels,
                       std::size_t n_aux_inputs);
/// Parses one or more windows (grouped by the window column, in order of first appearance).
std::vector<MeasurementWindow> windows_from_csv(const std::string& text, Eigen::Index p, Eigen::Index n_u2,
                                                const std::string& where);
/// A CSV file, or a directory whose *.csv files are read in name order.
std::vector<MeasurementWindow> load_windows(const std::string& path, Eigen::Index p, Eigen::Index n_u2);

/// k,alpha,name
std::string sequence_column_csv(const std::vector<std::size_t>& alphas, const ScenarioFamily& family);
/// Reads the alpha column of a k,alpha[,name] CSV.
std::vector<std::size_t> load_sequence_csv(const std::string& path);
/// k,true,detected
std::string comparison_csv(const DetectionReport& report);

nlohmann::json report_to_json(const DetectionReport& report, const ScenarioFamily& family);

/// Provenance record written next to every stage output.
class RunManifest {
public:
    explicit RunManifest(std::string command);
    void add_input(const std::string& path);
    void add_output(const std::string& path);
    void set_config(nlohmann::json config) { config_ = std::move(config); }
    void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
    nlohmann::json to_json() const;
    void write(const std::string& path) const;

private:
    std::string command_;
    std::string started_;
    nlohmann::json inputs_ = nlohmann::json::array();
    nlohmann::json outputs_ = nlohmann::json::array();
    nlohmann::json config_;
    nlohmann::json extra_ = nlohmann::json::object();
};

std::string utc_timestamp();
const char* tool_version();

} // namespace shslab
