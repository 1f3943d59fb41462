#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "shslab/lin_analysis.hpp"
#include "shslab/ssbuild.hpp"

namespace shslab {

/// Recorded samples of one detection window, all at spacing ts. Column k is sample k.
struct MeasurementWindow {
    double t_start = 0.0;
    double ts = 0.0;
    Eigen::MatrixXd outputs;  ///< p x N measured y
    Eigen::MatrixXd u1;       ///< 3 x N applied control deviation (the probe)
    Eigen::MatrixXd u2;       ///< 2 n_aux x N recorded aux-bus voltages

    Eigen::Index size() const { return outputs.cols(); }
};

struct InitialStateEstimate {
    Eigen::VectorXd x0;
    double residual = 0.0;  ///< sqrt of the attained least-squares minimum
};

struct ScenarioVerdict {
    std::size_t detected = 0;
    std::vector<double> residuals;
    std::vector<Eigen::VectorXd> x0_hat;
};

struct EstimatorOptions {
    /// Use every `subsample`-th sample of the window in the least-squares fit.
    Eigen::Index subsample = 10;
    /// Singular directions below rank_tolerance * largest pivot are treated as unobservable.
    double rank_tolerance = 1e-10;
    /// Optional per-output weights (size p); empty means identity.
    Eigen::VectorXd weights;
};

/// Least-squares estimate of the window's initial state for one scenario. The stacked
/// observability map [C; C Ad^s; C Ad^2s; ...] is factored once with a complete
/// orthogonal decomposition and reused for every window of the same length.
class InitialStateEstimator {
public:
    InitialStateEstimator(DiscreteStateSpace model, Eigen::Index window_samples, EstimatorOptions options = {});

    InitialStateEstimate estimate(const MeasurementWindow& window) const;

    const Eigen::MatrixXd& observability_map() const { return obs_; }
    Eigen::Index rank() const { return cod_.rank(); }
    const DiscreteStateSpace& model() const { return model_; }

private:
    Eigen::VectorXd stack(const Eigen::MatrixXd& per_sample) const;

    DiscreteStateSpace model_;
    Eigen::Index samples_;
    EstimatorOptions options_;
    Eigen::MatrixXd obs_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
};

InitialStateEstimate estimate_initial_state(const DiscreteStateSpace& model, const MeasurementWindow& window,
                                            const EstimatorOptions& options = {});

/// argmin of residuals; ties resolve to the lowest index.
std::size_t select_scenario(const std::vector<double>& residuals);

struct WindowResult {
    std::size_t k = 0;
    double t_start = 0.0;
    ScenarioVerdict verdict;
    std::optional<std::size_t> truth;
};

struct DetectionReport {
    std::vector<WindowResult> windows;
    std::size_t matches = 0;
    bool has_truth = false;

    /// matches / windows; 1.0 for an empty report.
    double accuracy() const;
};

/// Residual-minimizing scenario detector for one family at one sample period.
class Detector {
public:
    Detector(const ScenarioFamily& family, double ts, Eigen::Index window_samples, EstimatorOptions options = {});

    ScenarioVerdict detect(const MeasurementWindow& window) const;
    /// Windows are processed in parallel and merged by index. `truth`, when non-empty,
    /// must have one entry per window.
    DetectionReport detect_sequence(const std::vector<MeasurementWindow>& windows,
                                    const std::vector<std::size_t>& truth = {}) const;

    std::size_t scenarios() const { return estimators_.size(); }
    const InitialStateEstimator& estimator(std::size_t alpha) const { return estimators_.at(alpha); }

private:
    std::vector<InitialStateEstimator> estimators_;
};

/// Synthesize a noise-free window from a discretized model: x0, probe u1 and aux u2
/// sequences with N columns.
MeasurementWindow synthesize_window(const DiscreteStateSpace& model, const Eigen::VectorXd& x0,
                                    const Eigen::MatrixXd& u1, const Eigen::MatrixXd& u2, double t_start = 0.0);

} // namespace shslab
