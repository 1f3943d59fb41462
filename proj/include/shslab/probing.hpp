#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "shslab/lin_analysis.hpp"
#include "shslab/ssbuild.hpp"

namespace shslab {

/// Index into u1 = [d, delta, m_a].
enum class ProbeChannel : int { DutyCycle = 0, Delta = 1, Modulation = 2 };

std::string to_string(ProbeChannel channel);
ProbeChannel probe_channel_from_string(const std::string& text);

/// How two step responses are compared when searching for delta_min.
enum class GapMode {
    Aggregate,    ///< |sum_i y_i - sum_i y'_i| per sample
    PerComponent  ///< max_i |y_i - y'_i| per sample
};

struct DeltaMinResult {
    double delta_min = 0.0;
    std::pair<std::size_t, std::size_t> argmin{0, 0};
    std::size_t pairs_evaluated = 0;
    /// False when two scenarios produce identical responses under this probe.
    bool distinguishable() const { return delta_min > 0.0; }
};

/// Magnitude-modulated probe: a step of height R on one u1 channel for tau0 seconds.
class ProbingDesign {
public:
    /// R = margin * R0 with R0 = 2 mu0 mu1 / delta_min. Throws ValidationError unless
    /// mu0 > 0, mu1 > 0, delta_min > 0, margin > 1 and tau0 > 0.
    static ProbingDesign from_bounds(double mu0, double mu1, double delta_min, double margin, ProbeChannel channel,
                                     double tau0, std::pair<std::size_t, std::size_t> argmin = {0, 0});

    double mu0() const { return mu0_; }
    double mu1() const { return mu1_; }
    double delta_min() const { return delta_min_; }
    double R0() const { return r0_; }
    double R() const { return r_; }
    double margin() const { return margin_; }
    ProbeChannel channel() const { return channel_; }
    double tau0() const { return tau0_; }
    std::pair<std::size_t, std::size_t> argmin_pair() const { return argmin_; }
    /// Probe vector u1 = R e_channel.
    Eigen::Vector3d input() const;

private:
    ProbingDesign() = default;
    double mu0_ = 0, mu1_ = 0, delta_min_ = 0, r0_ = 0, r_ = 0, margin_ = 0, tau0_ = 0;
    ProbeChannel channel_ = ProbeChannel::Delta;
    std::pair<std::size_t, std::size_t> argmin_{0, 0};
};

/// R0 = 2 mu0 mu1 / delta_min.
double mami_threshold(double mu0, double mu1, double delta_min);

/// 2 % of the largest steady-state current magnitude over current-typed states.
double compute_mu0(const StateSpaceModel& model, const Eigen::VectorXd& equilibrium);

/// max over scenarios of the induced 2-norm of C. Refuses non-Hurwitz scenarios, since the
/// reduction to ||C|| relies on exp(A t) being contractive over the window.
double compute_mu1(const ScenarioFamily& family);

/// Zero-initial unit-step response on `channel`, sampled at ts over [0, tau0] inclusive.
ResponseTrace step_response(const StateSpaceModel& model, ProbeChannel channel, double tau0, double ts);

/// min over scenario pairs of max over the window of the output gap.
DeltaMinResult compute_delta_min(const ScenarioFamily& family, ProbeChannel channel, double tau0, double ts,
                                 GapMode mode = GapMode::Aggregate);

struct MamiOptions {
    ProbeChannel channel = ProbeChannel::Delta;
    double tau0 = 0.01;
    double ts = 1e-6;
    double margin = 1.01;
    GapMode mode = GapMode::Aggregate;
};

/// Full design: mu0 from the given steady state of scenario 0, mu1 and delta_min from the
/// family. Throws NumericalError when mu0 or delta_min is zero.
ProbingDesign design_mami(const ScenarioFamily& family, const Eigen::VectorXd& equilibrium,
                          const MamiOptions& options = {});

} // namespace shslab
