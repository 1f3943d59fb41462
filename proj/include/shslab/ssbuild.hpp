#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "shslab/grid_model.hpp"
#include "shslab/segmentation.hpp"

namespace shslab {

enum class ContingencyKind { Normal, ShortCircuit, LineOutage, LineDisconnect };

std::string to_string(ContingencyKind kind);
ContingencyKind contingency_kind_from_string(const std::string& text);

struct ContingencySpec {
    ContingencyKind kind = ContingencyKind::Normal;
    std::string name = "normal";
    BusId from = 0;           ///< affected line, non-Normal kinds
    BusId to = 0;
    double R_f = 1e-3;        ///< fault resistance to ground, ShortCircuit only
    BusId open_end = 0;       ///< LineDisconnect only

    static ContingencySpec normal() { return {}; }
    bool operator==(const ContingencySpec&) const = default;
};

/// Physical type of a state; mu0 is taken over the Current states.
enum class StateKind { Current, Voltage, SourceCurrent };

/// Index layout of a segment state vector: [x_PV-B | x_Net | x_Aux | x_Load].
struct StateLayout {
    static constexpr int kPvbStates = 6;
    static constexpr int kIpv = 0, kVdc = 1, kItq = 2, kItd = 3, kVcs = 4, kVcb = 5;

    int n_lines = 0;
    int n_aux = 0;
    std::vector<BusId> buses;  ///< ascending; each owns [Vq, Vd, ILq, ILd]

    explicit StateLayout(const SegmentModel& segment);
    int line(int l) const { return kPvbStates + 2 * l; }
    int aux(int a) const { return kPvbStates + 2 * n_lines + 2 * a; }
    int bus(BusId id) const;  ///< offset of V_q for bus id
    int size() const { return kPvbStates + 2 * n_lines + 2 * n_aux + 4 * static_cast<int>(buses.size()); }
};

/// Continuous-time linear model of one segment under one scenario.
struct StateSpaceModel {
    int alpha = 0;
    std::string name;
    Eigen::MatrixXd A, B1, B2, C, D2;
    std::vector<std::string> state_labels;
    std::vector<StateKind> state_kinds;
    std::vector<std::string> output_labels;
    /// Nonlinear steady state the model was linearized at (absolute values).
    Eigen::VectorXd operating_point;

    int n() const { return static_cast<int>(A.rows()); }
    int p() const { return static_cast<int>(C.rows()); }
    int n_u1() const { return static_cast<int>(B1.cols()); }
    int n_u2() const { return static_cast<int>(B2.cols()); }
};

/// The scenario set of one segment; index 0 is normal operation.
struct ScenarioFamily {
    SegmentId segment_id = 0;
    std::vector<StateSpaceModel> scenarios;

    std::size_t size() const { return scenarios.size(); }
    const StateSpaceModel& operator[](std::size_t i) const { return scenarios.at(i); }
    std::vector<std::string> alpha_names() const;
    /// Throws ValidationError unless all members share dimensions and labels.
    void check_uniform() const;
};

struct BuildOptions {
    /// Aux-bus voltage (q, d) used when solving the operating point.
    std::array<double, 2> aux_voltage_op{0.0, 0.0};
};

/// Nonlinear PV-B element equations: time derivatives of
/// [i_pv, v_dc, i_tq, i_td, V_Cs, V_Cb] given the terminal bus voltage (q, d) and control.
std::array<double, 6> pvb_derivatives(const PvbParams& p, double omega, const std::array<double, 6>& x,
                                      double v_bus_q, double v_bus_d, const ControlInput& u);

/// Full nonlinear segment dynamics f(x, u1, u2) for one scenario: linear network stamps
/// plus the nonlinear PV-B element set.
class SegmentDynamics {
public:
    SegmentDynamics(const SegmentModel& segment, const ContingencySpec& contingency);

    Eigen::VectorXd rhs(const Eigen::VectorXd& x, const Eigen::Vector3d& u1, const Eigen::VectorXd& u2) const;
    /// Linear part: every row except the PV-B block.
    const Eigen::MatrixXd& linear_A() const { return a_lin_; }
    const Eigen::MatrixXd& linear_B2() const { return b2_; }
    const StateLayout& layout() const { return layout_; }

private:
    SegmentModel segment_;
    StateLayout layout_;
    Eigen::MatrixXd a_lin_;
    Eigen::MatrixXd b2_;
};

/// Map a network-wide contingency to this segment: contingencies on lines outside the
/// segment leave it in normal operation.
ContingencySpec localize(const SegmentModel& segment, const ContingencySpec& contingency);

StateSpaceModel build_state_space(const SegmentModel& segment, const ContingencySpec& contingency,
                                  const BuildOptions& options = {});

ScenarioFamily build_family(const SegmentModel& segment, const std::vector<ContingencySpec>& contingencies,
                            const BuildOptions& options = {});

/// Output map y = C x + D2 u2. Rows: v_dc, i_tq, i_td, I_LL{q,d} of the measured load bus,
/// then one (q, d) pair per aux bus reading the aux voltage through D2.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> build_measurement(const SegmentModel& segment);

std::vector<std::string> state_labels(const SegmentModel& segment);
std::vector<StateKind> state_kinds(const SegmentModel& segment);
std::vector<std::string> output_labels(const SegmentModel& segment);

} // namespace shslab
