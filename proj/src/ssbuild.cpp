#include "shslab/ssbuild.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "shslab/errors.hpp"
#include "shslab/util.hpp"

namespace shslab {

namespace {

using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

bool same_line(const LineSpec& line, BusId a, BusId b) {
    return (line.from == a && line.to == b) || (line.from == b && line.to == a);
}

std::string line_tag(const LineSpec& l) { return std::to_string(l.from) + "_" + std::to_string(l.to); }

/// Adds the q/d rows of an RL branch current: L dI = ... - R I +/- omega L I_other.
void stamp_rl_self(MatrixXd& A, int iq, double R, double L, double omega) {
    const int id = iq + 1;
    A(iq, iq) += -R / L;
    A(id, id) += -R / L;
    A(iq, id) += omega;
    A(id, iq) -= omega;
}

/// Branch-current column block into a bus's KCL rows (sign = +1 entering, -1 leaving).
void stamp_kcl(MatrixXd& A, int vq, int iq, double sign, double C) {
    A(vq, iq) += sign / C;
    A(vq + 1, iq + 1) += sign / C;
}

/// Voltage of a bus driving a branch current (sign = +1 sending end, -1 receiving end).
void stamp_drive(MatrixXd& A, int iq, int vq, double sign, double L) {
    A(iq, vq) += sign / L;
    A(iq + 1, vq + 1) += sign / L;
}

const LoadParams& load_of(const SegmentModel& s, BusId b) {
    const auto& spec = s.params.at(b);
    if (!spec.load) {
        throw ValidationError("bus " + std::to_string(b) + " has no load/shunt element");
    }
    if (!(spec.load->C > 0.0)) {
        throw NumericalError("singular capacitance node at bus " + std::to_string(b));
    }
    return *spec.load;
}

const PvbParams& pvb_of(const SegmentModel& s) {
    const auto& spec = s.params.at(s.pvb_bus);
    if (!spec.pvb) {
        throw ValidationError("bus " + std::to_string(s.pvb_bus) + " has no pvb parameters");
    }
    return *spec.pvb;
}

ControlInput to_control(const Eigen::Vector3d& u) { return {u(0), u(1), u(2)}; }

Eigen::Vector3d from_control(const ControlInput& c) { return {c.d, c.delta, c.m_a}; }

} // namespace

std::string to_string(ContingencyKind kind) {
    switch (kind) {
    case ContingencyKind::Normal: return "Normal";
    case ContingencyKind::ShortCircuit: return "ShortCircuit";
    case ContingencyKind::LineOutage: return "LineOutage";
    case ContingencyKind::LineDisconnect: return "LineDisconnect";
    }
    return "Normal";
}

ContingencyKind contingency_kind_from_string(const std::string& text) {
    for (auto k : {ContingencyKind::Normal, ContingencyKind::ShortCircuit, ContingencyKind::LineOutage,
                   ContingencyKind::LineDisconnect}) {
        if (to_string(k) == text) {
            return k;
        }
    }
    throw ParseError("unknown contingency kind '" + text + "'");
}

StateLayout::StateLayout(const SegmentModel& segment)
    : n_lines(static_cast<int>(segment.internal_lines.size())),
      n_aux(static_cast<int>(segment.aux_buses.size())),
      buses(segment.buses()) {}

int StateLayout::bus(BusId id) const {
    auto it = std::find(buses.begin(), buses.end(), id);
    if (it == buses.end()) {
        throw ValidationError("bus " + std::to_string(id) + " is not part of the segment");
    }
    return kPvbStates + 2 * n_lines + 2 * n_aux + 4 * static_cast<int>(it - buses.begin());
}

std::vector<std::string> ScenarioFamily::alpha_names() const {
    std::vector<std::string> out;
    for (const auto& s : scenarios) {
        out.push_back(s.name);
    }
    return out;
}

void ScenarioFamily::check_uniform() const {
    if (scenarios.empty()) {
        throw ValidationError("scenario family is empty");
    }
    const auto& ref = scenarios.front();
    for (const auto& s : scenarios) {
        if (s.n() != ref.n() || s.p() != ref.p() || s.n_u1() != ref.n_u1() || s.n_u2() != ref.n_u2() ||
            s.state_labels != ref.state_labels || s.output_labels != ref.output_labels) {
            throw ValidationError("scenario '" + s.name + "' does not share the family's dimensions/labels");
        }
    }
}

std::array<double, 6> pvb_derivatives(const PvbParams& p, double omega, const std::array<double, 6>& x,
                                      double v_bus_q, double v_bus_d, const ControlInput& u) {
    const double i_pv = x[0], v_dc = x[1], i_tq = x[2], i_td = x[3], v_cs = x[4], v_cb = x[5];

    // PV panel as a linearized source: v_pv = R_PV (i_pv - I_PV), R_PV < 0
    const double v_pv = p.R_PV * (i_pv - p.I_PV);
    const double i_inv = 0.75 * u.m_a * (std::cos(u.delta) * i_td + std::sin(u.delta) * i_tq);
    const double e_q = 0.5 * u.m_a * v_dc * std::sin(u.delta);
    const double e_d = 0.5 * u.m_a * v_dc * std::cos(u.delta);

    // two-capacitor battery: C_s via R_s and C_b via R_e meet at an internal node,
    // which reaches the DC link through R_t
    const double g_t = 1.0 / p.R_t, g_s = 1.0 / p.R_s, g_e = 1.0 / p.R_e;
    const double v_node = (g_t * v_dc + g_s * v_cs + g_e * v_cb) / (g_t + g_s + g_e);
    const double i_bat = g_t * (v_dc - v_node);

    std::array<double, 6> dx{};
    dx[0] = (v_pv - (1.0 - u.d) * v_dc) / p.L_1PV;
    dx[1] = ((1.0 - u.d) * i_pv - i_inv - i_bat) / p.C_PV;
    dx[2] = (e_q - v_bus_q - p.R_2PV * i_tq) / p.L_2PV + omega * i_td;
    dx[3] = (e_d - v_bus_d - p.R_2PV * i_td) / p.L_2PV - omega * i_tq;
    dx[4] = g_s * (v_node - v_cs) / p.C_s;
    dx[5] = g_e * (v_node - v_cb) / p.C_b;
    return dx;
}

ContingencySpec localize(const SegmentModel& segment, const ContingencySpec& contingency) {
    if (contingency.kind == ContingencyKind::Normal) {
        return contingency;
    }
    for (const auto& l : segment.internal_lines) {
        if (same_line(l, contingency.from, contingency.to)) {
            return contingency;
        }
    }
    auto normal = ContingencySpec::normal();
    normal.name = contingency.name;
    return normal;
}

SegmentDynamics::SegmentDynamics(const SegmentModel& segment, const ContingencySpec& contingency)
    : segment_(segment), layout_(segment) {
    const int n = layout_.size();
    const double w = segment.omega_nom;
    a_lin_ = MatrixXd::Zero(n, n);
    b2_ = MatrixXd::Zero(n, 2 * layout_.n_aux);

    std::optional<std::size_t> target;
    if (contingency.kind != ContingencyKind::Normal) {
        for (std::size_t l = 0; l < segment.internal_lines.size(); ++l) {
            if (same_line(segment.internal_lines[l], contingency.from, contingency.to)) {
                target = l;
            }
        }
        if (!target) {
            throw ValidationError("contingency '" + contingency.name + "' references line " +
                                  std::to_string(contingency.from) + "-" + std::to_string(contingency.to) +
                                  " which is not internal to segment " + std::to_string(segment.id));
        }
        if (contingency.kind == ContingencyKind::ShortCircuit && !(contingency.R_f > 0.0)) {
            throw ValidationError("short-circuit fault resistance must be > 0");
        }
        if (contingency.kind == ContingencyKind::LineDisconnect && contingency.open_end != contingency.from &&
            contingency.open_end != contingency.to) {
            throw ValidationError("open_end must be an endpoint of the disconnected line");
        }
    }

    // loads: C dV = sum(branch currents) - V/R - I_LL + rotation; L dI_LL = V - Rl I_LL + rotation
    for (auto b : layout_.buses) {
        const auto& ld = load_of(segment, b);
        const int v = layout_.bus(b);
        const int il = v + 2;
        a_lin_(v, v) += -1.0 / (ld.R * ld.C);
        a_lin_(v + 1, v + 1) += -1.0 / (ld.R * ld.C);
        a_lin_(v, v + 1) += w;
        a_lin_(v + 1, v) -= w;
        stamp_kcl(a_lin_, v, il, -1.0, ld.C);
        stamp_drive(a_lin_, il, v, +1.0, ld.L);
        stamp_rl_self(a_lin_, il, ld.Rl, ld.L, w);
    }

    // PV-B terminal current enters its bus
    {
        const int v = layout_.bus(segment.pvb_bus);
        stamp_kcl(a_lin_, v, StateLayout::kItq, +1.0, load_of(segment, segment.pvb_bus).C);
    }

    for (std::size_t l = 0; l < segment.internal_lines.size(); ++l) {
        const auto& line = segment.internal_lines[l];
        const int i = layout_.line(static_cast<int>(l));
        const int vi = layout_.bus(line.from);
        const int vj = layout_.bus(line.to);
        const double ci = load_of(segment, line.from).C;
        const double cj = load_of(segment, line.to).C;
        const auto kind = (target && *target == l) ? contingency.kind : ContingencyKind::Normal;

        switch (kind) {
        case ContingencyKind::Normal:
            stamp_rl_self(a_lin_, i, line.R, line.L, w);
            stamp_drive(a_lin_, i, vi, +1.0, line.L);
            stamp_drive(a_lin_, i, vj, -1.0, line.L);
            stamp_kcl(a_lin_, vi, i, -1.0, ci);
            stamp_kcl(a_lin_, vj, i, +1.0, cj);
            break;
        case ContingencyKind::LineOutage:
            // decoupled from both buses; the current only decays
            a_lin_(i, i) += -line.R / line.L;
            a_lin_(i + 1, i + 1) += -line.R / line.L;
            break;
        case ContingencyKind::LineDisconnect: {
            const bool open_at_to = contingency.open_end == line.to;
            stamp_rl_self(a_lin_, i, line.R, line.L, w);
            if (open_at_to) {
                stamp_drive(a_lin_, i, vi, +1.0, line.L);
                stamp_kcl(a_lin_, vi, i, -1.0, ci);
            } else {
                stamp_drive(a_lin_, i, vj, -1.0, line.L);
                stamp_kcl(a_lin_, vj, i, +1.0, cj);
            }
            break;
        }
        case ContingencyKind::ShortCircuit: {
            // The state is the current of the sending-end half (R/2, L/2). The receiving-end
            // half is a quasi-static dq impedance; the midpoint voltage and the fault
            // current through R_f are eliminated algebraically.
            const double rh = line.R / 2.0, lh = line.L / 2.0;
            Matrix2d z2;
            z2 << rh, -w * lh, w * lh, rh;
            const Matrix2d y2 = z2.inverse();
            const Matrix2d m_inv = (Matrix2d::Identity() / contingency.R_f + y2).inverse();
            // V_m = m_inv (I + y2 V_j);  I_2 = y2 (V_m - V_j)
            const Matrix2d vm_from_i = m_inv;
            const Matrix2d vm_from_vj = m_inv * y2;
            const Matrix2d i2_from_i = y2 * m_inv;
            const Matrix2d i2_from_vj = y2 * m_inv * y2 - y2;

            stamp_rl_self(a_lin_, i, rh, lh, w);
            stamp_drive(a_lin_, i, vi, +1.0, lh);
            a_lin_.block<2, 2>(i, i) -= vm_from_i / lh;
            a_lin_.block<2, 2>(i, vj) -= vm_from_vj / lh;
            stamp_kcl(a_lin_, vi, i, -1.0, ci);
            a_lin_.block<2, 2>(vj, i) += i2_from_i / cj;
            a_lin_.block<2, 2>(vj, vj) += i2_from_vj / cj;
            break;
        }
        }
    }

    // aux branches: attach bus -> aux bus, whose voltage u2 is the disturbance
    for (std::size_t a = 0; a < segment.aux_buses.size(); ++a) {
        const auto& aux = segment.aux_buses[a];
        const int i = layout_.aux(static_cast<int>(a));
        const int v = layout_.bus(aux.attach_bus);
        stamp_rl_self(a_lin_, i, aux.R, aux.L, w);
        stamp_drive(a_lin_, i, v, +1.0, aux.L);
        b2_(i, 2 * a) += -1.0 / aux.L;
        b2_(i + 1, 2 * a + 1) += -1.0 / aux.L;
        stamp_kcl(a_lin_, v, i, -1.0, load_of(segment, aux.attach_bus).C);
    }
}

VectorXd SegmentDynamics::rhs(const VectorXd& x, const Eigen::Vector3d& u1, const VectorXd& u2) const {
    VectorXd dx = a_lin_ * x + b2_ * u2;
    std::array<double, 6> xp{};
    for (int k = 0; k < 6; ++k) {
        xp[k] = x(k);
    }
    const int v = layout_.bus(segment_.pvb_bus);
    const auto f = pvb_derivatives(pvb_of(segment_), segment_.omega_nom, xp, x(v), x(v + 1), to_control(u1));
    for (int k = 0; k < 6; ++k) {
        dx(k) += f[k];
    }
    return dx;
}

namespace {

/// Central-difference Jacobian of the PV-B element set with respect to
/// [x_PV-B, V_bus_q, V_bus_d] (6x8) and to u1 (6x3).
std::pair<MatrixXd, MatrixXd> pvb_jacobians(const PvbParams& p, double omega, const VectorXd& x_op, int v_bus,
                                            const Eigen::Vector3d& u_op) {
    Eigen::VectorXd z(8);
    z << x_op.head<6>(), x_op(v_bus), x_op(v_bus + 1);
    auto eval = [&](const Eigen::VectorXd& zz, const Eigen::Vector3d& uu) {
        std::array<double, 6> xp{};
        for (int k = 0; k < 6; ++k) {
            xp[k] = zz(k);
        }
        const auto f = pvb_derivatives(p, omega, xp, zz(6), zz(7), to_control(uu));
        return Eigen::Map<const Eigen::Matrix<double, 6, 1>>(f.data()).eval();
    };
    MatrixXd jx(6, 8), ju(6, 3);
    for (int j = 0; j < 8; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(z(j)));
        Eigen::VectorXd zp = z, zm = z;
        zp(j) += h;
        zm(j) -= h;
        jx.col(j) = (eval(zp, u_op) - eval(zm, u_op)) / (zp(j) - zm(j));
    }
    for (int j = 0; j < 3; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(u_op(j)));
        Eigen::Vector3d up = u_op, um = u_op;
        up(j) += h;
        um(j) -= h;
        ju.col(j) = (eval(z, up) - eval(z, um)) / (up(j) - um(j));
    }
    return {jx, ju};
}

VectorXd solve_operating_point(const SegmentDynamics& dyn, const std::function<MatrixXd(const VectorXd&)>& jacobian,
                               const Eigen::Vector3d& u1, const VectorXd& u2) {
    VectorXd x = VectorXd::Zero(dyn.layout().size());
    constexpr int kMaxIterations = 50;
    for (int it = 0; it < kMaxIterations; ++it) {
        const VectorXd f = dyn.rhs(x, u1, u2);
        Eigen::FullPivLU<MatrixXd> lu(jacobian(x));
        if (!lu.isInvertible()) {
            throw NumericalError("operating point: singular Jacobian during Newton iteration");
        }
        const VectorXd step = lu.solve(-f);
        x += step;
        if (!x.allFinite()) {
            throw NumericalError("operating point: Newton iteration diverged");
        }
        if (step.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
            return x;
        }
    }
    throw NumericalError("operating point: Newton iteration did not converge (no equilibrium)");
}

} // namespace

std::vector<std::string> state_labels(const SegmentModel& segment) {
    std::vector<std::string> out{"i_pv", "v_dc", "i_tq", "i_td", "V_Cs", "V_Cb"};
    for (const auto& l : segment.internal_lines) {
        out.push_back("I" + line_tag(l) + "q");
        out.push_back("I" + line_tag(l) + "d");
    }
    for (const auto& a : segment.aux_buses) {
        out.push_back("I" + a.aux_id + "q");
        out.push_back("I" + a.aux_id + "d");
    }
    for (auto b : segment.buses()) {
        const auto s = std::to_string(b);
        out.insert(out.end(), {"V" + s + "q", "V" + s + "d", "ILL" + s + "q", "ILL" + s + "d"});
    }
    return out;
}

std::vector<StateKind> state_kinds(const SegmentModel& segment) {
    std::vector<StateKind> out{StateKind::SourceCurrent, StateKind::Voltage, StateKind::Current,
                               StateKind::Current,       StateKind::Voltage, StateKind::Voltage};
    out.insert(out.end(), 2 * (segment.internal_lines.size() + segment.aux_buses.size()), StateKind::Current);
    for (std::size_t b = 0; b < segment.buses().size(); ++b) {
        out.insert(out.end(), {StateKind::Voltage, StateKind::Voltage, StateKind::Current, StateKind::Current});
    }
    return out;
}

std::vector<std::string> output_labels(const SegmentModel& segment) {
    const auto m = std::to_string(segment.measured_load_bus);
    std::vector<std::string> out{"v_dc", "i_tq", "i_td", "ILL" + m + "q", "ILL" + m + "d"};
    for (const auto& a : segment.aux_buses) {
        out.push_back("V" + a.aux_id + "q");
        out.push_back("V" + a.aux_id + "d");
    }
    return out;
}

std::pair<MatrixXd, MatrixXd> build_measurement(const SegmentModel& segment) {
    const StateLayout layout(segment);
    const int n = layout.size();
    const int n_aux = layout.n_aux;
    const int p = 5 + 2 * n_aux;
    MatrixXd C = MatrixXd::Zero(p, n);
    MatrixXd D2 = MatrixXd::Zero(p, 2 * n_aux);
    const int il = layout.bus(segment.measured_load_bus) + 2;
    C(0, StateLayout::kVdc) = 1.0;
    C(1, StateLayout::kItq) = 1.0;
    C(2, StateLayout::kItd) = 1.0;
    C(3, il) = 1.0;
    C(4, il + 1) = 1.0;
    for (int k = 0; k < 2 * n_aux; ++k) {
        D2(5 + k, k) = 1.0;
    }
    return {C, D2};
}

StateSpaceModel build_state_space(const SegmentModel& segment, const ContingencySpec& contingency,
                                  const BuildOptions& options) {
    const SegmentDynamics dyn(segment, contingency);
    const auto& layout = dyn.layout();
    const auto& pvb = pvb_of(segment);
    const int n = layout.size();
    const int v_bus = layout.bus(segment.pvb_bus);
    const Eigen::Vector3d u1 = from_control(pvb.operating_point);
    VectorXd u2(2 * layout.n_aux);
    for (int a = 0; a < layout.n_aux; ++a) {
        u2(2 * a) = options.aux_voltage_op[0];
        u2(2 * a + 1) = options.aux_voltage_op[1];
    }

    auto full_jacobian = [&](const VectorXd& x) {
        MatrixXd A = dyn.linear_A();
        const auto [jx, ju] = pvb_jacobians(pvb, segment.omega_nom, x, v_bus, u1);
        A.block(0, 0, 6, 6) += jx.leftCols<6>();
        A.block(0, v_bus, 6, 2) += jx.rightCols<2>();
        return A;
    };

    const VectorXd x_op = solve_operating_point(dyn, full_jacobian, u1, u2);

    StateSpaceModel m;
    m.name = contingency.name;
    m.A = full_jacobian(x_op);
    m.B1 = MatrixXd::Zero(n, 3);
    m.B1.topRows<6>() = pvb_jacobians(pvb, segment.omega_nom, x_op, v_bus, u1).second;
    m.B2 = dyn.linear_B2();
    std::tie(m.C, m.D2) = build_measurement(segment);
    m.state_labels = state_labels(segment);
    m.state_kinds = state_kinds(segment);
    m.output_labels = output_labels(segment);
    m.operating_point = x_op;
    return m;
}

ScenarioFamily build_family(const SegmentModel& segment, const std::vector<ContingencySpec>& contingencies,
                            const BuildOptions& options) {
    if (contingencies.empty() || contingencies.front().kind != ContingencyKind::Normal) {
        throw ValidationError("scenario list must start with the Normal scenario");
    }
    ScenarioFamily family;
    family.segment_id = segment.id;
    family.scenarios.resize(contingencies.size());
    parallel_for(contingencies.size(), [&](std::size_t i) {
        try {
            family.scenarios[i] = build_state_space(segment, contingencies[i], options);
            family.scenarios[i].alpha = static_cast<int>(i);
        } catch (const NumericalError& e) {
            throw NumericalError("scenario " + std::to_string(i) + " (" + contingencies[i].name + "): " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("scenario " + std::to_string(i) + " (" + contingencies[i].name + "): " + e.what());
        }
    });
    family.check_uniform();
    return family;
}

} // namespace shslab
