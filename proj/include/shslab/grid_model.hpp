#pragma once

#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace shslab {

using BusId = int;

/// Inverter/chopper control input. Also the operating point used for linearization.
struct ControlInput {
    double d = 0.5;      ///< chopper duty cycle, [0, 1]
    double delta = 0.1;  ///< inverter phase angle, rad
    double m_a = 0.8;    ///< modulation index, [0, 1]

    bool operator==(const ControlInput&) const = default;
};

/// Load at a bus: shunt C, parallel R and a series Rl-L branch. P, Q, pf are metadata.
struct LoadParams {
    double P = 0.0;   ///< W
    double Q = 0.0;   ///< var
    double pf = 1.0;
    double R = 0.0;   ///< parallel resistance, ohm
    double L = 0.0;   ///< branch inductance, H
    double Rl = 0.0;  ///< branch resistance, ohm
    double C = 0.0;   ///< shunt capacitance, F

    bool operator==(const LoadParams&) const = default;
};

/// PV + battery resource parameters (SI units).
struct PvbParams {
    double R_PV = 0.0;  ///< linearized PV slope dv/di, ohm; negative for a physical panel
    double I_PV = 0.0;  ///< A
    double L_1PV = 0.0;
    double C_PV = 0.0;
    double R_2PV = 0.0;
    double L_2PV = 0.0;
    double R_s = 0.0;
    double R_e = 0.0;
    double R_t = 0.0;
    double C_s = 0.0;
    double C_b = 0.0;
    ControlInput operating_point;

    bool operator==(const PvbParams&) const = default;
};

enum class BusKind { PVB, Load };

/// A bus. Every bus hosts a load; PV-B buses additionally host a PV-B resource.
struct BusSpec {
    BusId id = 0;
    BusKind kind = BusKind::Load;
    std::optional<LoadParams> load;
    std::optional<PvbParams> pvb;

    bool operator==(const BusSpec&) const = default;
};

struct LineSpec {
    BusId from = 0;
    BusId to = 0;
    double R = 0.0;  ///< ohm
    double L = 0.0;  ///< H

    bool operator==(const LineSpec&) const = default;
};

inline constexpr double kDefaultOmega = 2.0 * std::numbers::pi * 60.0;

struct NetworkModel {
    std::string name;
    double omega_nom = kDefaultOmega;  ///< rad/s
    std::vector<BusSpec> buses;
    std::vector<LineSpec> lines;

    const BusSpec* find_bus(BusId id) const;
    const BusSpec& bus(BusId id) const;  ///< throws ValidationError if absent

    bool operator==(const NetworkModel&) const = default;
};

struct Violation {
    std::string code;     ///< short machine-readable tag, e.g. "dangling endpoint"
    std::string message;  ///< human-readable detail with location

    bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

/// Parse a network document (JSON text). Throws ParseError on schema problems and
/// ValidationError (listing every violation) when the parsed model is invalid.
NetworkModel parse_network(std::string_view text);
NetworkModel parse_network(const std::string& text);
NetworkModel parse_network(const char* text);
NetworkModel parse_network(const nlohmann::json& doc);
/// Schema-level parse only; invariants are left for validate().
NetworkModel parse_network_unchecked(const nlohmann::json& doc);
NetworkModel load_network_file(const std::string& path);

/// Serialize to the canonical SI-suffixed document. parse_network(serialize_network(m)) == m.
nlohmann::json serialize_network(const NetworkModel& model);

/// Check every model invariant. Deterministic order: buses, lines, graph.
ValidationReport validate(const NetworkModel& model);

std::string to_string(BusKind kind);

/// Scale a decimal value by 10^exp10 through its shortest decimal representation, so
/// "0.636" mH becomes exactly the double nearest to 0.000636.
double scale_decimal(double value, int exp10);

} // namespace shslab
