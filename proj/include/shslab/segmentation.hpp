#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "shslab/grid_model.hpp"

namespace shslab {

using SegmentId = int;

/// Half of a cut line, seen from one segment. Its far end is the (unknown) voltage of the
/// peer auxiliary bus, which enters the segment model as a disturbance.
struct AuxBusSpec {
    std::string aux_id;     ///< a<cutFrom>_<cutTo>_<f|t>
    BusId attach_bus = 0;   ///< bus inside this segment
    BusId external_bus = 0; ///< the cut line's endpoint in the neighbouring segment
    double R = 0.0;         ///< half the cut line's resistance
    double L = 0.0;         ///< half the cut line's inductance
    SegmentId peer_segment = 0;
    std::string peer_aux_id;
    LineSpec cut_line;

    bool operator==(const AuxBusSpec&) const = default;
};

struct SegmentModel {
    SegmentId id = 0;
    BusId pvb_bus = 0;
    std::set<BusId> load_buses;         ///< non-PV-B buses of the segment
    std::vector<LineSpec> internal_lines;
    std::vector<AuxBusSpec> aux_buses;
    std::map<BusId, BusSpec> params;    ///< copies of the member buses' parameters
    double omega_nom = kDefaultOmega;
    /// Bus whose load-branch current is measured; defaults to the PV-B bus.
    BusId measured_load_bus = 0;

    /// All member buses in ascending id order (PV-B bus included).
    std::vector<BusId> buses() const;
    bool operator==(const SegmentModel&) const = default;
};

using Assignment = std::map<BusId, SegmentId>;

/// Split the network into single-PV-B segments. Each cut line becomes two auxiliary
/// buses carrying Z/2 with symmetric peer links. Throws ValidationError on an uncovered
/// bus, a segment without exactly one PV-B bus, or a disconnected segment.
std::vector<SegmentModel> segment_network(const NetworkModel& model, const Assignment& assignment);

/// For each segment, the external endpoints of its cut lines.
std::map<SegmentId, std::set<BusId>> neighbor_sets(const std::vector<SegmentModel>& segments);

/// Assign every bus to its hop-nearest PV-B bus (ties to the lower PV-B id). Segment ids
/// are 1-based ranks of the PV-B bus ids.
Assignment nearest_pvb_assignment(const NetworkModel& model);

/// {"1": [1, 4], "2": [2, 5]} -> bus -> segment map.
Assignment parse_assignment(const nlohmann::json& segments);

nlohmann::json segment_to_json(const SegmentModel& segment);

} // namespace shslab
