#include "shslab/segmentation.hpp"

#include <algorithm>
#include <queue>

#include "shslab/errors.hpp"

namespace shslab {

using nlohmann::json;

namespace {

std::string aux_name(const LineSpec& line, char side) {
    return "a" + std::to_string(line.from) + "_" + std::to_string(line.to) + "_" + side;
}

bool connected(const std::set<BusId>& members, const std::vector<LineSpec>& lines) {
    if (members.empty()) {
        return true;
    }
    std::map<BusId, std::vector<BusId>> adj;
    for (const auto& l : lines) {
        adj[l.from].push_back(l.to);
        adj[l.to].push_back(l.from);
    }
    std::set<BusId> seen{*members.begin()};
    std::queue<BusId> q;
    q.push(*members.begin());
    while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        for (auto v : adj[u]) {
            if (seen.insert(v).second) {
                q.push(v);
            }
        }
    }
    return seen.size() == members.size();
}

} // namespace

std::vector<BusId> SegmentModel::buses() const {
    std::vector<BusId> out(load_buses.begin(), load_buses.end());
    out.push_back(pvb_bus);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<SegmentModel> segment_network(const NetworkModel& model, const Assignment& assignment) {
    std::map<SegmentId, std::set<BusId>> members;
    for (const auto& b : model.buses) {
        auto it = assignment.find(b.id);
        if (it == assignment.end()) {
            throw ValidationError("bus " + std::to_string(b.id) + " is not assigned to any segment");
        }
        members[it->second].insert(b.id);
    }
    for (const auto& [bus, seg] : assignment) {
        if (!model.find_bus(bus)) {
            throw ValidationError("assignment references unknown bus " + std::to_string(bus));
        }
    }

    std::map<SegmentId, SegmentModel> segments;
    for (const auto& [id, buses] : members) {
        SegmentModel s;
        s.id = id;
        s.omega_nom = model.omega_nom;
        std::vector<BusId> pvbs;
        for (auto b : buses) {
            const auto& spec = model.bus(b);
            s.params.emplace(b, spec);
            if (spec.kind == BusKind::PVB) {
                pvbs.push_back(b);
            } else {
                s.load_buses.insert(b);
            }
        }
        if (pvbs.size() != 1) {
            throw ValidationError("segment " + std::to_string(id) + " has " + std::to_string(pvbs.size()) +
                                  " PV-B buses (exactly one required)");
        }
        s.pvb_bus = pvbs.front();
        s.measured_load_bus = s.pvb_bus;
        segments.emplace(id, std::move(s));
    }

    for (const auto& line : model.lines) {
        const auto sf = assignment.at(line.from);
        const auto st = assignment.at(line.to);
        if (sf == st) {
            segments.at(sf).internal_lines.push_back(line);
            continue;
        }
        AuxBusSpec from_side{aux_name(line, 'f'), line.from, line.to, line.R / 2.0, line.L / 2.0,
                             st, aux_name(line, 't'), line};
        AuxBusSpec to_side{aux_name(line, 't'), line.to, line.from, line.R / 2.0, line.L / 2.0,
                           sf, aux_name(line, 'f'), line};
        segments.at(sf).aux_buses.push_back(std::move(from_side));
        segments.at(st).aux_buses.push_back(std::move(to_side));
    }

    std::vector<SegmentModel> out;
    for (auto& [id, s] : segments) {
        std::set<BusId> all(s.load_buses);
        all.insert(s.pvb_bus);
        if (!connected(all, s.internal_lines)) {
            throw ValidationError("segment " + std::to_string(id) + " is not connected");
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::map<SegmentId, std::set<BusId>> neighbor_sets(const std::vector<SegmentModel>& segments) {
    std::map<SegmentId, std::set<BusId>> out;
    for (const auto& s : segments) {
        auto& set = out[s.id];
        for (const auto& a : s.aux_buses) {
            set.insert(a.external_bus);
        }
    }
    return out;
}

Assignment nearest_pvb_assignment(const NetworkModel& model) {
    std::map<BusId, std::vector<BusId>> adj;
    for (const auto& l : model.lines) {
        adj[l.from].push_back(l.to);
        adj[l.to].push_back(l.from);
    }
    std::vector<BusId> pvbs;
    for (const auto& b : model.buses) {
        if (b.kind == BusKind::PVB) {
            pvbs.push_back(b.id);
        }
    }
    std::sort(pvbs.begin(), pvbs.end());
    if (pvbs.empty()) {
        throw ValidationError("network has no PV-B bus to build segments around");
    }

    // multi-source BFS; sources enqueued in ascending id order so ties go to the lower id
    Assignment out;
    std::queue<BusId> q;
    for (std::size_t i = 0; i < pvbs.size(); ++i) {
        out[pvbs[i]] = static_cast<SegmentId>(i + 1);
        q.push(pvbs[i]);
    }
    std::map<BusId, int> dist;
    for (auto p : pvbs) {
        dist[p] = 0;
    }
    while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        auto next = adj[u];
        std::sort(next.begin(), next.end());
        for (auto v : next) {
            auto it = dist.find(v);
            if (it == dist.end()) {
                dist[v] = dist[u] + 1;
                out[v] = out[u];
                q.push(v);
            } else if (it->second == dist[u] + 1 && out[u] < out[v]) {
                out[v] = out[u];
            }
        }
    }
    return out;
}

Assignment parse_assignment(const json& segments) {
    if (!segments.is_object()) {
        throw ParseError("segments: expected an object mapping segment id to bus list");
    }
    Assignment out;
    for (const auto& [key, buses] : segments.items()) {
        SegmentId id = 0;
        try {
            std::size_t pos = 0;
            id = std::stoi(key, &pos);
            if (pos != key.size()) {
                throw std::invalid_argument(key);
            }
        } catch (const std::exception&) {
            throw ParseError("segments: key '" + key + "' is not an integer segment id");
        }
        if (!buses.is_array()) {
            throw ParseError("segments." + key + ": expected an array of bus ids");
        }
        for (const auto& b : buses) {
            if (!b.is_number_integer()) {
                throw ParseError("segments." + key + ": bus ids must be integers");
            }
            const auto bus = b.get<BusId>();
            if (!out.emplace(bus, id).second) {
                throw ValidationError("bus " + std::to_string(bus) + " is assigned to more than one segment");
            }
        }
    }
    return out;
}

json segment_to_json(const SegmentModel& s) {
    json j;
    j["id"] = s.id;
    j["pvb_bus"] = s.pvb_bus;
    j["load_buses"] = s.load_buses;
    j["measured_load_bus"] = s.measured_load_bus;
    j["internal_lines"] = json::array();
    for (const auto& l : s.internal_lines) {
        j["internal_lines"].push_back({{"from", l.from}, {"to", l.to}, {"R_ohm", l.R}, {"L_H", l.L}});
    }
    j["aux_buses"] = json::array();
    for (const auto& a : s.aux_buses) {
        j["aux_buses"].push_back({{"aux_id", a.aux_id},
                                  {"attach_bus", a.attach_bus},
                                  {"external_bus", a.external_bus},
                                  {"R_ohm", a.R},
                                  {"L_H", a.L},
                                  {"peer", {{"segment", a.peer_segment}, {"aux_id", a.peer_aux_id}}}});
    }
    return j;
}

} // namespace shslab
