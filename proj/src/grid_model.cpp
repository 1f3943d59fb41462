#include "shslab/grid_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "shslab/errors.hpp"
#include "shslab/util.hpp"

namespace shslab {

using nlohmann::json;

namespace {

struct UnitSuffix {
    std::string_view suffix;
    int exp10;
};

constexpr UnitSuffix kResistance[] = {{"ohm", 0}, {"mohm", -3}, {"kohm", 3}};
constexpr UnitSuffix kInductance[] = {{"H", 0}, {"mH", -3}, {"uH", -6}};
constexpr UnitSuffix kCapacitance[] = {{"F", 0}, {"mF", -3}, {"uF", -6}};
constexpr UnitSuffix kCurrent[] = {{"A", 0}, {"kA", 3}};
constexpr UnitSuffix kActivePower[] = {{"W", 0}, {"kW", 3}, {"MW", 6}};
constexpr UnitSuffix kReactivePower[] = {{"var", 0}, {"kvar", 3}, {"Mvar", 6}};

double number_at(const json& obj, const std::string& key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number()) {
        throw ParseError(where + "." + key + ": expected a number");
    }
    return v.get<double>();
}

/// Reads `<base>_<suffix>` for exactly one of the allowed suffixes and returns SI.
template <std::size_t N>
double quantity(const json& obj, const std::string& base, const UnitSuffix (&units)[N],
                const std::string& where) {
    std::optional<double> value;
    std::string expected;
    for (const auto& u : units) {
        const std::string key = base + "_" + std::string(u.suffix);
        expected += (expected.empty() ? "" : ", ") + key;
        if (!obj.contains(key)) {
            continue;
        }
        if (value) {
            throw ParseError(where + ": field '" + base + "' given in more than one unit");
        }
        value = scale_decimal(number_at(obj, key, where), u.exp10);
    }
    if (!value) {
        throw ParseError(where + ": missing field '" + base + "' (expected one of " + expected + ")");
    }
    return *value;
}

const json& object_at(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) {
        throw ParseError(where + ": missing field '" + key + "'");
    }
    const auto& v = obj.at(key);
    if (!v.is_object()) {
        throw ParseError(where + "." + key + ": expected an object");
    }
    return v;
}

int integer_at(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) {
        throw ParseError(where + ": missing field '" + key + "'");
    }
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
        throw ParseError(where + "." + key + ": expected an integer");
    }
    return v.get<int>();
}

LoadParams parse_load(const json& obj, const std::string& where) {
    LoadParams p;
    p.P = quantity(obj, "P", kActivePower, where);
    p.Q = quantity(obj, "Q", kReactivePower, where);
    if (!obj.contains("pf")) {
        throw ParseError(where + ": missing field 'pf'");
    }
    p.pf = number_at(obj, "pf", where);
    p.R = quantity(obj, "R", kResistance, where);
    p.L = quantity(obj, "L", kInductance, where);
    p.Rl = quantity(obj, "Rl", kResistance, where);
    p.C = quantity(obj, "C", kCapacitance, where);
    return p;
}

PvbParams parse_pvb(const json& obj, const std::string& where) {
    PvbParams p;
    p.R_PV = quantity(obj, "R_PV", kResistance, where);
    p.I_PV = quantity(obj, "I_PV", kCurrent, where);
    p.L_1PV = quantity(obj, "L_1PV", kInductance, where);
    p.C_PV = quantity(obj, "C_PV", kCapacitance, where);
    p.R_2PV = quantity(obj, "R_2PV", kResistance, where);
    p.L_2PV = quantity(obj, "L_2PV", kInductance, where);
    p.R_s = quantity(obj, "R_s", kResistance, where);
    p.R_e = quantity(obj, "R_e", kResistance, where);
    p.R_t = quantity(obj, "R_t", kResistance, where);
    p.C_s = quantity(obj, "C_s", kCapacitance, where);
    p.C_b = quantity(obj, "C_b", kCapacitance, where);
    if (obj.contains("operating_point")) {
        const auto& op = object_at(obj, "operating_point", where);
        const std::string opw = where + ".operating_point";
        if (op.contains("d")) p.operating_point.d = number_at(op, "d", opw);
        if (op.contains("delta_rad")) p.operating_point.delta = number_at(op, "delta_rad", opw);
        if (op.contains("m_a")) p.operating_point.m_a = number_at(op, "m_a", opw);
    }
    return p;
}

json si(double v) { return json(v); }

} // namespace

double scale_decimal(double value, int exp10) {
    if (exp10 == 0 || value == 0.0 || !std::isfinite(value)) {
        return value;
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::scientific);
    std::string text(buf, res.ptr);
    const auto epos = text.find('e');
    const int exponent = std::stoi(text.substr(epos + 1)) + exp10;
    text = text.substr(0, epos) + "e" + std::to_string(exponent);
    double out = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), out);
    return out;
}

std::string to_string(BusKind kind) { return kind == BusKind::PVB ? "PVB" : "Load"; }

const BusSpec* NetworkModel::find_bus(BusId id) const {
    auto it = std::find_if(buses.begin(), buses.end(), [id](const BusSpec& b) { return b.id == id; });
    return it == buses.end() ? nullptr : &*it;
}

const BusSpec& NetworkModel::bus(BusId id) const {
    if (const auto* b = find_bus(id)) {
        return *b;
    }
    throw ValidationError("bus " + std::to_string(id) + " does not exist");
}

NetworkModel parse_network_unchecked(const json& doc) {
    if (!doc.is_object()) {
        throw ParseError("document: expected a JSON object");
    }
    NetworkModel m;
    if (doc.contains("name")) {
        if (!doc.at("name").is_string()) {
            throw ParseError("document.name: expected a string");
        }
        m.name = doc.at("name").get<std::string>();
    }
    if (doc.contains("omega_hz") && doc.contains("omega_rad_s")) {
        throw ParseError("document: give nominal frequency as omega_hz or omega_rad_s, not both");
    }
    if (doc.contains("omega_hz")) {
        m.omega_nom = 2.0 * std::numbers::pi * number_at(doc, "omega_hz", "document");
    } else if (doc.contains("omega_rad_s")) {
        m.omega_nom = number_at(doc, "omega_rad_s", "document");
    }

    if (!doc.contains("buses") || !doc.at("buses").is_array()) {
        throw ParseError("document: missing array 'buses'");
    }
    if (doc.at("buses").empty()) {
        throw ParseError("empty network");
    }
    std::size_t i = 0;
    for (const auto& b : doc.at("buses")) {
        const std::string where = "buses[" + std::to_string(i++) + "]";
        if (!b.is_object()) {
            throw ParseError(where + ": expected an object");
        }
        BusSpec bus;
        bus.id = integer_at(b, "id", where);
        if (!b.contains("kind") || !b.at("kind").is_string()) {
            throw ParseError(where + ": missing string field 'kind'");
        }
        const auto kind = b.at("kind").get<std::string>();
        if (kind == "PVB") {
            bus.kind = BusKind::PVB;
        } else if (kind == "Load") {
            bus.kind = BusKind::Load;
        } else {
            throw ParseError(where + ".kind: unknown bus kind '" + kind + "'");
        }
        if (b.contains("load")) {
            bus.load = parse_load(object_at(b, "load", where), where + ".load");
        }
        if (b.contains("pvb")) {
            bus.pvb = parse_pvb(object_at(b, "pvb", where), where + ".pvb");
        }
        m.buses.push_back(std::move(bus));
    }

    if (!doc.contains("lines") || !doc.at("lines").is_array()) {
        throw ParseError("document: missing array 'lines'");
    }
    i = 0;
    for (const auto& l : doc.at("lines")) {
        const std::string where = "lines[" + std::to_string(i++) + "]";
        if (!l.is_object()) {
            throw ParseError(where + ": expected an object");
        }
        LineSpec line;
        line.from = integer_at(l, "from", where);
        line.to = integer_at(l, "to", where);
        line.R = quantity(l, "R", kResistance, where);
        line.L = quantity(l, "L", kInductance, where);
        m.lines.push_back(line);
    }
    return m;
}

NetworkModel parse_network(const json& doc) {
    auto model = parse_network_unchecked(doc);
    const auto report = validate(model);
    if (!report.empty()) {
        std::ostringstream os;
        os << "invalid network '" << model.name << "':";
        for (const auto& v : report) {
            os << "\n  " << v.code << ": " << v.message;
        }
        throw ValidationError(os.str());
    }
    return model;
}

NetworkModel parse_network(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    return parse_network(doc);
}

NetworkModel parse_network(const std::string& text) { return parse_network(std::string_view(text)); }

NetworkModel parse_network(const char* text) { return parse_network(std::string_view(text)); }

NetworkModel load_network_file(const std::string& path) { return parse_network(read_text_file(path)); }

json serialize_network(const NetworkModel& model) {
    json doc;
    doc["name"] = model.name;
    doc["omega_rad_s"] = model.omega_nom;
    doc["buses"] = json::array();
    for (const auto& b : model.buses) {
        json jb;
        jb["id"] = b.id;
        jb["kind"] = to_string(b.kind);
        if (b.load) {
            const auto& p = *b.load;
            jb["load"] = {{"P_W", si(p.P)},    {"Q_var", si(p.Q)}, {"pf", p.pf},
                          {"R_ohm", si(p.R)},  {"L_H", si(p.L)},   {"Rl_ohm", si(p.Rl)},
                          {"C_F", si(p.C)}};
        }
        if (b.pvb) {
            const auto& p = *b.pvb;
            jb["pvb"] = {{"R_PV_ohm", p.R_PV}, {"I_PV_A", p.I_PV},   {"L_1PV_H", p.L_1PV},
                         {"C_PV_F", p.C_PV},   {"R_2PV_ohm", p.R_2PV}, {"L_2PV_H", p.L_2PV},
                         {"R_s_ohm", p.R_s},   {"R_e_ohm", p.R_e},   {"R_t_ohm", p.R_t},
                         {"C_s_F", p.C_s},     {"C_b_F", p.C_b},
                         {"operating_point",
                          {{"d", p.operating_point.d},
                           {"delta_rad", p.operating_point.delta},
                           {"m_a", p.operating_point.m_a}}}};
        }
        doc["buses"].push_back(std::move(jb));
    }
    doc["lines"] = json::array();
    for (const auto& l : model.lines) {
        doc["lines"].push_back({{"from", l.from}, {"to", l.to}, {"R_ohm", l.R}, {"L_H", l.L}});
    }
    return doc;
}

ValidationReport validate(const NetworkModel& model) {
    ValidationReport report;
    auto add = [&report](std::string code, std::string message) {
        report.push_back({std::move(code), std::move(message)});
    };
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };

    if (!(std::isfinite(model.omega_nom) && model.omega_nom > 0.0)) {
        add("non-physical frequency", "omega_nom must be positive and finite");
    }
    if (model.buses.empty()) {
        add("empty network", "network has no buses");
        return report;
    }

    std::set<BusId> ids;
    for (const auto& b : model.buses) {
        const std::string where = "bus " + std::to_string(b.id);
        if (!ids.insert(b.id).second) {
            add("duplicate bus", where + " is defined more than once");
        }
        if (b.kind == BusKind::PVB && !b.pvb) {
            add("missing pvb", where + " is PVB but has no pvb parameters");
        }
        if (b.kind == BusKind::Load && b.pvb) {
            add("unexpected pvb", where + " is a load bus but carries pvb parameters");
        }
        if (!b.load) {
            add("missing load", where + " has no load (every bus needs a shunt element)");
        } else {
            const auto& p = *b.load;
            if (!(positive(p.R) && positive(p.Rl))) {
                add("non-physical resistance", where + " load resistance must be > 0");
            }
            if (!positive(p.L)) {
                add("non-physical inductance", where + " load inductance must be > 0");
            }
            if (!positive(p.C)) {
                add("non-physical capacitance", where + " load capacitance must be > 0");
            }
            if (!(p.pf > 0.0 && p.pf <= 1.0)) {
                add("power factor out of range", where + " pf must lie in (0, 1]");
            }
        }
        if (b.pvb) {
            const auto& p = *b.pvb;
            if (!(positive(p.L_1PV) && positive(p.L_2PV))) {
                add("non-physical inductance", where + " pvb inductances must be > 0");
            }
            if (!(positive(p.C_PV) && positive(p.C_s) && positive(p.C_b))) {
                add("non-physical capacitance", where + " pvb capacitances must be > 0");
            }
            if (!(positive(p.R_s) && positive(p.R_e) && positive(p.R_t) && positive(p.R_2PV))) {
                add("non-physical resistance", where + " pvb series resistances must be > 0");
            }
            if (!(std::isfinite(p.R_PV) && p.R_PV < 0.0)) {
                add("non-physical PV slope", where + " R_PV must be a negative slope");
            }
            if (!std::isfinite(p.I_PV)) {
                add("non-physical current", where + " I_PV must be finite");
            }
            const auto& op = p.operating_point;
            if (!(op.d >= 0.0 && op.d <= 1.0) || !(op.m_a >= 0.0 && op.m_a <= 1.0) ||
                !std::isfinite(op.delta)) {
                add("control out of range", where + " operating point needs d, m_a in [0, 1]");
            }
        }
    }

    std::set<std::pair<BusId, BusId>> pairs;
    for (const auto& l : model.lines) {
        const std::string where = "line " + std::to_string(l.from) + "-" + std::to_string(l.to);
        if (!ids.contains(l.from) || !ids.contains(l.to)) {
            add("dangling endpoint", where + " references a bus that does not exist");
        }
        if (l.from == l.to) {
            add("self loop", where + " connects a bus to itself");
        }
        if (!pairs.insert(std::minmax(l.from, l.to)).second) {
            add("parallel line", where + " duplicates another line between the same buses");
        }
        if (!positive(l.R)) {
            add("non-physical resistance", where + " resistance must be > 0");
        }
        if (!positive(l.L)) {
            add("non-physical inductance", where + " inductance must be > 0");
        }
    }

    // connectivity over existing endpoints
    std::map<BusId, std::vector<BusId>> adj;
    for (const auto& l : model.lines) {
        if (ids.contains(l.from) && ids.contains(l.to)) {
            adj[l.from].push_back(l.to);
            adj[l.to].push_back(l.from);
        }
    }
    std::set<BusId> seen{*ids.begin()};
    std::queue<BusId> q;
    q.push(*ids.begin());
    while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        for (auto v : adj[u]) {
            if (seen.insert(v).second) {
                q.push(v);
            }
        }
    }
    if (seen.size() != ids.size()) {
        add("disconnected network", "buses are not all reachable from bus " + std::to_string(*ids.begin()));
    }
    return report;
}

} // namespace shslab
