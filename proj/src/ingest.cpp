#include "gridca/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace gridca::ingest {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(std::string s) {
    const auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

bool parse_double(const std::string& tok, double& out) {
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [p, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && p == end;
}

bool parse_int(const std::string& tok, int& out) {
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [p, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && p == end;
}

double require_double(const std::string& tok, int line, const char* field) {
    double v;
    if (!parse_double(tok, v))
        throw MalformedRecordError(line, field, "not a number: '" + tok + "'");
    return v;
}

int require_int(const std::string& tok, int line, const char* field) {
    int v;
    if (!parse_int(tok, v))
        throw MalformedRecordError(line, field, "not an integer: '" + tok + "'");
    return v;
}

bool is_section_end(const std::string& line) {
    // "-999" ends a section; interchange data uses "-9"
    return line.rfind("-9", 0) == 0;
}

}  // namespace

const char* to_string(BusType t) {
    switch (t) {
        case BusType::PQ: return "PQ";
        case BusType::PV: return "PV";
        case BusType::Slack: return "Slack";
    }
    return "?";
}

const BusRecord* NetworkModel::find_bus(int id) const {
    for (const auto& b : buses)
        if (b.id == id) return &b;
    return nullptr;
}

// ---- CDF ----

NetworkModel parse_cdf(const std::string& text, const CdfOptions& opts) {
    NetworkModel model;
    std::istringstream input(text);
    std::string line;
    int lineno = 0;

    // Title card: MVA base at columns 32-37; fall back to the first float
    // token when a circulating copy drifted off-column.
    if (!std::getline(input, line)) throw MissingSectionError("title card");
    ++lineno;
    double base = 0.0;
    bool have_base = line.size() >= 32 && parse_double(trim(line.substr(31, 6)), base);
    if (!have_base) {
        for (const auto& tok : tokenize(line))
            if (parse_double(tok, base) && base > 0.0) {
                have_base = true;
                break;
            }
    }
    if (!have_base || base <= 0.0)
        throw MalformedRecordError(lineno, "mva_base", "no positive MVA base on title card");
    model.base_mva = base;
    model.case_name = line.size() > 45 ? trim(line.substr(45)) : trim(line);

    bool saw_bus = false;
    bool saw_branch = false;
    enum class Section { None, Bus, Branch, Skip } section = Section::None;

    while (std::getline(input, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.rfind("END OF DATA", 0) == 0) break;

        if (section == Section::None) {
            if (t.find("BUS DATA") != std::string::npos) {
                section = Section::Bus;
                saw_bus = true;
            } else if (t.find("BRANCH DATA") != std::string::npos) {
                section = Section::Branch;
                saw_branch = true;
            } else if (t.find("FOLLOWS") != std::string::npos) {
                section = Section::Skip;
            }
            continue;
        }
        if (is_section_end(t)) {
            section = Section::None;
            continue;
        }
        if (section == Section::Skip) continue;

        if (section == Section::Bus) {
            // Bus number first, then a free-text name, then a run of numeric
            // fields: area zone type V ang Pload Qload Pgen Qgen baseKV
            // desiredV Qmax Qmin Gshunt Bshunt remote. The name may contain
            // digits and blanks, so fields are taken from the longest
            // trailing numeric run.
            auto toks = tokenize(line);
            if (toks.size() < 8) throw MalformedRecordError(lineno, "bus", "too few fields");
            size_t first_num = toks.size();
            double tmp;
            while (first_num > 1 && parse_double(toks[first_num - 1], tmp)) --first_num;
            const size_t nfields = toks.size() - first_num;
            if (nfields < 7) throw MalformedRecordError(lineno, "bus", "too few numeric fields");
            const auto f = [&](size_t k) -> const std::string& { return toks[first_num + k]; };

            BusRecord bus;
            bus.id = require_int(toks[0], lineno, "bus_number");
            const int type = require_int(f(2), lineno, "bus_type");
            switch (type) {
                case 0:
                case 1: bus.bus_type = BusType::PQ; break;
                case 2: bus.bus_type = BusType::PV; break;
                case 3: bus.bus_type = BusType::Slack; break;
                default:
                    throw MalformedRecordError(lineno, "bus_type",
                                               "unknown type " + std::to_string(type));
            }
            bus.v_mag = require_double(f(3), lineno, "voltage");
            bus.v_ang = require_double(f(4), lineno, "angle") * kPi / 180.0;
            bus.p_load = require_double(f(5), lineno, "p_load") / base;
            bus.q_load = require_double(f(6), lineno, "q_load") / base;
            if (nfields > 7) bus.p_gen = require_double(f(7), lineno, "p_gen") / base;
            if (nfields > 8) bus.q_gen = require_double(f(8), lineno, "q_gen") / base;
            if (nfields > 9) bus.base_kv = require_double(f(9), lineno, "base_kv");
            if (nfields > 13) bus.g_shunt = require_double(f(13), lineno, "g_shunt");
            if (nfields > 14) bus.b_shunt = require_double(f(14), lineno, "b_shunt");
            model.buses.push_back(bus);
        } else {
            // from to area zone circuit type R X B rating1 rating2 rating3
            // control side ratio angle ...
            auto toks = tokenize(line);
            if (toks.size() < 9) throw MalformedRecordError(lineno, "branch", "too few fields");
            BranchRecord br;
            br.id = static_cast<int>(model.branches.size()) + 1;
            br.from_bus = require_int(toks[0], lineno, "from_bus");
            br.to_bus = require_int(toks[1], lineno, "to_bus");
            br.r = require_double(toks[6], lineno, "r");
            br.x = require_double(toks[7], lineno, "x");
            br.b_charging = require_double(toks[8], lineno, "b");
            const size_t rating_tok = 8 + static_cast<size_t>(opts.rating_field);
            if (toks.size() > rating_tok)
                br.rating_mva = require_double(toks[rating_tok], lineno, "rating");
            if (toks.size() > 14) {
                const double ratio = require_double(toks[14], lineno, "ratio");
                br.tap = ratio > 0.0 ? ratio : 1.0;
            }
            model.branches.push_back(br);
        }
    }

    if (!saw_bus) throw MissingSectionError("BUS DATA");
    if (!saw_branch) throw MissingSectionError("BRANCH DATA");

    std::unordered_set<int> seen;
    int slack_count = 0;
    for (const auto& b : model.buses) {
        if (!seen.insert(b.id).second) throw DuplicateBusIdError(b.id);
        if (b.bus_type == BusType::Slack) ++slack_count;
    }
    if (slack_count == 0) throw NoSlackBusError();
    return model;
}

// ---- JSON fixture format ----

namespace {

using nlohmann::json;

double number_at(const json& obj, const std::string& path, const char* key,
                 bool required = true, double fallback = 0.0) {
    if (!obj.contains(key)) {
        if (required) throw SchemaError(path + "." + key, "missing key");
        return fallback;
    }
    const auto& v = obj.at(key);
    if (!v.is_number()) throw SchemaError(path + "." + key, "expected a number");
    return v.get<double>();
}

}  // namespace

NetworkModel parse_json_network(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("$", e.what());
    }
    if (!doc.is_object()) throw SchemaError("$", "expected a JSON object");

    NetworkModel model;
    model.base_mva = number_at(doc, "$", "base_mva");
    if (model.base_mva <= 0.0) throw SchemaError("$.base_mva", "must be positive");
    model.case_name = doc.value("case_name", std::string{});

    if (!doc.contains("buses") || !doc["buses"].is_array())
        throw SchemaError("$.buses", "missing or not an array");
    if (!doc.contains("branches") || !doc["branches"].is_array())
        throw SchemaError("$.branches", "missing or not an array");

    std::unordered_set<int> bus_ids;
    int slack_count = 0;
    for (size_t i = 0; i < doc["buses"].size(); ++i) {
        const auto& jb = doc["buses"][i];
        const std::string path = "buses[" + std::to_string(i) + "]";
        if (!jb.is_object()) throw SchemaError(path, "expected an object");
        BusRecord bus;
        bus.id = static_cast<int>(number_at(jb, path, "id"));
        if (!jb.contains("type") || !jb["type"].is_string())
            throw SchemaError(path + ".type", "missing or not a string");
        const std::string type = jb["type"].get<std::string>();
        if (type == "PQ") bus.bus_type = BusType::PQ;
        else if (type == "PV") bus.bus_type = BusType::PV;
        else if (type == "Slack") bus.bus_type = BusType::Slack;
        else throw SchemaError(path + ".type", "unknown bus type '" + type + "'");
        bus.v_mag = number_at(jb, path, "v_mag", false, 1.0);
        bus.v_ang = number_at(jb, path, "v_ang_deg", false, 0.0) * kPi / 180.0;
        bus.p_load = number_at(jb, path, "p_load_mw", false) / model.base_mva;
        bus.q_load = number_at(jb, path, "q_load_mvar", false) / model.base_mva;
        bus.p_gen = number_at(jb, path, "p_gen_mw", false) / model.base_mva;
        bus.q_gen = number_at(jb, path, "q_gen_mvar", false) / model.base_mva;
        bus.g_shunt = number_at(jb, path, "g_shunt", false);
        bus.b_shunt = number_at(jb, path, "b_shunt", false);
        bus.base_kv = number_at(jb, path, "base_kv", false);
        if (!bus_ids.insert(bus.id).second) throw DuplicateBusIdError(bus.id);
        if (bus.bus_type == BusType::Slack) ++slack_count;
        model.buses.push_back(bus);
    }
    if (slack_count == 0) throw NoSlackBusError();

    for (size_t i = 0; i < doc["branches"].size(); ++i) {
        const auto& jb = doc["branches"][i];
        const std::string path = "branches[" + std::to_string(i) + "]";
        if (!jb.is_object()) throw SchemaError(path, "expected an object");
        BranchRecord br;
        br.id = static_cast<int>(number_at(jb, path, "id", false,
                                           static_cast<double>(model.branches.size() + 1)));
        br.from_bus = static_cast<int>(number_at(jb, path, "from"));
        br.to_bus = static_cast<int>(number_at(jb, path, "to"));
        if (!bus_ids.count(br.from_bus))
            throw SchemaError(path + ".from", "unknown bus " + std::to_string(br.from_bus));
        if (!bus_ids.count(br.to_bus))
            throw SchemaError(path + ".to", "unknown bus " + std::to_string(br.to_bus));
        br.r = number_at(jb, path, "r", false);
        br.x = number_at(jb, path, "x");
        br.b_charging = number_at(jb, path, "b", false);
        const double tap = number_at(jb, path, "tap", false, 1.0);
        br.tap = tap > 0.0 ? tap : 1.0;
        br.rating_mva = number_at(jb, path, "rating_mva", false);
        br.in_service = number_at(jb, path, "status", false, 1.0) != 0.0;
        model.branches.push_back(br);
    }
    return model;
}

std::string serialize_json(const NetworkModel& model) {
    nlohmann::ordered_json doc;
    doc["base_mva"] = model.base_mva;
    doc["case_name"] = model.case_name;
    doc["buses"] = nlohmann::ordered_json::array();
    for (const auto& b : model.buses) {
        nlohmann::ordered_json jb;
        jb["id"] = b.id;
        jb["type"] = to_string(b.bus_type);
        jb["v_mag"] = b.v_mag;
        jb["v_ang_deg"] = b.v_ang * 180.0 / kPi;
        jb["p_load_mw"] = b.p_load * model.base_mva;
        jb["q_load_mvar"] = b.q_load * model.base_mva;
        jb["p_gen_mw"] = b.p_gen * model.base_mva;
        jb["q_gen_mvar"] = b.q_gen * model.base_mva;
        jb["g_shunt"] = b.g_shunt;
        jb["b_shunt"] = b.b_shunt;
        jb["base_kv"] = b.base_kv;
        doc["buses"].push_back(std::move(jb));
    }
    doc["branches"] = nlohmann::ordered_json::array();
    for (const auto& br : model.branches) {
        nlohmann::ordered_json jb;
        jb["id"] = br.id;
        jb["from"] = br.from_bus;
        jb["to"] = br.to_bus;
        jb["r"] = br.r;
        jb["x"] = br.x;
        jb["b"] = br.b_charging;
        jb["tap"] = br.tap;
        jb["rating_mva"] = br.rating_mva;
        jb["status"] = br.in_service ? 1 : 0;
        doc["branches"].push_back(std::move(jb));
    }
    return doc.dump(2);
}

// ---- validation ----

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

std::vector<Diagnostic> validate_network(const NetworkModel& model) {
    std::vector<Diagnostic> out;
    const auto error = [&](std::string code, std::string msg) {
        out.push_back({Severity::Error, std::move(code), std::move(msg)});
    };
    const auto warn = [&](std::string code, std::string msg) {
        out.push_back({Severity::Warning, std::move(code), std::move(msg)});
    };

    if (model.base_mva <= 0.0)
        error("NonpositiveBase", "base_mva must be positive");

    std::unordered_map<int, int> degree;
    std::set<int> ids;
    int slack_count = 0;
    for (const auto& b : model.buses) {
        if (!ids.insert(b.id).second)
            error("DuplicateBusId", "duplicate bus id " + std::to_string(b.id));
        if (b.bus_type == BusType::Slack) ++slack_count;
        if (!(b.v_mag > 0.0))
            error("BadVoltage", "bus " + std::to_string(b.id) + " has non-positive voltage");
        if (!std::isfinite(b.p_scheduled()))
            error("NonfiniteInjection",
                  "bus " + std::to_string(b.id) + " has non-finite scheduled injection");
        degree.emplace(b.id, 0);
    }
    if (slack_count == 0) error("NoSlackBus", "no slack bus");
    if (slack_count > 1)
        error("MultipleSlack", std::to_string(slack_count) + " slack buses");

    // a 0 rating means "no limit"; flag it only when the case carries rating
    // data at all, otherwise exchange cases without ratings drown in warnings
    const bool any_rated =
        std::any_of(model.branches.begin(), model.branches.end(),
                    [](const auto& br) { return br.in_service && br.rating_mva > 0.0; });
    for (const auto& br : model.branches) {
        const std::string tag = "branch " + std::to_string(br.id);
        if (!ids.count(br.from_bus))
            error("UnknownBus", tag + " references unknown bus " + std::to_string(br.from_bus));
        if (!ids.count(br.to_bus))
            error("UnknownBus", tag + " references unknown bus " + std::to_string(br.to_bus));
        if (br.from_bus == br.to_bus)
            error("SelfLoop", tag + " connects bus " + std::to_string(br.from_bus) + " to itself");
        if (br.x == 0.0) error("ZeroReactance", tag + " has x = 0");
        if (br.tap <= 0.0) error("BadTap", tag + " has non-positive tap");
        if (br.in_service) {
            if (any_rated && br.rating_mva == 0.0)
                warn("UnratedBranch", tag + " has no flow limit");
            if (degree.count(br.from_bus)) degree[br.from_bus]++;
            if (degree.count(br.to_bus)) degree[br.to_bus]++;
        }
    }
    for (const auto& b : model.buses)
        if (degree[b.id] == 0 && b.bus_type != BusType::Slack)
            warn("IsolatedBus", "bus " + std::to_string(b.id) + " has no in-service branches");
    return out;
}

}  // namespace gridca::ingest
