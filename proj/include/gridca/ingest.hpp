#pragma once

#include <string>
#include <vector>

#include "gridca/errors.hpp"

namespace gridca::ingest {

enum class BusType { PQ, PV, Slack };

const char* to_string(BusType t);

/// One bus of the bus-branch model, already normalized to per-unit on the
/// system MVA base, with angles in radians.
struct BusRecord {
    int id = 0;  // external bus number
    BusType bus_type = BusType::PQ;
    double v_mag = 1.0;   // solved voltage magnitude (p.u.)
    double v_ang = 0.0;   // solved angle (rad)
    double p_load = 0.0;  // p.u.
    double q_load = 0.0;
    double p_gen = 0.0;
    double q_gen = 0.0;
    double g_shunt = 0.0;  // p.u.
    double b_shunt = 0.0;
    double base_kv = 0.0;

    double p_scheduled() const { return p_gen - p_load; }
    double q_scheduled() const { return q_gen - q_load; }

    bool operator==(const BusRecord&) const = default;
};

struct BranchRecord {
    int id = 0;  // 1-based ordinal in input order, stable for reporting
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;  // total line charging (p.u.)
    double tap = 1.0;         // turns ratio, normalized so 0 -> 1.0
    double rating_mva = 0.0;  // 0 = unlimited
    bool in_service = true;

    bool operator==(const BranchRecord&) const = default;
};

struct NetworkModel {
    double base_mva = 100.0;
    std::string case_name;
    std::vector<BusRecord> buses;
    std::vector<BranchRecord> branches;

    const BusRecord* find_bus(int id) const;

    bool operator==(const NetworkModel&) const = default;
};

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string code;  // machine-matchable, e.g. "ZeroReactance"
    std::string message;
};

struct CdfOptions {
    /// Which CDF rating tier (1..3) feeds BranchRecord::rating_mva.
    int rating_field = 1;
};

/// Parse an IEEE Common Data Format exchange file (1973 format).
/// Throws MissingSectionError, MalformedRecordError, NoSlackBusError,
/// DuplicateBusIdError.
NetworkModel parse_cdf(const std::string& text, const CdfOptions& opts = {});

/// Parse the JSON network fixture format (see docs/formats.md).
/// Throws SchemaError with the offending JSON path.
NetworkModel parse_json_network(const std::string& text);

/// Serialize a model back to the JSON fixture format (MW / degrees).
std::string serialize_json(const NetworkModel& model);

/// Check every NetworkModel invariant. Returns one Diagnostic per violation;
/// an empty list means the model is valid.
std::vector<Diagnostic> validate_network(const NetworkModel& model);

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace gridca::ingest
