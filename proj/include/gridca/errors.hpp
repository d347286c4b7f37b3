#pragma once

#include <stdexcept>
#include <string>

namespace gridca {

/// Base class for every error raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- ingest ----

struct MissingSectionError : Error {
    explicit MissingSectionError(const std::string& section)
        : Error("missing section: " + section), section(section) {}
    std::string section;
};

struct MalformedRecordError : Error {
    MalformedRecordError(int line, const std::string& field, const std::string& reason)
        : Error("line " + std::to_string(line) + ", field '" + field + "': " + reason),
          line(line), field(field), reason(reason) {}
    int line;
    std::string field;
    std::string reason;
};

struct NoSlackBusError : Error {
    NoSlackBusError() : Error("no slack bus in input") {}
};

struct DuplicateBusIdError : Error {
    explicit DuplicateBusIdError(int bus_id)
        : Error("duplicate bus id " + std::to_string(bus_id)), bus_id(bus_id) {}
    int bus_id;
};

struct SchemaError : Error {
    SchemaError(const std::string& path, const std::string& reason)
        : Error("schema error at " + path + ": " + reason), path(path) {}
    std::string path;
};

// ---- graph ----

struct IndexOutOfRangeError : Error {
    explicit IndexOutOfRangeError(const std::string& what) : Error(what) {}
};

struct EdgeAlreadyOutError : Error {
    explicit EdgeAlreadyOutError(int edge)
        : Error("edge " + std::to_string(edge) + " is already out of service"), edge(edge) {}
    int edge;
};

// ---- linalg ----

struct DimensionMismatchError : Error {
    explicit DimensionMismatchError(const std::string& what) : Error(what) {}
};

/// Zero pivot during full LU elimination. The direct screening path reports
/// this on islanded scenarios, whose coefficient matrices are singular.
struct SingularError : Error {
    explicit SingularError(int pivot_row)
        : Error("singular matrix: zero pivot at row " + std::to_string(pivot_row)),
          pivot_row(pivot_row) {}
    int pivot_row;
};

struct ZeroPivotError : Error {
    explicit ZeroPivotError(int row)
        : Error("zero pivot at row " + std::to_string(row)), row(row) {}
    int row;
};

/// p'Ap <= 0 beyond round-off inside CG: the operator is not SPD.
struct BreakdownError : Error {
    explicit BreakdownError(const std::string& what) : Error(what) {}
};

// ---- fdpf / contingency ----

struct DivergedError : Error {
    explicit DivergedError(const std::string& what) : Error(what) {}
};

struct BaseCaseDivergedError : Error {
    explicit BaseCaseDivergedError(const std::string& what) : Error(what) {}
};

struct UnknownBranchError : Error {
    explicit UnknownBranchError(int branch_id)
        : Error("unknown or out-of-service branch in filter: " + std::to_string(branch_id)),
          branch_id(branch_id) {}
    int branch_id;
};

/// Main island has no generator above the participation threshold.
struct NoParticipantsError : Error {
    NoParticipantsError() : Error("no re-dispatch participants in main island") {}
};

// ---- report ----

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace gridca
