#include "gridca/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridca::report {

namespace {

constexpr const char* kSchemaVersion = "1";
constexpr size_t kViolationCap = 50;

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

size_t write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path);
    return content.size();
}

}  // namespace

std::string to_csv(const ScreeningReport& report) {
    std::ostringstream out;
    out << "branch_id,from_bus,to_bus,islanding,converged,outer_iters,cg_iters,"
           "time_ms,worst_violation_pct,violation_count,failure_reason\n";
    for (const auto& s : report.scenarios) {
        const double worst = s.violations.empty() ? 0.0 : s.violations.front().percent;
        out << s.branch_id << ',' << s.from_bus << ',' << s.to_bus << ','
            << (s.islanding ? "true" : "false") << ',' << (s.converged ? "true" : "false") << ','
            << s.outer_iterations << ',' << s.cg_iterations_total << ',' << fixed(s.time_ms, 2)
            << ',' << fixed(worst, 1) << ',' << s.violations.size() << ','
            << csv_quote(s.failure_reason) << '\n';
    }
    return out.str();
}

size_t write_csv(const ScreeningReport& report, const std::string& path) {
    return write_file(path, to_csv(report));
}

std::string to_json(const ScreeningReport& report) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["case_name"] = report.case_name;
    doc["solver"] = report.solver;
    doc["totals"] = {{"tested", report.totals.tested},
                     {"converged", report.totals.converged},
                     {"failed", report.totals.failed},
                     {"islanding", report.totals.islanding},
                     {"lu_failures", report.totals.lu_failures}};
    doc["total_time_ms"] = report.total_time_ms;
    doc["scenarios"] = nlohmann::ordered_json::array();
    for (const auto& s : report.scenarios) {
        nlohmann::ordered_json js;
        js["branch_id"] = s.branch_id;
        js["from_bus"] = s.from_bus;
        js["to_bus"] = s.to_bus;
        js["islanding"] = s.islanding;
        js["deenergized_count"] = s.deenergized_count;
        js["converged"] = s.converged;
        js["outer_iters"] = s.outer_iterations;
        js["cg_iters"] = s.cg_iterations_total;
        js["time_ms"] = s.time_ms;
        js["violations"] = nlohmann::ordered_json::array();
        size_t emitted = 0;
        for (const auto& v : s.violations) {
            if (emitted == kViolationCap) break;
            js["violations"].push_back({{"branch_id", v.branch_id},
                                        {"edge", v.edge},
                                        {"flow_pu", v.flow_pu},
                                        {"limit_pu", v.limit_pu},
                                        {"percent", v.percent}});
            ++emitted;
        }
        js["violation_overflow"] =
            s.violations.size() > kViolationCap ? s.violations.size() - kViolationCap : 0;
        if (s.redispatch) {
            const auto& r = *s.redispatch;
            nlohmann::ordered_json jr;
            jr["island_net_injection_pu"] = r.island_net_injection;
            jr["island_gen_count"] = r.island_gen_count;
            jr["island_load_count"] = r.island_load_count;
            jr["participants"] = nlohmann::ordered_json::array();
            for (const auto& p : r.participants)
                jr["participants"].push_back({{"vertex", p.vertex},
                                              {"bus", p.bus_id},
                                              {"share", p.share},
                                              {"delta_p_pu", p.delta_p}});
            js["redispatch"] = std::move(jr);
        }
        js["failure_reason"] = s.failure_reason;
        doc["scenarios"].push_back(std::move(js));
    }
    return doc.dump(2) + "\n";
}

size_t write_json(const ScreeningReport& report, const std::string& path) {
    return write_file(path, to_json(report));
}

ScreeningReport read_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(std::string("report JSON parse error: ") + e.what());
    }
    if (doc.value("schema_version", "") != kSchemaVersion)
        throw IoError("unsupported report schema_version");

    ScreeningReport report;
    report.case_name = doc.value("case_name", "");
    report.solver = doc.value("solver", "");
    const auto& t = doc.at("totals");
    report.totals = {t.at("tested"), t.at("converged"), t.at("failed"), t.at("islanding"),
                     t.at("lu_failures")};
    report.total_time_ms = doc.value("total_time_ms", 0.0);
    for (const auto& js : doc.at("scenarios")) {
        contingency::ScenarioResult s;
        s.branch_id = js.at("branch_id");
        s.from_bus = js.at("from_bus");
        s.to_bus = js.at("to_bus");
        s.islanding = js.at("islanding");
        s.deenergized_count = js.at("deenergized_count");
        s.converged = js.at("converged");
        s.outer_iterations = js.at("outer_iters");
        s.cg_iterations_total = js.at("cg_iters");
        s.time_ms = js.at("time_ms");
        for (const auto& jv : js.at("violations")) {
            fdpf::Violation v;
            v.branch_id = jv.at("branch_id");
            v.edge = jv.at("edge");
            v.flow_pu = jv.at("flow_pu");
            v.limit_pu = jv.at("limit_pu");
            v.percent = jv.at("percent");
            s.violations.push_back(v);
        }
        if (js.contains("redispatch")) {
            const auto& jr = js.at("redispatch");
            contingency::RedispatchRecord r;
            r.island_net_injection = jr.at("island_net_injection_pu");
            r.island_gen_count = jr.at("island_gen_count");
            r.island_load_count = jr.at("island_load_count");
            for (const auto& jp : jr.at("participants"))
                r.participants.push_back(
                    {jp.at("vertex"), jp.at("bus"), jp.at("share"), jp.at("delta_p_pu")});
            s.redispatch = std::move(r);
        }
        s.failure_reason = js.at("failure_reason");
        report.scenarios.push_back(std::move(s));
    }
    return report;
}

}  // namespace gridca::report
