#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hbmtherm/attack.hpp"
#include "hbmtherm/errors.hpp"
#include "hbmtherm/geometry.hpp"
#include "hbmtherm/network.hpp"
#include "hbmtherm/power.hpp"
#include "hbmtherm/solver.hpp"
#include "hbmtherm/telemetry.hpp"

// Scenario files tie the pipeline together: one JSON document fixes the
// stack, the materials, the benign load, the attack, the sensors, and the
// outputs, and a run is a pure function of that document. Parsing is
// strict: a field the schema does not know is an error named by its full
// path, so a typo cannot silently fall back to a default.

namespace hbmtherm {

using Json = nlohmann::ordered_json;

enum class AttackMode { Cage, Manual };

struct RefineSpec {
    double window = 5e-3;         ///< s searched around each offset
    double grid = 1e-3;           ///< s between candidate offsets
    std::optional<double> budget; ///< J, rescale the plan to this total energy
};

struct AttackSpec {
    BankId victim = 0;
    AttackMode mode = AttackMode::Cage;
    CageParams cage_params; ///< used when mode is Cage
    AttackPlan manual_plan; ///< used when mode is Manual; victim comes from above
    std::optional<RefineSpec> refine;
};

struct OutputSpec {
    int trace_subsample = 1;
    bool emit_sensor_trace = false;
};

struct Scenario {
    StackGeometry geometry;
    MaterialParams material;
    SolverConfig solver;
    double horizon = 0.0;              ///< s, the one field every scenario must set
    std::vector<double> initial_theta; ///< K above ambient; empty = uniform ambient
    std::vector<PulseSpec> pulses;
    std::vector<WorkloadSpec> workloads;
    std::optional<AttackSpec> attack;
    SensorModel sensors;
    double stealth_floor_sigma = 0.05; ///< K
    ThrottlePolicy throttle;
    std::uint64_t seed = 0;
    OutputSpec outputs;

    void validate() const {
        geometry.validate();
        material.validate();
        solver.validate();
        if (!(horizon > 0.0)) throw DomainError("scenario.horizon: must be > 0");
        const int n = geometry.total_banks();
        if (!initial_theta.empty() && static_cast<int>(initial_theta.size()) != n) {
            throw DomainError("scenario.initial: expected " + std::to_string(n) + " entries");
        }
        for (const PulseSpec& p : pulses) {
            p.validate();
            if (p.bank < 0 || p.bank >= n) {
                throw DomainError("scenario.sources.pulses: bank " + std::to_string(p.bank) +
                                  " out of range");
            }
        }
        for (const WorkloadSpec& w : workloads) {
            w.validate();
            for (BankId b : w.banks) {
                if (b < 0 || b >= n) {
                    throw DomainError("scenario.sources.workloads: bank " + std::to_string(b) +
                                      " out of range");
                }
            }
        }
        sensors.validate();
        if (!(stealth_floor_sigma > 0.0)) {
            throw DomainError("scenario.sensors.stealth_floor_sigma: must be > 0");
        }
        throttle.validate();
        if (outputs.trace_subsample < 1) {
            throw DomainError("scenario.outputs.trace_subsample: must be >= 1");
        }
        if (attack.has_value()) {
            if (attack->victim < 0 || attack->victim >= n) {
                throw DomainError("scenario.attack.victim: bank out of range");
            }
            if (attack->mode == AttackMode::Cage) {
                attack->cage_params.validate();
            } else {
                if (attack->manual_plan.entries.empty()) {
                    throw DomainError("scenario.attack.manual_plan: needs at least one entry");
                }
                for (const AttackEntry& e : attack->manual_plan.entries) {
                    if (e.attacker < 0 || e.attacker >= n) {
                        throw DomainError("scenario.attack.manual_plan: attacker " +
                                          std::to_string(e.attacker) + " out of range");
                    }
                }
                attack->manual_plan.validate();
            }
            if (attack->refine.has_value()) {
                if (!(attack->refine->grid > 0.0)) {
                    throw DomainError("scenario.attack.refine.grid: must be > 0");
                }
                if (!(attack->refine->window > 0.0)) {
                    throw DomainError("scenario.attack.refine.window: must be > 0");
                }
                if (attack->refine->budget.has_value() && !(*attack->refine->budget > 0.0)) {
                    throw DomainError("scenario.attack.refine.budget: must be > 0");
                }
            }
        }
    }
};

namespace detail {

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what) {
    throw DomainError(path + ": " + what);
}

inline void check_known_fields(const Json& j, const std::string& path,
                               std::initializer_list<const char*> allowed) {
    if (!j.is_object()) schema_error(path, "expected an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (item.key() == a) {
                known = true;
                break;
            }
        }
        if (!known) schema_error(path, "unknown field '" + item.key() + "'");
    }
}

inline const Json& require_field(const Json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) schema_error(path, std::string("missing required field '") + key + "'");
    return j.at(key);
}

inline double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) schema_error(path, "expected a number");
    return v.get<double>();
}

inline int as_int(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) schema_error(path, "expected an integer");
    return v.get<int>();
}

inline std::uint64_t as_u64(const Json& v, const std::string& path) {
    if (!v.is_number_unsigned()) schema_error(path, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

inline bool as_bool(const Json& v, const std::string& path) {
    if (!v.is_boolean()) schema_error(path, "expected a boolean");
    return v.get<bool>();
}

inline std::string as_string(const Json& v, const std::string& path) {
    if (!v.is_string()) schema_error(path, "expected a string");
    return v.get<std::string>();
}

inline double get_number(const Json& j, const std::string& path, const char* key,
                         double fallback) {
    if (!j.contains(key)) return fallback;
    return as_number(j.at(key), path + "." + key);
}

inline int get_int(const Json& j, const std::string& path, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    return as_int(j.at(key), path + "." + key);
}

inline bool get_bool(const Json& j, const std::string& path, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    return as_bool(j.at(key), path + "." + key);
}

inline SensorGrouping parse_grouping(const std::string& s, const std::string& path) {
    if (s == "per_bank") return SensorGrouping::PerBank;
    if (s == "per_layer") return SensorGrouping::PerLayer;
    if (s == "per_quadrant") return SensorGrouping::PerQuadrant;
    schema_error(path, "expected 'per_bank', 'per_layer', or 'per_quadrant'");
}

inline const char* grouping_name(SensorGrouping g) {
    switch (g) {
    case SensorGrouping::PerBank: return "per_bank";
    case SensorGrouping::PerLayer: return "per_layer";
    case SensorGrouping::PerQuadrant: return "per_quadrant";
    }
    return "per_layer";
}

inline LateralSet parse_lateral_set(const std::string& s, const std::string& path) {
    if (s == "all4") return LateralSet::All4;
    if (s == "row_pair") return LateralSet::RowPair;
    schema_error(path, "expected 'all4' or 'row_pair'");
}

inline const char* lateral_set_name(LateralSet s) {
    return s == LateralSet::All4 ? "all4" : "row_pair";
}

inline std::vector<BankId> parse_bank_array(const Json& v, const std::string& path) {
    if (!v.is_array()) schema_error(path, "expected an array of bank ids");
    std::vector<BankId> banks;
    banks.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        banks.push_back(as_int(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return banks;
}

inline PulseSpec parse_pulse(const Json& j, const std::string& path) {
    check_known_fields(j, path, {"bank", "t_start", "duration", "amplitude"});
    PulseSpec p;
    p.bank = as_int(require_field(j, path, "bank"), path + ".bank");
    p.t_start = get_number(j, path, "t_start", 0.0);
    p.duration = as_number(require_field(j, path, "duration"), path + ".duration");
    p.amplitude = as_number(require_field(j, path, "amplitude"), path + ".amplitude");
    return p;
}

inline WorkloadSpec parse_workload(const Json& j, const std::string& path) {
    check_known_fields(j, path,
                       {"banks", "seed", "burst_duration", "cooldown_duration", "amplitude",
                        "duty_jitter"});
    WorkloadSpec w;
    w.banks = parse_bank_array(require_field(j, path, "banks"), path + ".banks");
    if (j.contains("seed")) w.seed = as_u64(j.at("seed"), path + ".seed");
    w.burst_duration = get_number(j, path, "burst_duration", w.burst_duration);
    w.cooldown_duration = get_number(j, path, "cooldown_duration", w.cooldown_duration);
    w.amplitude = get_number(j, path, "amplitude", w.amplitude);
    w.duty_jitter = get_number(j, path, "duty_jitter", w.duty_jitter);
    return w;
}

inline AttackSpec parse_attack(const Json& j, const std::string& path) {
    check_known_fields(j, path, {"victim", "mode", "cage_params", "manual_plan", "refine"});
    AttackSpec a;
    a.victim = as_int(require_field(j, path, "victim"), path + ".victim");
    if (j.contains("mode")) {
        const std::string mode = as_string(j.at("mode"), path + ".mode");
        if (mode == "cage") a.mode = AttackMode::Cage;
        else if (mode == "manual") a.mode = AttackMode::Manual;
        else schema_error(path + ".mode", "expected 'cage' or 'manual'");
    }
    if (j.contains("cage_params")) {
        if (a.mode != AttackMode::Cage) {
            schema_error(path + ".cage_params", "only valid with mode 'cage'");
        }
        const Json& c = j.at("cage_params");
        const std::string cpath = path + ".cage_params";
        check_known_fields(c, cpath,
                           {"vertical_duration", "lateral_duration", "vertical_amplitude",
                            "lateral_amplitude", "cooldown", "n_cycles", "lateral_set"});
        CageParams& p = a.cage_params;
        p.vertical_duration = get_number(c, cpath, "vertical_duration", p.vertical_duration);
        p.lateral_duration = get_number(c, cpath, "lateral_duration", p.lateral_duration);
        p.vertical_amplitude = get_number(c, cpath, "vertical_amplitude", p.vertical_amplitude);
        p.lateral_amplitude = get_number(c, cpath, "lateral_amplitude", p.lateral_amplitude);
        p.cooldown = get_number(c, cpath, "cooldown", p.cooldown);
        p.n_cycles = get_int(c, cpath, "n_cycles", p.n_cycles);
        if (c.contains("lateral_set")) {
            p.lateral_set = parse_lateral_set(
                as_string(c.at("lateral_set"), cpath + ".lateral_set"), cpath + ".lateral_set");
        }
    }
    if (j.contains("manual_plan")) {
        if (a.mode != AttackMode::Manual) {
            schema_error(path + ".manual_plan", "only valid with mode 'manual'");
        }
        const Json& m = j.at("manual_plan");
        const std::string mpath = path + ".manual_plan";
        check_known_fields(m, mpath, {"entries", "cycle_period", "n_cycles"});
        a.manual_plan.victim = a.victim;
        a.manual_plan.cycle_period =
            as_number(require_field(m, mpath, "cycle_period"), mpath + ".cycle_period");
        a.manual_plan.n_cycles = get_int(m, mpath, "n_cycles", 1);
        const Json& entries = require_field(m, mpath, "entries");
        if (!entries.is_array()) schema_error(mpath + ".entries", "expected an array");
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const std::string epath = mpath + ".entries[" + std::to_string(i) + "]";
            check_known_fields(entries[i], epath, {"attacker", "offset", "duration", "amplitude"});
            AttackEntry e;
            e.attacker = as_int(require_field(entries[i], epath, "attacker"), epath + ".attacker");
            e.offset = get_number(entries[i], epath, "offset", 0.0);
            e.duration =
                as_number(require_field(entries[i], epath, "duration"), epath + ".duration");
            e.amplitude =
                as_number(require_field(entries[i], epath, "amplitude"), epath + ".amplitude");
            a.manual_plan.entries.push_back(e);
        }
    } else if (a.mode == AttackMode::Manual) {
        schema_error(path, "mode 'manual' requires a manual_plan");
    }
    if (j.contains("refine")) {
        const Json& r = j.at("refine");
        const std::string rpath = path + ".refine";
        check_known_fields(r, rpath, {"window", "grid", "budget"});
        RefineSpec spec;
        spec.window = get_number(r, rpath, "window", spec.window);
        spec.grid = get_number(r, rpath, "grid", spec.grid);
        if (r.contains("budget")) spec.budget = as_number(r.at("budget"), rpath + ".budget");
        a.refine = spec;
    }
    return a;
}

} // namespace detail

inline Scenario scenario_from_json(const Json& j) {
    detail::check_known_fields(j, "scenario",
                               {"geometry", "material", "solver", "horizon", "initial", "sources",
                                "attack", "sensors", "throttle", "seed", "outputs"});
    Scenario s;
    if (j.contains("geometry")) {
        const Json& g = j.at("geometry");
        detail::check_known_fields(g, "scenario.geometry", {"width", "depth", "layers"});
        s.geometry.width = detail::get_int(g, "scenario.geometry", "width", s.geometry.width);
        s.geometry.depth = detail::get_int(g, "scenario.geometry", "depth", s.geometry.depth);
        s.geometry.layers = detail::get_int(g, "scenario.geometry", "layers", s.geometry.layers);
    }
    if (j.contains("material")) {
        const Json& m = j.at("material");
        detail::check_known_fields(m, "scenario.material",
                                   {"r_lat", "r_vert", "c_bank", "r_sink", "t_ambient"});
        s.material.r_lat = detail::get_number(m, "scenario.material", "r_lat", s.material.r_lat);
        s.material.r_vert = detail::get_number(m, "scenario.material", "r_vert", s.material.r_vert);
        s.material.c_bank = detail::get_number(m, "scenario.material", "c_bank", s.material.c_bank);
        s.material.r_sink = detail::get_number(m, "scenario.material", "r_sink", s.material.r_sink);
        s.material.t_ambient =
            detail::get_number(m, "scenario.material", "t_ambient", s.material.t_ambient);
    }
    if (j.contains("solver")) {
        const Json& c = j.at("solver");
        detail::check_known_fields(c, "scenario.solver", {"dt", "linear_tolerance", "max_iterations"});
        s.solver.dt = detail::get_number(c, "scenario.solver", "dt", s.solver.dt);
        s.solver.linear_tolerance =
            detail::get_number(c, "scenario.solver", "linear_tolerance", s.solver.linear_tolerance);
        s.solver.max_iterations =
            detail::get_int(c, "scenario.solver", "max_iterations", s.solver.max_iterations);
    }
    s.horizon = detail::as_number(detail::require_field(j, "scenario", "horizon"), "scenario.horizon");
    if (j.contains("initial")) {
        const Json& init = j.at("initial");
        if (init.is_string()) {
            if (init.get<std::string>() != "ambient") {
                detail::schema_error("scenario.initial", "expected 'ambient' or an array");
            }
        } else if (init.is_array()) {
            for (std::size_t i = 0; i < init.size(); ++i) {
                s.initial_theta.push_back(
                    detail::as_number(init[i], "scenario.initial[" + std::to_string(i) + "]"));
            }
        } else {
            detail::schema_error("scenario.initial", "expected 'ambient' or an array");
        }
    }
    if (j.contains("sources")) {
        const Json& src = j.at("sources");
        detail::check_known_fields(src, "scenario.sources", {"pulses", "workloads"});
        if (src.contains("pulses")) {
            const Json& arr = src.at("pulses");
            if (!arr.is_array()) detail::schema_error("scenario.sources.pulses", "expected an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                s.pulses.push_back(detail::parse_pulse(
                    arr[i], "scenario.sources.pulses[" + std::to_string(i) + "]"));
            }
        }
        if (src.contains("workloads")) {
            const Json& arr = src.at("workloads");
            if (!arr.is_array()) {
                detail::schema_error("scenario.sources.workloads", "expected an array");
            }
            for (std::size_t i = 0; i < arr.size(); ++i) {
                s.workloads.push_back(detail::parse_workload(
                    arr[i], "scenario.sources.workloads[" + std::to_string(i) + "]"));
            }
        }
    }
    if (j.contains("attack")) s.attack = detail::parse_attack(j.at("attack"), "scenario.attack");
    if (j.contains("sensors")) {
        const Json& sn = j.at("sensors");
        detail::check_known_fields(sn, "scenario.sensors",
                                   {"grouping", "sample_period", "noise_sigma",
                                    "stealth_floor_sigma"});
        if (sn.contains("grouping")) {
            s.sensors.grouping = detail::parse_grouping(
                detail::as_string(sn.at("grouping"), "scenario.sensors.grouping"),
                "scenario.sensors.grouping");
        }
        s.sensors.sample_period =
            detail::get_number(sn, "scenario.sensors", "sample_period", s.sensors.sample_period);
        s.sensors.noise_sigma =
            detail::get_number(sn, "scenario.sensors", "noise_sigma", s.sensors.noise_sigma);
        s.stealth_floor_sigma = detail::get_number(sn, "scenario.sensors", "stealth_floor_sigma",
                                                   s.stealth_floor_sigma);
    }
    if (j.contains("throttle")) {
        const Json& t = j.at("throttle");
        detail::check_known_fields(t, "scenario.throttle",
                                   {"threshold", "hysteresis", "stall_penalty"});
        s.throttle.threshold =
            detail::get_number(t, "scenario.throttle", "threshold", s.throttle.threshold);
        s.throttle.hysteresis =
            detail::get_number(t, "scenario.throttle", "hysteresis", s.throttle.hysteresis);
        s.throttle.stall_penalty =
            detail::get_number(t, "scenario.throttle", "stall_penalty", s.throttle.stall_penalty);
    }
    if (j.contains("seed")) s.seed = detail::as_u64(j.at("seed"), "scenario.seed");
    if (j.contains("outputs")) {
        const Json& o = j.at("outputs");
        detail::check_known_fields(o, "scenario.outputs",
                                   {"trace_subsample", "emit_sensor_trace"});
        s.outputs.trace_subsample =
            detail::get_int(o, "scenario.outputs", "trace_subsample", s.outputs.trace_subsample);
        s.outputs.emit_sensor_trace = detail::get_bool(o, "scenario.outputs", "emit_sensor_trace",
                                                       s.outputs.emit_sensor_trace);
    }
    s.validate();
    return s;
}

// Canonical form: every field materialized with its resolved value, fixed
// order, optional sections present only when set. parse(serialize(s))
// serializes to the same bytes.
inline Json scenario_to_json(const Scenario& s) {
    Json j;
    j["geometry"] = {{"width", s.geometry.width},
                     {"depth", s.geometry.depth},
                     {"layers", s.geometry.layers}};
    j["material"] = {{"r_lat", s.material.r_lat},
                     {"r_vert", s.material.r_vert},
                     {"c_bank", s.material.c_bank},
                     {"r_sink", s.material.r_sink},
                     {"t_ambient", s.material.t_ambient}};
    j["solver"] = {{"dt", s.solver.dt},
                   {"linear_tolerance", s.solver.linear_tolerance},
                   {"max_iterations", s.solver.max_iterations}};
    j["horizon"] = s.horizon;
    if (s.initial_theta.empty()) j["initial"] = "ambient";
    else j["initial"] = s.initial_theta;
    Json pulses = Json::array();
    for (const PulseSpec& p : s.pulses) {
        pulses.push_back({{"bank", p.bank},
                          {"t_start", p.t_start},
                          {"duration", p.duration},
                          {"amplitude", p.amplitude}});
    }
    Json workloads = Json::array();
    for (const WorkloadSpec& w : s.workloads) {
        workloads.push_back({{"banks", w.banks},
                             {"seed", w.seed},
                             {"burst_duration", w.burst_duration},
                             {"cooldown_duration", w.cooldown_duration},
                             {"amplitude", w.amplitude},
                             {"duty_jitter", w.duty_jitter}});
    }
    j["sources"] = {{"pulses", std::move(pulses)}, {"workloads", std::move(workloads)}};
    if (s.attack.has_value()) {
        const AttackSpec& a = *s.attack;
        Json atk;
        atk["victim"] = a.victim;
        atk["mode"] = a.mode == AttackMode::Cage ? "cage" : "manual";
        if (a.mode == AttackMode::Cage) {
            atk["cage_params"] = {{"vertical_duration", a.cage_params.vertical_duration},
                                  {"lateral_duration", a.cage_params.lateral_duration},
                                  {"vertical_amplitude", a.cage_params.vertical_amplitude},
                                  {"lateral_amplitude", a.cage_params.lateral_amplitude},
                                  {"cooldown", a.cage_params.cooldown},
                                  {"n_cycles", a.cage_params.n_cycles},
                                  {"lateral_set", detail::lateral_set_name(a.cage_params.lateral_set)}};
        } else {
            Json entries = Json::array();
            for (const AttackEntry& e : a.manual_plan.entries) {
                entries.push_back({{"attacker", e.attacker},
                                   {"offset", e.offset},
                                   {"duration", e.duration},
                                   {"amplitude", e.amplitude}});
            }
            atk["manual_plan"] = {{"entries", std::move(entries)},
                                  {"cycle_period", a.manual_plan.cycle_period},
                                  {"n_cycles", a.manual_plan.n_cycles}};
        }
        if (a.refine.has_value()) {
            Json r;
            r["window"] = a.refine->window;
            r["grid"] = a.refine->grid;
            if (a.refine->budget.has_value()) r["budget"] = *a.refine->budget;
            atk["refine"] = std::move(r);
        }
        j["attack"] = std::move(atk);
    }
    j["sensors"] = {{"grouping", detail::grouping_name(s.sensors.grouping)},
                    {"sample_period", s.sensors.sample_period},
                    {"noise_sigma", s.sensors.noise_sigma},
                    {"stealth_floor_sigma", s.stealth_floor_sigma}};
    j["throttle"] = {{"threshold", s.throttle.threshold},
                     {"hysteresis", s.throttle.hysteresis},
                     {"stall_penalty", s.throttle.stall_penalty}};
    j["seed"] = s.seed;
    j["outputs"] = {{"trace_subsample", s.outputs.trace_subsample},
                    {"emit_sensor_trace", s.outputs.emit_sensor_trace}};
    return j;
}

inline std::string canonical_scenario_text(const Scenario& s) {
    return scenario_to_json(s).dump(2) + "\n";
}

inline std::uint64_t fnv1a_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string scenario_hash(const Scenario& s) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a_hash(canonical_scenario_text(s))));
    return std::string(buf);
}

struct RunArtifacts {
    std::string temperature_csv;
    std::optional<std::string> sensor_csv;
    std::string summary_json;
    std::optional<std::string> plan_json;
};

namespace detail {

inline void append_number(std::string& out, double v) {
    char buf[32];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream ofs(path, std::ios::binary);
    if (!ofs) throw IoError("cannot open " + path.string() + " for writing");
    ofs.write(text.data(), static_cast<std::streamsize>(text.size()));
    ofs.flush();
    if (!ofs) throw IoError("failed writing " + path.string());
}

} // namespace detail

// Absolute-kelvin CSV of every trace_subsample-th row, shortest decimal
// digits that round-trip.
inline std::string temperature_csv_text(const TemperatureTrace& trace, double t_ambient,
                                        int subsample) {
    if (subsample < 1) throw DomainError("trace_subsample must be >= 1");
    std::string out = "t";
    for (int b = 0; b < trace.n_banks; ++b) out += ",bank_" + std::to_string(b);
    out += '\n';
    for (int k = 0; k < trace.steps; k += subsample) {
        detail::append_number(out, trace.time_of(k));
        for (int b = 0; b < trace.n_banks; ++b) {
            out += ',';
            detail::append_number(out, trace.at(k, b) + t_ambient);
        }
        out += '\n';
    }
    return out;
}

inline std::string sensor_csv_text(const SensorTrace& trace, double t_ambient) {
    std::string out = "t";
    for (int j = 0; j < trace.n_sensors; ++j) out += ",sensor_" + std::to_string(j);
    out += '\n';
    for (int s = 0; s < trace.samples; ++s) {
        detail::append_number(out, s * trace.sample_period);
        for (int j = 0; j < trace.n_sensors; ++j) {
            out += ',';
            detail::append_number(out, trace.at(s, j) + t_ambient);
        }
        out += '\n';
    }
    return out;
}

inline Json plan_to_json(const AttackPlan& plan) {
    Json j;
    j["victim"] = plan.victim;
    j["cycle_period"] = plan.cycle_period;
    j["n_cycles"] = plan.n_cycles;
    j["cycle_energy"] = plan.cycle_energy();
    Json entries = Json::array();
    for (const AttackEntry& e : plan.entries) {
        entries.push_back({{"attacker", e.attacker},
                           {"offset", e.offset},
                           {"duration", e.duration},
                           {"amplitude", e.amplitude}});
    }
    j["entries"] = std::move(entries);
    return j;
}

// The plan a scenario's attack section asks for, refined when requested.
inline std::optional<AttackPlan> scenario_plan(const Scenario& s, const ThermalNetwork& net) {
    if (!s.attack.has_value()) return std::nullopt;
    const AttackSpec& a = *s.attack;
    AttackPlan plan;
    if (a.mode == AttackMode::Cage) {
        plan = plan_cage(a.victim, s.geometry, net, a.cage_params, s.solver);
    } else {
        plan = a.manual_plan;
        plan.victim = a.victim;
    }
    if (a.refine.has_value()) {
        plan = refine_offsets(net, plan, a.refine->window, a.refine->grid, a.refine->budget,
                              s.solver);
    }
    return plan;
}

// Runs the scenario end to end and writes temperature.csv, summary.json,
// and, when applicable, plan.json and sensors.csv into out_dir. Stealth is
// scored against a second benign-only run of the same scenario; both runs
// use the same seed, so the sensor noise cancels out of the comparison.
inline RunArtifacts execute_scenario(const Scenario& scenario, const std::string& out_dir) {
    scenario.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir), ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    const ThermalNetwork net = build_network(scenario.geometry, scenario.material);
    const int n = net.n;

    std::vector<PulseSpec> benign_pulses = scenario.pulses;
    for (const WorkloadSpec& w : scenario.workloads) {
        const std::vector<PulseSpec> generated = benign_workload(w, scenario.horizon);
        benign_pulses.insert(benign_pulses.end(), generated.begin(), generated.end());
    }
    CompileStats stats;
    const PowerTrace benign =
        compile_pulses(benign_pulses, scenario.solver.dt, scenario.horizon, n, &stats);

    const std::optional<AttackPlan> plan = scenario_plan(scenario, net);
    PowerTrace power = benign;
    double attack_energy = 0.0;
    if (plan.has_value()) {
        CompileStats attack_stats;
        const PowerTrace attack_power = compile_pulses(plan_to_pulses(*plan), scenario.solver.dt,
                                                       scenario.horizon, n, &attack_stats);
        attack_energy = total_energy(attack_power);
        stats.truncated_pulses += attack_stats.truncated_pulses;
        stats.truncated_energy += attack_stats.truncated_energy;
        power = superpose(power, attack_power);
    }

    const std::vector<double> theta0 = scenario.initial_theta.empty()
                                           ? std::vector<double>(static_cast<std::size_t>(n), 0.0)
                                           : scenario.initial_theta;
    double max_rel_residual = 0.0;
    const TemperatureTrace trace = simulate(net, power, theta0, scenario.solver, &max_rel_residual);

    const SensorTrace sensed = read_sensors(trace, scenario.sensors, scenario.geometry,
                                            scenario.seed);

    std::optional<double> stealth;
    std::optional<ImpactReport> impact;
    if (plan.has_value()) {
        double baseline_residual = 0.0;
        const TemperatureTrace baseline =
            simulate(net, benign, theta0, scenario.solver, &baseline_residual);
        max_rel_residual = std::max(max_rel_residual, baseline_residual);
        const SensorTrace baseline_sensed =
            read_sensors(baseline, scenario.sensors, scenario.geometry, scenario.seed);
        if (baseline_sensed.samples >= 2) {
            stealth = stealth_score(sensed, baseline_stats(baseline_sensed),
                                    scenario.stealth_floor_sigma);
        }
        ImpactReport report = victim_impact(trace, scenario.attack->victim, scenario.throttle);
        report.stealth_score = stealth.value_or(0.0);
        impact = report;
    }

    RunArtifacts artifacts;
    const fs::path dir(out_dir);
    artifacts.temperature_csv = (dir / "temperature.csv").string();
    detail::write_text_file(artifacts.temperature_csv,
                            temperature_csv_text(trace, net.t_ambient,
                                                 scenario.outputs.trace_subsample));
    if (scenario.outputs.emit_sensor_trace) {
        artifacts.sensor_csv = (dir / "sensors.csv").string();
        detail::write_text_file(*artifacts.sensor_csv, sensor_csv_text(sensed, net.t_ambient));
    }
    if (plan.has_value()) {
        artifacts.plan_json = (dir / "plan.json").string();
        detail::write_text_file(*artifacts.plan_json, plan_to_json(*plan).dump(2) + "\n");
    }

    Json summary;
    summary["scenario_hash"] = scenario_hash(scenario);
    summary["solver"] = {{"max_rel_residual", max_rel_residual}};
    summary["power"] = {{"truncated_pulses", stats.truncated_pulses},
                        {"truncated_energy", stats.truncated_energy}};
    if (plan.has_value()) {
        std::vector<BankId> attackers;
        for (const AttackEntry& e : plan->entries) attackers.push_back(e.attacker);
        std::sort(attackers.begin(), attackers.end());
        summary["attack"] = {{"victim", plan->victim},
                             {"attackers", attackers},
                             {"cycle_period", plan->cycle_period},
                             {"n_cycles", plan->n_cycles},
                             {"total_energy", attack_energy}};
        summary["impact"] = {{"victim", impact->victim},
                             {"peak_theta", impact->peak_theta},
                             {"time_above_threshold", impact->time_above_threshold},
                             {"throttle_events", impact->throttle_events},
                             {"estimated_stall", impact->estimated_stall},
                             {"stealth_score",
                              stealth.has_value() ? Json(*stealth) : Json(nullptr)}};
    }
    artifacts.summary_json = (dir / "summary.json").string();
    detail::write_text_file(artifacts.summary_json, summary.dump(2) + "\n");
    return artifacts;
}

// Computes and writes only plan.json; no simulation of the full horizon
// beyond what planning itself needs.
inline std::string emit_plan(const Scenario& scenario, const std::string& out_dir) {
    scenario.validate();
    if (!scenario.attack.has_value()) {
        throw DomainError("plan: scenario has no attack section");
    }
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir), ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    const ThermalNetwork net = build_network(scenario.geometry, scenario.material);
    const std::optional<AttackPlan> plan = scenario_plan(scenario, net);
    const std::string path = (fs::path(out_dir) / "plan.json").string();
    detail::write_text_file(path, plan_to_json(*plan).dump(2) + "\n");
    return path;
}

inline Json load_json_file(const std::string& path) {
    std::ifstream ifs(path, std::ios::binary);
    if (!ifs) throw IoError("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(ifs)), std::istreambuf_iterator<char>());
    if (ifs.bad()) throw IoError("failed reading " + path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw DomainError(path + ": " + e.what());
    }
}

// One run per value, written to out_root/000, 001, ... Each run gets the
// swept value spliced in at param_path (dotted, e.g. "solver.dt") and its
// seed replaced by seed XOR index, then executes fully isolated. Results do
// not depend on the number of worker threads.
inline std::vector<std::string> run_sweep(const Json& base, const std::string& param_path,
                                          const std::vector<Json>& values,
                                          const std::string& out_root, int jobs) {
    if (values.empty()) throw DomainError("sweep: need at least one value");
    if (jobs < 1) throw DomainError("sweep: jobs must be >= 1");
    std::string pointer = "/" + param_path;
    for (char& c : pointer) {
        if (c == '.') c = '/';
    }

    namespace fs = std::filesystem;
    std::vector<Json> docs(values.size());
    std::vector<std::string> dirs(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        Json doc = base;
        try {
            doc[Json::json_pointer(pointer)] = values[i];
        } catch (const Json::exception& e) {
            throw DomainError("sweep: cannot set parameter '" + param_path + "': " + e.what());
        }
        std::uint64_t seed = 0;
        if (doc.contains("seed")) {
            seed = detail::as_u64(doc.at("seed"), "scenario.seed");
        }
        doc["seed"] = seed ^ static_cast<std::uint64_t>(i);
        char name[8];
        std::snprintf(name, sizeof name, "%03zu", i);
        dirs[i] = (fs::path(out_root) / name).string();
        docs[i] = std::move(doc);
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(values.size());
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= docs.size()) return;
            try {
                execute_scenario(scenario_from_json(docs[i]), dirs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::min<int>(jobs, static_cast<int>(values.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return dirs;
}

} // namespace hbmtherm
