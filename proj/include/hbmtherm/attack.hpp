#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hbmtherm/errors.hpp"
#include "hbmtherm/geometry.hpp"
#include "hbmtherm/network.hpp"
#include "hbmtherm/power.hpp"
#include "hbmtherm/solver.hpp"

// Convergent-heating planner. The schedule staggers pulses on the banks
// adjacent to a victim so that the vertical and lateral heat waves reach it
// together, then optionally tightens the offsets by direct search.

namespace hbmtherm {

enum class LateralSet {
    All4,    ///< every in-plane neighbor of the victim
    RowPair, ///< only the two same-row neighbors (victim id -1 / +1)
};

struct CageParams {
    double vertical_duration = 0.020; ///< s
    double lateral_duration = 0.005;  ///< s
    double vertical_amplitude = 1.0;  ///< W
    double lateral_amplitude = 1.0;   ///< W
    double cooldown = 0.005;          ///< s
    int n_cycles = 1;
    LateralSet lateral_set = LateralSet::All4;

    void validate() const {
        if (!(vertical_duration > 0.0)) throw DomainError("cage: vertical_duration must be > 0");
        if (!(lateral_duration > 0.0)) throw DomainError("cage: lateral_duration must be > 0");
        if (!(vertical_amplitude >= 0.0)) throw DomainError("cage: vertical_amplitude must be >= 0");
        if (!(lateral_amplitude >= 0.0)) throw DomainError("cage: lateral_amplitude must be >= 0");
        if (!(cooldown > 0.0)) throw DomainError("cage: cooldown must be > 0");
        if (n_cycles < 1) throw DomainError("cage: n_cycles must be >= 1");
    }
};

struct AttackEntry {
    BankId attacker = 0;
    double offset = 0.0;    ///< s within the cycle
    double duration = 0.0;  ///< s
    double amplitude = 0.0; ///< W
};

struct AttackPlan {
    BankId victim = 0;
    std::vector<AttackEntry> entries;
    double cycle_period = 0.0; ///< s
    int n_cycles = 1;

    void validate() const {
        if (n_cycles < 1) throw DomainError("plan: n_cycles must be >= 1");
        for (const AttackEntry& e : entries) {
            if (e.attacker == victim) {
                throw DomainError("plan: attacker " + std::to_string(e.attacker) +
                                  " equals the victim");
            }
            if (!(e.offset >= 0.0)) throw DomainError("plan: offsets must be >= 0");
            if (!(e.duration > 0.0)) throw DomainError("plan: durations must be > 0");
            if (!(e.amplitude >= 0.0)) throw DomainError("plan: amplitudes must be >= 0");
            if (e.offset + e.duration > cycle_period * (1.0 + 1e-12)) {
                throw DomainError("plan: entry for bank " + std::to_string(e.attacker) +
                                  " extends past the cycle period");
            }
        }
    }

    // Per-cycle on-energy of the plan, J.
    double cycle_energy() const {
        double e = 0.0;
        for (const AttackEntry& en : entries) e += en.amplitude * en.duration;
        return e;
    }
    double total_energy() const { return cycle_energy() * n_cycles; }
};

// Time from pulse onset at src to the maximum discrete rate of rise of the
// destination's temperature. Invariant under amplitude scaling (the system
// is linear) and insensitive to the exact horizon as long as the horizon
// covers the probe response. The probe's bank and t_start fields are
// ignored: the pulse is applied to src at t = 0 on an otherwise unpowered
// net from theta = 0.
inline double propagation_delay(const ThermalNetwork& net, BankId src, BankId dst,
                                const PulseSpec& probe, double horizon,
                                const SolverConfig& cfg) {
    if (src < 0 || src >= net.n || dst < 0 || dst >= net.n) {
        throw DomainError("propagation_delay: bank id out of range");
    }
    if (src == dst) return 0.0;
    if (!(horizon > 0.0)) throw DomainError("propagation_delay: horizon must be > 0");

    PulseSpec pulse = probe;
    pulse.bank = src;
    pulse.t_start = 0.0;
    const PowerTrace power = compile_pulses({pulse}, cfg.dt, horizon, net.n);
    const std::vector<double> theta0(static_cast<std::size_t>(net.n), 0.0);
    const TemperatureTrace trace = simulate(net, power, theta0, cfg);

    double peak = 0.0;
    for (int k = 0; k < trace.steps; ++k) peak = std::max(peak, trace.at(k, dst));
    if (peak <= 1e-12) {
        throw MeasurementError("propagation_delay: bank " + std::to_string(dst) +
                               " never warmed above the numerical floor; use a longer "
                               "horizon or a stronger probe");
    }

    int best_k = 1;
    double best_rise = -1.0;
    for (int k = 1; k < trace.steps; ++k) {
        const double rise = trace.at(k, dst) - trace.at(k - 1, dst);
        if (rise > best_rise) {
            best_rise = rise;
            best_k = k;
        }
    }
    return best_k * cfg.dt;
}

namespace detail {
// Horizon that comfortably covers a probe response: the pulse itself plus a
// few of the slowest edge time constants in the net.
inline double probe_horizon(const ThermalNetwork& net, double probe_duration) {
    double g_min = std::numeric_limits<double>::infinity();
    const CsrMatrix& G = net.conductance;
    for (int i = 0; i < G.n; ++i) {
        for (int k = G.row_ptr[i]; k < G.row_ptr[i + 1]; ++k) {
            if (G.col[k] != i && G.val[static_cast<std::size_t>(k)] != 0.0) {
                g_min = std::min(g_min, std::abs(G.val[static_cast<std::size_t>(k)]));
            }
        }
    }
    const double c_max = *std::max_element(net.capacitance.begin(), net.capacitance.end());
    const double tau = std::isfinite(g_min) ? c_max / g_min : 10.0 * probe_duration;
    return probe_duration + 5.0 * tau;
}
} // namespace detail

// Builds the convergent plan around `victim`: its vertical neighbors pulse
// long, the chosen lateral neighbors pulse short, and each onset is offset
// by (max measured delay - own delay) so the predicted arrivals coincide.
// Lateral pulses are then recentered inside the vertical heating window,
// and the whole schedule is shifted so the earliest offset is exactly zero.
inline AttackPlan plan_cage(BankId victim, const StackGeometry& geom, const ThermalNetwork& net,
                            const CageParams& params, const SolverConfig& cfg) {
    params.validate();
    if (net.n != geom.total_banks()) {
        throw DomainError("plan_cage: geometry does not match the network");
    }
    const BankCoord vc = coord_of(victim, geom);

    AttackPlan plan;
    plan.victim = victim;
    plan.n_cycles = params.n_cycles;

    std::vector<bool> is_vertical;
    for (const Neighbor& nb : neighbors(victim, geom)) {
        if (nb.kind == NeighborKind::Vertical) {
            plan.entries.push_back({nb.id, 0.0, params.vertical_duration, params.vertical_amplitude});
            is_vertical.push_back(true);
        } else {
            if (params.lateral_set == LateralSet::RowPair) {
                const BankCoord nc = coord_of(nb.id, geom);
                if (nc.row != vc.row) continue; // same-row pair only
            }
            plan.entries.push_back({nb.id, 0.0, params.lateral_duration, params.lateral_amplitude});
            is_vertical.push_back(false);
        }
    }
    if (plan.entries.empty()) {
        throw ModelError("plan_cage: victim " + std::to_string(victim) + " has no neighbors");
    }

    // Deterministic sweep order for everything downstream.
    {
        std::vector<std::size_t> order(plan.entries.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return plan.entries[a].attacker < plan.entries[b].attacker;
        });
        std::vector<AttackEntry> entries;
        std::vector<bool> vert;
        for (std::size_t i : order) {
            entries.push_back(plan.entries[i]);
            vert.push_back(is_vertical[i]);
        }
        plan.entries = std::move(entries);
        is_vertical = std::move(vert);
    }

    std::vector<double> delays(plan.entries.size(), 0.0);
    double max_delay = 0.0;
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        const AttackEntry& e = plan.entries[i];
        PulseSpec probe{e.attacker, 0.0, e.duration, e.amplitude > 0.0 ? e.amplitude : 1.0};
        const double horizon = detail::probe_horizon(net, e.duration);
        delays[i] = propagation_delay(net, e.attacker, victim, probe, horizon, cfg);
        max_delay = std::max(max_delay, delays[i]);
    }
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        plan.entries[i].offset = max_delay - delays[i];
    }

    bool any_vertical = false;
    double v0 = std::numeric_limits<double>::infinity();
    double v1 = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        if (is_vertical[i]) {
            any_vertical = true;
            v0 = std::min(v0, plan.entries[i].offset);
            v1 = std::max(v1, plan.entries[i].offset + plan.entries[i].duration);
        }
    }
    if (any_vertical) {
        const double center = 0.5 * (v0 + v1);
        for (std::size_t i = 0; i < plan.entries.size(); ++i) {
            if (!is_vertical[i]) {
                plan.entries[i].offset =
                    std::max(0.0, center - 0.5 * plan.entries[i].duration);
            }
        }
    }

    double min_offset = std::numeric_limits<double>::infinity();
    for (const AttackEntry& e : plan.entries) min_offset = std::min(min_offset, e.offset);
    double span = 0.0;
    for (AttackEntry& e : plan.entries) {
        e.offset -= min_offset;
        span = std::max(span, e.offset + e.duration);
    }
    plan.cycle_period = span + params.cooldown;
    plan.validate();
    return plan;
}

// One pulse per (entry, cycle), entries outer, cycles inner.
inline std::vector<PulseSpec> plan_to_pulses(const AttackPlan& plan) {
    plan.validate();
    std::vector<PulseSpec> out;
    out.reserve(plan.entries.size() * static_cast<std::size_t>(plan.n_cycles));
    for (const AttackEntry& e : plan.entries) {
        for (int c = 0; c < plan.n_cycles; ++c) {
            out.push_back({e.attacker, c * plan.cycle_period + e.offset, e.duration, e.amplitude});
        }
    }
    return out;
}

namespace detail {
// Victim peak over a single cycle, the refinement objective. All candidate
// plans of one search share the stepper and the evaluation horizon so their
// objectives are comparable.
inline double cage_objective(TransientStepper& stepper, const AttackPlan& plan,
                             double horizon) {
    const ThermalNetwork& net = stepper.network();
    AttackPlan one_cycle = plan;
    one_cycle.n_cycles = 1;
    one_cycle.cycle_period = horizon; // keep validate() happy for shifted candidates
    const PowerTrace power =
        compile_pulses(plan_to_pulses(one_cycle), stepper.config().dt, horizon, net.n);
    std::vector<double> theta(static_cast<std::size_t>(net.n), 0.0);
    double peak = 0.0;
    for (int k = 0; k < power.steps; ++k) {
        stepper.advance(theta, power.row(k));
        peak = std::max(peak, theta[static_cast<std::size_t>(plan.victim)]);
    }
    return peak;
}
} // namespace detail

// Coordinate-descent grid search over per-entry offsets, maximizing the
// victim's peak rise over one cycle. Entries are swept in ascending
// attacker order and the current offset is always among the candidates, so
// the result never scores below the input. When a budget is given the
// amplitudes are first rescaled uniformly so the plan's total energy equals
// it; offset moves leave energy unchanged.
inline AttackPlan refine_offsets(const ThermalNetwork& net, const AttackPlan& plan,
                                 double window, double grid, std::optional<double> budget,
                                 const SolverConfig& cfg) {
    plan.validate();
    cfg.validate();
    if (!(grid >= cfg.dt)) throw DomainError("refine: grid must be >= solver dt");
    if (!(window >= grid)) throw DomainError("refine: window must be >= grid");

    AttackPlan best = plan;
    const double cooldown = [&] {
        double span = 0.0;
        for (const AttackEntry& e : plan.entries) span = std::max(span, e.offset + e.duration);
        return std::max(0.0, plan.cycle_period - span);
    }();

    if (budget.has_value()) {
        if (!(*budget > 0.0)) throw DomainError("refine: budget must be > 0");
        const double current = best.total_energy();
        if (current > 0.0) {
            const double scale = *budget / current;
            for (AttackEntry& e : best.entries) e.amplitude *= scale;
        }
    }

    const double horizon = plan.cycle_period + window;
    TransientStepper stepper(net, cfg);

    // Entries are already orderable by attacker id; sweep in that order.
    std::vector<std::size_t> order(best.entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return best.entries[a].attacker < best.entries[b].attacker;
    });

    double best_score = detail::cage_objective(stepper, best, horizon);
    const int max_sweeps = 32;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool improved = false;
        for (std::size_t idx : order) {
            const double base = best.entries[idx].offset;
            const double lo = std::max(0.0, base - window);
            // Later sweeps search around moved offsets; cap so every
            // candidate still fits inside the fixed evaluation horizon.
            const double hi = std::min(base + window, horizon - best.entries[idx].duration);
            double chosen = base;
            for (int i = 0;; ++i) {
                const double candidate = lo + i * grid;
                if (candidate > hi * (1.0 + 1e-12)) break;
                if (candidate == base) continue;
                best.entries[idx].offset = candidate;
                const double score = detail::cage_objective(stepper, best, horizon);
                if (score > best_score) {
                    best_score = score;
                    chosen = candidate;
                }
            }
            best.entries[idx].offset = chosen;
            if (chosen != base) improved = true;
        }
        if (!improved) break;
    }

    double span = 0.0;
    for (const AttackEntry& e : best.entries) span = std::max(span, e.offset + e.duration);
    best.cycle_period = span + cooldown;
    best.validate();
    return best;
}

} // namespace hbmtherm
