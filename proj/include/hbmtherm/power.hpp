#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hbmtherm/errors.hpp"
#include "hbmtherm/geometry.hpp"
#include "hbmtherm/rng.hpp"

namespace hbmtherm {

// One rectangular heat pulse on one bank.
struct PulseSpec {
    BankId bank = 0;
    double t_start = 0.0;   ///< s
    double duration = 0.0;  ///< s
    double amplitude = 0.0; ///< W

    void validate() const {
        if (!(t_start >= 0.0)) throw DomainError("pulse: t_start must be >= 0");
        if (!(duration >= 0.0)) throw DomainError("pulse: duration must be >= 0");
        if (!(amplitude >= 0.0)) throw DomainError("pulse: amplitude must be >= 0");
    }
};

// Bursty on/off traffic on a set of banks, amplitude-jittered per cycle from
// a seeded stream so replays are bit-identical.
struct WorkloadSpec {
    std::vector<BankId> banks;
    std::uint64_t seed = 0;
    double burst_duration = 5e-3;    ///< s
    double cooldown_duration = 5e-3; ///< s
    double amplitude = 1.0;          ///< W
    double duty_jitter = 0.0;        ///< fraction in [0, 1)

    void validate() const {
        if (!(burst_duration > 0.0)) throw DomainError("workload: burst_duration must be > 0");
        if (!(cooldown_duration > 0.0)) throw DomainError("workload: cooldown_duration must be > 0");
        if (!(amplitude >= 0.0)) throw DomainError("workload: amplitude must be >= 0");
        if (!(duty_jitter >= 0.0 && duty_jitter < 1.0)) {
            throw DomainError("workload: duty_jitter must be in [0, 1)");
        }
    }
};

// Step-aligned per-bank power, row-major steps x banks. Cell k covers
// [k*dt, (k+1)*dt).
struct PowerTrace {
    double dt = 1e-4;
    int steps = 0;
    int n_banks = 0;
    std::vector<double> values;

    double& at(int step, BankId bank) {
        return values[static_cast<std::size_t>(step) * n_banks + bank];
    }
    double at(int step, BankId bank) const {
        return values[static_cast<std::size_t>(step) * n_banks + bank];
    }
    std::span<const double> row(int step) const {
        return {values.data() + static_cast<std::size_t>(step) * n_banks,
                static_cast<std::size_t>(n_banks)};
    }

    static PowerTrace zeros(double dt, int steps, int n_banks) {
        PowerTrace t;
        t.dt = dt;
        t.steps = steps;
        t.n_banks = n_banks;
        t.values.assign(static_cast<std::size_t>(steps) * n_banks, 0.0);
        return t;
    }
};

struct CompileStats {
    int truncated_pulses = 0;
    double truncated_energy = 0.0; ///< J lost to the horizon cut
};

// Number of dt cells needed to cover `horizon`, snapping to the nearest
// integer when the division is within rounding noise of one.
inline int grid_steps(double horizon, double dt) {
    if (!(dt > 0.0)) throw DomainError("power: dt must be > 0");
    if (!(horizon >= 0.0)) throw DomainError("power: horizon must be >= 0");
    const double q = horizon / dt;
    const double r = std::round(q);
    if (std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q))) {
        return static_cast<int>(r);
    }
    return static_cast<int>(std::ceil(q));
}

namespace detail {
// Snap a grid coordinate (in units of dt) to an integer when it is within
// rounding noise of one, so a pulse spanning exactly k cells deposits the
// bare amplitude into each of them.
inline double snap_to_grid(double x) {
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return r;
    return x;
}
} // namespace detail

// Quantizes rectangular pulses onto the step grid. Fully covered cells get
// the bare amplitude; boundary cells get the covered fraction, so deposited
// energy equals amplitude*duration regardless of grid alignment. Pulses
// extending past the horizon are truncated and counted in `stats`.
inline PowerTrace compile_pulses(const std::vector<PulseSpec>& pulses, double dt,
                                 double horizon, int n_banks,
                                 CompileStats* stats = nullptr) {
    const int steps = grid_steps(horizon, dt);
    PowerTrace trace = PowerTrace::zeros(dt, steps, n_banks);
    CompileStats local;

    for (const PulseSpec& p : pulses) {
        p.validate();
        if (p.bank < 0 || p.bank >= n_banks) {
            throw DomainError("pulse: bank " + std::to_string(p.bank) +
                              " outside [0, " + std::to_string(n_banks) + ")");
        }
        if (p.duration == 0.0 || p.amplitude == 0.0) continue;

        const double s = detail::snap_to_grid(p.t_start / dt);
        double e = detail::snap_to_grid((p.t_start + p.duration) / dt);
        if (e > steps) {
            local.truncated_pulses += 1;
            local.truncated_energy += p.amplitude * (e - std::max(s, static_cast<double>(steps))) * dt;
            e = steps;
        }
        if (e <= s) continue;

        const int k_first = static_cast<int>(std::floor(s));
        for (int k = k_first; k < steps; ++k) {
            const double lo = std::max(s, static_cast<double>(k));
            const double hi = std::min(e, static_cast<double>(k + 1));
            if (hi <= lo) break;
            if (lo == static_cast<double>(k) && hi == static_cast<double>(k + 1)) {
                trace.at(k, p.bank) += p.amplitude;
            } else {
                trace.at(k, p.bank) += p.amplitude * (hi - lo);
            }
        }
    }

    if (stats != nullptr) *stats = local;
    return trace;
}

// Expands a workload into its pulse rectangles. Cycles tile [0, horizon);
// each burst's amplitude is scaled by 1 + duty_jitter*(2u - 1) with u drawn
// from SplitMix64(seed), banks outer, cycles inner.
inline std::vector<PulseSpec> benign_workload(const WorkloadSpec& spec, double horizon) {
    spec.validate();
    if (!(horizon >= 0.0)) throw DomainError("workload: horizon must be >= 0");

    SplitMix64 rng(spec.seed);
    const double period = spec.burst_duration + spec.cooldown_duration;
    std::vector<PulseSpec> out;
    for (BankId bank : spec.banks) {
        for (int cycle = 0;; ++cycle) {
            const double t = cycle * period;
            if (t >= horizon) break;
            double amp = spec.amplitude;
            if (spec.duty_jitter > 0.0) {
                amp *= 1.0 + spec.duty_jitter * (2.0 * rng.next_unit() - 1.0);
            }
            out.push_back({bank, t, spec.burst_duration, amp});
        }
    }
    return out;
}

inline PowerTrace superpose(const PowerTrace& a, const PowerTrace& b) {
    if (a.dt != b.dt || a.steps != b.steps || a.n_banks != b.n_banks) {
        throw DomainError("superpose: trace shapes differ");
    }
    PowerTrace out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
    return out;
}

inline double total_energy(const PowerTrace& trace) {
    double sum = 0.0;
    for (double v : trace.values) sum += v;
    return sum * trace.dt;
}

} // namespace hbmtherm
