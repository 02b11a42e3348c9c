#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hbmtherm/errors.hpp"
#include "hbmtherm/geometry.hpp"
#include "hbmtherm/rng.hpp"
#include "hbmtherm/solver.hpp"

// Coarse thermal sensors over bank groups, a z-score stealth metric against
// a benign baseline, and the victim-side throttle model.

namespace hbmtherm {

enum class SensorGrouping {
    PerBank,     ///< one sensor per bank
    PerLayer,    ///< one sensor per layer
    PerQuadrant, ///< four sensors per layer, split at the row/column midlines
};

struct SensorModel {
    SensorGrouping grouping = SensorGrouping::PerLayer;
    double sample_period = 1e-3; ///< s, point sampling
    double noise_sigma = 0.0;    ///< K

    void validate() const {
        if (!(sample_period > 0.0)) throw DomainError("sensors: sample_period must be > 0");
        if (!(noise_sigma >= 0.0)) throw DomainError("sensors: noise_sigma must be >= 0");
    }
};

struct SensorTrace {
    double sample_period = 0.0;
    int samples = 0;
    int n_sensors = 0;
    std::vector<std::vector<BankId>> sensor_map; ///< sensor -> member banks
    std::vector<double> readings;                ///< samples x n_sensors, K above ambient

    double at(int sample, int sensor) const {
        return readings[static_cast<std::size_t>(sample) * n_sensors + sensor];
    }
    double& at(int sample, int sensor) {
        return readings[static_cast<std::size_t>(sample) * n_sensors + sensor];
    }
};

struct ThrottlePolicy {
    double threshold = 10.0;   ///< K above ambient, engage at theta >= threshold
    double hysteresis = 2.0;   ///< K, release below threshold - hysteresis
    double stall_penalty = 1.0; ///< slowdown factor while throttled, 1 = fully stalled

    void validate() const {
        if (!(hysteresis >= 0.0)) throw DomainError("throttle: hysteresis must be >= 0");
        if (!(threshold > hysteresis)) {
            throw DomainError("throttle: threshold must exceed the hysteresis band");
        }
        if (!(stall_penalty >= 0.0)) throw DomainError("throttle: stall_penalty must be >= 0");
    }
};

struct ImpactReport {
    BankId victim = 0;
    double peak_theta = 0.0;          ///< K
    double time_above_threshold = 0.0; ///< s spent throttled
    int throttle_events = 0;           ///< engage transitions
    double estimated_stall = 0.0;      ///< s, throttled time x stall_penalty
    double stealth_score = 0.0;        ///< filled by the caller
};

namespace detail {

inline std::vector<std::vector<BankId>> sensor_groups(const StackGeometry& geom,
                                                      SensorGrouping grouping) {
    const int n = geom.total_banks();
    std::vector<std::vector<BankId>> groups;
    switch (grouping) {
    case SensorGrouping::PerBank:
        groups.resize(static_cast<std::size_t>(n));
        for (BankId b = 0; b < n; ++b) groups[static_cast<std::size_t>(b)] = {b};
        break;
    case SensorGrouping::PerLayer:
        groups.resize(static_cast<std::size_t>(geom.layers));
        for (BankId b = 0; b < n; ++b) {
            groups[static_cast<std::size_t>(coord_of(b, geom).layer)].push_back(b);
        }
        break;
    case SensorGrouping::PerQuadrant:
        groups.resize(static_cast<std::size_t>(geom.layers) * 4);
        for (BankId b = 0; b < n; ++b) {
            const BankCoord c = coord_of(b, geom);
            const int quadrant = (2 * c.row >= geom.depth ? 2 : 0) +
                                 (2 * c.col >= geom.width ? 1 : 0);
            groups[static_cast<std::size_t>(c.layer) * 4 + quadrant].push_back(b);
        }
        // Degenerate plans (width or depth 1) leave some quadrants empty.
        groups.erase(std::remove_if(groups.begin(), groups.end(),
                                    [](const std::vector<BankId>& g) { return g.empty(); }),
                     groups.end());
        break;
    }
    return groups;
}

} // namespace detail

// Point-samples the trace every sample_period, averages each sensor group,
// and adds seeded Gaussian noise. Noise values are drawn in (sample, sensor)
// order from a SplitMix64 stream, so a trace is reproducible from its seed
// alone; with noise_sigma = 0 no draws happen at all.
inline SensorTrace read_sensors(const TemperatureTrace& trace, const SensorModel& model,
                                const StackGeometry& geom, std::uint64_t seed) {
    model.validate();
    if (trace.n_banks != geom.total_banks()) {
        throw DomainError("read_sensors: trace does not match the geometry");
    }
    const double ratio = model.sample_period / trace.dt;
    const double rounded = std::round(ratio);
    if (ratio < 1.0 - 1e-9 || std::abs(ratio - rounded) > 1e-9 * ratio) {
        throw DomainError("read_sensors: sample_period must be an integer multiple of trace dt");
    }
    const int stride = static_cast<int>(rounded);

    SensorTrace out;
    out.sample_period = model.sample_period;
    out.sensor_map = detail::sensor_groups(geom, model.grouping);
    out.n_sensors = static_cast<int>(out.sensor_map.size());
    out.samples = (trace.steps - 1) / stride + 1;
    out.readings.resize(static_cast<std::size_t>(out.samples) * out.n_sensors);

    SplitMix64 rng(seed);
    for (int s = 0; s < out.samples; ++s) {
        const int k = s * stride;
        for (int j = 0; j < out.n_sensors; ++j) {
            double sum = 0.0;
            for (BankId b : out.sensor_map[static_cast<std::size_t>(j)]) sum += trace.at(k, b);
            double reading = sum / static_cast<double>(out.sensor_map[static_cast<std::size_t>(j)].size());
            if (model.noise_sigma > 0.0) reading += model.noise_sigma * rng.next_gaussian();
            out.at(s, j) = reading;
        }
    }
    return out;
}

struct BaselineStats {
    std::vector<std::vector<BankId>> sensor_map;
    std::vector<double> mean; ///< K per sensor
    std::vector<double> std;  ///< K per sensor, sample standard deviation
};

inline BaselineStats baseline_stats(const SensorTrace& trace) {
    if (trace.samples < 2) throw DomainError("baseline_stats: need at least 2 samples");
    BaselineStats stats;
    stats.sensor_map = trace.sensor_map;
    stats.mean.resize(static_cast<std::size_t>(trace.n_sensors));
    stats.std.resize(static_cast<std::size_t>(trace.n_sensors));
    for (int j = 0; j < trace.n_sensors; ++j) {
        double sum = 0.0;
        for (int s = 0; s < trace.samples; ++s) sum += trace.at(s, j);
        const double mean = sum / trace.samples;
        double ss = 0.0;
        for (int s = 0; s < trace.samples; ++s) {
            const double d = trace.at(s, j) - mean;
            ss += d * d;
        }
        stats.mean[static_cast<std::size_t>(j)] = mean;
        stats.std[static_cast<std::size_t>(j)] = std::sqrt(ss / (trace.samples - 1));
    }
    return stats;
}

// Largest signed z-score of any reading against the baseline, with a floor
// on the per-sensor deviation so quiet baselines cannot blow the score up.
// Lower is stealthier.
inline double stealth_score(const SensorTrace& attack, const BaselineStats& baseline,
                            double floor_sigma) {
    if (!(floor_sigma > 0.0)) throw DomainError("stealth_score: floor_sigma must be > 0");
    if (attack.sensor_map != baseline.sensor_map) {
        throw DomainError("stealth_score: sensor sets differ between attack and baseline");
    }
    double score = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < attack.samples; ++s) {
        for (int j = 0; j < attack.n_sensors; ++j) {
            const std::size_t sj = static_cast<std::size_t>(j);
            const double sigma = std::max(baseline.std[sj], floor_sigma);
            score = std::max(score, (attack.at(s, j) - baseline.mean[sj]) / sigma);
        }
    }
    if (!std::isfinite(score)) throw DomainError("stealth_score: attack trace has no samples");
    return score;
}

// Hysteresis throttle on the victim's own temperature. The automaton engages
// at theta >= threshold and releases below threshold - hysteresis, so
// engagements and releases strictly alternate. Row 0 sets the initial state
// but contributes no time; every later row adds dt while engaged.
inline ImpactReport victim_impact(const TemperatureTrace& trace, BankId victim,
                                  const ThrottlePolicy& policy) {
    policy.validate();
    if (victim < 0 || victim >= trace.n_banks) {
        throw DomainError("victim_impact: victim bank out of range");
    }
    ImpactReport report;
    report.victim = victim;

    bool engaged = false;
    for (int k = 0; k < trace.steps; ++k) {
        const double theta = trace.at(k, victim);
        report.peak_theta = std::max(report.peak_theta, theta);
        if (engaged) {
            if (theta < policy.threshold - policy.hysteresis) engaged = false;
        } else if (theta >= policy.threshold) {
            engaged = true;
            ++report.throttle_events;
        }
        if (engaged && k > 0) report.time_above_threshold += trace.dt;
    }
    report.estimated_stall = report.time_above_threshold * policy.stall_penalty;
    return report;
}

} // namespace hbmtherm
