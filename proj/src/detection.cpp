#include "twinwatch/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "twinwatch/errors.hpp"

namespace twinwatch {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

void NormalizationBounds::validate() const {
    if (!(a_max > 0.0 && d_min > 0.0 && d_max > 0.0 && n_max > 0.0)) {
        throw ValidationError("bounds", "normalization bounds must be strictly positive");
    }
    if (!(d_min < d_max)) throw ValidationError("bounds", "normalization bounds need d_min < d_max");
}

DetectionWeights DetectionWeights::normalized(double a, double d, double n) {
    if (a < 0.0 || d < 0.0 || n < 0.0 || !(a + d + n > 0.0)) {
        throw ValidationError("weights", "raw weights must be non-negative with a positive sum");
    }
    const double s = a + d + n;
    return {a / s, d / s, n / s};
}

void DetectionWeights::validate() const {
    for (const double w : {w_a, w_d, w_n}) {
        if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("weights", "each weight must lie in [0, 1]");
    }
    if (std::abs(w_a + w_d + w_n - 1.0) > 1e-9) {
        throw ValidationError("weights", "weights must sum to 1");
    }
}

void DetectionThreshold::validate() const {
    if (!(t > 0.0 && t < 1.0)) throw ValidationError("threshold", "threshold must lie in (0, 1)");
}

double normalize_angle(double a_deg, const NormalizationBounds& b) {
    if (!(a_deg >= 0.0)) throw ValidationError("a_deg", "angular deviation must be non-negative");
    if (a_deg > b.a_max) return 0.0;
    return 1.0 - a_deg / b.a_max;
}

double normalize_distance(double d_m, const NormalizationBounds& b) {
    if (!std::isfinite(d_m) || d_m < 0.0) {
        throw ValidationError("d_m", "distance must be finite and non-negative");
    }
    const double v = clamp01((d_m - b.d_min) / b.d_max);
    return b.inverted_dn ? 1.0 - v : v;
}

double normalize_density(double n, const NormalizationBounds& b) {
    if (!(n >= 0.0)) throw ValidationError("n", "density must be non-negative");
    const double v = std::min(n, b.n_max) / b.n_max;
    return b.inverted_dn ? 1.0 - v : v;
}

double detection_probability(double a_deg, double d_m, double n, const DetectionWeights& w,
                             const NormalizationBounds& b) {
    w.validate();
    const double p = w.w_a * normalize_angle(a_deg, b) + w.w_d * normalize_distance(d_m, b) +
                     w.w_n * normalize_density(n, b);
    return clamp01(p);
}

bool trajectory_detected(std::span<const double> max_p_per_camera, const DetectionThreshold& t) {
    if (max_p_per_camera.empty()) return false;
    return *std::max_element(max_p_per_camera.begin(), max_p_per_camera.end()) >= t.t;
}

double analytic_detection_rate(double p, int m) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p", "exceedance must lie in [0, 1]");
    if (m < 0) throw ValidationError("m", "camera count must be non-negative");
    // log1p/expm1 keep the identity with calibrate_exceedance exact to ~1 ulp.
    if (p == 1.0) return m == 0 ? 0.0 : 1.0;
    return -std::expm1(static_cast<double>(m) * std::log1p(-p));
}

double calibrate_exceedance(double target_rate, int m) {
    if (!(target_rate > 0.0 && target_rate < 1.0)) {
        throw ValidationError("target", "target rate must lie in (0, 1)");
    }
    if (m < 1) throw ValidationError("m", "camera count must be at least 1");
    return -std::expm1(std::log1p(-target_rate) / static_cast<double>(m));
}

WeightCalibration calibrate_weights(double target_rate, int camera_count,
                                    const StochasticSampler& sampler, const DetectionThreshold& t,
                                    const NormalizationBounds& b,
                                    const WeightCalibrationOptions& options) {
    if (!(target_rate > 0.0 && target_rate < 1.0)) {
        throw ValidationError("target", "target rate must lie in (0, 1)");
    }
    if (camera_count < 1) throw ValidationError("preset", "preset has no cameras");
    if (options.trajectories == 0) throw ValidationError("trajectories", "need at least one trajectory");
    if (!(options.grid_step > 0.0 && options.grid_step <= 1.0)) {
        throw ValidationError("grid_step", "grid step must lie in (0, 1]");
    }
    t.validate();
    b.validate();
    sampler.a.validate("stochastic_a");
    sampler.d.validate("stochastic_d");
    sampler.n.validate("stochastic_n");

    // Normalized terms for every (trajectory, camera) pair, drawn once.
    const std::size_t m = static_cast<std::size_t>(camera_count);
    const std::size_t rows = options.trajectories * m;
    std::vector<double> an(rows), dn(rows), nn(rows);
    RngStream rng(options.seed, "calibrate_weights");
    for (std::size_t i = 0; i < rows; ++i) {
        an[i] = normalize_angle(sample_delay(sampler.a, rng), b);
        dn[i] = normalize_distance(sample_delay(sampler.d, rng), b);
        nn[i] = normalize_density(rng.uniform_int(sampler.n.lo, sampler.n.hi), b);
    }

    auto rate_of = [&](const DetectionWeights& w) {
        std::size_t detected = 0;
        for (std::size_t k = 0; k < options.trajectories; ++k) {
            for (std::size_t c = 0; c < m; ++c) {
                const std::size_t i = k * m + c;
                if (w.w_a * an[i] + w.w_d * dn[i] + w.w_n * nn[i] >= t.t) {
                    ++detected;
                    break;
                }
            }
        }
        return static_cast<double>(detected) / static_cast<double>(options.trajectories);
    };
    auto distance_to_equal = [](const DetectionWeights& w) {
        const double third = 1.0 / 3.0;
        return std::hypot(w.w_a - third, w.w_d - third, w.w_n - third);
    };

    WeightCalibration best;
    best.target_rate = target_rate;
    double best_err = std::numeric_limits<double>::infinity();
    auto consider = [&](const DetectionWeights& w) {
        const double rate = rate_of(w);
        const double err = std::abs(rate - target_rate);
        ++best.candidates_evaluated;
        const bool better = err < best_err - 1e-12;
        const bool tie_closer = std::abs(err - best_err) <= 1e-12 &&
                                distance_to_equal(w) < distance_to_equal(best.weights);
        if (better || tie_closer) {
            best_err = err;
            best.weights = w;
            best.achieved_rate = rate;
        }
    };

    const int steps = static_cast<int>(std::lround(1.0 / options.grid_step));
    const std::size_t grid_size = static_cast<std::size_t>(steps + 1) * (steps + 2) / 2;
    if (options.budget == 0) return best;
    consider(DetectionWeights::equal());
    for (int i = 0; i <= steps && best.candidates_evaluated < options.budget; ++i) {
        for (int j = 0; i + j <= steps && best.candidates_evaluated < options.budget; ++j) {
            const double wa = static_cast<double>(i) / steps;
            const double wd = static_cast<double>(j) / steps;
            consider({wa, wd, std::max(0.0, 1.0 - wa - wd)});
        }
    }
    const bool exhausted_grid = best.candidates_evaluated >= grid_size + 1;
    best.converged = exhausted_grid && best_err <= options.tolerance;
    return best;
}

}  // namespace twinwatch
