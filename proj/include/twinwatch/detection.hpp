#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "twinwatch/random.hpp"

namespace twinwatch {

struct NormalizationBounds {
    double a_max = 90.0;  // degrees
    double d_min = 1.0;   // meters
    double d_max = 18.0;  // meters
    double n_max = 18.0;  // persons
    /// Use 1 - D_norm and 1 - N_norm (closer and emptier scenes score higher)
    /// instead of the literal formulas. Off by default.
    bool inverted_dn = false;

    void validate() const;
};

struct DetectionWeights {
    double w_a = 1.0 / 3.0;
    double w_d = 1.0 / 3.0;
    double w_n = 1.0 / 3.0;

    static DetectionWeights equal() { return {}; }
    /// Rescales non-negative raw weights so they sum to one.
    static DetectionWeights normalized(double a, double d, double n);

    /// Each weight in [0, 1] and the sum equal to 1 within 1e-9.
    void validate() const;
};

struct DetectionThreshold {
    double t = 0.45;

    void validate() const;
};

struct ObservationSample {
    std::string camera_id;
    double time = 0.0;
    double a_deg = 0.0;
    double d_m = 0.0;
    int n_count = 0;
    double p = 0.0;
};

double normalize_angle(double a_deg, const NormalizationBounds& b);
double normalize_distance(double d_m, const NormalizationBounds& b);
double normalize_density(double n, const NormalizationBounds& b);

/// Weighted score of the three normalized observation terms.
double detection_probability(double a_deg, double d_m, double n, const DetectionWeights& w,
                             const NormalizationBounds& b);

/// True iff max(values) >= t. An empty list is never a detection.
bool trajectory_detected(std::span<const double> max_p_per_camera, const DetectionThreshold& t);

/// 1 - (1 - p)^m: detection rate when each of m cameras independently
/// reaches the threshold with probability p.
double analytic_detection_rate(double p, int m);

/// Per-camera exceedance p* such that analytic_detection_rate(p*, m) == target_rate.
double calibrate_exceedance(double target_rate, int m);

/// Distributions of (A, D, N) in stochastic mode.
struct StochasticSampler {
    NormalSpec a{5.02, 1.49, 0.0, std::nullopt};  // degrees
    NormalSpec d{5.02, 1.49, 0.0, std::nullopt};  // meters
    IntRange n{1, 18};
};

struct WeightCalibration {
    DetectionWeights weights;
    double achieved_rate = 0.0;
    double target_rate = 0.0;
    std::size_t candidates_evaluated = 0;
    bool converged = false;
};

struct WeightCalibrationOptions {
    std::size_t trajectories = 10'000;
    std::size_t budget = 6000;  // candidate evaluations; the full 0.01 simplex grid is 5151
    double grid_step = 0.01;
    double tolerance = 0.02;
    std::uint64_t seed = 0;
};

/// Grid search over the weight simplex for the weights whose simulated
/// stochastic-mode detection rate with `camera_count` cameras is closest to
/// `target_rate`. Candidate weights share one set of draws.
WeightCalibration calibrate_weights(double target_rate, int camera_count,
                                    const StochasticSampler& sampler, const DetectionThreshold& t,
                                    const NormalizationBounds& b,
                                    const WeightCalibrationOptions& options = {});

}  // namespace twinwatch
