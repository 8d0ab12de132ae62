#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <variant>

namespace thermoclock {

/// Each replica keeps one constant frequency.
struct StaticDisorder {};

/// Stationary Ornstein-Uhlenbeck frequency path around mean_freq with
/// stationary spread rel_spread * mean_freq.
struct MeanReverting {
    double correlation_time = 1.0;
};

using FrequencyModel = std::variant<StaticDisorder, MeanReverting>;

inline constexpr double kDefaultMaxRelSpread = 0.2;

struct ClockProcess {
    double mean_freq = 1.0;
    double rel_spread = 0.05;
    FrequencyModel model = StaticDisorder{};
    double dt = 0.01;
    double horizon = 10.0;
    std::size_t replicas = 1000;
    std::uint64_t seed = 0;

    double max_rel_spread = kDefaultMaxRelSpread;
    /// Optional per-replica starting frequencies (size = replicas). For
    /// StaticDisorder they are the frequencies; rel_spread is then only informative.
    std::optional<Eigen::ArrayXd> frequencies;
    /// Grid indices start + j * every are stored per replica (for resampling).
    std::size_t record_start = 0;
    std::size_t record_every = 100;

    /// Throws ValidationError on violated preconditions.
    void validate() const;
    std::size_t steps() const; ///< grid intervals, horizon / dt rounded
};

struct PhaseTrajectoryBatch {
    Eigen::ArrayXd times;        ///< full grid, times(0) = 0
    Eigen::ArrayXd mean_phase;   ///< <phi>(t)
    Eigen::ArrayXd phase_spread; ///< Delta phi(t), population sd over replicas
    Eigen::ArrayXd mean_freq;    ///< <nu>(t)
    Eigen::ArrayXd freq_spread;  ///< Delta nu(t)
    Eigen::ArrayXd mean_period;  ///< <1/nu>(t)
    Eigen::ArrayXd period_spread; ///< Delta(1/nu)(t)

    Eigen::ArrayXi record_index; ///< grid indices of the stored columns
    Eigen::MatrixXd phases;      ///< replicas x records
    Eigen::MatrixXd frequencies; ///< replicas x records

    double dt = 0.0;
    double t_c = 0.0;            ///< 1 / process mean_freq
    std::size_t clipped = 0;
    std::size_t draws = 0;
};

/// Draws the replica starting frequencies exactly as simulate_phases does.
/// Returns {frequencies, clipped count}.
std::pair<Eigen::ArrayXd, std::size_t> draw_frequencies(const ClockProcess& process);

/// phi(t) = 2 pi int_0^t nu by the trapezoid rule, phi(0) = 0. Replicas run in
/// fixed blocks merged in order, so the result does not depend on thread count.
/// Throws ClippingRateError when more than 0.1% of frequency draws fell below
/// 1e-6 mean_freq and had to be clipped.
PhaseTrajectoryBatch simulate_phases(const ClockProcess& process);

/// Delta t = Delta phi / |d<phi>/dt| with a centered difference on the grid.
/// t must be a grid point with t >= t_c and not the last point.
double time_uncertainty(const PhaseTrajectoryBatch& batch, double t);
/// Grid-index form of the same estimator.
double time_uncertainty_at(const PhaseTrajectoryBatch& batch, Eigen::Index i);

struct TaylorReport {
    double rel_spread = 0.0;     ///< measured Delta nu / <nu>
    double mean_freq = 0.0;
    double freq_spread = 0.0;
    double mean_period = 0.0;    ///< <1/nu>
    double period_spread = 0.0;  ///< Delta(1/nu)
    double scale = 0.0;          ///< Delta nu^2 / <nu>^3
    double mean_remainder = 0.0; ///< |<1/nu> - 1/<nu>|
    double spread_remainder = 0.0; ///< |Delta(1/nu) - Delta nu / <nu>^2|
    double c_mean = 0.0;         ///< mean_remainder / scale
    double c_spread = 0.0;       ///< spread_remainder / scale
    double c_bound = 2.0;
    bool pass = false;           ///< both remainders <= c_bound * scale
};

/// Second-order remainders of 1/nu expanded about <nu>, from the replica
/// frequencies. Throws ValidationError when rel_spread > max_rel_spread.
TaylorReport taylor_remainder_check(const ClockProcess& process, double c_bound = 2.0);
TaylorReport taylor_remainder_check(const Eigen::Ref<const Eigen::ArrayXd>& frequencies, double c_bound = 2.0);

/// Columns: time, replica, phase (stored records only).
void write_phase_csv(const PhaseTrajectoryBatch& batch, std::ostream& out);

} // namespace thermoclock
