#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "thermoclock/random.hpp"

namespace thermoclock {

template <typename Derived>
double sample_mean(const Eigen::DenseBase<Derived>& x) {
    return x.derived().template cast<double>().mean();
}

/// Unbiased (n - 1) sample variance. Two-pass for accuracy.
template <typename Derived>
double sample_variance(const Eigen::DenseBase<Derived>& x) {
    const auto n = x.size();
    if (n < 2) return 0.0;
    const double m = sample_mean(x);
    return (x.derived().array().template cast<double>() - m).square().sum() / double(n - 1);
}

/// Population (n) covariance, the normalization under which
/// |cov| <= sd_x * sd_y holds exactly.
template <typename DerivedX, typename DerivedY>
double population_covariance(const Eigen::DenseBase<DerivedX>& x, const Eigen::DenseBase<DerivedY>& y) {
    const double mx = sample_mean(x), my = sample_mean(y);
    return ((x.derived().array() - mx) * (y.derived().array() - my)).mean();
}

template <typename Derived>
double population_sd(const Eigen::DenseBase<Derived>& x) {
    const double m = sample_mean(x);
    return std::sqrt((x.derived().array() - m).square().mean());
}

struct AutocorrelationEstimate {
    double tau_int = 0.5; ///< integrated autocorrelation time, in series steps
    std::size_t window = 0;
    bool reliable = true; ///< window condition met before the series ran out
};

/// Integrated autocorrelation time with Sokal's automatic windowing
/// (smallest W with W >= c * tau(W)). Independent data give tau = 1/2.
AutocorrelationEstimate integrated_autocorrelation_time(const Eigen::Ref<const Eigen::ArrayXd>& series,
                                                        double c = 6.0);

/// Bootstrap standard deviation of a statistic over resampled index sets.
/// The statistic receives indices into the original data (with repetition).
double bootstrap_sd(std::size_t n, std::size_t resamples, std::uint64_t seed,
                    const std::function<double(const std::vector<std::size_t>&)>& statistic);

/// Ordinary least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct KsResult {
    double statistic = 0.0; ///< sup |F_n - F|
    double p_value = 1.0;   ///< asymptotic Kolmogorov p-value
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
KsResult ks_test(std::vector<double> data, const std::function<double(double)>& cdf);

/// Integral over [a, b] (finite), tanh-sinh; tolerates endpoint singularities.
double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-12);

/// Integral over (a, inf), exp-sinh.
double integrate_to_infinity(const std::function<double(double)>& f, double a, double rel_tol = 1e-12);

/// Integral over the whole real line, sinh-sinh.
double integrate_real_line(const std::function<double(double)>& f, double rel_tol = 1e-12);

} // namespace thermoclock
