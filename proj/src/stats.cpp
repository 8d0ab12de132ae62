#include "thermoclock/stats.hpp"

#include <unsupported/Eigen/FFT>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <complex>
#include <limits>
#include <stdexcept>

#include "thermoclock/errors.hpp"

namespace thermoclock {

AutocorrelationEstimate integrated_autocorrelation_time(const Eigen::Ref<const Eigen::ArrayXd>& series, double c) {
    const Eigen::Index n = series.size();
    AutocorrelationEstimate out;
    if (n < 4) {
        out.reliable = false;
        return out;
    }
    const double mean = series.mean();

    // Autocovariance by zero-padded FFT.
    Eigen::Index padded = 1;
    while (padded < 2 * n) padded <<= 1;
    std::vector<double> buf(static_cast<std::size_t>(padded), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = series[i] - mean;
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, buf);
    for (auto& z : spec) z = std::norm(z);
    std::vector<double> acov;
    fft.inv(acov, spec);

    const double c0 = acov[0];
    if (!(c0 > 0.0)) {
        // constant series: no fluctuations to correlate
        out.window = 0;
        return out;
    }
    double tau = 0.5;
    for (Eigen::Index w = 1; w < n; ++w) {
        tau += acov[static_cast<std::size_t>(w)] / c0;
        if (double(w) >= c * tau) {
            out.tau_int = std::max(tau, 0.5);
            out.window = static_cast<std::size_t>(w);
            return out;
        }
    }
    out.tau_int = std::max(tau, 0.5);
    out.window = static_cast<std::size_t>(n - 1);
    out.reliable = false;
    return out;
}

double bootstrap_sd(std::size_t n, std::size_t resamples, std::uint64_t seed,
                    const std::function<double(const std::vector<std::size_t>&)>& statistic) {
    if (n == 0 || resamples < 2) return 0.0;
    Engine eng = make_engine(seed, "bootstrap", 0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    Eigen::ArrayXd values(static_cast<Eigen::Index>(resamples));
    for (std::size_t b = 0; b < resamples; ++b) {
        for (auto& i : idx) i = pick(eng);
        values[static_cast<Eigen::Index>(b)] = statistic(idx);
    }
    return std::sqrt(sample_variance(values));
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("loglog_slope: need >= 2 paired points");
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::ArrayXd lx(n), ly(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("loglog_slope: values must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    const double mx = lx.mean(), my = ly.mean();
    return ((lx - mx) * (ly - my)).sum() / (lx - mx).square().sum();
}

KsResult ks_test(std::vector<double> data, const std::function<double(double)>& cdf) {
    if (data.empty()) throw InsufficientSampleError("ks_test: empty sample");
    std::sort(data.begin(), data.end());
    const double n = double(data.size());
    double d = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double f = cdf(data[i]);
        d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
    }
    // Stephens' finite-n correction to the Kolmogorov limit law.
    const double sn = std::sqrt(n);
    const double x = (sn + 0.12 + 0.11 / sn) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        p += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return {d, std::clamp(p, 0.0, 1.0)};
}

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol) {
    boost::math::quadrature::tanh_sinh<double> q;
    return q.integrate(f, a, b, rel_tol);
}

double integrate_to_infinity(const std::function<double(double)>& f, double a, double rel_tol) {
    boost::math::quadrature::exp_sinh<double> q;
    return q.integrate(f, a, std::numeric_limits<double>::infinity(), rel_tol);
}

double integrate_real_line(const std::function<double(double)>& f, double rel_tol) {
    boost::math::quadrature::sinh_sinh<double> q;
    return q.integrate(f, rel_tol);
}

} // namespace thermoclock
