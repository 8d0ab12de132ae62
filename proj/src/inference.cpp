#include "thermoclock/inference.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "thermoclock/errors.hpp"
#include "thermoclock/random.hpp"
#include "thermoclock/stats.hpp"

namespace thermoclock {

double fisher_information(const EnsembleModel& model, Theta theta) { return energy_variance(model, theta); }

namespace {

// d/dtheta ln P(E | theta) from canonical_log_pdf alone. One-sided near theta = 0
// on bounded spectra, where the central stencil would leave the domain.
double numeric_score(const EnsembleModel& model, double energy, double theta) {
    const double h = 1e-4 * std::max(theta, 1.0);
    auto lp = [&](double t) { return canonical_log_pdf(model, energy, Theta{t}); };
    if (theta - h < 0.0) return (-3.0 * lp(theta) + 4.0 * lp(theta + h) - lp(theta + 2 * h)) / (2 * h);
    return (lp(theta + h) - lp(theta - h)) / (2 * h);
}

} // namespace

double fisher_information_by_quadrature(const EnsembleModel& model, Theta theta) {
    if (!is_continuous(model)) {
        double total = 0.0;
        for (const auto& lv : energy_levels(model)) {
            const double s = numeric_score(model, lv.energy, theta.value);
            total += s * s * std::exp(canonical_log_pdf(model, lv.energy, theta));
        }
        return total;
    }
    // Split at the mean so exp-sinh sees the bulk of the mass near its origin.
    auto integrand = [&](double e) {
        const double lp = canonical_log_pdf(model, e, theta);
        if (lp < -745.0) return 0.0;
        const double s = numeric_score(model, e, theta.value);
        return s * s * std::exp(lp);
    };
    const double split = gamma_shape(model) / theta.value;
    return integrate(integrand, 0.0, split, 1e-12) + integrate_to_infinity(integrand, split, 1e-12);
}

Eigen::ArrayXd scores(const EnergySample& sample) {
    return mean_energy(sample.model, sample.theta) - sample.values;
}

double empirical_fisher(const EnergySample& sample) {
    if (sample.size() < 2) throw InsufficientSampleError("empirical_fisher: need at least 2 draws");
    return sample_variance(scores(sample));
}

Theta mle_theta(const EnsembleModel& model, double target) {
    if (!std::isfinite(target)) throw DomainError("mle_theta: non-finite sample mean");
    auto f = [&](double t) { return mean_energy(model, Theta{t}) - target; };

    const double ground = (std::holds_alternative<IsingChain>(model) && std::get<IsingChain>(model).N > 200)
                              ? -std::numeric_limits<double>::infinity()
                              : ground_energy(model);
    const double scale = std::max({1.0, std::abs(target), std::abs(ground)});
    if (target <= ground + 1e-12 * scale)
        throw SaturationError("mle_theta: sample mean at or below the ground energy (theta-hat = +inf)");

    if (is_bounded(model)) {
        const double top = max_mean_energy(model);
        if (std::abs(target - top) <= 1e-14 * scale) return Theta{0.0};
        if (target > top) throw SaturationError("mle_theta: sample mean above the infinite-temperature mean");
    }

    double lo = 1.0, hi = 1.0;
    double flo = f(lo), fhi = flo;
    if (flo == 0.0) return Theta{1.0};
    if (flo > 0.0) {
        while (fhi > 0.0) {
            lo = hi;
            flo = fhi;
            hi *= 2.0;
            if (hi > 1e15) throw SaturationError("mle_theta: no root below theta = 1e15");
            fhi = f(hi);
        }
    } else {
        while (flo < 0.0) {
            hi = lo;
            fhi = flo;
            lo *= 0.5;
            if (lo < 1e-15) {
                if (!is_bounded(model)) throw NumericalError("mle_theta: bracket collapsed towards theta = 0");
                lo = 0.0;
                flo = f(lo);
                break;
            }
            flo = f(lo);
        }
    }
    if (flo == 0.0) return Theta{lo};
    if (fhi == 0.0) return Theta{hi};

    std::uintmax_t iters = 200;
    const auto root = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                        boost::math::tools::eps_tolerance<double>(35), iters);
    if (iters >= 200) throw NumericalError("mle_theta: root finder did not converge");
    return Theta{0.5 * (root.first + root.second)};
}

Theta mle_theta(const EnergySample& sample) {
    if (sample.size() < 1) throw InsufficientSampleError("mle_theta: empty sample");
    return mle_theta(sample.model, sample_mean(sample.values));
}

namespace {

struct CvFit {
    double variance;
};

// Regression estimator of Var(y) using x with known variance var_x_known.
CvFit control_variate_variance(const std::vector<double>& x, const std::vector<double>& y,
                               const std::vector<std::size_t>& idx, double var_x_known) {
    const double n = double(idx.size());
    double mx = 0, my = 0;
    for (auto i : idx) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (auto i : idx) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) return {syy / (n - 1)};
    const double b = sxy / sxx;
    const double resid = std::max(0.0, syy - b * sxy) / std::max(1.0, n - 2);
    return {b * b * var_x_known + resid};
}

} // namespace

EstimatorReport estimator_study(const EnsembleModel& model, Theta theta, std::size_t sample_size,
                                std::size_t replica_count, std::uint64_t seed, const StudyOptions& options) {
    validate(model);
    if (sample_size < 1) throw ValidationError("sample_size", "must be >= 1");
    if (replica_count < 2) throw ValidationError("replicas", "must be >= 2");

    struct Slot {
        double mean = 0.0;
        std::optional<double> theta_hat;
        double tau = 0.5;
        bool converged = true;
    };
    std::vector<Slot> slots(replica_count);
    parallel_for(replica_count, [&](std::size_t r) {
        const auto s = sample_energies(model, theta, sample_size, seed, r, options.sampler);
        auto& out = slots[r];
        out.mean = sample_mean(s.values);
        if (s.diagnostics) {
            out.tau = s.diagnostics->tau_int;
            out.converged = s.diagnostics->converged;
        }
        try {
            out.theta_hat = mle_theta(model, out.mean).value;
        } catch (const SaturationError&) {
        }
    });

    EstimatorReport rep;
    rep.theta_true = theta.value;
    rep.sample_size = sample_size;
    rep.replica_count = replica_count;
    rep.fisher_info = fisher_information(model, theta);
    rep.energy_spread = std::sqrt(rep.fisher_info);

    std::vector<double> xs, ys;
    double tau_sum = 0.0;
    for (std::size_t r = 0; r < replica_count; ++r) {
        tau_sum += slots[r].tau;
        rep.sampler_converged = rep.sampler_converged && slots[r].converged;
        if (!slots[r].theta_hat) {
            rep.excluded.push_back(r);
            continue;
        }
        xs.push_back(slots[r].mean);
        ys.push_back(*slots[r].theta_hat);
    }
    rep.valid_replicas = ys.size();
    if (rep.valid_replicas < 3) throw NumericalError("estimator_study: fewer than 3 replicas produced an estimate");
    // Draws from the direct samplers are independent: tau is exactly 1/2.
    rep.mean_tau_int = std::holds_alternative<IsingChain>(model) ? tau_sum / double(replica_count) : 0.5;

    const Eigen::Map<const Eigen::ArrayXd> yv(ys.data(), static_cast<Eigen::Index>(ys.size()));
    rep.theta_hat = yv.mean();
    rep.bias = rep.theta_hat - rep.theta_true;
    rep.raw_variance = sample_variance(yv);

    const double var_mean_known = rep.fisher_info * 2.0 * rep.mean_tau_int / double(sample_size);
    std::vector<std::size_t> all(ys.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const double m_info = double(sample_size) * rep.fisher_info;

    rep.estimator_variance = control_variate_variance(xs, ys, all, var_mean_known).variance;
    rep.cr_ratio = rep.estimator_variance * m_info;
    rep.cr_ratio_raw = rep.raw_variance * m_info;
    rep.cr_sigma = bootstrap_sd(ys.size(), options.bootstrap_resamples, seed, [&](const std::vector<std::size_t>& idx) {
        return control_variate_variance(xs, ys, idx, var_mean_known).variance * m_info;
    });
    rep.uncertainty_product = rep.energy_spread * std::sqrt(double(sample_size) * rep.estimator_variance);
    rep.product_sigma = rep.cr_sigma / (2.0 * std::sqrt(std::max(rep.cr_ratio, 1e-300)));
    rep.eps_mc = 3.0 * rep.cr_sigma;
    return rep;
}

GibbsBoltzmann gibbs_boltzmann_temperatures(const EnsembleModel& model, double energy, const Units& units) {
    if (!is_continuous(model)) throw DomainError("gibbs_boltzmann_temperatures: continuous models only");
    if (!(energy > 0.0) || !std::isfinite(energy)) throw DomainError("energy must be interior to (0, inf)");
    const double a = gamma_shape(model);
    GibbsBoltzmann t;
    t.boltzmann = a == 1.0 ? std::numeric_limits<double>::infinity() : energy / (units.k * (a - 1.0));
    t.gibbs = energy / (units.k * a);
    return t;
}

GibbsBoltzmann gibbs_boltzmann_temperatures_numeric(const EnsembleModel& model, double energy, const Units& units) {
    if (!is_continuous(model)) throw DomainError("gibbs_boltzmann_temperatures: continuous models only");
    if (!(energy > 0.0) || !std::isfinite(energy)) throw DomainError("energy must be interior to (0, inf)");
    const double h = 1e-5 * energy;
    const double dlog_sigma =
        (log_density_of_states(model, energy + h) - log_density_of_states(model, energy - h)) / (2 * h);

    const double ref = log_density_of_states(model, energy);
    auto log_omega = [&](double e) {
        const double v = integrate([&](double x) { return x > 0.0 ? std::exp(log_density_of_states(model, x) - ref) : 0.0; },
                                   0.0, e, 1e-13);
        return std::log(v) + ref;
    };
    const double hg = 1e-4 * energy;
    const double dlog_omega = (log_omega(energy + hg) - log_omega(energy - hg)) / (2 * hg);
    return {1.0 / (units.k * dlog_sigma), 1.0 / (units.k * dlog_omega)};
}

double gibbs_boltzmann_beta_gap(const GibbsBoltzmann& t) {
    return (1.0 / t.gibbs - 1.0 / t.boltzmann) / (1.0 / t.gibbs);
}

double gibbs_boltzmann_temperature_gap(const GibbsBoltzmann& t) { return (t.boltzmann - t.gibbs) / t.gibbs; }

double kinetic_estimator(const Eigen::Ref<const Eigen::ArrayXd>& kinetic_energies, int d, const Units& units) {
    if (kinetic_energies.size() == 0) throw InsufficientSampleError("kinetic_estimator: empty sample");
    if (d < 1) throw DomainError("kinetic_estimator: d must be >= 1");
    return 2.0 * kinetic_energies.mean() / (double(d) * units.k);
}

Eigen::ArrayXd sample_kinetic_energies(double temperature, int d, std::size_t count, std::uint64_t seed,
                                       std::uint64_t replica_id, const Units& units) {
    if (!(temperature > 0.0)) throw DomainError("temperature must be > 0");
    if (d < 1) throw DomainError("d must be >= 1");
    Engine eng = make_engine(seed, "inference.kinetic", replica_id);
    std::gamma_distribution<double> dist(0.5 * d, units.k * temperature);
    Eigen::ArrayXd out(static_cast<Eigen::Index>(count));
    for (auto& v : out) v = dist(eng);
    return out;
}

} // namespace thermoclock
