#include "thermoclock/fluctuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "thermoclock/errors.hpp"
#include "thermoclock/random.hpp"
#include "thermoclock/stats.hpp"

namespace thermoclock {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Support {
    double lo, hi; ///< energy support; open at infinite ends
};

Support energy_support(const EntropyModel& s) {
    return std::visit(overloaded{
                          [](const GaussianEntropy&) { return Support{-kInf, kInf}; },
                          [](const PowerLawEntropy&) { return Support{0.0, kInf}; },
                          [](const VolumeEntropy&) { return Support{0.0, kInf}; },
                          [](const CustomEntropy& c) { return Support{c.lo, c.hi}; },
                      },
                      s);
}

// S/k as a function of energy alone (the X part of VolumeEntropy is separable).
double energy_entropy(const MacrostateEnvironment& env, double e) {
    return std::visit(overloaded{
                          [&](const GaussianEntropy& g) {
                              const double z = (e - g.E0) / g.sigma;
                              return -0.5 * z * z + env.theta0.value * e;
                          },
                          [&](const PowerLawEntropy& p) { return p.exponent * std::log(e); },
                          [&](const VolumeEntropy& v) { return v.exponent * std::log(e); },
                          [&](const CustomEntropy& c) { return c.s_over_k(e); },
                      },
                      env.entropy);
}

// Energy part of the log density, unnormalized.
double energy_log_weight(const MacrostateEnvironment& env, double e) {
    return -env.theta0.value * e + energy_entropy(env, e);
}

void check_energy(const MacrostateEnvironment& env, double e) {
    const auto sup = energy_support(env.entropy);
    const bool closed_lo = std::holds_alternative<CustomEntropy>(env.entropy);
    if (!std::isfinite(e) || e > sup.hi || e < sup.lo || (!closed_lo && e == sup.lo))
        throw DomainError("energy outside the support of the entropy model");
}

void check_displacements(const MacrostateEnvironment& env, std::span<const double> x) {
    if (x.size() != displacement_count(env.entropy))
        throw DomainError("wrong number of displacements for the entropy model");
    for (double v : x)
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("displacement outside (0, inf)");
}

// A bounded window holding essentially all of the energy mass, for grids and concavity scans.
Support energy_window(const MacrostateEnvironment& env) {
    const double t = env.theta0.value;
    return std::visit(overloaded{
                          [](const GaussianEntropy& g) { return Support{g.E0 - 12 * g.sigma, g.E0 + 12 * g.sigma}; },
                          [&](const PowerLawEntropy& p) {
                              const double a = p.exponent + 1;
                              return Support{0.0, (a + 12 * std::sqrt(a) + 40) / t};
                          },
                          [&](const VolumeEntropy& v) {
                              const double a = v.exponent + 1;
                              return Support{0.0, (a + 12 * std::sqrt(a) + 40) / t};
                          },
                          [](const CustomEntropy& c) { return Support{c.lo, c.hi}; },
                      },
                      env.entropy);
}

double log_integral(const std::function<double(double)>& logf, double ref, double lo, double hi, double scale) {
    auto f = [&](double x) {
        const double v = logf(x) - ref;
        return v < -745.0 ? 0.0 : std::exp(v);
    };
    double total = 0.0;
    try {
        if (std::isinf(lo) && std::isinf(hi)) {
            total = integrate_real_line(f, 1e-12);
        } else if (std::isinf(hi)) {
            total = integrate(f, lo, lo + scale, 1e-12) + integrate_to_infinity(f, lo + scale, 1e-12);
        } else {
            total = integrate(f, lo, hi, 1e-12);
        }
    } catch (const std::exception& e) {
        throw DivergenceError(std::string("normalizer quadrature failed: ") + e.what());
    }
    if (!std::isfinite(total) || !(total > 0.0)) throw DivergenceError("normalizer quadrature diverged");
    return std::log(total) + ref;
}

double energy_log_normalizer(const MacrostateEnvironment& env) {
    const double t = env.theta0.value;
    auto lw = [&](double e) { return energy_log_weight(env, e); };
    return std::visit(
        overloaded{
            [&](const GaussianEntropy& g) {
                // Substitute E = E0 + sigma u so sinh-sinh works on a unit scale.
                const double ref = lw(g.E0);
                auto shifted = [&](double u) { return lw(g.E0 + g.sigma * u) + std::log(g.sigma); };
                return log_integral(shifted, ref, -kInf, kInf, 1.0);
            },
            [&](const PowerLawEntropy& p) {
                const double mean = (p.exponent + 1) / t;
                return log_integral(lw, lw(mean), 0.0, kInf, mean);
            },
            [&](const VolumeEntropy& v) {
                const double mean = (v.exponent + 1) / t;
                return log_integral(lw, lw(mean), 0.0, kInf, mean);
            },
            [&](const CustomEntropy& c) {
                double ref = -kInf;
                for (int i = 0; i <= 2048; ++i) {
                    const double e = c.lo + (c.hi - c.lo) * i / 2048.0;
                    const double v = lw(e);
                    if (std::isfinite(v)) ref = std::max(ref, v);
                }
                if (!std::isfinite(ref)) throw DivergenceError("custom entropy is not finite on its support");
                return log_integral(lw, ref, c.lo, c.hi, 0.0);
            },
        },
        env.entropy);
}

struct Grid {
    std::vector<double> x, cdf;
};

// Piecewise-linear density on a grid refined where it changes fastest; cdf by trapezoids.
Grid build_inverse_cdf_grid(const MacrostateEnvironment& env) {
    const auto w = energy_window(env);
    const double lo = std::isinf(w.lo) ? -1e300 : w.lo;
    std::vector<double> x(1025);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = lo + (w.hi - lo) * double(i) / double(x.size() - 1);

    double ref = -kInf;
    for (double v : x) ref = std::max(ref, energy_log_weight(env, v));
    auto dens = [&](double e) {
        const double v = energy_log_weight(env, e) - ref;
        return std::isfinite(v) && v > -745.0 ? std::exp(v) : 0.0;
    };

    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = dens(x[i]);
    for (int pass = 0; pass < 8 && x.size() < (1u << 18); ++pass) {
        std::vector<double> nx{x[0]}, np{p[0]};
        bool split = false;
        for (std::size_t i = 0; i + 1 < x.size(); ++i) {
            const double mid = 0.5 * (x[i] + x[i + 1]);
            const double pm = dens(mid);
            if (std::abs(pm - 0.5 * (p[i] + p[i + 1])) > 1e-6) {
                nx.push_back(mid);
                np.push_back(pm);
                split = true;
            }
            nx.push_back(x[i + 1]);
            np.push_back(p[i + 1]);
        }
        x.swap(nx);
        p.swap(np);
        if (!split) break;
    }

    Grid g;
    g.x = x;
    g.cdf.assign(x.size(), 0.0);
    for (std::size_t i = 1; i < x.size(); ++i) g.cdf[i] = g.cdf[i - 1] + 0.5 * (p[i] + p[i - 1]) * (x[i] - x[i - 1]);
    const double total = g.cdf.back();
    if (!(total > 0.0) || !std::isfinite(total)) throw DivergenceError("inverse-CDF grid has no mass");
    for (auto& c : g.cdf) c /= total;
    return g;
}

double invert(const Grid& g, double u) {
    const auto it = std::upper_bound(g.cdf.begin(), g.cdf.end(), u);
    if (it == g.cdf.begin()) return g.x.front();
    if (it == g.cdf.end()) return g.x.back();
    const std::size_t i = std::size_t(it - g.cdf.begin());
    const double c0 = g.cdf[i - 1], c1 = g.cdf[i];
    const double f = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
    return g.x[i - 1] + f * (g.x[i] - g.x[i - 1]);
}

} // namespace

std::size_t displacement_count(const EntropyModel& entropy) {
    return std::holds_alternative<VolumeEntropy>(entropy) ? 1 : 0;
}

void validate(const MacrostateEnvironment& env) {
    env.units.validate();
    if (!(env.theta0.value > 0.0) || !std::isfinite(env.theta0.value))
        throw ValidationError("theta0", "must be finite and > 0");
    if (env.forces.size() != displacement_count(env.entropy))
        throw ValidationError("forces", "need one force per displacement of the entropy model");
    for (double f : env.forces)
        if (!(f > 0.0) || !std::isfinite(f)) throw ValidationError("forces", "must be finite and > 0");

    std::visit(overloaded{
                   [](const GaussianEntropy& g) {
                       if (!(g.sigma > 0.0) || !std::isfinite(g.sigma) || !std::isfinite(g.E0))
                           throw ValidationError("entropy.sigma", "must be finite and > 0");
                   },
                   [](const PowerLawEntropy& p) {
                       if (!(p.exponent >= 0.0) || !std::isfinite(p.exponent))
                           throw ValidationError("entropy.exponent", "must be >= 0 (concave S)");
                   },
                   [](const VolumeEntropy& v) {
                       if (!(v.exponent >= 0.0) || !std::isfinite(v.exponent))
                           throw ValidationError("entropy.exponent", "must be >= 0 (concave S)");
                       if (!(v.particles >= 0.0) || !std::isfinite(v.particles))
                           throw ValidationError("entropy.particles", "must be >= 0");
                   },
                   [](const CustomEntropy& c) {
                       if (!c.s_over_k) throw ValidationError("entropy.function", "missing");
                       if (!(c.hi > c.lo) || !std::isfinite(c.lo) || !std::isfinite(c.hi))
                           throw ValidationError("entropy.support", "need finite lo < hi");
                   },
               },
               env.entropy);

    // Concavity in E by sampled second differences over the bulk of the support.
    const auto w = energy_window(env);
    const double lo = w.lo == 0.0 ? w.hi * 1e-3 : w.lo;
    const int n = 256;
    const double h = (w.hi - lo) / (4.0 * n);
    for (int i = 1; i < n; ++i) {
        const double e = lo + (w.hi - lo) * i / n;
        const double s0 = energy_entropy(env, e - h), s1 = energy_entropy(env, e), s2 = energy_entropy(env, e + h);
        const double scale = std::max({1.0, std::abs(s0), std::abs(s1), std::abs(s2)});
        if (s0 - 2 * s1 + s2 > 1e-9 * scale) throw ValidationError("entropy", "S is not concave in E on the support");
    }
}

double entropy_over_k(const MacrostateEnvironment& env, double energy, std::span<const double> x) {
    check_energy(env, energy);
    check_displacements(env, x);
    double s = energy_entropy(env, energy);
    if (const auto* v = std::get_if<VolumeEntropy>(&env.entropy)) s += v->particles * std::log(x[0]);
    return s;
}

double log_normalizer(const MacrostateEnvironment& env) {
    validate(env);
    double total = energy_log_normalizer(env);
    if (const auto* v = std::get_if<VolumeEntropy>(&env.entropy)) {
        // S separates into energy and volume parts, so the normalizer factorizes.
        const double rate = env.theta0.value * env.forces[0];
        auto lx = [&](double x) { return -rate * x + v->particles * std::log(x); };
        const double mean = (v->particles + 1) / rate;
        total += log_integral(lx, lx(mean), 0.0, kInf, mean);
    }
    return total;
}

double fluctuation_log_prob(const MacrostateEnvironment& env, double energy, std::span<const double> x) {
    const double s = entropy_over_k(env, energy, x);
    double work = energy;
    for (std::size_t i = 0; i < x.size(); ++i) work += env.forces[i] * x[i];
    return -env.theta0.value * work + s - log_normalizer(env);
}

double local_inverse_temperature(const MacrostateEnvironment& env, double energy, std::span<const double> x) {
    check_energy(env, energy);
    check_displacements(env, x);
    const double k = env.units.k;
    return std::visit(overloaded{
                          [&](const GaussianEntropy& g) {
                              return k * (env.theta0.value - (energy - g.E0) / (g.sigma * g.sigma));
                          },
                          [&](const PowerLawEntropy& p) { return k * p.exponent / energy; },
                          [&](const VolumeEntropy& v) { return k * v.exponent / energy; },
                          [&](const CustomEntropy& c) {
                              const double span = c.hi - c.lo;
                              if (energy <= c.lo || energy >= c.hi)
                                  throw DomainError("local_inverse_temperature: energy on the support boundary");
                              const double h = std::min({1e-5 * span, 0.5 * (energy - c.lo), 0.5 * (c.hi - energy)});
                              return k * (c.s_over_k(energy + h) - c.s_over_k(energy - h)) / (2 * h);
                          },
                      },
                      env.entropy);
}

bool density_vanishes_at_boundary(const MacrostateEnvironment& env) {
    return std::visit(overloaded{
                          [](const GaussianEntropy&) { return true; },
                          [](const PowerLawEntropy& p) { return p.exponent > 0.0; },
                          [](const VolumeEntropy& v) { return v.exponent > 0.0; },
                          [&](const CustomEntropy& c) {
                              double peak = -kInf;
                              for (int i = 0; i <= 2048; ++i)
                                  peak = std::max(peak, energy_log_weight(env, c.lo + (c.hi - c.lo) * i / 2048.0));
                              const double edge = std::max(energy_log_weight(env, c.lo), energy_log_weight(env, c.hi));
                              return !(edge - peak > std::log(1e-12));
                          },
                      },
                      env.entropy);
}

FluctuationSample sample_macrostates(const MacrostateEnvironment& env, std::size_t count, std::uint64_t seed) {
    validate(env);
    // Confirms normalizability before drawing anything.
    (void)log_normalizer(env);

    FluctuationSample out;
    out.units = env.units;
    out.seed = seed;
    out.boundary_vanishes = density_vanishes_at_boundary(env);
    const auto n = static_cast<Eigen::Index>(count);
    out.energies.resize(n);
    out.displacements.resize(n, static_cast<Eigen::Index>(displacement_count(env.entropy)));
    out.weights = Eigen::ArrayXd::Constant(n, count ? 1.0 / double(count) : 0.0);

    Engine eng = make_engine(seed, "fluctuation.sample", 0);
    const double t = env.theta0.value;
    std::visit(overloaded{
                   [&](const GaussianEntropy& g) {
                       std::normal_distribution<double> d(g.E0, g.sigma);
                       for (auto& e : out.energies) e = d(eng);
                   },
                   [&](const PowerLawEntropy& p) {
                       std::gamma_distribution<double> d(p.exponent + 1, 1.0 / t);
                       for (auto& e : out.energies) e = d(eng);
                   },
                   [&](const VolumeEntropy& v) {
                       std::gamma_distribution<double> de(v.exponent + 1, 1.0 / t);
                       std::gamma_distribution<double> dx(v.particles + 1, 1.0 / (t * env.forces[0]));
                       for (Eigen::Index i = 0; i < n; ++i) {
                           out.energies(i) = de(eng);
                           out.displacements(i, 0) = dx(eng);
                       }
                   },
                   [&](const CustomEntropy&) {
                       const auto grid = build_inverse_cdf_grid(env);
                       std::uniform_real_distribution<double> u(0.0, 1.0);
                       for (auto& e : out.energies) e = invert(grid, u(eng));
                   },
               },
               env.entropy);

    out.local_betas.resize(n);
    std::vector<double> x(static_cast<std::size_t>(out.displacements.cols()));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = out.displacements(i, Eigen::Index(j));
        double e = out.energies(i);
        // Inverse-CDF draws can land exactly on a closed edge; nudge them inside.
        if (const auto* c = std::get_if<CustomEntropy>(&env.entropy)) {
            const double pad = 1e-9 * (c->hi - c->lo);
            e = std::clamp(e, c->lo + pad, c->hi - pad);
            out.energies(i) = e;
        }
        out.local_betas(i) = local_inverse_temperature(env, e, x);
    }
    return out;
}

CovarianceReport covariance_identity_check(const FluctuationSample& sample, std::size_t bootstrap_resamples) {
    const auto n = sample.energies.size();
    if (n < 1000) throw InsufficientSampleError("covariance_identity_check: need at least 1000 draws");
    if (sample.local_betas.size() != n || sample.weights.size() != n)
        throw DomainError("covariance_identity_check: inconsistent sample arrays");

    const Eigen::ArrayXd w = sample.weights / sample.weights.sum();
    auto moments = [&](const std::vector<std::size_t>* idx) {
        struct M {
            double cov, de, db;
        };
        double sw = 0, me = 0, mb = 0;
        auto each = [&](auto&& f) {
            if (idx)
                for (auto i : *idx) f(Eigen::Index(i));
            else
                for (Eigen::Index i = 0; i < n; ++i) f(i);
        };
        each([&](Eigen::Index i) {
            sw += w(i);
            me += w(i) * sample.energies(i);
            mb += w(i) * sample.local_betas(i);
        });
        me /= sw;
        mb /= sw;
        double c = 0, ve = 0, vb = 0;
        each([&](Eigen::Index i) {
            const double a = sample.energies(i) - me, b = sample.local_betas(i) - mb;
            c += w(i) * a * b;
            ve += w(i) * a * a;
            vb += w(i) * b * b;
        });
        return M{c / sw, std::sqrt(ve / sw), std::sqrt(vb / sw)};
    };

    const auto m = moments(nullptr);
    CovarianceReport rep;
    rep.k = sample.units.k;
    rep.covariance = m.cov;
    rep.delta_energy = m.de;
    rep.delta_beta = m.db;
    rep.product = m.de * m.db;

    const std::uint64_t bseed = derive_seed(sample.seed, "fluctuation.bootstrap", 0);
    rep.covariance_sigma = bootstrap_sd(std::size_t(n), bootstrap_resamples, bseed,
                                        [&](const std::vector<std::size_t>& idx) { return moments(&idx).cov; });
    rep.product_sigma = bootstrap_sd(std::size_t(n), bootstrap_resamples, bseed, [&](const std::vector<std::size_t>& idx) {
        const auto b = moments(&idx);
        return b.de * b.db;
    });

    // Exact on the sample moments; the only slack is floating-point rounding,
    // which matters when beta is an exact linear function of E.
    rep.cauchy_schwarz_pass = rep.product >= std::abs(rep.covariance) * (1.0 - 64 * std::numeric_limits<double>::epsilon());
    rep.product_pass = rep.product >= rep.k - 3.0 * rep.product_sigma;
    rep.identity_checked = sample.boundary_vanishes;
    if (rep.identity_checked) {
        rep.identity_pass = std::abs(rep.covariance + rep.k) <= 3.0 * rep.covariance_sigma;
    } else {
        rep.identity_pass = true;
        rep.warning = "density does not vanish at the support boundary; Cov(E, beta) = -k not asserted";
    }
    return rep;
}

} // namespace thermoclock
