#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "thermoclock/ensembles.hpp"

namespace thermoclock {

/// Fisher information of P(E | theta) per draw; equals Var E (closed-form moments).
double fisher_information(const EnsembleModel& model, Theta theta);

/// Second, independent route: sum/quadrature of (d ln P / d theta)^2 P over the
/// support, with the score obtained by central differences of canonical_log_pdf.
/// Touches only ln sigma and ln Z, never the moment formulas.
double fisher_information_by_quadrature(const EnsembleModel& model, Theta theta);

/// Unbiased sample variance of the score <E>_theta - E_i. Needs >= 2 draws.
double empirical_fisher(const EnergySample& sample);

/// Per-draw scores <E>_theta - E_i.
Eigen::ArrayXd scores(const EnergySample& sample);

/// Maximum-likelihood theta: the unique root of mean_energy(theta) = sample mean.
/// The bracket grows geometrically from theta = 1; the root is polished by
/// TOMS 748 to 1e-10 relative. Throws SaturationError when the sample mean lies
/// outside the attainable range (e.g. an all-ground-state TwoLevel sample).
Theta mle_theta(const EnsembleModel& model, double sample_mean);
Theta mle_theta(const EnergySample& sample);

struct EstimatorReport {
    double theta_hat = 0.0;            ///< mean of theta-hat over valid replicas
    double theta_true = 0.0;
    std::size_t sample_size = 0;        ///< M draws per replica
    std::size_t replica_count = 0;      ///< R requested
    std::size_t valid_replicas = 0;
    std::vector<std::size_t> excluded;  ///< replicas whose estimate saturated

    double estimator_variance = 0.0;    ///< control-variate estimate of Var(theta-hat)
    double raw_variance = 0.0;          ///< plain unbiased variance across replicas
    double fisher_info = 0.0;           ///< per draw
    double cr_ratio = 0.0;              ///< estimator_variance * M * fisher_info
    double cr_ratio_raw = 0.0;
    double cr_sigma = 0.0;              ///< bootstrap sd of cr_ratio
    double bias = 0.0;                  ///< theta_hat - theta_true
    double energy_spread = 0.0;         ///< Delta E of one draw
    double uncertainty_product = 0.0;   ///< Delta E * sqrt(M) * Delta theta-hat (k units)
    double product_sigma = 0.0;
    double eps_mc = 0.0;                ///< 3-sigma relative allowance on cr_ratio
    double mean_tau_int = 0.5;          ///< sampler autocorrelation (0.5 for iid draws)
    bool sampler_converged = true;

    bool cramer_rao_holds() const { return cr_ratio >= 1.0 - 3.0 * cr_sigma; }
    bool product_holds() const { return uncertainty_product >= 1.0 - 3.0 * product_sigma; }
};

struct StudyOptions {
    SamplerOptions sampler;
    std::size_t bootstrap_resamples = 400;
};

/// R independent replicas of M draws, one MLE per replica.
///
/// Var(theta-hat) is estimated by the regression (control-variate) estimator on
/// the replica sample means, whose sampling variance Var(E) * 2 tau / M is known;
/// with only a few hundred replicas this cuts the Monte Carlo error of the
/// Cramer-Rao ratio by an order of magnitude compared with the raw variance,
/// which is reported alongside.
EstimatorReport estimator_study(const EnsembleModel& model, Theta theta, std::size_t sample_size,
                                std::size_t replica_count, std::uint64_t seed, const StudyOptions& options = {});

struct GibbsBoltzmann {
    double boltzmann = 0.0; ///< T_B from d ln sigma / dE
    double gibbs = 0.0;     ///< T_G from d ln Omega / dE, Omega = int_0^E sigma
};

/// Closed form for the power-law densities of states: T_B = E / (k (alpha - 1)),
/// T_G = E / (k alpha). T_B is +inf when alpha = 1 and negative below.
GibbsBoltzmann gibbs_boltzmann_temperatures(const EnsembleModel& model, double energy, const Units& units = {});

/// Generic route: finite differences of ln sigma and of ln Omega, with Omega by quadrature.
GibbsBoltzmann gibbs_boltzmann_temperatures_numeric(const EnsembleModel& model, double energy,
                                                    const Units& units = {});

/// Relative gaps between the two definitions.
/// In inverse temperature, (1/T_G - 1/T_B) / (1/T_G) = 1/alpha exactly;
/// in temperature, (T_B - T_G) / T_G = 1/(alpha - 1).
double gibbs_boltzmann_beta_gap(const GibbsBoltzmann& t);
double gibbs_boltzmann_temperature_gap(const GibbsBoltzmann& t);

/// Falcioni-style kinetic estimator T-hat = 2 <K> / (d k) from per-particle kinetic energies.
double kinetic_estimator(const Eigen::Ref<const Eigen::ArrayXd>& kinetic_energies, int d, const Units& units = {});

/// Per-particle kinetic energies of a Maxwell gas at temperature T: Gamma(d/2, kT).
Eigen::ArrayXd sample_kinetic_energies(double temperature, int d, std::size_t count, std::uint64_t seed,
                                       std::uint64_t replica_id, const Units& units = {});

} // namespace thermoclock
