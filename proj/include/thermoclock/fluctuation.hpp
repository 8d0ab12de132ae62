#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "thermoclock/units.hpp"

namespace thermoclock {

// Entropy models of the small system, all written as S/k.

/// S/k = -(E - E0)^2 / (2 sigma^2) + theta0 E. Combined with the environment
/// factor exp(-theta0 E) this gives a Gaussian with mean E0 and sd sigma.
struct GaussianEntropy {
    double E0 = 0.0;
    double sigma = 1.0;
};

/// S/k = exponent * ln E on (0, inf); the macrostate law is Gamma(exponent + 1, 1/theta0).
/// exponent = dN/2 - 1 reproduces the canonical ideal gas (S = k ln sigma).
struct PowerLawEntropy {
    double exponent = 2.0;
};

/// S/k = exponent * ln E + particles * ln X with one volume-like displacement X
/// conjugate to a pressure-like force F0 (environment forces[0]).
struct VolumeEntropy {
    double exponent = 2.0;
    double particles = 1.0;
};

/// Arbitrary S/k(E) on a finite support [lo, hi]; sampled by inverse CDF.
struct CustomEntropy {
    std::function<double(double)> s_over_k;
    double lo = 0.0;
    double hi = 1.0;
    std::string label = "custom";
};

using EntropyModel = std::variant<GaussianEntropy, PowerLawEntropy, VolumeEntropy, CustomEntropy>;

inline PowerLawEntropy ideal_gas_entropy(int N, int d) { return PowerLawEntropy{0.5 * d * N - 1.0}; }

/// Small system in contact with an environment at 1/(k T0) = theta0 and forces F0_i.
struct MacrostateEnvironment {
    Theta theta0{1.0};
    std::vector<double> forces;
    EntropyModel entropy = GaussianEntropy{};
    Units units;
};

/// Number of generalized displacements X_i the entropy model depends on.
std::size_t displacement_count(const EntropyModel& entropy);

/// Checks theta0 > 0, force count, support, and concavity of S in E
/// (sampled second differences). Throws ValidationError.
void validate(const MacrostateEnvironment& env);

/// S/k at (E, X); DomainError outside the support.
double entropy_over_k(const MacrostateEnvironment& env, double energy, std::span<const double> displacements = {});

/// ln of the normalizer of exp(-theta0 (E + sum F X) + S/k), by quadrature over the
/// support. Throws DivergenceError when the integral does not converge.
double log_normalizer(const MacrostateEnvironment& env);

/// ln P(E, X) = -theta0 (E + sum_i F0_i X_i) + S(E, X)/k - ln normalizer.
double fluctuation_log_prob(const MacrostateEnvironment& env, double energy,
                            std::span<const double> displacements = {});

/// Out-of-equilibrium inverse temperature beta(E, X) = dS/dE at fixed X
/// (carries k, i.e. beta = k * d(S/k)/dE). DomainError off the interior.
double local_inverse_temperature(const MacrostateEnvironment& env, double energy,
                                 std::span<const double> displacements = {});

/// True when the macrostate density vanishes at every edge of the support,
/// the condition under which Cov(E, beta) = -k follows by parts.
bool density_vanishes_at_boundary(const MacrostateEnvironment& env);

struct FluctuationSample {
    Eigen::ArrayXd energies;
    Eigen::MatrixXd displacements; ///< rows = draws, cols = displacement_count
    Eigen::ArrayXd local_betas;
    Eigen::ArrayXd weights;        ///< normalized to 1
    Units units;
    bool boundary_vanishes = true;
    std::uint64_t seed = 0;
};

/// Direct draws for the recognized families (Gaussian, Gamma), inverse CDF on an
/// adaptively refined grid otherwise. Fills local_betas from local_inverse_temperature.
FluctuationSample sample_macrostates(const MacrostateEnvironment& env, std::size_t count, std::uint64_t seed);

struct CovarianceReport {
    double covariance = 0.0;    ///< Cov(E, beta), population normalization
    double delta_energy = 0.0;
    double delta_beta = 0.0;
    double product = 0.0;       ///< Delta E * Delta beta
    double k = 1.0;
    double covariance_sigma = 0.0; ///< bootstrap sd
    double product_sigma = 0.0;

    bool identity_checked = true;   ///< false when the boundary terms do not vanish
    bool identity_pass = true;      ///< |Cov + k| <= 3 sigma
    bool cauchy_schwarz_pass = true; ///< Delta E Delta beta >= |Cov| (rounding floor only)
    bool product_pass = true;       ///< Delta E Delta beta >= k - 3 sigma
    std::string warning;
};

/// Needs at least 1000 draws (InsufficientSampleError otherwise).
CovarianceReport covariance_identity_check(const FluctuationSample& sample, std::size_t bootstrap_resamples = 200);

} // namespace thermoclock
