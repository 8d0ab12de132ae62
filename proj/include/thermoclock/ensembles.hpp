#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "thermoclock/units.hpp"

namespace thermoclock {

/// Classical ideal gas of N particles in d dimensions; sigma(E) ~ E^(dN/2 - 1).
struct IdealGas {
    int N = 1;
    int d = 3;
};

/// N classical harmonic oscillators; E ~ Gamma(N, 1/theta).
struct HarmonicOscillators {
    int N = 1;
};

/// N independent two-level units with level spacing `gap`.
struct TwoLevel {
    int N = 1;
    double gap = 1.0;
};

/// Periodic 1D Ising chain, E = -J sum s_i s_{i+1} - field sum s_i.
struct IsingChain {
    int N = 4;
    double J = 1.0;
    double field = 0.0;
};

using EnsembleModel = std::variant<IdealGas, HarmonicOscillators, TwoLevel, IsingChain>;

/// Throws ValidationError naming the offending parameter.
void validate(const EnsembleModel& model);

std::string model_name(const EnsembleModel& model);
std::string describe(const EnsembleModel& model);

/// Continuous spectrum (Gamma family); discrete models expose energy_levels() instead.
bool is_continuous(const EnsembleModel& model);
/// Bounded spectrum: Z stays finite at theta = 0.
bool is_bounded(const EnsembleModel& model);

/// Shape alpha of the Gamma law of the continuous models (dN/2 or N).
double gamma_shape(const EnsembleModel& model);

/// ln Z(theta). Throws DivergenceError for theta <= 0 on unbounded spectra and
/// DomainError for theta < 0 on bounded ones. The Ising chain uses the exact
/// 2x2 transfer matrix.
double log_partition(const EnsembleModel& model, Theta theta);

/// <E> = -d ln Z / d theta.
double mean_energy(const EnsembleModel& model, Theta theta);
/// Var E = d^2 ln Z / d theta^2.
double energy_variance(const EnsembleModel& model, Theta theta);

/// Lowest energy of the spectrum (infimum of attainable means).
double ground_energy(const EnsembleModel& model);
/// Supremum of mean_energy over valid theta (infinity for unbounded spectra).
double max_mean_energy(const EnsembleModel& model);

/// ln sigma(E) for continuous models. The additive constant is zero:
/// ln sigma = (alpha - 1) ln E pairs with ln Z = lgamma(alpha) - alpha ln theta,
/// so canonical_log_pdf integrates to exactly one.
double log_density_of_states(const EnsembleModel& model, double energy);

struct EnergyLevel {
    double energy = 0.0;
    double log_degeneracy = 0.0;
};

/// Distinct energies with ln(degeneracy), ascending. Discrete models only;
/// the Ising chain is enumerated by dynamic programming over (spins up, domain walls).
std::vector<EnergyLevel> energy_levels(const EnsembleModel& model);

/// ln of the degeneracy of a discrete level; DomainError if E is not a level.
double log_degeneracy(const EnsembleModel& model, double energy);

/// ln P(E | theta) = ln sigma(E) - theta E - ln Z(theta); a density for the
/// continuous models and a probability mass for the discrete ones.
double canonical_log_pdf(const EnsembleModel& model, double energy, Theta theta);

struct SamplerOptions {
    /// Ising burn-in in sweeps (N single-spin attempts each); negative means 100 * N.
    int burn_in_sweeps = -1;
    /// Ising sweeps between recorded energies.
    int thinning_sweeps = 1;
    /// Integrated autocorrelation time (in recorded samples) above which the
    /// Ising sample is flagged as not converged.
    double max_tau_int = 2.0;
};

struct SamplerDiagnostics {
    double tau_int = 0.5;
    double acceptance_rate = 1.0;
    bool converged = true;
};

/// A batch of energy draws with enough provenance to regenerate it bit-exactly.
struct EnergySample {
    Eigen::ArrayXd values;
    EnsembleModel model;
    Theta theta;
    std::uint64_t seed = 0;
    std::uint64_t replica_id = 0;
    std::optional<SamplerDiagnostics> diagnostics; ///< Metropolis models only

    Eigen::Index size() const { return values.size(); }
};

/// Draws `count` energies from P(E | theta). Gamma draws for the continuous
/// models, binomial for TwoLevel, single-spin-flip Metropolis for the Ising
/// chain (one chain per call, with burn-in and thinning from `options`).
EnergySample sample_energies(const EnsembleModel& model, Theta theta, std::size_t count, std::uint64_t seed,
                             std::uint64_t replica_id, const SamplerOptions& options = {});

} // namespace thermoclock
