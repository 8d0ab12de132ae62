#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "thermoclock/units.hpp"

namespace thermoclock {

struct ExchangeConfig {
    int subsystems = 2;            ///< m
    int units_per_subsystem = 1;   ///< n
    double total_energy = 1.0;
    std::uint64_t steps = 100000;
    double exchange_rate = 0.1;    ///< probability that a pair straddles two subsystems
    std::uint64_t seed = 0;
    std::uint64_t record_every = 0; ///< 0: once per m*n steps (one sweep)
    double burn_in_fraction = 0.1;  ///< records discarded before timescale estimation
    int tracked_units = 32;         ///< units whose traces feed tau_sub
    Units units;
};

/// Subsystem-exchange trajectory. Energies are stored at each record; times in steps.
struct ExchangeTrajectory {
    ExchangeConfig config;
    std::vector<std::uint64_t> record_steps;
    Eigen::MatrixXd subsystem_energy;    ///< records x m
    Eigen::MatrixXd unit_energy;         ///< records x tracked units
    Eigen::MatrixXd temperature_estimate; ///< T-hat_j = 2 E_j / (d n k), d = 1

    double max_relative_drift = 0.0; ///< max over records of |sum_i e_i - E_total| / E_total
    double tau_sub = 0.0;            ///< unit-level integrated autocorrelation time (steps)
    double tau_fl = 0.0;             ///< subsystem-level integrated autocorrelation time (steps)
    bool hierarchy_holds = false;    ///< tau_sub < tau_fl < steps

    std::size_t burn_in_records() const;
    /// Variance of subsystem energies after burn-in, pooled over subsystems.
    double subsystem_energy_variance() const;
    /// Same for the temperature estimates.
    double temperature_variance() const;
};

/// Stochastic pairwise exchange among m*n units. Each step picks a unit i and a
/// partner j (in another subsystem with probability exchange_rate, else in the
/// same one; always another subsystem when n = 1) and redistributes their
/// combined energy s as e_i = u s, e_j = s - e_i with u ~ U(0, 1).
///
/// Throws ValidationError for bad parameters and when steps < 50 tau_fl.
ExchangeTrajectory subsystem_exchange_sim(const ExchangeConfig& config);

/// Configurations offered by the command-line exchange experiment.
std::vector<ExchangeConfig> shipped_exchange_configs();

/// Columns: step, subsystem_id, energy, T_hat.
void write_exchange_csv(const ExchangeTrajectory& trajectory, std::ostream& out);

/// Stationary variance of one subsystem's energy (Dirichlet(1, ..., 1) over m*n units):
/// E^2 (m - 1) / (m^2 (m n + 1)).
double exchange_subsystem_variance(int m, int n, double total_energy);

} // namespace thermoclock
