#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "thermoclock/ensembles.hpp"
#include "thermoclock/phases.hpp"

namespace thermoclock {

/// Direct Gaussian fluctuation spec: beta ~ N(k theta, delta_beta^2) with a
/// stated energy spread delta_energy. delta_energy * delta_beta = k saturates
/// the thermodynamic bound.
struct GaussianBetaSpec {
    double delta_energy = 1.0;
    double delta_beta = 1.0;
};

/// Either a direct spec or a continuous ensemble model, whose energies are drawn
/// canonically and mapped to the local inverse temperature k d ln sigma / dE.
using ChainSource = std::variant<GaussianBetaSpec, EnsembleModel>;

struct ChainOptions {
    FrequencyModel process_model = StaticDisorder{};
    double horizon_periods = 100.0;     ///< last evaluated time, in units of t_c
    std::size_t steps_per_period = 100; ///< grid points per t_c (dt <= 0.01 / <nu>)
    std::size_t record_every = 50;      ///< approximate evaluation stride in grid steps
    std::size_t replicas = 15000;
    std::uint64_t seed = 0;
    Units units;
    double max_rel_spread = kDefaultMaxRelSpread;
    std::size_t bootstrap_resamples = 200;
    double taylor_c_bound = 2.0;
};

/// One inequality lhs >= rhs, at its worst evaluated time.
struct InequalityRecord {
    std::string name;
    std::string relation;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;     ///< lhs - rhs
    double sigma_band = 0.0; ///< 3 bootstrap sd of the margin
    double time = 0.0;
    bool pass = false;       ///< margin >= -sigma_band at every evaluated time
};

struct ChainReport {
    std::string source;
    double theta = 0.0;
    double delta_energy = 0.0;
    double delta_beta = 0.0;
    double mean_freq = 0.0;  ///< <nu_c>
    double rel_spread = 0.0; ///< Delta nu_c / <nu_c>
    double t_c = 0.0;        ///< mean clock period <1/nu_c> = h <theta>
    double delta_t_c = 0.0;  ///< Delta(1/nu_c)
    double period_bound = 0.0; ///< h / Delta E
    double min_product = 0.0;  ///< min_t Delta E Delta t / h
    double min_product_time = 0.0;
    double product_sigma = 0.0; ///< bootstrap sd of min_product
    double eps_mc = 0.0;        ///< 3 product_sigma / min_product
    std::size_t replicas = 0;
    std::size_t clipped = 0;
    std::string process_model;

    /// Clock-period bound, integral inequality, Delta t >= Delta t_c, Delta E Delta t >= h.
    std::vector<InequalityRecord> records;
    TaylorReport taylor;

    std::vector<double> times;   ///< evaluated times, t_c .. horizon_periods t_c
    std::vector<double> delta_t; ///< Mandelstam-Tamm Delta t at those times
    std::vector<double> product; ///< Delta E Delta t / h

    bool all_pass() const;
};

/// Thermodynamic draw -> nu_c = k / (h beta) per replica -> phase simulation ->
/// inequalities at every record time in [t_c, horizon_periods t_c].
/// Throws ValidationError when the mapped frequency spread exceeds max_rel_spread
/// and DomainError for discrete models. Inequality failures are recorded, not thrown.
ChainReport chain_verify(const ChainSource& source, Theta theta, const ChainOptions& options = {});

/// Stand-alone JSON document.
std::string to_json(const ChainReport& report, int indent = 2);

} // namespace thermoclock
