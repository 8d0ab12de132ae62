#include "thermoclock/exchange.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "thermoclock/errors.hpp"
#include "thermoclock/random.hpp"
#include "thermoclock/stats.hpp"

namespace thermoclock {

namespace {

void validate(const ExchangeConfig& c) {
    if (c.subsystems < 2) throw ValidationError("subsystems", "need m >= 2");
    if (c.units_per_subsystem < 1) throw ValidationError("units_per_subsystem", "need n >= 1");
    if (!(c.total_energy > 0.0) || !std::isfinite(c.total_energy)) throw ValidationError("total_energy", "must be > 0");
    if (!(c.exchange_rate > 0.0) || c.exchange_rate > 1.0) throw ValidationError("exchange_rate", "must be in (0, 1]");
    if (c.steps == 0) throw ValidationError("steps", "must be > 0");
    if (!(c.burn_in_fraction >= 0.0) || c.burn_in_fraction >= 1.0)
        throw ValidationError("burn_in_fraction", "must be in [0, 1)");
    if (c.tracked_units < 1) throw ValidationError("tracked_units", "must be >= 1");
    c.units.validate();
}

double mean_tau(const Eigen::MatrixXd& series, Eigen::Index first) {
    const Eigen::Index n = series.rows() - first;
    if (n < 8) return 0.5;
    double total = 0.0;
    for (Eigen::Index j = 0; j < series.cols(); ++j) {
        const Eigen::ArrayXd col = series.col(j).segment(first, n).array();
        total += integrated_autocorrelation_time(col).tau_int;
    }
    return total / double(series.cols());
}

} // namespace

std::size_t ExchangeTrajectory::burn_in_records() const {
    return static_cast<std::size_t>(config.burn_in_fraction * double(record_steps.size()));
}

double ExchangeTrajectory::subsystem_energy_variance() const {
    const auto b = static_cast<Eigen::Index>(burn_in_records());
    const auto block = subsystem_energy.bottomRows(subsystem_energy.rows() - b);
    const double mean = config.total_energy / config.subsystems;
    return (block.array() - mean).square().mean();
}

double ExchangeTrajectory::temperature_variance() const {
    const double f = 2.0 / (double(config.units_per_subsystem) * config.units.k);
    return f * f * subsystem_energy_variance();
}

ExchangeTrajectory subsystem_exchange_sim(const ExchangeConfig& config) {
    validate(config);
    const int m = config.subsystems, n = config.units_per_subsystem;
    const std::uint64_t units = std::uint64_t(m) * std::uint64_t(n);
    const std::uint64_t every = config.record_every ? config.record_every : units;
    const std::uint64_t records = config.steps / every + 1;
    const int tracked = static_cast<int>(std::min<std::uint64_t>(std::uint64_t(config.tracked_units), units));

    std::vector<double> e(units, config.total_energy / double(units));
    Engine eng = make_engine(config.seed, "fluctuation.exchange", 0);
    std::uniform_int_distribution<std::uint64_t> pick_unit(0, units - 1);
    std::uniform_int_distribution<int> pick_local(0, n - 2 < 0 ? 0 : n - 2);
    std::uniform_int_distribution<int> pick_other_sub(0, m - 2);
    std::uniform_int_distribution<int> pick_slot(0, n - 1);
    std::uniform_real_distribution<double> frac(0.0, 1.0);
    std::bernoulli_distribution inter(config.exchange_rate);

    ExchangeTrajectory tr;
    tr.config = config;
    tr.record_steps.reserve(records);
    tr.subsystem_energy.resize(static_cast<Eigen::Index>(records), m);
    tr.unit_energy.resize(static_cast<Eigen::Index>(records), tracked);

    Eigen::Index row = 0;
    auto record = [&](std::uint64_t step) {
        tr.record_steps.push_back(step);
        double total = 0.0;
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int q = 0; q < n; ++q) s += e[std::size_t(j) * n + q];
            tr.subsystem_energy(row, j) = s;
            total += s;
        }
        // Tracked units are spread over the subsystems.
        for (int q = 0; q < tracked; ++q) tr.unit_energy(row, q) = e[(std::uint64_t(q) * units) / std::uint64_t(tracked)];
        tr.max_relative_drift =
            std::max(tr.max_relative_drift, std::abs(total - config.total_energy) / config.total_energy);
        ++row;
    };

    record(0);
    for (std::uint64_t step = 1; step <= config.steps; ++step) {
        const std::uint64_t i = pick_unit(eng);
        const int sub = int(i / std::uint64_t(n));
        const int slot = int(i % std::uint64_t(n));
        std::uint64_t j;
        if (n == 1 || inter(eng)) {
            int other = pick_other_sub(eng);
            if (other >= sub) ++other;
            j = std::uint64_t(other) * n + std::uint64_t(pick_slot(eng));
        } else {
            int q = pick_local(eng);
            if (q >= slot) ++q;
            j = std::uint64_t(sub) * n + std::uint64_t(q);
        }
        const double s = e[i] + e[j];
        e[i] = frac(eng) * s;
        e[j] = s - e[i];
        if (step % every == 0) record(step);
    }
    tr.subsystem_energy.conservativeResize(row, m);
    tr.unit_energy.conservativeResize(row, tracked);
    tr.temperature_estimate = tr.subsystem_energy * (2.0 / (double(n) * config.units.k));

    const auto first = static_cast<Eigen::Index>(tr.burn_in_records());
    tr.tau_sub = mean_tau(tr.unit_energy, first) * double(every);
    tr.tau_fl = mean_tau(tr.subsystem_energy, first) * double(every);
    if (double(config.steps) < 50.0 * tr.tau_fl)
        throw ValidationError("steps", "run too short for timescale estimation (need >= 50 tau_fl = " +
                                           std::to_string(50.0 * tr.tau_fl) + " steps)");
    tr.hierarchy_holds = tr.tau_sub < tr.tau_fl && tr.tau_fl < double(config.steps);
    return tr;
}

void write_exchange_csv(const ExchangeTrajectory& tr, std::ostream& out) {
    out << "step,subsystem_id,energy,T_hat\n";
    const auto prec = out.precision(17);
    for (Eigen::Index r = 0; r < tr.subsystem_energy.rows(); ++r)
        for (Eigen::Index j = 0; j < tr.subsystem_energy.cols(); ++j)
            out << tr.record_steps[std::size_t(r)] << ',' << j << ',' << tr.subsystem_energy(r, j) << ','
                << tr.temperature_estimate(r, j) << '\n';
    out.precision(prec);
}

std::vector<ExchangeConfig> shipped_exchange_configs() {
    std::vector<ExchangeConfig> out;
    const struct {
        int m, n;
        double rate;
    } table[] = {{4, 16, 0.05}, {4, 64, 0.05}, {8, 32, 0.1}, {2, 128, 0.02}};
    for (const auto& t : table) {
        ExchangeConfig c;
        c.subsystems = t.m;
        c.units_per_subsystem = t.n;
        c.exchange_rate = t.rate;
        c.total_energy = double(t.m * t.n);
        c.steps = 4000000;
        out.push_back(c);
    }
    return out;
}

double exchange_subsystem_variance(int m, int n, double total_energy) {
    const double mn = double(m) * double(n);
    return total_energy * total_energy * (m - 1.0) / (double(m) * double(m) * (mn + 1.0));
}

} // namespace thermoclock
