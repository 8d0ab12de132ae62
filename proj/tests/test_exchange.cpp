#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "thermoclock/errors.hpp"
#include "thermoclock/exchange.hpp"
#include "thermoclock/stats.hpp"

using namespace thermoclock;

namespace {

ExchangeConfig config(int m, int n, double rate, std::uint64_t steps, std::uint64_t seed = 1) {
    ExchangeConfig c;
    c.subsystems = m;
    c.units_per_subsystem = n;
    c.exchange_rate = rate;
    c.total_energy = double(m * n);
    c.steps = steps;
    c.seed = seed;
    return c;
}

// Variance of subsystem 0's share when `quanta` indistinguishable quanta are spread
// uniformly over all compositions among `units` units; the continuum limit is the
// uniform law on the simplex.
double lattice_subsystem_variance(int units, int per_subsystem, int quanta) {
    double count = 0, s1 = 0, s2 = 0;
    std::vector<int> parts(units, 0);
    // Recursive enumeration of compositions.
    std::function<void(int, int)> rec = [&](int idx, int left) {
        if (idx == units - 1) {
            parts[idx] = left;
            int sub = 0;
            for (int q = 0; q < per_subsystem; ++q) sub += parts[q];
            const double x = double(sub) / quanta;
            count += 1;
            s1 += x;
            s2 += x * x;
            return;
        }
        for (int v = 0; v <= left; ++v) {
            parts[idx] = v;
            rec(idx + 1, left - v);
        }
    };
    rec(0, quanta);
    const double mean = s1 / count;
    return s2 / count - mean * mean;
}

} // namespace

TEST_CASE("total energy is conserved") {
    auto c = config(4, 16, 0.1, 1000000);
    c.total_energy = 7.3;
    const auto tr = subsystem_exchange_sim(c);
    CHECK(tr.max_relative_drift <= 1e-12);
    for (Eigen::Index r = 0; r < tr.subsystem_energy.rows(); ++r)
        CHECK(std::abs(tr.subsystem_energy.row(r).sum() - 7.3) <= 1e-12 * 7.3);
    CHECK(tr.record_steps.back() == 1000000);
}

TEST_CASE("two-unit exchange has a uniform stationary law") {
    ExchangeConfig c = config(2, 1, 1.0, 200000, 3);
    c.total_energy = 2.0;
    const auto tr = subsystem_exchange_sim(c);
    const auto b = static_cast<Eigen::Index>(tr.burn_in_records());
    std::vector<double> data;
    for (Eigen::Index r = b; r < tr.unit_energy.rows(); ++r) data.push_back(tr.unit_energy(r, 0));
    CHECK(data.size() > 50000);
    const auto ks = ks_test(data, [](double x) { return std::clamp(x / 2.0, 0.0, 1.0); });
    CHECK(ks.p_value > 0.01);
    CHECK(ks.statistic < 0.01);
}

TEST_CASE("lattice enumeration reproduces the simplex variance at m = 2") {
    for (int n : {1, 2}) {
        const double lattice = lattice_subsystem_variance(2 * n, n, 400);
        const double formula = exchange_subsystem_variance(2, n, 1.0);
        CHECK(std::abs(lattice - formula) <= 0.01 * formula);
    }
    // The lattice converges toward the continuum value as the quanta are refined.
    const double coarse = std::abs(lattice_subsystem_variance(4, 2, 40) - exchange_subsystem_variance(2, 2, 1.0));
    const double fine = std::abs(lattice_subsystem_variance(4, 2, 160) - exchange_subsystem_variance(2, 2, 1.0));
    CHECK(fine < coarse);
}

TEST_CASE("subsystem energy variance at m = 4, n = 64") {
    const auto tr = subsystem_exchange_sim(config(4, 64, 0.5, 8000000, 7));
    const double predicted = exchange_subsystem_variance(4, 64, 256.0);
    const double measured = tr.subsystem_energy_variance();

    // Batch means over the post-burn-in records, pooled over subsystems.
    const auto b = static_cast<Eigen::Index>(tr.burn_in_records());
    const Eigen::Index rows = tr.subsystem_energy.rows() - b;
    const int batches = 40;
    const Eigen::Index per = rows / batches;
    Eigen::ArrayXd bm(batches);
    for (int k = 0; k < batches; ++k)
        bm(k) = (tr.subsystem_energy.middleRows(b + k * per, per).array() - 64.0).square().mean();
    const double se = std::sqrt(sample_variance(bm) / batches);
    CHECK(std::abs(measured - predicted) <= 4 * se);
}

TEST_CASE("temperature fluctuations shrink with subsystem size") {
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {4, 16, 64, 256}) {
        const auto tr = subsystem_exchange_sim(config(4, n, 0.5, 4000000, 11));
        const double v = tr.temperature_variance();
        CHECK(v < prev);
        prev = v;
        CHECK(tr.temperature_estimate(0, 0) == doctest::Approx(2.0));
    }
}

TEST_CASE("timescale hierarchy in the shipped configurations") {
    for (const auto& c : shipped_exchange_configs()) {
        const auto tr = subsystem_exchange_sim(c);
        INFO("m=" << c.subsystems << " n=" << c.units_per_subsystem);
        CHECK(tr.tau_sub < tr.tau_fl);
        CHECK(tr.tau_fl < double(c.steps));
        CHECK(tr.hierarchy_holds);
    }
}

TEST_CASE("too-short runs are rejected") {
    try {
        subsystem_exchange_sim(config(2, 128, 0.02, 20000));
        FAIL("expected a ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "steps");
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(subsystem_exchange_sim(config(1, 4, 0.1, 1000)), ValidationError);
    CHECK_THROWS_AS(subsystem_exchange_sim(config(2, 0, 0.1, 1000)), ValidationError);
    CHECK_THROWS_AS(subsystem_exchange_sim(config(2, 4, 0.0, 1000)), ValidationError);
    auto c = config(2, 4, 0.1, 1000);
    c.total_energy = -1;
    CHECK_THROWS_AS(subsystem_exchange_sim(c), ValidationError);
}

TEST_CASE("deterministic per seed and CSV export") {
    const auto a = subsystem_exchange_sim(config(3, 4, 0.2, 20000, 5));
    const auto b = subsystem_exchange_sim(config(3, 4, 0.2, 20000, 5));
    CHECK(a.subsystem_energy == b.subsystem_energy);

    std::ostringstream os;
    write_exchange_csv(a, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "step,subsystem_id,energy,T_hat");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        if (rows == 4) {
            // First row of the second record: subsystem 0 after 12 steps.
            CHECK(line.rfind("12,0,", 0) == 0);
            const double energy = std::stod(line.substr(5, line.find(',', 5) - 5));
            const double t_hat = std::stod(line.substr(line.rfind(',') + 1));
            CHECK(t_hat == doctest::Approx(2.0 * energy / 4.0));
        }
    }
    CHECK(rows == a.record_steps.size() * 3);
}
