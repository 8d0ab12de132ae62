#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "thermoclock/errors.hpp"
#include "thermoclock/phases.hpp"
#include "thermoclock/random.hpp"
#include "thermoclock/stats.hpp"
#include "thermoclock/units.hpp"

using namespace thermoclock;

namespace {

constexpr double kTwoPi = 2.0 * kPi;

ClockProcess process(double rel, std::size_t replicas = 400, std::uint64_t seed = 1) {
    ClockProcess p;
    p.mean_freq = 2.0;
    p.rel_spread = rel;
    p.dt = 0.005;
    p.horizon = 10.0;
    p.replicas = replicas;
    p.seed = seed;
    p.record_every = 100;
    return p;
}

double pop_sd(const Eigen::ArrayXd& x) { return std::sqrt((x - x.mean()).square().mean()); }

// <1/nu> / (1/<nu>) - 1 for nu = 1 + r z, z standard normal, over the region
// nu > 0.04 where all the sampled mass lives.
double gaussian_inverse_remainder(double r) {
    auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); };
    const double lo = std::max(-8.0, -0.96 / r);
    const double mass = integrate(pdf, lo, 8.0, 1e-14);
    return integrate([&](double z) { return pdf(z) / (1.0 + r * z); }, lo, 8.0, 1e-14) / mass - 1.0;
}

double gaussian_inverse_spread(double r) {
    auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); };
    const double lo = std::max(-8.0, -0.96 / r);
    const double mass = integrate(pdf, lo, 8.0, 1e-14);
    const double m1 = integrate([&](double z) { return pdf(z) / (1.0 + r * z); }, lo, 8.0, 1e-14) / mass;
    const double m2 =
        integrate([&](double z) { return pdf(z) / ((1.0 + r * z) * (1.0 + r * z)); }, lo, 8.0, 1e-14) / mass;
    return std::sqrt(m2 - m1 * m1);
}

} // namespace

TEST_CASE("preconditions") {
    auto p = process(0.05);
    p.dt = 0.006;
    CHECK_THROWS_AS(simulate_phases(p), ValidationError);
    p = process(0.05);
    p.horizon = 4.0;
    CHECK_THROWS_AS(simulate_phases(p), ValidationError);
    p = process(0.05, 99);
    CHECK_THROWS_AS(simulate_phases(p), ValidationError);
    p = process(0.25);
    CHECK_THROWS_AS(simulate_phases(p), ValidationError);
    p = process(0.0);
    CHECK_THROWS_AS(simulate_phases(p), ValidationError);
    p = process(0.05);
    p.model = MeanReverting{0.0};
    CHECK_THROWS_AS(simulate_phases(p), ValidationError);
    p = process(0.05);
    p.frequencies = Eigen::ArrayXd::Ones(10);
    CHECK_THROWS_AS(simulate_phases(p), ValidationError);
}

TEST_CASE("phase starts at zero and the mean phase never decreases") {
    for (FrequencyModel m : {FrequencyModel{StaticDisorder{}}, FrequencyModel{MeanReverting{0.5}}}) {
        auto p = process(0.2);
        p.model = m;
        const auto b = simulate_phases(p);
        CHECK(b.times(0) == 0.0);
        CHECK(b.mean_phase(0) == 0.0);
        CHECK(b.phase_spread(0) == 0.0);
        CHECK((b.phases.col(0).array() == 0.0).all());
        for (Eigen::Index i = 1; i < b.mean_phase.size(); ++i) CHECK(b.mean_phase(i) >= b.mean_phase(i - 1));
        CHECK(b.times.size() == 2001);
        CHECK(b.times(b.times.size() - 1) == doctest::Approx(10.0));
    }
}

TEST_CASE("zero-spread limit is a deterministic clock") {
    const auto b = simulate_phases(process(1e-8));
    for (Eigen::Index i = 0; i < b.times.size(); ++i) CHECK(b.phase_spread(i) <= 1e-6 * b.mean_phase(i));
    for (double t : {0.5, 1.0, 5.0, 9.0}) CHECK(time_uncertainty(b, t) <= 1e-6 * t);
}

TEST_CASE("static disorder: linear phase spread") {
    const auto p = process(0.1, 2000, 3);
    const auto b = simulate_phases(p);
    const auto [nu, clipped] = draw_frequencies(p);
    CHECK(clipped == 0);
    const double dnu = pop_sd(nu);
    CHECK(std::abs(dnu - 0.2) <= 4 * 0.2 / std::sqrt(2.0 * 2000));
    for (Eigen::Index i = 1; i < b.times.size(); i += 97) {
        const double t = b.times(i);
        CHECK(b.phase_spread(i) == doctest::Approx(kTwoPi * t * dnu).epsilon(1e-9));
        CHECK(b.freq_spread(i) == doctest::Approx(dnu).epsilon(1e-9));
    }
    // Stored columns are the recorded replica phases.
    CHECK(b.phases(7, 3) == doctest::Approx(kTwoPi * nu(7) * b.times(b.record_index(3))).epsilon(1e-12));
}

TEST_CASE("static disorder: Delta t = t Delta nu / <nu> and non-decreasing") {
    const auto p = process(0.1, 1000, 4);
    const auto b = simulate_phases(p);
    const auto nu = draw_frequencies(p).first;
    const double ratio = pop_sd(nu) / nu.mean();
    double prev = 0.0;
    for (Eigen::Index i = 100; i + 1 < b.times.size(); i += 50) {
        const double dt = time_uncertainty_at(b, i);
        CHECK(dt == doctest::Approx(b.times(i) * ratio).epsilon(1e-9));
        CHECK(dt >= prev);
        prev = dt;
    }
}

TEST_CASE("time_uncertainty domain") {
    const auto b = simulate_phases(process(0.05));
    CHECK_THROWS_AS(time_uncertainty(b, 0.25), DomainError);   // below t_c = 0.5
    CHECK_THROWS_AS(time_uncertainty(b, 1.0021), DomainError); // off grid
    CHECK_THROWS_AS(time_uncertainty(b, 10.0), DomainError);   // last grid point
    CHECK_NOTHROW(time_uncertainty(b, 0.5));
}

TEST_CASE("mean-reverting: phase variance follows the integrated OU law") {
    const double tau = 0.5, rel = 0.1;
    auto p = process(rel, 3000, 9);
    p.model = MeanReverting{tau};
    const auto coarse = simulate_phases(p);
    p.dt /= 10;
    p.record_every *= 10;
    const auto fine = simulate_phases(p);

    const double sigma = rel * p.mean_freq;
    for (double t : {1.0, 2.5, 5.0, 9.5}) {
        const auto ic = static_cast<Eigen::Index>(std::llround(t / coarse.dt));
        const auto ifn = static_cast<Eigen::Index>(std::llround(t / fine.dt));
        const double closed = kTwoPi * kTwoPi * 2.0 * sigma * sigma * tau * tau * (t / tau - 1.0 + std::exp(-t / tau));
        const double var_c = coarse.phase_spread(ic) * coarse.phase_spread(ic);
        const double var_f = fine.phase_spread(ifn) * fine.phase_spread(ifn);
        const double se = closed * std::sqrt(2.0 / 3000.0);
        CHECK(std::abs(var_c - closed) <= 4 * se);
        CHECK(std::abs(var_f - closed) <= 4 * se);
        // The 10x finer run is the reference; the two noise paths differ, so compare as two samples.
        CHECK(std::abs(var_c - var_f) <= 4 * std::sqrt(2.0) * se);
    }
    // Late-time growth is linear with slope 8 pi^2 sigma^2 tau.
    const auto a = static_cast<Eigen::Index>(std::llround(6.0 / coarse.dt));
    const auto z = static_cast<Eigen::Index>(std::llround(9.5 / coarse.dt));
    const double slope = (coarse.phase_spread(z) * coarse.phase_spread(z) - coarse.phase_spread(a) * coarse.phase_spread(a)) / 3.5;
    CHECK(slope == doctest::Approx(kTwoPi * kTwoPi * 2.0 * sigma * sigma * tau).epsilon(0.25));
}

TEST_CASE("clipping-rate rejection") {
    auto p = process(1.0);
    p.max_rel_spread = 2.0;
    CHECK_THROWS_AS(simulate_phases(p), ClippingRateError);
    p.rel_spread = 0.2;
    CHECK_NOTHROW(simulate_phases(p));
}

TEST_CASE("bit-identical batches, independent of thread count") {
    auto p = process(0.1, 300, 5);
    p.model = MeanReverting{1.0};
    set_thread_count(1);
    const auto a = simulate_phases(p);
    set_thread_count(4);
    const auto b = simulate_phases(p);
    set_thread_count(1);
    CHECK((a.mean_phase == b.mean_phase).all());
    CHECK((a.phase_spread == b.phase_spread).all());
    CHECK(a.phases == b.phases);
    p.seed = 6;
    const auto c = simulate_phases(p);
    CHECK((a.mean_phase != c.mean_phase).any());
}

TEST_CASE("adding replicas leaves existing streams untouched") {
    const auto small = draw_frequencies(process(0.1, 200, 8)).first;
    const auto large = draw_frequencies(process(0.1, 500, 8)).first;
    CHECK((small == large.head(200)).all());
}

TEST_CASE("Taylor remainders at 1% spread") {
    auto p = process(0.01, 100000, 2);
    const auto t = taylor_remainder_check(p);
    CHECK(t.pass);
    CHECK(t.mean_remainder <= 2.0 * t.scale);
    CHECK(t.spread_remainder <= 2.0 * t.scale);
    // Oracle: <1/nu> - 1/<nu> ~ r^2 / <nu> for Gaussian disorder.
    const double oracle = gaussian_inverse_remainder(0.01) / p.mean_freq;
    CHECK(oracle == doctest::Approx(1e-4 / p.mean_freq).epsilon(0.01));
    CHECK(t.mean_remainder == doctest::Approx(oracle).epsilon(0.05));
}

TEST_CASE("Taylor remainders scale quadratically") {
    std::vector<double> spreads = {0.02, 0.04, 0.08, 0.16}, sampled, oracle, spread_oracle;
    for (double r : spreads) {
        const auto t = taylor_remainder_check(process(r, 100000, 21));
        CHECK(t.pass);
        CHECK(t.c_mean == doctest::Approx(1.0 + gaussian_inverse_remainder(r) / (r * r) - 1.0).epsilon(0.03));
        sampled.push_back(t.mean_remainder);
        oracle.push_back(gaussian_inverse_remainder(r));
        spread_oracle.push_back(std::abs(gaussian_inverse_spread(r) - r));
    }
    CHECK(std::abs(loglog_slope(spreads, oracle) - 2.0) <= 0.1);
    CHECK(std::abs(loglog_slope(spreads, sampled) - 2.0) <= 0.1);
    // The spread remainder is third order for symmetric disorder.
    CHECK(loglog_slope(spreads, spread_oracle) > 2.5);
}

TEST_CASE("Taylor remainders vanish with the spread and respect the validity guard") {
    const auto t = taylor_remainder_check(process(1e-6, 1000, 1));
    CHECK(t.mean_remainder < 1e-10);
    CHECK(t.spread_remainder < 1e-10);
    auto p = process(0.3);
    p.max_rel_spread = 0.5;
    CHECK_NOTHROW(taylor_remainder_check(p));
    p.max_rel_spread = 0.2;
    CHECK_THROWS_AS(taylor_remainder_check(p), ValidationError);
}

TEST_CASE("phase CSV") {
    auto p = process(0.05, 100, 1);
    p.record_every = 1000;
    const auto b = simulate_phases(p);
    std::ostringstream os;
    write_phase_csv(b, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "time,replica,phase");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 3 * 100);
}
