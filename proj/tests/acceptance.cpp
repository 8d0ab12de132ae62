// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "thermoclock/chain.hpp"
#include "thermoclock/cli/runner.hpp"
#include "thermoclock/clock.hpp"
#include "thermoclock/exchange.hpp"
#include "thermoclock/fluctuation.hpp"
#include "thermoclock/inference.hpp"
#include "thermoclock/phases.hpp"
#include "thermoclock/stats.hpp"

using namespace thermoclock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Outcome estimator_efficiency() {
    Outcome o;
    struct Case {
        EnsembleModel model;
        std::vector<double> thetas;
        int thinning;
    };
    const std::vector<Case> cases = {{IdealGas{10, 3}, {0.5, 1.0, 2.0}, 1},
                                     {HarmonicOscillators{10}, {0.5, 1.0, 2.0}, 1},
                                     {TwoLevel{10, 1.0}, {0.5, 1.0, 2.0}, 1},
                                     {IsingChain{8, 1.0, 0.0}, {0.2, 0.5, 1.0}, 10}};
    double lo = 1e9, hi = 0, pmin = 1e9, emax = 0;
    std::uint64_t seed = 100;
    for (const auto& c : cases)
        for (double th : c.thetas) {
            StudyOptions so;
            so.sampler.thinning_sweeps = c.thinning;
            const auto r = estimator_study(c.model, Theta{th}, 10000, 200, seed++, so);
            const std::string where = describe(c.model) + " theta=" + fmt("%g", th);
            o.require(r.cr_ratio >= 0.95 && r.cr_ratio <= 1.2, where + fmt(" cr_ratio=%.4f", r.cr_ratio));
            o.require(r.eps_mc <= 0.02, where + fmt(" eps_mc=%.4f", r.eps_mc));
            o.require(r.uncertainty_product >= 1.0 - r.eps_mc, where + fmt(" product=%.4f", r.uncertainty_product));
            lo = std::min(lo, r.cr_ratio);
            hi = std::max(hi, r.cr_ratio);
            pmin = std::min(pmin, r.uncertainty_product);
            emax = std::max(emax, r.eps_mc);
        }
    if (o.pass) o.detail = fmt("cr_ratio in [%.4f, %.4f], min product %.4f", lo, hi, pmin) + fmt(", max eps_mc %.4f", emax);
    return o;
}

Outcome fisher() {
    Outcome o;
    const std::vector<EnsembleModel> models = {IdealGas{10, 3}, IdealGas{1, 1}, HarmonicOscillators{10},
                                               TwoLevel{10, 1.0}, IsingChain{16, 1.0, 0.0}, IsingChain{8, -1.0, 0.3}};
    double worst = 0;
    for (const auto& m : models)
        for (double th : {0.2, 0.5, 1.0, 2.0}) {
            const double e = rel(fisher_information_by_quadrature(m, Theta{th}), energy_variance(m, Theta{th}));
            worst = std::max(worst, e);
            o.require(e <= 1e-4, describe(m) + fmt(" theta=%g rel=%.2e", th, e));
        }
    if (o.pass) o.detail = fmt("max relative difference %.2e", worst);
    return o;
}

Outcome covariance_identity() {
    Outcome o;
    const auto check = [&](const char* name, const EntropyModel& entropy, bool saturates) {
        MacrostateEnvironment env;
        env.entropy = entropy;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto s = sample_macrostates(env, 100000, seed);
            const auto r = covariance_identity_check(s);
            o.require(r.identity_checked && std::abs(r.covariance + r.k) <= 3 * r.covariance_sigma,
                      std::string(name) + fmt(" Cov=%.5f sigma=%.5f", r.covariance, r.covariance_sigma));
            o.require(r.cauchy_schwarz_pass, std::string(name) + " Cauchy-Schwarz");
            if (saturates)
                o.require(std::abs(r.product - r.k) <= 3 * r.product_sigma,
                          std::string(name) + fmt(" product=%.5f", r.product));
        }
    };
    check("gaussian", GaussianEntropy{5.0, 1.0}, true);
    check("gamma", ideal_gas_entropy(4, 3), false);
    if (o.pass) o.detail = "Gaussian and Gamma(6), 5 seeds x 1e5 samples";
    return o;
}

Outcome gibbs_boltzmann() {
    Outcome o;
    std::vector<double> ns, gaps;
    double worst = 0;
    for (int n = 2; n <= 32; ++n) {
        const double a = 1.5 * n;
        for (double e : {0.5, 1.0, 10.0}) {
            const auto t = gibbs_boltzmann_temperatures(IdealGas{n, 3}, e);
            worst = std::max(worst, rel(t.boltzmann / t.gibbs, a / (a - 1.0)));
        }
        if ((n & (n - 1)) == 0) {
            ns.push_back(n);
            gaps.push_back(gibbs_boltzmann_beta_gap(gibbs_boltzmann_temperatures(IdealGas{n, 3}, 1.0)));
        }
    }
    const double slope = loglog_slope(ns, gaps);
    o.require(worst <= 1e-10, fmt("ratio rel error %.2e", worst));
    o.require(std::abs(slope + 1.0) <= 0.05, fmt("slope %.4f", slope));
    if (o.pass) o.detail = fmt("ratio rel error %.1e, slope %.4f", worst, slope);
    return o;
}

Outcome kinematics() {
    Outcome o;
    double worst = 0;
    for (int i = 1; i <= 100; ++i) {
        const Kinematics k{Units{}, 1.0, 0.999 * i / 100.0};
        const double nu0 = rest_frequency(k);
        worst = std::max({worst, rel(clock_frequency(k) * wave_frequency(k), nu0 * nu0),
                          rel(phase_velocity(k) * k.v, 1.0), rel(de_broglie_wavelength(k) * k.momentum(), 1.0)});
    }
    o.require(worst <= 1e-12, fmt("identity rel error %.2e", worst));
    const Kinematics k{Units{}, 1.0, 0.6};
    const double e = std::max({rel(clock_frequency(k), 0.8), rel(wave_frequency(k), 1.25),
                               rel(phase_velocity(k), 5.0 / 3.0), rel(de_broglie_wavelength(k), 4.0 / 3.0)});
    o.require(e <= 4 * std::numeric_limits<double>::epsilon(), fmt("v=0.6 case rel error %.2e", e));
    if (o.pass) o.detail = fmt("identities %.1e, worked case %.1e", worst, e);
    return o;
}

Outcome taylor() {
    Outcome o;
    std::vector<double> spreads = {0.02, 0.04, 0.08, 0.16}, rem;
    for (double r : spreads) {
        ClockProcess p;
        p.rel_spread = r;
        p.replicas = 100000;
        p.seed = 8;
        rem.push_back(taylor_remainder_check(p).mean_remainder);
    }
    const double slope = loglog_slope(spreads, rem);
    o.require(std::abs(slope - 2.0) <= 0.1, fmt("slope %.4f", slope));
    if (o.pass) o.detail = fmt("slope %.4f", slope);
    return o;
}

Outcome chain() {
    Outcome o;
    ChainOptions opt;
    opt.seed = 17;
    const auto sat = chain_verify(GaussianBetaSpec{20.0, 0.05}, Theta{1.0}, opt);
    o.require(sat.records.size() == 4, "record count");
    for (const auto& r : sat.records) o.require(r.pass, r.name + fmt(" margin=%.3e band=%.3e", r.margin, r.sigma_band));
    o.require(sat.times.front() <= sat.t_c * (1 + 1e-12) && sat.times.back() >= 100 * sat.t_c * (1 - 1e-12),
              "time range");
    o.require(sat.eps_mc <= 0.02, fmt("eps_mc %.4f", sat.eps_mc));
    o.require(sat.min_product >= 1.0 - sat.eps_mc && sat.min_product <= 1.2, fmt("min product %.4f", sat.min_product));
    const auto wide = chain_verify(GaussianBetaSpec{100.0, 0.05}, Theta{1.0}, opt);
    o.require(wide.min_product >= 5.0 * (1.0 - wide.eps_mc), fmt("5k min product %.4f", wide.min_product));
    if (o.pass)
        o.detail = fmt("saturated min product %.4f (eps_mc %.4f), 5k min product %.4f", sat.min_product, sat.eps_mc,
                       wide.min_product);
    return o;
}

Outcome exchange() {
    Outcome o;
    ExchangeConfig c;
    c.subsystems = 4;
    c.units_per_subsystem = 16;
    c.total_energy = 7.3;
    c.steps = 1000000;
    c.seed = 5;
    const auto tr = subsystem_exchange_sim(c);
    o.require(tr.max_relative_drift <= 1e-12, fmt("drift %.2e", tr.max_relative_drift));

    ExchangeConfig two;
    two.subsystems = 2;
    two.units_per_subsystem = 1;
    two.total_energy = 2.0;
    two.steps = 200000;
    two.exchange_rate = 1.0;
    two.seed = 6;
    const auto t2 = subsystem_exchange_sim(two);
    std::vector<double> data;
    for (auto r = Eigen::Index(t2.burn_in_records()); r < t2.unit_energy.rows(); ++r) data.push_back(t2.unit_energy(r, 0));
    const auto ks = ks_test(data, [](double x) { return std::clamp(x / 2.0, 0.0, 1.0); });
    o.require(ks.p_value > 0.01, fmt("KS p=%.4f", ks.p_value));

    for (const auto& s : shipped_exchange_configs()) {
        const auto t = subsystem_exchange_sim(s);
        o.require(t.tau_sub < t.tau_fl, fmt("m=%g n=%g: tau_sub=%.1f", s.subsystems, s.units_per_subsystem, t.tau_sub) +
                                            fmt(" tau_fl=%.1f", t.tau_fl));
    }
    if (o.pass) o.detail = fmt("drift %.1e, KS p=%.3f, hierarchy in all shipped configurations", tr.max_relative_drift,
                               ks.p_value);
    return o;
}

Outcome determinism() {
    Outcome o;
    const std::vector<std::string> configs = {
        "experiment = chain\nseed = 3\nreplicas = 3000\n",
        "experiment = tur-inference\nmodel = ising\nN = 8\nsample_size = 2000\nreplicas = 40\nseed = 4\n",
        "experiment = tur-fluctuation\nmodel = ideal-gas\nN = 4\nsample_size = 20000\nseed = 5\n",
        "experiment = exchange\nsubsystems = 2\nunits_per_subsystem = 16\nsteps = 400000\nseed = 6\n",
        "experiment = taylor\nseed = 7\n",
        "experiment = clock-kinematics\n",
        "experiment = gibbs-boltzmann\n",
    };
    for (const auto& text : configs) {
        const auto c = cli::parse_config(text);
        const auto a = cli::report_json(cli::run(c, cli::RunOptions{{}, false}), false);
        const auto b = cli::report_json(cli::run(c, cli::RunOptions{{}, false}), false);
        o.require(a == b, c.experiment() + " reports differ");
    }
    if (o.pass) o.detail = "7 experiment configs, two runs each";
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"Cramer-Rao efficiency and uncertainty product", estimator_efficiency},
        {"Fisher information equals energy variance", fisher},
        {"covariance identity Cov(E, beta) = -k", covariance_identity},
        {"Gibbs/Boltzmann temperature gap", gibbs_boltzmann},
        {"clock and wave kinematics", kinematics},
        {"Taylor remainder scaling", taylor},
        {"time-energy uncertainty chain", chain},
        {"subsystem exchange simulator", exchange},
        {"determinism of reports", determinism},
    };
    const double limits[] = {30, 120, 120, 120, 120, 120, 60, 120, 120};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > limits[i]) o.require(false, fmt("runtime %.1f s over %.0f s", secs, limits[i]));
        failed += !o.pass;
        std::printf("%s  %zu  %s  (%.1f s)  %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
