#include "thermoclock/cli/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "thermoclock/clock.hpp"
#include "thermoclock/errors.hpp"
#include "thermoclock/inference.hpp"

namespace thermoclock::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kRoundingUlps = 64.0;

std::size_t count_of(const ExperimentConfig& c, std::string_view key) {
    return static_cast<std::size_t>(c.integer(key));
}

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

void write_file(const fs::path& dir, const std::string& name, const std::string& body, RunReport& r) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << body;
    r.files.push_back(name);
}

void run_inference(const ExperimentConfig& c, RunReport& r) {
    const auto model = ensemble_model_of(c);
    const Theta theta{c.number("theta")};
    StudyOptions so;
    so.sampler.thinning_sweeps = static_cast<int>(c.integer("thinning_sweeps"));
    so.bootstrap_resamples = count_of(c, "bootstrap_resamples");
    const auto e = estimator_study(model, theta, count_of(c, "sample_size"), count_of(c, "replicas"), c.seed(), so);
    const double closed = fisher_information(model, theta);
    const double quad = fisher_information_by_quadrature(model, theta);

    r.checks.push_back(make_check("fisher-identity", "-|I_quad - I_closed| / I_closed >= 0", -rel_err(quad, closed),
                                  0.0, c.number("fisher_tolerance")));
    r.checks.push_back(make_check("cramer-rao", "M I_F Var(theta_hat) >= 1", e.cr_ratio, 1.0, 3.0 * e.cr_sigma));
    r.checks.push_back(make_check("uncertainty-product", "Delta E sqrt(M) Delta theta_hat >= 1",
                                  e.uncertainty_product, 1.0, 3.0 * e.product_sigma));
    r.metrics = {{"theta_hat", e.theta_hat},
                 {"bias", e.bias},
                 {"fisher_closed_form", closed},
                 {"fisher_quadrature", quad},
                 {"energy_variance", energy_variance(model, theta)},
                 {"cr_ratio", e.cr_ratio},
                 {"cr_ratio_raw", e.cr_ratio_raw},
                 {"cr_sigma", e.cr_sigma},
                 {"uncertainty_product", e.uncertainty_product},
                 {"product_sigma", e.product_sigma},
                 {"eps_mc", e.eps_mc},
                 {"mean_tau_int", e.mean_tau_int},
                 {"valid_replicas", double(e.valid_replicas)}};
    r.notes = {{"model", describe(model)}, {"sampler_converged", e.sampler_converged ? "true" : "false"}};
}

void run_fluctuation(const ExperimentConfig& c, RunReport& r) {
    const auto env = environment_of(c);
    const auto sample = sample_macrostates(env, count_of(c, "sample_size"), c.seed());
    const auto x = covariance_identity_check(sample, count_of(c, "bootstrap_resamples"));
    if (x.identity_checked)
        r.checks.push_back(make_check("covariance-identity", "-|Cov(E, beta) + k| >= 0", -std::abs(x.covariance + x.k),
                                      0.0, 3.0 * x.covariance_sigma));
    r.checks.push_back(make_check("cauchy-schwarz", "Delta E Delta beta >= |Cov(E, beta)|", x.product,
                                  std::abs(x.covariance),
                                  kRoundingUlps * std::numeric_limits<double>::epsilon() * x.product));
    r.checks.push_back(make_check("uncertainty-product", "Delta E Delta beta >= k", x.product, x.k,
                                  3.0 * x.product_sigma));
    r.metrics = {{"covariance", x.covariance},     {"covariance_sigma", x.covariance_sigma},
                 {"delta_energy", x.delta_energy}, {"delta_beta", x.delta_beta},
                 {"product", x.product},           {"product_sigma", x.product_sigma},
                 {"k", x.k}};
    r.notes = {{"boundary_vanishes", sample.boundary_vanishes ? "true" : "false"}};
    if (!x.warning.empty()) r.notes.push_back({"warning", x.warning});
}

void run_kinematics(const ExperimentConfig& c, RunReport& r) {
    const Units u = units_of(c);
    const double m0 = c.number("mass"), v = c.number("velocity");
    const auto n = count_of(c, "sweep_points");
    const double tol = c.number("identity_tolerance");

    double transform = 0, dispersion = 0, wavelength = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Kinematics k{u, m0, 0.999 * u.c * double(i + 1) / double(n)};
        const double nu0 = rest_frequency(k);
        transform = std::max(transform, rel_err(clock_frequency(k) * wave_frequency(k), nu0 * nu0));
        dispersion = std::max(dispersion, rel_err(phase_velocity(k) * k.v, u.c * u.c));
        wavelength = std::max(wavelength, rel_err(de_broglie_wavelength(k) * k.momentum(), u.h));
    }
    r.checks.push_back(make_check("transform-identity", "-max |nu_clock nu_wave - nu0^2| / nu0^2 >= 0", -transform,
                                  0.0, tol));
    r.checks.push_back(make_check("dispersion-identity", "-max |V_ph v - c^2| / c^2 >= 0", -dispersion, 0.0, tol));
    r.checks.push_back(make_check("wavelength-identity", "-max |lambda p - h| / h >= 0", -wavelength, 0.0, tol));

    const Kinematics k{u, m0, v};
    // Plane wave phi = (E t - p x) / hbar.
    Eigen::Vector3d grad(-k.momentum() / u.hbar(), 0.0, 0.0);
    const Eigen::Vector3d vg = guidance_velocity(grad, k.energy() / u.hbar(), u);
    const double guidance = v == 0.0 ? std::abs(vg(0)) : rel_err(vg(0), v);
    r.checks.push_back(make_check("guidance-velocity", "-|V_guidance - v| / |v| >= 0", -guidance, 0.0, tol));

    r.metrics = {{"gamma", k.lorentz_factor()},
                 {"nu0", rest_frequency(k)},
                 {"nu_clock", clock_frequency(k)},
                 {"nu_wave", wave_frequency(k)},
                 {"momentum", k.momentum()},
                 {"energy", k.energy()},
                 {"clock_temperature", temperature_of_clock(clock_frequency(k), u)}};
    if (v != 0.0) {
        r.metrics.push_back({"phase_velocity", phase_velocity(k)});
        r.metrics.push_back({"wavelength", de_broglie_wavelength(k)});
    }
    r.metrics.push_back({"guidance_velocity", vg(0)});
}

std::string chain_plot_script() {
    return "import csv\n"
           "import matplotlib\n"
           "matplotlib.use('Agg')\n"
           "import matplotlib.pyplot as plt\n\n"
           "rows = list(csv.DictReader(open('chain_curve.csv')))\n"
           "t = [float(r['time']) for r in rows]\n"
           "p = [float(r['product']) for r in rows]\n"
           "plt.plot(t, p, label='Delta E Delta t / h')\n"
           "plt.axhline(1.0, color='k', lw=0.8)\n"
           "plt.xlabel('t')\n"
           "plt.ylabel('product')\n"
           "plt.legend()\n"
           "plt.savefig('chain_curve.png', dpi=150)\n";
}

void run_chain(const ExperimentConfig& c, RunReport& r, const RunOptions& o) {
    const auto rep = chain_verify(chain_source_of(c), Theta{c.number("theta")}, chain_options_of(c));
    // Each record sits at its worst evaluated time.
    for (const auto& x : rep.records) r.checks.push_back(make_check(x.name, x.relation, x.lhs, x.rhs, x.sigma_band));
    r.metrics = {{"t_c", rep.t_c},
                 {"delta_t_c", rep.delta_t_c},
                 {"period_bound", rep.period_bound},
                 {"delta_energy", rep.delta_energy},
                 {"delta_beta", rep.delta_beta},
                 {"mean_freq", rep.mean_freq},
                 {"rel_spread", rep.rel_spread},
                 {"min_product", rep.min_product},
                 {"min_product_time", rep.min_product_time},
                 {"product_sigma", rep.product_sigma},
                 {"eps_mc", rep.eps_mc},
                 {"clipped", double(rep.clipped)},
                 {"taylor_c_mean", rep.taylor.c_mean},
                 {"taylor_c_spread", rep.taylor.c_spread}};
    r.notes = {{"source", rep.source},
               {"process_model", rep.process_model},
               {"taylor_pass", rep.taylor.pass ? "true" : "false"}};
    if (o.write_files && c.boolean("write_csv")) {
        std::ostringstream csv;
        csv.precision(17);
        csv << "time,delta_t,product\n";
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            csv << rep.times[i] << ',' << rep.delta_t[i] << ',' << rep.product[i] << '\n';
        write_file(o.out_dir, "chain_curve.csv", csv.str(), r);
        write_file(o.out_dir, "plot_chain.py", chain_plot_script(), r);
    }
}

void run_gibbs_boltzmann(const ExperimentConfig& c, RunReport& r) {
    const auto model = ensemble_model_of(c);
    const double alpha = gamma_shape(model);
    if (!(alpha > 1.0)) throw ValidationError("N", "the Boltzmann temperature needs a shape dN/2 (or N) > 1");
    const Units u = units_of(c);
    const double e = c.number("energy");
    const auto closed = gibbs_boltzmann_temperatures(model, e, u);
    const auto numeric = gibbs_boltzmann_temperatures_numeric(model, e, u);
    const double tol = c.number("route_tolerance");
    r.checks.push_back(make_check("boltzmann-route", "-|T_B numeric - T_B closed| / T_B >= 0",
                                  -rel_err(numeric.boltzmann, closed.boltzmann), 0.0, tol));
    r.checks.push_back(make_check("gibbs-route", "-|T_G numeric - T_G closed| / T_G >= 0",
                                  -rel_err(numeric.gibbs, closed.gibbs), 0.0, tol));
    r.metrics = {{"T_boltzmann", closed.boltzmann},
                 {"T_gibbs", closed.gibbs},
                 {"ratio", closed.boltzmann / closed.gibbs},
                 {"ratio_closed_form", alpha / (alpha - 1.0)},
                 {"beta_gap", gibbs_boltzmann_beta_gap(closed)},
                 {"temperature_gap", gibbs_boltzmann_temperature_gap(closed)}};
    r.notes = {{"model", describe(model)}};
}

void run_taylor(const ExperimentConfig& c, RunReport& r) {
    const auto t = taylor_remainder_check(taylor_process_of(c), c.number("c_bound"));
    r.checks.push_back(make_check("mean-remainder", "C Delta nu^2 / <nu>^3 >= |<1/nu> - 1/<nu>|",
                                  t.c_bound * t.scale, t.mean_remainder, 0.0));
    r.checks.push_back(make_check("spread-remainder", "C Delta nu^2 / <nu>^3 >= |Delta(1/nu) - Delta nu / <nu>^2|",
                                  t.c_bound * t.scale, t.spread_remainder, 0.0));
    r.metrics = {{"rel_spread_measured", t.rel_spread}, {"mean_freq", t.mean_freq},
                 {"mean_period", t.mean_period},        {"period_spread", t.period_spread},
                 {"scale", t.scale},                    {"mean_remainder", t.mean_remainder},
                 {"spread_remainder", t.spread_remainder}, {"c_mean", t.c_mean},
                 {"c_spread", t.c_spread}};
}

void run_exchange(const ExperimentConfig& c, RunReport& r, const RunOptions& o) {
    const auto x = exchange_config_of(c);
    const auto traj = subsystem_exchange_sim(x);
    r.checks.push_back(
        make_check("energy-conservation", "-max |sum e - E| / E >= 0", -traj.max_relative_drift, 0.0, 1e-12));
    r.checks.push_back(make_check("timescale-hierarchy", "tau_fl >= tau_sub", traj.tau_fl, traj.tau_sub, 0.0));
    r.metrics = {{"tau_sub", traj.tau_sub},
                 {"tau_fl", traj.tau_fl},
                 {"subsystem_variance", traj.subsystem_energy_variance()},
                 {"predicted_variance",
                  exchange_subsystem_variance(x.subsystems, x.units_per_subsystem, x.total_energy)},
                 {"temperature_variance", traj.temperature_variance()},
                 {"max_relative_drift", traj.max_relative_drift},
                 {"records", double(traj.record_steps.size())}};
    r.notes = {{"hierarchy_holds", traj.hierarchy_holds ? "true" : "false"}};
    if (o.write_files && c.boolean("write_csv")) {
        std::ostringstream csv;
        write_exchange_csv(traj, csv);
        write_file(o.out_dir, "exchange.csv", csv.str(), r);
    }
}

Json config_echo(const ExperimentConfig& c) {
    Json j = Json::object();
    for (const auto& e : c.entries) {
        switch (e.type) {
        case ValueType::Number: j[e.key] = std::stod(e.text); break;
        case ValueType::Integer: j[e.key] = std::stoll(e.text); break;
        case ValueType::Boolean: j[e.key] = e.text == "true"; break;
        case ValueType::Text: j[e.key] = e.text; break;
        }
    }
    return j;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

std::string num(double x) {
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
}

const char* outcome_name(Outcome o) {
    switch (o) {
    case Outcome::Pass: return "pass";
    case Outcome::CheckFailed: return "check-failed";
    case Outcome::ConfigError: return "config-error";
    case Outcome::NumericalFailure: return "numerical-failure";
    }
    return "";
}

std::string sweep_plot_script(const std::string& axis) {
    return "import csv\n"
           "from collections import defaultdict\n"
           "import matplotlib\n"
           "matplotlib.use('Agg')\n"
           "import matplotlib.pyplot as plt\n\n"
           "series = defaultdict(list)\n"
           "for r in csv.DictReader(open('sweep_metrics.csv')):\n"
           "    series[r['metric']].append((float(r['axis_value']), float(r['value'])))\n"
           "for name, pts in series.items():\n"
           "    pts = [p for p in pts if p[0] > 0 and p[1] > 0]\n"
           "    if len(pts) < 2:\n"
           "        continue\n"
           "    plt.figure()\n"
           "    plt.loglog([p[0] for p in pts], [p[1] for p in pts], 'o-')\n"
           "    plt.xlabel('" + axis + "')\n"
           "    plt.ylabel(name)\n"
           "    plt.savefig('sweep_' + name + '.png', dpi=150)\n"
           "    plt.close()\n";
}

} // namespace

CheckRecord make_check(std::string name, std::string relation, double lhs, double rhs, double sigma_band) {
    if (lhs == 0.0) lhs = 0.0; // no negative zero in reports
    CheckRecord c{std::move(name), std::move(relation), lhs, rhs, lhs - rhs, sigma_band, false};
    c.pass = c.margin >= -c.sigma_band;
    return c;
}

bool RunReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.pass; });
}

double RunReport::metric(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    throw std::out_of_range("no metric " + name);
}

fs::path resolve_out_dir(const std::string& flag, const ExperimentConfig& config) {
    if (!flag.empty()) return flag;
    if (config.has("out_dir") && !config.text("out_dir").empty()) return config.text("out_dir");
    if (const char* env = std::getenv("THERMOCLOCK_OUT"); env && *env) return env;
    return "thermoclock-out";
}

RunReport run(const ExperimentConfig& config, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    RunReport r;
    r.config = config;
    if (options.write_files) fs::create_directories(options.out_dir);

    const auto& e = config.experiment();
    if (e == "tur-inference") run_inference(config, r);
    else if (e == "tur-fluctuation") run_fluctuation(config, r);
    else if (e == "clock-kinematics") run_kinematics(config, r);
    else if (e == "chain") run_chain(config, r, options);
    else if (e == "gibbs-boltzmann") run_gibbs_boltzmann(config, r);
    else if (e == "taylor") run_taylor(config, r);
    else if (e == "exchange") run_exchange(config, r, options);
    else throw ValidationError("experiment", "unknown experiment '" + e + "'");

    if (options.write_files) r.files.push_back("report.json");
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.write_files) {
        std::ofstream out(options.out_dir / "report.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (options.out_dir / "report.json").string());
        out << report_json(r);
    }
    return r;
}

std::string report_json(const RunReport& r, bool include_wall_time) {
    Json j;
    j["version"] = r.version;
    j["experiment"] = r.config.experiment();
    j["seed"] = r.config.seed();
    j["config"] = config_echo(r.config);
    j["checks"] = Json::array();
    for (const auto& c : r.checks)
        j["checks"].push_back({{"name", c.name},
                               {"relation", c.relation},
                               {"lhs", c.lhs},
                               {"rhs", c.rhs},
                               {"margin", c.margin},
                               {"sigma_band", c.sigma_band},
                               {"pass", c.pass}});
    j["metrics"] = Json::object();
    for (const auto& [k, v] : r.metrics) j["metrics"][k] = v;
    j["notes"] = Json::object();
    for (const auto& [k, v] : r.notes) j["notes"][k] = v;
    j["files"] = r.files;
    j["all_pass"] = r.all_pass();
    if (include_wall_time) j["wall_time"] = r.wall_time;
    return j.dump(2) + "\n";
}

std::string summary_table(const RunReport& r) {
    std::string out = "thermoclock " + r.version + "  experiment=" + r.config.experiment() +
                      "  seed=" + std::to_string(r.config.seed()) + "\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-24s %14s %14s %14s %12s  %s\n", "check", "lhs", "rhs", "margin", "band",
                  "result");
    out += line;
    std::snprintf(line, sizeof line, "%-24s %14s %14s %14s %12s  %s\n", "------------------------", "--------------",
                  "--------------", "--------------", "------------", "------");
    out += line;
    std::size_t passed = 0;
    for (const auto& c : r.checks) {
        std::snprintf(line, sizeof line, "%-24s %14.6e %14.6e %14.6e %12.4e  %s\n", c.name.c_str(), c.lhs, c.rhs,
                      c.margin, c.sigma_band, c.pass ? "PASS" : "FAIL");
        out += line;
        passed += c.pass;
    }
    out += std::string("overall: ") + (r.all_pass() ? "PASS" : "FAIL") + " (" + std::to_string(passed) + "/" +
           std::to_string(r.checks.size()) + " checks)\n";
    return out;
}

std::string checks_csv(const RunReport& r) {
    std::string out = "name,relation,lhs,rhs,margin,sigma_band,pass\n";
    for (const auto& c : r.checks)
        out += csv_field(c.name) + "," + csv_field(c.relation) + "," + num(c.lhs) + "," + num(c.rhs) + "," +
               num(c.margin) + "," + num(c.sigma_band) + "," + (c.pass ? "true" : "false") + "\n";
    return out;
}

Outcome classify(const std::exception& error) {
    if (dynamic_cast<const ValidationError*>(&error)) return Outcome::ConfigError;
    if (dynamic_cast<const NumericalError*>(&error)) return Outcome::NumericalFailure;
    if (dynamic_cast<const DomainError*>(&error)) return Outcome::ConfigError;
    return Outcome::NumericalFailure;
}

Outcome SweepResult::worst() const {
    Outcome w = Outcome::Pass;
    for (const auto& p : points) w = std::max(w, p.outcome);
    return w;
}

SweepResult sweep(const ExperimentConfig& config, const std::string& axis, const std::vector<std::string>& values,
                  const fs::path& out_dir, unsigned parallel) {
    if (values.empty()) throw ValidationError("values", "the sweep needs at least one value");
    if (!config.has(axis)) throw ValidationError(axis, "not a key of experiment '" + config.experiment() + "'");
    if (const auto t = config.type(axis); t != ValueType::Number && t != ValueType::Integer)
        throw ValidationError(axis, "sweep axis must be a numeric key");

    SweepResult res;
    res.axis = axis;
    res.points.resize(values.size());
    fs::create_directories(out_dir);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            auto& p = res.points[i];
            p.value = values[i];
            try {
                const auto cfg = config.with(axis, values[i]);
                p.report = run(cfg, RunOptions{out_dir / ("point_" + std::to_string(i)), true});
                p.outcome = p.report.all_pass() ? Outcome::Pass : Outcome::CheckFailed;
            } catch (const std::exception& e) {
                p.outcome = classify(e);
                p.error = e.what();
            }
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(parallel, unsigned(values.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::string csv = "axis_value,check,lhs,rhs,margin,sigma_band,pass,outcome\n";
    std::string metrics = "axis_value,metric,value\n";
    for (const auto& p : res.points) {
        if (!p.error.empty()) {
            csv += csv_field(p.value) + ",error,,,,,false," + outcome_name(p.outcome) + "\n";
            continue;
        }
        for (const auto& c : p.report.checks)
            csv += csv_field(p.value) + "," + csv_field(c.name) + "," + num(c.lhs) + "," + num(c.rhs) + "," +
                   num(c.margin) + "," + num(c.sigma_band) + "," + (c.pass ? "true" : "false") + "," +
                   outcome_name(p.outcome) + "\n";
        for (const auto& [k, v] : p.report.metrics) metrics += csv_field(p.value) + "," + k + "," + num(v) + "\n";
    }
    const auto put = [&](const std::string& name, const std::string& body) {
        std::ofstream out(out_dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (out_dir / name).string());
        out << body;
        res.files.push_back(name);
    };
    put("sweep.csv", csv);
    put("sweep_metrics.csv", metrics);
    put("plot_sweep.py", sweep_plot_script(axis));
    return res;
}

} // namespace thermoclock::cli
