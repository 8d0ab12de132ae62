#include "thermoclock/chain.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "thermoclock/errors.hpp"
#include "thermoclock/random.hpp"

namespace thermoclock {

namespace {

constexpr double kBetaFloor = 1e-6;

struct Draw {
    Eigen::ArrayXd beta;
    double delta_energy = 0.0;
    Eigen::ArrayXd energies; ///< empty for the direct spec
    std::string source;
    std::size_t clipped = 0;
};

Draw draw_direct(const GaussianBetaSpec& spec, Theta theta, const ChainOptions& o) {
    if (!(spec.delta_energy > 0.0) || !std::isfinite(spec.delta_energy))
        throw ValidationError("delta_energy", "must be finite and > 0");
    if (!(spec.delta_beta > 0.0) || !std::isfinite(spec.delta_beta))
        throw ValidationError("delta_beta", "must be finite and > 0");
    Draw d;
    d.source = "gaussian-beta";
    d.delta_energy = spec.delta_energy;
    const double mean = theta.beta(o.units);
    d.beta.resize(Eigen::Index(o.replicas));
    for (std::size_t r = 0; r < o.replicas; ++r) {
        Engine eng = make_engine(o.seed, "chain.beta", r);
        std::normal_distribution<double> z(mean, spec.delta_beta);
        double b = z(eng);
        if (b < kBetaFloor * mean) {
            b = kBetaFloor * mean;
            ++d.clipped;
        }
        d.beta(Eigen::Index(r)) = b;
    }
    if (double(d.clipped) > 1e-3 * double(o.replicas))
        throw ClippingRateError("chain_verify: more than 0.1% of beta draws were not positive");
    return d;
}

Draw draw_ensemble(const EnsembleModel& model, Theta theta, const ChainOptions& o) {
    validate(model);
    if (!is_continuous(model)) throw DomainError("chain_verify: needs a continuous density of states");
    const double a = gamma_shape(model);
    if (!(a > 1.0)) throw DomainError("chain_verify: local temperature undefined (d ln sigma / dE <= 0)");
    Draw d;
    d.source = model_name(model);
    d.energies = sample_energies(model, theta, o.replicas, o.seed, 0).values;
    // k d ln sigma / dE with ln sigma = (a - 1) ln E.
    d.beta = o.units.k * (a - 1.0) / d.energies;
    d.delta_energy = std::sqrt((d.energies - d.energies.mean()).square().mean());
    return d;
}

double pop_sd(double sum, double sum2, double n) {
    const double m = sum / n;
    return std::sqrt(std::max(0.0, sum2 / n - m * m));
}

} // namespace

bool ChainReport::all_pass() const {
    return std::all_of(records.begin(), records.end(), [](const InequalityRecord& r) { return r.pass; });
}

ChainReport chain_verify(const ChainSource& source, Theta theta, const ChainOptions& o) {
    o.units.validate();
    if (!(theta.value > 0.0) || !std::isfinite(theta.value)) throw ValidationError("theta", "must be finite and > 0");
    if (o.replicas < 100) throw ValidationError("replicas", "need at least 100 replicas");
    if (!(o.horizon_periods >= 10.0)) throw ValidationError("horizon_periods", "must be >= 10");
    if (o.steps_per_period < 100) throw ValidationError("steps_per_period", "must be >= 100");
    if (o.record_every < 1) throw ValidationError("record_every", "must be >= 1");

    const Draw draw = std::visit(
        [&](const auto& s) -> Draw {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, GaussianBetaSpec>) return draw_direct(s, theta, o);
            else return draw_ensemble(s, theta, o);
        },
        source);

    const double h = o.units.h, k = o.units.k;
    const Eigen::ArrayXd nu = k / (h * draw.beta);
    const auto R = nu.size();

    ChainReport rep;
    rep.source = draw.source;
    rep.theta = theta.value;
    rep.replicas = o.replicas;
    rep.process_model = std::holds_alternative<StaticDisorder>(o.process_model) ? "static-disorder" : "mean-reverting";
    rep.delta_energy = draw.delta_energy;
    rep.delta_beta = std::sqrt((draw.beta - draw.beta.mean()).square().mean());
    rep.taylor = taylor_remainder_check(nu, o.taylor_c_bound);
    rep.mean_freq = rep.taylor.mean_freq;
    rep.rel_spread = rep.taylor.rel_spread;
    rep.t_c = rep.taylor.mean_period;
    rep.delta_t_c = rep.taylor.period_spread;
    rep.period_bound = h / rep.delta_energy;
    if (rep.rel_spread > o.max_rel_spread)
        throw ValidationError("rel_spread", "mapped frequency spread " + std::to_string(rep.rel_spread) +
                                                " exceeds the Taylor validity limit " + std::to_string(o.max_rel_spread));

    // Grid with t_c on a node and dt <= 0.01 / <nu>.
    // The evaluation stride divides n_c, so t_c and every multiple of t_c are evaluated.
    auto n_c = static_cast<std::size_t>(std::ceil(double(o.steps_per_period) * rep.t_c * rep.mean_freq - 1e-9));
    const std::size_t per_period = std::max<std::size_t>(1, std::size_t(std::llround(double(n_c) / double(o.record_every))));
    n_c = per_period * ((n_c + per_period - 1) / per_period);
    const double dt = rep.t_c / double(n_c);
    const auto last = static_cast<std::size_t>(std::llround(o.horizon_periods * double(per_period))) * (n_c / per_period);

    ClockProcess p;
    p.mean_freq = rep.mean_freq;
    p.rel_spread = std::max(rep.rel_spread, 1e-300);
    p.model = o.process_model;
    p.dt = dt;
    p.horizon = double(last + 1) * dt;
    p.replicas = o.replicas;
    p.seed = derive_seed(o.seed, "chain.process", 0);
    p.max_rel_spread = o.max_rel_spread;
    p.frequencies = nu;
    p.record_start = n_c;
    p.record_every = n_c / per_period;
    const auto batch = simulate_phases(p);
    rep.clipped = draw.clipped + batch.clipped;

    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < batch.record_index.size(); ++j)
        if (std::size_t(batch.record_index(j)) <= last) cols.push_back(j);
    const auto T = cols.size();

    // Point estimates per evaluated time.
    std::vector<double> lhs_int(T), rhs_int(T), dt_hat(T);
    for (std::size_t q = 0; q < T; ++q) {
        const Eigen::Index i = batch.record_index(cols[q]);
        rep.times.push_back(batch.times(i));
        dt_hat[q] = time_uncertainty_at(batch, i);
        lhs_int[q] = batch.phase_spread(i) / (2.0 * kPi * batch.mean_freq(i));
        rhs_int[q] = batch.period_spread(i);
        rep.delta_t.push_back(dt_hat[q]);
        rep.product.push_back(rep.delta_energy * dt_hat[q] / h);
    }

    // Bootstrap over replicas: margins of every inequality at every time, and min product.
    const std::size_t B = o.bootstrap_resamples;
    Eigen::MatrixXd m_period(B, 1), m_int(B, T), m_clock(B, T), m_energy(B, T);
    Eigen::ArrayXd min_prod(B);
    {
        Engine eng{derive_seed(o.seed, "chain.bootstrap", 0)};
        std::uniform_int_distribution<Eigen::Index> pick(0, R - 1);
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(R));
        for (std::size_t b = 0; b < B; ++b) {
            for (auto& v : idx) v = pick(eng);
            double s = 0, s2 = 0, e = 0, e2 = 0;
            for (auto r : idx) {
                const double inv = 1.0 / nu(r);
                s += inv;
                s2 += inv * inv;
                if (draw.energies.size()) {
                    e += draw.energies(r);
                    e2 += draw.energies(r) * draw.energies(r);
                }
            }
            const double n = double(R);
            const double dtc = pop_sd(s, s2, n);
            const double de = draw.energies.size() ? pop_sd(e, e2, n) : draw.delta_energy;
            m_period(b, 0) = dtc - h / de;
            double lowest = std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < T; ++q) {
                const Eigen::Index c = cols[q];
                double ps = 0, ps2 = 0, fs = 0, is = 0, is2 = 0;
                for (auto r : idx) {
                    const double phi = batch.phases(r, c), f = batch.frequencies(r, c), inv = 1.0 / f;
                    ps += phi;
                    ps2 += phi * phi;
                    fs += f;
                    is += inv;
                    is2 += inv * inv;
                }
                const double mean_f = fs / n;
                const double dphi = pop_sd(ps, ps2, n);
                const double lhs = dphi / (2.0 * kPi * mean_f);
                m_int(b, q) = lhs - pop_sd(is, is2, n);
                m_clock(b, q) = lhs - dtc;
                m_energy(b, q) = de * lhs - h;
                lowest = std::min(lowest, de * lhs / h);
            }
            min_prod(b) = lowest;
        }
    }
    auto band = [&](const Eigen::MatrixXd& m, Eigen::Index q) {
        const Eigen::ArrayXd c = m.col(q).array();
        return 3.0 * std::sqrt((c - c.mean()).square().sum() / double(std::max<Eigen::Index>(1, c.size() - 1)));
    };

    auto worst = [&](const std::string& name, const std::string& relation, const std::vector<double>& lhs,
                     const std::vector<double>& rhs, const Eigen::MatrixXd& m) {
        InequalityRecord rec;
        rec.name = name;
        rec.relation = relation;
        double score = std::numeric_limits<double>::infinity();
        bool pass = true;
        for (std::size_t q = 0; q < lhs.size(); ++q) {
            const double margin = lhs[q] - rhs[q];
            const double sb = band(m, Eigen::Index(m.cols() == 1 ? 0 : q));
            pass = pass && margin >= -sb;
            if (margin + sb < score) {
                score = margin + sb;
                rec.lhs = lhs[q];
                rec.rhs = rhs[q];
                rec.margin = margin;
                rec.sigma_band = sb;
                rec.time = rep.times.empty() ? rep.t_c : rep.times[q];
            }
        }
        rec.pass = pass;
        return rec;
    };

    rep.records.push_back(worst("clock-period-bound", "Delta t_c >= h / Delta E", {rep.delta_t_c}, {rep.period_bound}, m_period));
    rep.records.back().time = rep.t_c;
    rep.records.push_back(worst("integral-inequality", "Delta int nu / <nu> >= Delta(1/nu)", lhs_int, rhs_int, m_int));
    rep.records.push_back(worst("time-vs-clock", "Delta t >= Delta t_c", dt_hat, std::vector<double>(T, rep.delta_t_c), m_clock));
    std::vector<double> lhs_energy(T);
    for (std::size_t q = 0; q < T; ++q) lhs_energy[q] = rep.delta_energy * dt_hat[q];
    rep.records.push_back(worst("energy-time", "Delta E Delta t >= h", lhs_energy, std::vector<double>(T, h), m_energy));

    const auto it = std::min_element(rep.product.begin(), rep.product.end());
    rep.min_product = *it;
    rep.min_product_time = rep.times[std::size_t(it - rep.product.begin())];
    rep.product_sigma = std::sqrt((min_prod - min_prod.mean()).square().sum() / double(std::max<std::size_t>(1, B - 1)));
    rep.eps_mc = 3.0 * rep.product_sigma / rep.min_product;
    return rep;
}

std::string to_json(const ChainReport& r, int indent) {
    nlohmann::ordered_json j;
    j["source"] = r.source;
    j["process_model"] = r.process_model;
    j["theta"] = r.theta;
    j["replicas"] = r.replicas;
    j["delta_energy"] = r.delta_energy;
    j["delta_beta"] = r.delta_beta;
    j["mean_freq"] = r.mean_freq;
    j["rel_spread"] = r.rel_spread;
    j["t_c"] = r.t_c;
    j["delta_t_c"] = r.delta_t_c;
    j["period_bound"] = r.period_bound;
    j["min_product"] = r.min_product;
    j["min_product_time"] = r.min_product_time;
    j["product_sigma"] = r.product_sigma;
    j["eps_mc"] = r.eps_mc;
    j["clipped"] = r.clipped;
    auto& recs = j["records"] = nlohmann::ordered_json::array();
    for (const auto& rec : r.records)
        recs.push_back({{"name", rec.name},
                        {"relation", rec.relation},
                        {"lhs", rec.lhs},
                        {"rhs", rec.rhs},
                        {"margin", rec.margin},
                        {"sigma_band", rec.sigma_band},
                        {"time", rec.time},
                        {"pass", rec.pass}});
    const auto& t = r.taylor;
    j["taylor"] = {{"rel_spread", t.rel_spread},         {"scale", t.scale},
                   {"mean_remainder", t.mean_remainder}, {"spread_remainder", t.spread_remainder},
                   {"c_mean", t.c_mean},                 {"c_spread", t.c_spread},
                   {"c_bound", t.c_bound},               {"pass", t.pass}};
    j["curve"] = {{"time", r.times}, {"delta_t", r.delta_t}, {"product", r.product}};
    return j.dump(indent);
}

} // namespace thermoclock
