#include "thermoclock/phases.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <vector>

#include "thermoclock/errors.hpp"
#include "thermoclock/random.hpp"
#include "thermoclock/units.hpp"

namespace thermoclock {

namespace {

constexpr double kClipFloor = 1e-6;
constexpr double kMaxClipFraction = 1e-3;
constexpr std::size_t kBlocks = 16;

// Per-time Welford accumulators for one block of replicas.
struct Moments {
    double count = 0;
    Eigen::ArrayXd mean, m2;

    explicit Moments(Eigen::Index n) : mean(Eigen::ArrayXd::Zero(n)), m2(Eigen::ArrayXd::Zero(n)) {}

    void push(Eigen::Index i, double x, double n) {
        const double d = x - mean(i);
        mean(i) += d / n;
        m2(i) += d * (x - mean(i));
    }

    void merge(const Moments& o) {
        if (o.count == 0) return;
        const double n = count + o.count;
        const Eigen::ArrayXd d = o.mean - mean;
        mean += d * (o.count / n);
        m2 += o.m2 + d.square() * (count * o.count / n);
        count = n;
    }

    Eigen::ArrayXd sd() const { return (m2 / count).max(0.0).sqrt(); }
};

double start_frequency(const ClockProcess& p, std::size_t r, Engine& eng) {
    std::normal_distribution<double> z(0.0, 1.0);
    const double draw = z(eng);
    if (p.frequencies) return (*p.frequencies)(static_cast<Eigen::Index>(r));
    return p.mean_freq * (1.0 + p.rel_spread * draw);
}

} // namespace

void ClockProcess::validate() const {
    const double tol = 1e-9;
    if (!(mean_freq > 0.0) || !std::isfinite(mean_freq)) throw ValidationError("mean_freq", "must be finite and > 0");
    if (!(max_rel_spread > 0.0)) throw ValidationError("max_rel_spread", "must be > 0");
    if (!frequencies && (!(rel_spread > 0.0) || rel_spread > max_rel_spread))
        throw ValidationError("rel_spread", "must lie in (0, " + std::to_string(max_rel_spread) + "]");
    if (!(dt > 0.0) || dt > (0.01 / mean_freq) * (1 + tol)) throw ValidationError("dt", "need 0 < dt <= 0.01 / mean_freq");
    if (!(horizon >= (10.0 / mean_freq) * (1 - tol))) throw ValidationError("horizon", "need horizon >= 10 / mean_freq");
    if (replicas < 100) throw ValidationError("replicas", "need at least 100 replicas");
    if (record_every < 1) throw ValidationError("record_every", "must be >= 1");
    if (record_start > steps()) throw ValidationError("record_start", "beyond the time grid");
    if (const auto* m = std::get_if<MeanReverting>(&model))
        if (!(m->correlation_time > 0.0) || !std::isfinite(m->correlation_time))
            throw ValidationError("correlation_time", "must be finite and > 0");
    if (frequencies) {
        if (static_cast<std::size_t>(frequencies->size()) != replicas)
            throw ValidationError("frequencies", "need one frequency per replica");
        if (!((*frequencies) > 0.0).all() || !frequencies->allFinite())
            throw ValidationError("frequencies", "must be finite and > 0");
    }
}

std::size_t ClockProcess::steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

std::pair<Eigen::ArrayXd, std::size_t> draw_frequencies(const ClockProcess& p) {
    p.validate();
    Eigen::ArrayXd nu(static_cast<Eigen::Index>(p.replicas));
    std::size_t clipped = 0;
    const double floor = kClipFloor * p.mean_freq;
    for (std::size_t r = 0; r < p.replicas; ++r) {
        Engine eng = make_engine(p.seed, "clock.phases", r);
        double v = start_frequency(p, r, eng);
        if (v < floor) {
            v = floor;
            ++clipped;
        }
        nu(static_cast<Eigen::Index>(r)) = v;
    }
    return {nu, clipped};
}

PhaseTrajectoryBatch simulate_phases(const ClockProcess& p) {
    p.validate();
    const std::size_t n_steps = p.steps();
    const auto points = static_cast<Eigen::Index>(n_steps + 1);
    const double floor = kClipFloor * p.mean_freq;
    const auto* ou = std::get_if<MeanReverting>(&p.model);
    const double rho = ou ? std::exp(-p.dt / ou->correlation_time) : 1.0;
    const double sigma = p.rel_spread * p.mean_freq;
    const double kick = sigma * std::sqrt(std::max(0.0, 1.0 - rho * rho));

    PhaseTrajectoryBatch b;
    b.dt = p.dt;
    b.t_c = 1.0 / p.mean_freq;
    b.times = Eigen::ArrayXd::LinSpaced(points, 0.0, double(n_steps) * p.dt);
    std::vector<Eigen::Index> rec;
    for (std::size_t i = p.record_start; i <= n_steps; i += p.record_every) rec.push_back(Eigen::Index(i));
    b.record_index = Eigen::Map<const Eigen::Array<Eigen::Index, Eigen::Dynamic, 1>>(rec.data(), Eigen::Index(rec.size()))
                         .cast<int>();
    b.phases.resize(Eigen::Index(p.replicas), Eigen::Index(rec.size()));
    b.frequencies.resize(Eigen::Index(p.replicas), Eigen::Index(rec.size()));

    const std::size_t blocks = std::min(kBlocks, p.replicas);
    struct Block {
        Moments phi, nu, inv;
        std::size_t clipped = 0;
        explicit Block(Eigen::Index n) : phi(n), nu(n), inv(n) {}
    };
    std::vector<Block> acc(blocks, Block(points));

    parallel_for(blocks, [&](std::size_t blk) {
        Block& a = acc[blk];
        const std::size_t lo = blk * p.replicas / blocks, hi = (blk + 1) * p.replicas / blocks;
        for (std::size_t r = lo; r < hi; ++r) {
            Engine eng = make_engine(p.seed, "clock.phases", r);
            std::normal_distribution<double> z(0.0, 1.0);
            double state = start_frequency(p, r, eng);
            const double n = double(r - lo + 1);
            auto clip = [&](double x) {
                if (x >= floor) return x;
                ++a.clipped;
                return floor;
            };
            double nu = clip(state), phi = 0.0;
            std::size_t next = 0;
            for (Eigen::Index i = 0; i < points; ++i) {
                if (i > 0) {
                    double nu_next = nu;
                    if (ou) {
                        state = p.mean_freq + rho * (state - p.mean_freq) + kick * z(eng);
                        nu_next = clip(state);
                    }
                    phi += kPi * p.dt * (nu + nu_next);
                    nu = nu_next;
                }
                a.phi.push(i, phi, n);
                a.nu.push(i, nu, n);
                a.inv.push(i, 1.0 / nu, n);
                if (next < rec.size() && rec[next] == i) {
                    b.phases(Eigen::Index(r), Eigen::Index(next)) = phi;
                    b.frequencies(Eigen::Index(r), Eigen::Index(next)) = nu;
                    ++next;
                }
            }
            a.phi.count = a.nu.count = a.inv.count = n;
        }
    });

    Moments phi(points), nu(points), inv(points);
    for (const auto& a : acc) {
        phi.merge(a.phi);
        nu.merge(a.nu);
        inv.merge(a.inv);
        b.clipped += a.clipped;
    }
    b.draws = ou ? p.replicas * std::size_t(points) : p.replicas;
    if (double(b.clipped) > kMaxClipFraction * double(b.draws))
        throw ClippingRateError("simulate_phases: " + std::to_string(b.clipped) + " of " + std::to_string(b.draws) +
                                " frequency draws clipped to positive values (limit 0.1%)");

    b.mean_phase = phi.mean;
    b.phase_spread = phi.sd();
    b.mean_freq = nu.mean;
    b.freq_spread = nu.sd();
    b.mean_period = inv.mean;
    b.period_spread = inv.sd();
    return b;
}

double time_uncertainty_at(const PhaseTrajectoryBatch& b, Eigen::Index i) {
    if (i < 1 || i + 1 >= b.times.size()) throw DomainError("time_uncertainty: t must be interior to the time grid");
    if (b.times(i) < b.t_c * (1 - 1e-12)) throw DomainError("time_uncertainty: t < t_c");
    const double slope = (b.mean_phase(i + 1) - b.mean_phase(i - 1)) / (2.0 * b.dt);
    const double average_slope = b.mean_phase(i) / b.times(i);
    if (!(std::abs(slope) > 1e-12 * std::abs(average_slope)))
        throw NumericalError("time_uncertainty: degenerate phase slope");
    return b.phase_spread(i) / std::abs(slope);
}

double time_uncertainty(const PhaseTrajectoryBatch& b, double t) {
    if (b.times.size() < 3) throw DomainError("time_uncertainty: empty batch");
    const auto i = static_cast<Eigen::Index>(std::llround(t / b.dt));
    if (std::abs(double(i) * b.dt - t) > 1e-6 * b.dt) throw DomainError("time_uncertainty: t is not a grid point");
    if (t < b.t_c * (1 - 1e-12)) throw DomainError("time_uncertainty: t < t_c");
    return time_uncertainty_at(b, i);
}

TaylorReport taylor_remainder_check(const Eigen::Ref<const Eigen::ArrayXd>& nu, double c_bound) {
    if (nu.size() < 2) throw InsufficientSampleError("taylor_remainder_check: need at least 2 frequencies");
    TaylorReport t;
    t.c_bound = c_bound;
    t.mean_freq = nu.mean();
    t.freq_spread = std::sqrt((nu - t.mean_freq).square().mean());
    const Eigen::ArrayXd inv = nu.inverse();
    t.mean_period = inv.mean();
    t.period_spread = std::sqrt((inv - t.mean_period).square().mean());
    t.rel_spread = t.freq_spread / t.mean_freq;
    t.scale = t.freq_spread * t.freq_spread / (t.mean_freq * t.mean_freq * t.mean_freq);
    t.mean_remainder = std::abs(t.mean_period - 1.0 / t.mean_freq);
    t.spread_remainder = std::abs(t.period_spread - t.freq_spread / (t.mean_freq * t.mean_freq));
    if (t.scale > 0.0) {
        t.c_mean = t.mean_remainder / t.scale;
        t.c_spread = t.spread_remainder / t.scale;
    }
    t.pass = t.mean_remainder <= c_bound * t.scale && t.spread_remainder <= c_bound * t.scale;
    return t;
}

TaylorReport taylor_remainder_check(const ClockProcess& process, double c_bound) {
    process.validate();
    if (process.rel_spread > process.max_rel_spread)
        throw ValidationError("rel_spread", "exceeds the Taylor validity limit");
    return taylor_remainder_check(draw_frequencies(process).first, c_bound);
}

void write_phase_csv(const PhaseTrajectoryBatch& b, std::ostream& out) {
    out << "time,replica,phase\n";
    const auto prec = out.precision(17);
    for (Eigen::Index j = 0; j < b.phases.cols(); ++j)
        for (Eigen::Index r = 0; r < b.phases.rows(); ++r)
            out << b.times(b.record_index(j)) << ',' << r << ',' << b.phases(r, j) << '\n';
    out.precision(prec);
}

} // namespace thermoclock
