#include "thermoclock/ensembles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "thermoclock/errors.hpp"
#include "thermoclock/random.hpp"
#include "thermoclock/stats.hpp"

namespace thermoclock {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_theta(const EnsembleModel& model, Theta theta) {
    if (!std::isfinite(theta.value)) throw DomainError("theta must be finite");
    if (is_bounded(model)) {
        if (theta.value < 0.0) throw DomainError("theta must be >= 0 for a bounded spectrum");
    } else if (!(theta.value > 0.0)) {
        throw DivergenceError("partition function diverges for theta <= 0 (unbounded spectrum)");
    }
}

// Transfer-matrix cumulants of the periodic chain, normalized by the leading
// eigenvalue so nothing overflows. Returns (ln Z, <E>, Var E).
struct IsingCumulants {
    double log_z;
    double mean;
    double variance;
};

IsingCumulants ising_cumulants(const IsingChain& m, double theta) {
    const double J = m.J, h = m.field;
    Eigen::Matrix2d A;
    A << J + h, -J, -J, J - h;
    // T_{ss'} = exp(theta * A_{ss'}), rescaled by exp(-theta * max A).
    const double shift = theta * A.maxCoeff();
    const Eigen::Matrix2d T = (theta * A.array() - shift).exp().matrix();

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(T);
    const Eigen::Vector2d lam = eig.eigenvalues(); // ascending
    const Eigen::Matrix2d V = eig.eigenvectors();
    const double lead = lam[1];
    const Eigen::Vector2d r = lam / lead;
    const int N = m.N;

    const Eigen::Matrix2d D = V.transpose() * (T.array() * A.array()).matrix() * V / lead;
    const Eigen::Matrix2d D2 = V.transpose() * (T.array() * A.array().square()).matrix() * V / lead;

    auto rpow = [&](int a, int n) { return n <= 0 ? 1.0 : std::pow(r[a], n); };

    double z = 0.0, z1 = 0.0, z2 = 0.0;
    for (int a = 0; a < 2; ++a) {
        z += rpow(a, N);
        z1 += N * rpow(a, N - 1) * D(a, a);
        z2 += N * rpow(a, N - 1) * D2(a, a);
    }
    // N * sum_{a,b} D_ab D_ba sum_{k=0}^{N-2} r_b^k r_a^{N-2-k}
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            double s = 0.0;
            for (int k = 0; k <= N - 2; ++k) s += rpow(b, k) * rpow(a, N - 2 - k);
            z2 += N * D(a, b) * D(b, a) * s;
        }
    }
    IsingCumulants out;
    out.log_z = N * (shift + std::log(lead)) + std::log(z);
    const double m1 = z1 / z;
    out.mean = -m1;
    out.variance = std::max(0.0, z2 / z - m1 * m1);
    return out;
}

std::vector<EnergyLevel> ising_levels(const IsingChain& m) {
    const int N = m.N;
    if (N > 200) throw DomainError("Ising level enumeration limited to N <= 200");
    // count[first][current][ups][walls]
    const int U = N + 1, W = N + 1;
    auto index = [&](int f, int c, int u, int w) { return ((f * 2 + c) * U + u) * W + w; };
    std::vector<double> cur(static_cast<std::size_t>(4 * U * W), 0.0), next(cur.size());
    cur[index(0, 0, 0, 0)] = 1.0; // first spin down
    cur[index(1, 1, 1, 0)] = 1.0; // first spin up
    for (int i = 1; i < N; ++i) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int f = 0; f < 2; ++f)
            for (int c = 0; c < 2; ++c)
                for (int u = 0; u <= i; ++u)
                    for (int w = 0; w < i; ++w) {
                        const double cnt = cur[index(f, c, u, w)];
                        if (cnt == 0.0) continue;
                        for (int s = 0; s < 2; ++s) next[index(f, s, u + s, w + (s != c))] += cnt;
                    }
        std::swap(cur, next);
    }
    std::vector<EnergyLevel> raw;
    for (int f = 0; f < 2; ++f)
        for (int c = 0; c < 2; ++c)
            for (int u = 0; u <= N; ++u)
                for (int w = 0; w < N; ++w) {
                    const double cnt = cur[index(f, c, u, w)];
                    if (cnt == 0.0) continue;
                    const int walls = w + (f != c);
                    const double e = -m.J * (N - 2 * walls) - m.field * (2 * u - N);
                    raw.push_back({e, cnt});
                }
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.energy < b.energy; });
    std::vector<EnergyLevel> out;
    const double scale = std::abs(m.J) + std::abs(m.field) + 1.0;
    for (const auto& lv : raw) {
        if (!out.empty() && std::abs(out.back().energy - lv.energy) <= 1e-12 * scale * N) {
            out.back().log_degeneracy += lv.log_degeneracy; // counts for now
        } else {
            out.push_back(lv);
        }
    }
    for (auto& lv : out) lv.log_degeneracy = std::log(lv.log_degeneracy);
    return out;
}

Eigen::ArrayXd sample_ising(const IsingChain& m, double theta, std::size_t count, Engine& eng,
                            const SamplerOptions& opt, SamplerDiagnostics& diag) {
    const int N = m.N;
    std::vector<int> spin(static_cast<std::size_t>(N));
    std::bernoulli_distribution coin(0.5);
    for (auto& s : spin) s = coin(eng) ? 1 : -1;

    // Energy change of flipping spin s with neighbour sum nb:
    // dE = 2 s (J nb + h). Acceptance exp(-theta dE) tabulated on (s, nb).
    std::array<double, 10> accept{};
    auto slot = [](int s, int nb) { return (s > 0 ? 5 : 0) + nb + 2; };
    for (int s : {-1, 1})
        for (int nb = -2; nb <= 2; ++nb) {
            const double dE = 2.0 * s * (m.J * nb + m.field);
            accept[static_cast<std::size_t>(slot(s, nb))] = dE <= 0.0 ? 1.0 : std::exp(-theta * dE);
        }
    std::uniform_int_distribution<int> site(0, N - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    long long bonds = 0, mag = 0;
    for (int i = 0; i < N; ++i) {
        bonds += spin[static_cast<std::size_t>(i)] * spin[static_cast<std::size_t>((i + 1) % N)];
        mag += spin[static_cast<std::size_t>(i)];
    }
    std::size_t attempts = 0, accepted = 0;
    auto flip_once = [&] {
        const int i = site(eng);
        auto& s = spin[static_cast<std::size_t>(i)];
        // N == 1: the only bond is s*s, so the neighbour term never changes.
        const int nb = N == 1 ? 0
                              : spin[static_cast<std::size_t>((i + N - 1) % N)] +
                                    spin[static_cast<std::size_t>((i + 1) % N)];
        const double a = accept[static_cast<std::size_t>(slot(s, nb))];
        ++attempts;
        if (a >= 1.0 || unif(eng) < a) {
            bonds -= 2LL * s * nb;
            mag -= 2LL * s;
            s = -s;
            ++accepted;
        }
    };
    const long long burn = opt.burn_in_sweeps < 0 ? 100LL * N : opt.burn_in_sweeps;
    for (long long k = 0; k < burn * N; ++k) flip_once();
    attempts = accepted = 0;

    const long long thin = std::max(1, opt.thinning_sweeps) * static_cast<long long>(N);
    Eigen::ArrayXd out(static_cast<Eigen::Index>(count));
    for (std::size_t j = 0; j < count; ++j) {
        for (long long k = 0; k < thin; ++k) flip_once();
        out[static_cast<Eigen::Index>(j)] = -m.J * double(bonds) - m.field * double(mag);
    }
    diag.acceptance_rate = attempts ? double(accepted) / double(attempts) : 1.0;
    if (count >= 16) {
        const auto ac = integrated_autocorrelation_time(out);
        diag.tau_int = ac.tau_int;
        diag.converged = ac.tau_int <= opt.max_tau_int;
    }
    return out;
}

} // namespace

void validate(const EnsembleModel& model) {
    std::visit(overloaded{
                   [](const IdealGas& m) {
                       if (m.N < 1) throw ValidationError("model.N", "must be >= 1");
                       if (m.d < 1) throw ValidationError("model.d", "must be >= 1");
                   },
                   [](const HarmonicOscillators& m) {
                       if (m.N < 1) throw ValidationError("model.N", "must be >= 1");
                   },
                   [](const TwoLevel& m) {
                       if (m.N < 1) throw ValidationError("model.N", "must be >= 1");
                       if (!(m.gap > 0.0) || !std::isfinite(m.gap)) throw ValidationError("model.gap", "must be > 0");
                   },
                   [](const IsingChain& m) {
                       if (m.N < 1) throw ValidationError("model.N", "must be >= 1");
                       if (!std::isfinite(m.J)) throw ValidationError("model.J", "must be finite");
                       if (!std::isfinite(m.field)) throw ValidationError("model.field", "must be finite");
                   },
               },
               model);
}

std::string model_name(const EnsembleModel& model) {
    return std::visit(overloaded{
                          [](const IdealGas&) { return std::string("ideal-gas"); },
                          [](const HarmonicOscillators&) { return std::string("harmonic-oscillators"); },
                          [](const TwoLevel&) { return std::string("two-level"); },
                          [](const IsingChain&) { return std::string("ising-chain"); },
                      },
                      model);
}

std::string describe(const EnsembleModel& model) {
    std::ostringstream os;
    os.precision(17);
    std::visit(overloaded{
                   [&](const IdealGas& m) { os << "IdealGas{N=" << m.N << ", d=" << m.d << "}"; },
                   [&](const HarmonicOscillators& m) { os << "HarmonicOscillators{N=" << m.N << "}"; },
                   [&](const TwoLevel& m) { os << "TwoLevel{N=" << m.N << ", gap=" << m.gap << "}"; },
                   [&](const IsingChain& m) {
                       os << "IsingChain{N=" << m.N << ", J=" << m.J << ", field=" << m.field << "}";
                   },
               },
               model);
    return os.str();
}

bool is_continuous(const EnsembleModel& model) {
    return std::holds_alternative<IdealGas>(model) || std::holds_alternative<HarmonicOscillators>(model);
}

bool is_bounded(const EnsembleModel& model) { return !is_continuous(model); }

double gamma_shape(const EnsembleModel& model) {
    if (const auto* g = std::get_if<IdealGas>(&model)) return 0.5 * g->d * g->N;
    if (const auto* o = std::get_if<HarmonicOscillators>(&model)) return double(o->N);
    throw DomainError("gamma_shape: " + model_name(model) + " is not a continuous model");
}

double log_partition(const EnsembleModel& model, Theta theta) {
    check_theta(model, theta);
    return std::visit(overloaded{
                          [&](const TwoLevel& m) { return m.N * std::log1p(std::exp(-theta.value * m.gap)); },
                          [&](const IsingChain& m) { return ising_cumulants(m, theta.value).log_z; },
                          [&](const auto&) {
                              const double a = gamma_shape(model);
                              return std::lgamma(a) - a * std::log(theta.value);
                          },
                      },
                      model);
}

double mean_energy(const EnsembleModel& model, Theta theta) {
    check_theta(model, theta);
    return std::visit(overloaded{
                          [&](const TwoLevel& m) {
                              const double p = 1.0 / (1.0 + std::exp(theta.value * m.gap));
                              return m.N * m.gap * p;
                          },
                          [&](const IsingChain& m) { return ising_cumulants(m, theta.value).mean; },
                          [&](const auto&) { return gamma_shape(model) / theta.value; },
                      },
                      model);
}

double energy_variance(const EnsembleModel& model, Theta theta) {
    check_theta(model, theta);
    return std::visit(overloaded{
                          [&](const TwoLevel& m) {
                              const double p = 1.0 / (1.0 + std::exp(theta.value * m.gap));
                              return m.N * m.gap * m.gap * p * (1.0 - p);
                          },
                          [&](const IsingChain& m) { return ising_cumulants(m, theta.value).variance; },
                          [&](const auto&) { return gamma_shape(model) / (theta.value * theta.value); },
                      },
                      model);
}

double ground_energy(const EnsembleModel& model) {
    return std::visit(overloaded{
                          [](const IsingChain& m) { return ising_levels(m).front().energy; },
                          [](const auto&) { return 0.0; },
                      },
                      model);
}

double max_mean_energy(const EnsembleModel& model) {
    if (is_continuous(model)) return kInf;
    return mean_energy(model, Theta{0.0});
}

double log_density_of_states(const EnsembleModel& model, double energy) {
    if (!is_continuous(model))
        throw DomainError("log_density_of_states: " + model_name(model) + " is discrete; use energy_levels()");
    if (!(energy > 0.0) || !std::isfinite(energy)) throw DomainError("energy outside the support (0, inf)");
    return (gamma_shape(model) - 1.0) * std::log(energy);
}

std::vector<EnergyLevel> energy_levels(const EnsembleModel& model) {
    return std::visit(overloaded{
                          [](const TwoLevel& m) {
                              std::vector<EnergyLevel> out;
                              out.reserve(static_cast<std::size_t>(m.N + 1));
                              for (int n = 0; n <= m.N; ++n) {
                                  const double lc = std::lgamma(m.N + 1.0) - std::lgamma(n + 1.0) -
                                                    std::lgamma(m.N - n + 1.0);
                                  out.push_back({n * m.gap, lc});
                              }
                              return out;
                          },
                          [](const IsingChain& m) { return ising_levels(m); },
                          [&](const auto&) -> std::vector<EnergyLevel> {
                              throw DomainError("energy_levels: " + model_name(model) + " has a continuous spectrum");
                          },
                      },
                      model);
}

double log_degeneracy(const EnsembleModel& model, double energy) {
    const auto levels = energy_levels(model);
    double scale = 1.0;
    for (const auto& lv : levels) scale = std::max(scale, std::abs(lv.energy));
    for (const auto& lv : levels)
        if (std::abs(lv.energy - energy) <= 1e-9 * scale) return lv.log_degeneracy;
    throw DomainError("energy is not a level of " + describe(model));
}

double canonical_log_pdf(const EnsembleModel& model, double energy, Theta theta) {
    const double log_sigma =
        is_continuous(model) ? log_density_of_states(model, energy) : log_degeneracy(model, energy);
    return log_sigma - theta.value * energy - log_partition(model, theta);
}

EnergySample sample_energies(const EnsembleModel& model, Theta theta, std::size_t count, std::uint64_t seed,
                             std::uint64_t replica_id, const SamplerOptions& options) {
    validate(model);
    check_theta(model, theta);
    if (count < 1) throw DomainError("sample_energies: count must be >= 1");

    EnergySample out;
    out.model = model;
    out.theta = theta;
    out.seed = seed;
    out.replica_id = replica_id;
    Engine eng = make_engine(seed, "ensembles.sample", replica_id);
    const auto n = static_cast<Eigen::Index>(count);

    std::visit(overloaded{
                   [&](const TwoLevel& m) {
                       const double p = 1.0 / (1.0 + std::exp(theta.value * m.gap));
                       std::binomial_distribution<int> dist(m.N, p);
                       out.values.resize(n);
                       for (Eigen::Index i = 0; i < n; ++i) out.values[i] = dist(eng) * m.gap;
                   },
                   [&](const IsingChain& m) {
                       SamplerDiagnostics diag;
                       out.values = sample_ising(m, theta.value, count, eng, options, diag);
                       out.diagnostics = diag;
                   },
                   [&](const auto&) {
                       std::gamma_distribution<double> dist(gamma_shape(model), 1.0 / theta.value);
                       out.values.resize(n);
                       for (Eigen::Index i = 0; i < n; ++i) out.values[i] = dist(eng);
                   },
               },
               model);
    return out;
}

} // namespace thermoclock
