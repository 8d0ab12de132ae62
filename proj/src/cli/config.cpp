#include "thermoclock/cli/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <climits>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "thermoclock/errors.hpp"

namespace thermoclock::cli {

namespace {

using T = ValueType;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string format_number(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
    return out;
}

KeySpec num(std::string key, double fallback, std::string doc, Bound bound = Bound::None) {
    return {std::move(key), T::Number, format_number(fallback), std::move(doc), bound};
}

KeySpec integer(std::string key, long long fallback, std::string doc, Bound bound = Bound::Positive) {
    return {std::move(key), T::Integer, std::to_string(fallback), std::move(doc), bound};
}

KeySpec text(std::string key, std::string fallback, std::string doc) {
    return {std::move(key), T::Text, std::move(fallback), std::move(doc), Bound::None};
}

std::string default_model(std::string_view experiment) {
    if (experiment == "tur-inference" || experiment == "gibbs-boltzmann") return "ideal-gas";
    if (experiment == "tur-fluctuation") return "gaussian";
    if (experiment == "chain") return "gaussian-beta";
    return {};
}

std::vector<KeySpec> model_keys(std::string_view model) {
    if (model == "ideal-gas")
        return {integer("N", 10, "particles"), integer("d", 3, "spatial dimensions")};
    if (model == "harmonic") return {integer("N", 10, "oscillators")};
    if (model == "two-level") return {integer("N", 10, "units"), num("gap", 1.0, "level spacing", Bound::Positive)};
    if (model == "ising")
        return {integer("N", 16, "spins"), num("J", 1.0, "coupling"), num("field", 0.0, "external field")};
    if (model == "gaussian")
        return {num("E0", 1.0, "most probable energy"), num("sigma", 1.0, "energy spread", Bound::Positive)};
    if (model == "power-law") return {num("exponent", 2.0, "S/k = exponent ln E", Bound::Positive)};
    if (model == "volume")
        return {num("exponent", 2.0, "energy exponent", Bound::Positive),
                num("particles", 1.0, "volume exponent", Bound::Positive),
                num("force", 1.0, "conjugate pressure-like force", Bound::Positive)};
    if (model == "gaussian-beta")
        return {num("delta_energy", 20.0, "energy spread Delta E", Bound::Positive),
                num("delta_beta", 0.05, "inverse-temperature spread Delta beta", Bound::Positive)};
    return {};
}

const std::vector<std::string> kProcesses = {"static-disorder", "mean-reverting"};

// Every key any experiment accepts.
const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = [] {
        std::set<std::string> out;
        for (const auto& e : experiment_names()) {
            std::vector<std::string> models = model_names(e);
            if (models.empty()) models.push_back({});
            for (const auto& m : models)
                for (const auto& p : kProcesses)
                    for (const auto& s : schema(e, m, p)) out.insert(s.key);
        }
        return out;
    }();
    return keys;
}

std::string canonical(const KeySpec& spec, const std::string& raw) {
    const std::string v = trim(raw);
    const auto bad = [&](const std::string& what) {
        return ValidationError(spec.key, "expected " + what + ", got '" + v + "'");
    };
    switch (spec.type) {
    case T::Text:
        return v;
    case T::Boolean:
        if (v == "true" || v == "1" || v == "yes") return "true";
        if (v == "false" || v == "0" || v == "no") return "false";
        throw bad("true or false");
    case T::Integer: {
        long long i = 0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), i);
        if (r.ec == std::errc() && r.ptr == v.data() + v.size()) return std::to_string(i);
        double x = 0;
        const auto d = std::from_chars(v.data(), v.data() + v.size(), x);
        if (d.ec == std::errc() && d.ptr == v.data() + v.size() && std::isfinite(x) && x == std::floor(x) &&
            std::abs(x) < 9e18)
            return std::to_string(static_cast<long long>(x));
        throw bad("an integer");
    }
    case T::Number: {
        double x = 0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x)) throw bad("a finite number");
        return format_number(x);
    }
    }
    return v;
}

void check_bound(const KeySpec& spec, const std::string& value) {
    if (spec.bound == Bound::None || (spec.type != T::Number && spec.type != T::Integer)) return;
    const double x = std::stod(value);
    if (spec.bound == Bound::Positive && !(x > 0.0)) throw ValidationError(spec.key, "must be > 0, got " + value);
    if (spec.bound == Bound::NonNegative && !(x >= 0.0)) throw ValidationError(spec.key, "must be >= 0, got " + value);
}

int as_int(const ExperimentConfig& c, std::string_view key) {
    const auto v = c.integer(key);
    if (v > INT_MAX || v < INT_MIN) throw ValidationError(std::string(key), "out of range");
    return static_cast<int>(v);
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
    for (const auto& [k, v] : j.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) flatten(v, key, out);
        else if (v.is_string()) out[key] = v.get<std::string>();
        else if (v.is_boolean()) out[key] = v.get<bool>() ? "true" : "false";
        else if (v.is_number_integer()) out[key] = std::to_string(v.get<long long>());
        else if (v.is_number_unsigned()) out[key] = std::to_string(v.get<unsigned long long>());
        else if (v.is_number_float()) out[key] = format_number(v.get<double>());
        else throw ValidationError(key, "unsupported JSON value");
    }
}

} // namespace

bool ExperimentConfig::has(std::string_view key) const {
    return std::any_of(entries.begin(), entries.end(), [&](const Entry& e) { return e.key == key; });
}

const std::string& ExperimentConfig::text(std::string_view key) const {
    for (const auto& e : entries)
        if (e.key == key) return e.text;
    throw ValidationError(std::string(key), "not set for this experiment");
}

ValueType ExperimentConfig::type(std::string_view key) const {
    for (const auto& e : entries)
        if (e.key == key) return e.type;
    throw ValidationError(std::string(key), "not set for this experiment");
}

double ExperimentConfig::number(std::string_view key) const { return std::stod(text(key)); }

std::int64_t ExperimentConfig::integer(std::string_view key) const { return std::stoll(text(key)); }

bool ExperimentConfig::boolean(std::string_view key) const { return text(key) == "true"; }

ExperimentConfig ExperimentConfig::with(std::string_view key, std::string_view value) const {
    std::map<std::string, std::string> raw;
    for (const auto& e : entries) raw[e.key] = e.text;
    raw[std::string(key)] = std::string(value);
    return make_config(raw);
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"tur-inference", "tur-fluctuation", "clock-kinematics", "chain",
                                                   "gibbs-boltzmann", "taylor",        "exchange"};
    return names;
}

std::vector<std::string> model_names(std::string_view experiment) {
    if (experiment == "tur-inference") return {"ideal-gas", "harmonic", "two-level", "ising"};
    if (experiment == "tur-fluctuation") return {"gaussian", "power-law", "ideal-gas", "volume"};
    if (experiment == "chain") return {"gaussian-beta", "ideal-gas", "harmonic"};
    if (experiment == "gibbs-boltzmann") return {"ideal-gas", "harmonic"};
    return {};
}

std::vector<KeySpec> schema(std::string_view experiment, std::string_view model, std::string_view process) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), experiment) == names.end())
        throw ValidationError("experiment", "unknown experiment '" + std::string(experiment) + "'; expected one of " +
                                                join(names));
    std::vector<KeySpec> s = {
        text("experiment", "", "experiment family"),
        integer("seed", 0, "global seed", Bound::NonNegative),
        num("units.k", 1.0, "Boltzmann constant", Bound::Positive),
        num("units.h", 1.0, "Planck constant", Bound::Positive),
        num("units.c", 1.0, "speed of light", Bound::Positive),
    };
    auto add = [&](std::vector<KeySpec> more) { s.insert(s.end(), more.begin(), more.end()); };

    const auto models = model_names(experiment);
    if (!models.empty()) {
        const std::string m = model.empty() ? default_model(experiment) : std::string(model);
        if (std::find(models.begin(), models.end(), m) == models.end())
            throw ValidationError("model", "unknown model '" + m + "' for " + std::string(experiment) +
                                               "; expected one of " + join(models));
        s.push_back(text("model", default_model(experiment), "model name"));
        add(model_keys(m));
    }

    if (experiment == "tur-inference") {
        add({num("theta", 1.0, "true 1/(kT)", Bound::Positive), integer("sample_size", 10000, "draws per replica"),
             integer("replicas", 200, "independent replicas"),
             integer("thinning_sweeps", 1, "Ising sweeps between recorded draws"),
             integer("bootstrap_resamples", 400, "bootstrap resamples"),
             num("fisher_tolerance", 1e-4, "relative tolerance of the Fisher identity", Bound::Positive)});
    } else if (experiment == "tur-fluctuation") {
        add({num("theta", 1.0, "environment 1/(kT0)", Bound::Positive),
             integer("sample_size", 100000, "macrostate draws"),
             integer("bootstrap_resamples", 200, "bootstrap resamples")});
    } else if (experiment == "clock-kinematics") {
        add({num("mass", 1.0, "rest mass", Bound::Positive), num("velocity", 0.6, "velocity of the worked case"),
             integer("sweep_points", 100, "velocities in (0, 0.999 c]"),
             num("identity_tolerance", 1e-12, "relative tolerance of the identities", Bound::Positive)});
    } else if (experiment == "chain") {
        add({num("theta", 1.0, "mean 1/(kT)", Bound::Positive),
             text("process", "static-disorder", "static-disorder or mean-reverting")});
        const std::string p = process.empty() ? "static-disorder" : std::string(process);
        if (std::find(kProcesses.begin(), kProcesses.end(), p) == kProcesses.end())
            throw ValidationError("process", "unknown process '" + p + "'; expected one of " + join(kProcesses));
        if (p == "mean-reverting")
            add({num("correlation_time", 1.0, "frequency correlation time", Bound::Positive)});
        add({num("horizon_periods", 100.0, "last evaluated time in clock periods", Bound::Positive),
             integer("steps_per_period", 100, "grid points per clock period"),
             integer("replicas", 15000, "clock replicas"), integer("bootstrap_resamples", 200, "bootstrap resamples"),
             num("max_rel_spread", kDefaultMaxRelSpread, "Taylor validity limit", Bound::Positive),
             num("c_bound", 2.0, "Taylor remainder constant", Bound::Positive)});
    } else if (experiment == "gibbs-boltzmann") {
        add({num("energy", 1.0, "system energy", Bound::Positive),
             num("route_tolerance", 1e-6, "closed form vs numeric route", Bound::Positive)});
    } else if (experiment == "taylor") {
        add({num("mean_freq", 1.0, "mean clock frequency", Bound::Positive),
             num("rel_spread", 0.01, "relative frequency spread", Bound::Positive),
             integer("replicas", 100000, "frequency draws"),
             num("max_rel_spread", kDefaultMaxRelSpread, "Taylor validity limit", Bound::Positive),
             num("c_bound", 2.0, "Taylor remainder constant", Bound::Positive)});
    } else if (experiment == "exchange") {
        add({integer("subsystems", 4, "subsystems m"), integer("units_per_subsystem", 16, "units per subsystem n"),
             {"total_energy", T::Number, "", "total energy (default m n)", Bound::Positive},
             num("exchange_rate", 0.05, "probability of a cross-subsystem pair", Bound::Positive),
             integer("steps", 4000000, "pair updates"), integer("tracked_units", 32, "units traced for tau_sub")});
    }
    add({text("out_dir", "", "output directory (flag and environment override)"),
         {"write_csv", T::Boolean, "true", "write data CSV files", Bound::None}});
    return s;
}

ExperimentConfig make_config(const std::map<std::string, std::string>& raw) {
    const auto find = [&](const std::string& k) -> std::string {
        const auto it = raw.find(k);
        return it == raw.end() ? std::string() : trim(it->second);
    };
    const std::string experiment = find("experiment");
    if (experiment.empty()) throw ValidationError("experiment", "missing; expected one of " + join(experiment_names()));
    const std::string model = find("model");
    if (!model.empty() && model_names(experiment).empty() && raw.count("model"))
        throw ValidationError("model", "not used by experiment '" + experiment + "'");
    const auto specs = schema(experiment, model, find("process"));

    for (const auto& [k, v] : raw) {
        (void)v;
        if (std::any_of(specs.begin(), specs.end(), [&](const KeySpec& s) { return s.key == k; })) continue;
        if (known_keys().count(k)) {
            std::string where = "experiment '" + experiment + "'";
            if (!model.empty()) where += " with model '" + model + "'";
            throw ValidationError(k, "not used by " + where);
        }
        throw ValidationError(k, "unknown key");
    }

    ExperimentConfig c;
    for (const auto& s : specs) {
        const auto it = raw.find(s.key);
        std::string value;
        if (it != raw.end()) value = canonical(s, it->second);
        else if (!s.fallback.empty() || s.type == T::Text) value = s.fallback;
        if (!value.empty()) check_bound(s, value);
        c.entries.push_back({s.key, s.type, value});
    }
    for (auto& e : c.entries)
        if (e.key == "total_energy" && e.text.empty())
            e.text = format_number(double(c.integer("subsystems")) * double(c.integer("units_per_subsystem")));

    // Build the module objects once so every parameter is checked before any run.
    units_of(c).validate();
    if (experiment == "tur-inference" || experiment == "gibbs-boltzmann") validate(ensemble_model_of(c));
    if (experiment == "tur-fluctuation") validate(environment_of(c));
    if (experiment == "chain") {
        const auto src = chain_source_of(c);
        if (const auto* m = std::get_if<EnsembleModel>(&src)) validate(*m);
        const auto o = chain_options_of(c);
        if (o.replicas < 100) throw ValidationError("replicas", "need at least 100 replicas");
        if (o.horizon_periods < 10) throw ValidationError("horizon_periods", "must be >= 10");
        if (o.steps_per_period < 100) throw ValidationError("steps_per_period", "must be >= 100");
    }
    if (experiment == "taylor") taylor_process_of(c).validate();
    if (experiment == "clock-kinematics" && !(std::abs(c.number("velocity")) < c.number("units.c")))
        throw ValidationError("velocity", "must satisfy |v| < c");
    if (experiment == "exchange") {
        if (c.integer("subsystems") < 2) throw ValidationError("subsystems", "need at least 2 subsystems");
        if (c.number("exchange_rate") > 1.0) throw ValidationError("exchange_rate", "must lie in (0, 1]");
    }
    return c;
}

ExperimentConfig parse_config(std::string_view text) {
    const std::string body = trim(text);
    std::map<std::string, std::string> raw;
    if (!body.empty() && body.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("config", std::string("invalid JSON: ") + e.what());
        }
        if (j.contains("config") && j["config"].is_object()) j = j["config"];
        flatten(j, "", raw);
        return make_config(raw);
    }
    std::istringstream in{std::string(text)};
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config", "line " + std::to_string(n) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.empty()) throw ValidationError("config", "line " + std::to_string(n) + ": empty key");
        if (!raw.emplace(key, value).second) throw ValidationError(key, "given twice");
    }
    return make_config(raw);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config", "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_text(const ExperimentConfig& config) {
    std::string out;
    for (const auto& e : config.entries) out += e.key + " = " + e.text + "\n";
    return out;
}

Units units_of(const ExperimentConfig& c) {
    return Units{c.number("units.k"), c.number("units.h"), c.number("units.c")};
}

EnsembleModel ensemble_model_of(const ExperimentConfig& c) {
    const auto& m = c.text("model");
    if (m == "ideal-gas") return IdealGas{as_int(c, "N"), as_int(c, "d")};
    if (m == "harmonic") return HarmonicOscillators{as_int(c, "N")};
    if (m == "two-level") return TwoLevel{as_int(c, "N"), c.number("gap")};
    if (m == "ising") return IsingChain{as_int(c, "N"), c.number("J"), c.number("field")};
    throw ValidationError("model", "'" + m + "' is not an ensemble model");
}

MacrostateEnvironment environment_of(const ExperimentConfig& c) {
    MacrostateEnvironment env;
    env.theta0 = Theta{c.number("theta")};
    env.units = units_of(c);
    const auto& m = c.text("model");
    if (m == "gaussian") env.entropy = GaussianEntropy{c.number("E0"), c.number("sigma")};
    else if (m == "power-law") env.entropy = PowerLawEntropy{c.number("exponent")};
    else if (m == "ideal-gas") env.entropy = ideal_gas_entropy(as_int(c, "N"), as_int(c, "d"));
    else if (m == "volume") {
        env.entropy = VolumeEntropy{c.number("exponent"), c.number("particles")};
        env.forces = {c.number("force")};
    } else throw ValidationError("model", "'" + m + "' is not a fluctuation model");
    return env;
}

ChainSource chain_source_of(const ExperimentConfig& c) {
    if (c.text("model") == "gaussian-beta") return GaussianBetaSpec{c.number("delta_energy"), c.number("delta_beta")};
    return ensemble_model_of(c);
}

ChainOptions chain_options_of(const ExperimentConfig& c) {
    ChainOptions o;
    if (c.text("process") == "mean-reverting") o.process_model = MeanReverting{c.number("correlation_time")};
    o.horizon_periods = c.number("horizon_periods");
    o.steps_per_period = static_cast<std::size_t>(c.integer("steps_per_period"));
    o.replicas = static_cast<std::size_t>(c.integer("replicas"));
    o.seed = c.seed();
    o.units = units_of(c);
    o.max_rel_spread = c.number("max_rel_spread");
    o.bootstrap_resamples = static_cast<std::size_t>(c.integer("bootstrap_resamples"));
    o.taylor_c_bound = c.number("c_bound");
    return o;
}

ClockProcess taylor_process_of(const ExperimentConfig& c) {
    ClockProcess p;
    p.mean_freq = c.number("mean_freq");
    p.rel_spread = c.number("rel_spread");
    p.dt = 0.01 / p.mean_freq;
    p.horizon = 10.0 / p.mean_freq;
    p.replicas = static_cast<std::size_t>(c.integer("replicas"));
    p.seed = c.seed();
    p.max_rel_spread = c.number("max_rel_spread");
    return p;
}

ExchangeConfig exchange_config_of(const ExperimentConfig& c) {
    ExchangeConfig x;
    x.subsystems = as_int(c, "subsystems");
    x.units_per_subsystem = as_int(c, "units_per_subsystem");
    x.total_energy = c.number("total_energy");
    x.exchange_rate = c.number("exchange_rate");
    x.steps = static_cast<std::uint64_t>(c.integer("steps"));
    x.tracked_units = as_int(c, "tracked_units");
    x.seed = c.seed();
    x.units = units_of(c);
    return x;
}

std::string describe_models() {
    std::ostringstream out;
    for (const auto& e : experiment_names()) {
        out << e << "\n";
        auto models = model_names(e);
        if (models.empty()) models.push_back({});
        for (const auto& m : models) {
            if (!m.empty()) out << "  model = " << m << "\n";
            for (const auto& s : schema(e, m)) {
                if (s.key == "experiment" || s.key == "model" || s.key.rfind("units.", 0) == 0 || s.key == "seed" ||
                    s.key == "out_dir" || s.key == "write_csv")
                    continue;
                const auto mk = model_keys(m);
                const bool own =
                    std::any_of(mk.begin(), mk.end(), [&](const KeySpec& k) { return k.key == s.key; });
                if (!m.empty() && !own && m != models.front()) continue;
                out << "    " << s.key << " = " << (s.fallback.empty() ? "(derived)" : s.fallback) << "  # " << s.doc
                    << "\n";
            }
        }
        if (e == "chain") out << "    correlation_time = 1  # with process = mean-reverting\n";
    }
    out << "common: seed, units.k, units.h, units.c, out_dir, write_csv\n";
    return out.str();
}

} // namespace thermoclock::cli
