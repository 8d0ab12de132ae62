#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "thermoclock/chain.hpp"
#include "thermoclock/ensembles.hpp"
#include "thermoclock/exchange.hpp"
#include "thermoclock/fluctuation.hpp"
#include "thermoclock/phases.hpp"

namespace thermoclock::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum class ValueType { Number, Integer, Boolean, Text };
enum class Bound { None, Positive, NonNegative };

struct KeySpec {
    std::string key;
    ValueType type = ValueType::Number;
    std::string fallback; ///< default in canonical text form; empty Number/Integer means derived
    std::string doc;
    Bound bound = Bound::None;
};

/// One experiment with every applicable key resolved (defaults filled in),
/// in schema order. Values are held in canonical text form.
struct ExperimentConfig {
    struct Entry {
        std::string key;
        ValueType type;
        std::string text;
    };
    std::vector<Entry> entries;

    const std::string& experiment() const { return text("experiment"); }
    bool has(std::string_view key) const;
    const std::string& text(std::string_view key) const;
    double number(std::string_view key) const;
    std::int64_t integer(std::string_view key) const;
    bool boolean(std::string_view key) const;
    std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }
    ValueType type(std::string_view key) const;

    /// Replaces one value (re-validating the whole config). Throws ValidationError.
    ExperimentConfig with(std::string_view key, std::string_view value) const;
};

/// Experiments and, per experiment, the accepted model names.
const std::vector<std::string>& experiment_names();
std::vector<std::string> model_names(std::string_view experiment);

/// Keys accepted for an experiment/model/process combination, in echo order.
std::vector<KeySpec> schema(std::string_view experiment, std::string_view model = {}, std::string_view process = {});

/// Resolves raw key/value text: rejects unknown keys and keys the chosen
/// experiment or model does not use, parses types, fills defaults and builds
/// the module objects once so that every parameter is validated up front.
/// Throws ValidationError naming the offending field.
ExperimentConfig make_config(const std::map<std::string, std::string>& raw);

/// Flat `key = value` text (`#` starts a comment) or a JSON object with the
/// same keys. A JSON run report is accepted too: its "config" echo is used.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Flat text form; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& config);

// Module objects built from a resolved config.
Units units_of(const ExperimentConfig& config);
EnsembleModel ensemble_model_of(const ExperimentConfig& config);
MacrostateEnvironment environment_of(const ExperimentConfig& config);
ChainSource chain_source_of(const ExperimentConfig& config);
ChainOptions chain_options_of(const ExperimentConfig& config);
ClockProcess taylor_process_of(const ExperimentConfig& config);
ExchangeConfig exchange_config_of(const ExperimentConfig& config);

/// Human-readable listing of experiments, models and their parameters.
std::string describe_models();

} // namespace thermoclock::cli
