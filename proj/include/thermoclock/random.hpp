#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>

namespace thermoclock {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed splitting: (global seed, component label, replica index) -> stream seed.
///
/// Every replica gets its own stream derived only from its own index, so adding
/// replicas never perturbs the streams of existing ones and results do not
/// depend on which thread ran which replica.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t replica);

inline Engine make_engine(std::uint64_t seed, std::string_view label, std::uint64_t replica) {
    return Engine{derive_seed(seed, label, replica)};
}

/// Number of worker threads used by replica loops. 0 means hardware concurrency.
void set_thread_count(unsigned n) noexcept;
unsigned thread_count() noexcept;

/// Runs body(i) for i in [0, count). Each index is executed exactly once;
/// callers must write results into per-index slots so the outcome is
/// independent of scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

} // namespace thermoclock
