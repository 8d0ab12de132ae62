#pragma once

#include "thermoclock/errors.hpp"

namespace thermoclock {

/// Physical constants carried explicitly: Boltzmann k, Planck h, light speed c.
struct Units {
    double k = 1.0;
    double h = 1.0;
    double c = 1.0;

    void validate() const {
        if (!(k > 0.0)) throw ValidationError("units.k", "must be > 0");
        if (!(h > 0.0)) throw ValidationError("units.h", "must be > 0");
        if (!(c > 0.0)) throw ValidationError("units.c", "must be > 0");
    }

    double hbar() const;
};

/// Inverse energy 1/(kT). All ensemble math is written in terms of theta;
/// the inverse temperature beta = 1/T is recovered as k * theta.
struct Theta {
    double value = 1.0;

    constexpr Theta() = default;
    constexpr explicit Theta(double v) : value(v) {}

    double beta(const Units& u) const { return u.k * value; }
    double temperature(const Units& u) const { return 1.0 / (u.k * value); }

    static Theta from_beta(double beta, const Units& u) { return Theta{beta / u.k}; }
    static Theta from_temperature(double T, const Units& u) { return Theta{1.0 / (u.k * T)}; }

    friend constexpr bool operator==(Theta, Theta) = default;
};

inline constexpr double kPi = 3.14159265358979323846;

inline double Units::hbar() const { return h / (2.0 * kPi); }

} // namespace thermoclock
