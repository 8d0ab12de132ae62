#include "thermoclock/clock.hpp"

namespace thermoclock {

void Kinematics::validate() const {
    units.validate();
    if (!(m0 > 0.0) || !std::isfinite(m0)) throw DomainError("Kinematics: rest mass must be finite and > 0");
    if (!std::isfinite(v) || !(std::abs(v) < units.c)) throw DomainError("Kinematics: superluminal velocity |v| >= c");
}

double Kinematics::lorentz_factor() const {
    validate();
    const double b = v / units.c;
    return std::exp(-0.5 * std::log1p(-b * b));
}

double Kinematics::momentum() const { return lorentz_factor() * m0 * v; }

double Kinematics::energy() const { return lorentz_factor() * m0 * units.c * units.c; }

double rest_frequency(const Kinematics& kin) {
    kin.validate();
    return kin.m0 * kin.units.c * kin.units.c / kin.units.h;
}

double clock_frequency(const Kinematics& kin) { return rest_frequency(kin) / kin.lorentz_factor(); }

double wave_frequency(const Kinematics& kin) { return rest_frequency(kin) * kin.lorentz_factor(); }

double phase_velocity(const Kinematics& kin) {
    kin.validate();
    if (kin.v == 0.0) throw DomainError("phase_velocity: infinite at v = 0");
    return kin.units.c * kin.units.c / kin.v;
}

double de_broglie_wavelength(const Kinematics& kin) {
    kin.validate();
    if (kin.v == 0.0) throw DomainError("de_broglie_wavelength: infinite at v = 0");
    return std::abs(phase_velocity(kin)) / wave_frequency(kin);
}

double temperature_of_clock(double nu_c, const Units& units) {
    units.validate();
    if (!(nu_c > 0.0) || !std::isfinite(nu_c)) throw DomainError("temperature_of_clock: nu_c must be > 0");
    return units.h * nu_c / units.k;
}

ClockTiming clock_from_theta(Theta theta, const Units& units) {
    units.validate();
    if (!(theta.value > 0.0) || !std::isfinite(theta.value)) throw DomainError("clock_from_theta: theta must be > 0");
    const double t_c = units.h * theta.value;
    return {1.0 / t_c, t_c};
}

Theta theta_from_clock(double nu_c, const Units& units) {
    units.validate();
    if (!(nu_c > 0.0) || !std::isfinite(nu_c)) throw DomainError("theta_from_clock: nu_c must be > 0");
    return Theta{1.0 / (units.h * nu_c)};
}

double clock_period_uncertainty_bound(double delta_energy, const Units& units) {
    units.validate();
    if (!(delta_energy > 0.0) || !std::isfinite(delta_energy))
        throw DomainError("clock_period_uncertainty_bound: Delta E must be > 0");
    return units.h / delta_energy;
}

} // namespace thermoclock
