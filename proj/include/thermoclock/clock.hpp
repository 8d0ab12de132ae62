#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "thermoclock/errors.hpp"
#include "thermoclock/units.hpp"

namespace thermoclock {

/// Particle of rest mass m0 moving at velocity v (|v| < c).
struct Kinematics {
    Units units;
    double m0 = 1.0;
    double v = 0.0;

    /// Throws DomainError for |v| >= c ("superluminal") or m0 <= 0.
    void validate() const;
    /// 1 / sqrt(1 - (v/c)^2), via log1p for accuracy near v -> c.
    double lorentz_factor() const;
    double momentum() const; ///< gamma m0 v
    double energy() const;   ///< gamma m0 c^2
};

/// nu_0 = m0 c^2 / h.
double rest_frequency(const Kinematics& kin);
/// nu_0 sqrt(1 - (v/c)^2): the moving clock runs slow.
double clock_frequency(const Kinematics& kin);
/// nu_0 / sqrt(1 - (v/c)^2).
double wave_frequency(const Kinematics& kin);
/// c^2 / v, signed like v (phase surfaces run ahead of the particle in its
/// direction of motion). An observer moving at +V past a standing wave sees
/// it run the other way, -c^2 / V. Throws DomainError for v = 0.
double phase_velocity(const Kinematics& kin);
/// |V_ph| / nu_wave; equals h / (gamma m0 |v|). Throws DomainError for v = 0.
double de_broglie_wavelength(const Kinematics& kin);

/// Guidance formula V = -c^2 grad(phi) / d_t(phi).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, 1>
guidance_velocity(const Eigen::MatrixBase<Derived>& phase_gradient, typename Derived::Scalar phase_time_derivative,
                  const Units& units = {}) {
    EIGEN_STATIC_ASSERT_VECTOR_ONLY(Derived);
    if (phase_time_derivative == 0 || !std::isfinite(phase_time_derivative))
        throw DomainError("guidance_velocity: stationary phase (d phi / dt = 0)");
    return -(units.c * units.c / phase_time_derivative) * phase_gradient.derived();
}

/// Temperature-time conjecture k T = h nu_c.
double temperature_of_clock(double nu_c, const Units& units = {});

struct ClockTiming {
    double nu_c = 0.0; ///< clock frequency
    double t_c = 0.0;  ///< clock period 1 / nu_c
};

/// beta / k = t_c / h, i.e. t_c = h theta.
ClockTiming clock_from_theta(Theta theta, const Units& units = {});
/// Inverse of clock_from_theta: theta = t_c / h = 1 / (h nu_c).
Theta theta_from_clock(double nu_c, const Units& units = {});

/// Delta t_c >= h / Delta E.
double clock_period_uncertainty_bound(double delta_energy, const Units& units = {});

} // namespace thermoclock
