#pragma once

#include <numbers>

namespace dipnoise::phys {

// CODATA 2018.
inline constexpr double kElementaryCharge = 1.602176634e-19;   // C (exact)
inline constexpr double kHbar = 1.054571817e-34;               // J s
inline constexpr double kEpsilon0 = 8.8541878128e-12;          // F/m
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;   // kg
inline constexpr double kElectronMass = 9.1093837015e-31;      // kg

inline constexpr double kCa40AtomicMass = 39.962590863;        // u
inline constexpr double kCa40IonMass =
    kCa40AtomicMass * kAtomicMassUnit - kElectronMass;         // kg

inline constexpr double kCoulombConstant =
    1.0 / (4.0 * std::numbers::pi * kEpsilon0);                // N m^2 / C^2

}  // namespace dipnoise::phys
