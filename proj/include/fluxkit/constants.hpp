#pragma once

// CODATA-2018 exact SI values (2019 redefinition), plus the derived
// magnetic constants used throughout.

namespace fluxkit {

inline constexpr double kPlanck = 6.62607015e-34;        // J s
inline constexpr double kHbar = 1.054571817e-34;         // J s
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kBoltzmann = 1.380649e-23;       // J/K
inline constexpr double kMu0 = 1.25663706212e-6;         // N/A^2
inline constexpr double kBohrMagneton = 9.2740100783e-24;  // J/T

inline constexpr double kFluxQuantum = kPlanck / (2.0 * kElementaryCharge);  // Wb
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kReducedFluxQuantum = kFluxQuantum / (2.0 * kPi);
inline constexpr double kLn2 = 0.6931471805599453094172321214581766;

}  // namespace fluxkit
