#include "fdiff/config.hpp"

#include <cmath>

namespace fdiff {

void FieldSpec::validate(Quantization quant) const {
  for (int i = 0; i < (quant == Quantization::RunningWave ? 2 : 1); ++i) {
    if (photons[i] < 0) throw ConfigError("photon numbers must be >= 0");
    if (kind == FieldKind::Fock &&
        photons[i] != std::floor(photons[i]))
      throw ConfigError("Fock photon numbers must be integers");
  }
  if (kind == FieldKind::Coherent &&
      (truncation_epsilon <= 0 || truncation_epsilon > 1e-4))
    throw ConfigError("truncation_epsilon must be in (0, 1e-4]");
}

void SimulationConfig::validate() const {
  if (Na < 1) throw ConfigError("Na must be >= 1");
  if (kF >= 1.0 || kF < 0.0)
    throw ConfigError("kF must satisfy 0 <= kF < q");
  if (E2q < 0) throw ConfigError("E2q must be >= 0");
  if (g < 0) throw ConfigError("g must be >= 0");
  if (regime == Regime::RamanNath && nd < 1)
    throw ConfigError("nd must be >= 1 in the Raman-Nath regime");
  if (!t_grid.empty()) {
    if (t_grid.front() != 0.0) throw ConfigError("t_grid must start at 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
      if (t_grid[i] <= t_grid[i - 1])
        throw ConfigError("t_grid must be strictly increasing");
  }
  field.validate(quantization);
}

}  // namespace fdiff
