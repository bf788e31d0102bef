#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fdiff/modes.hpp"

namespace fdiff {

/// Mixed fermion-photon occupation state.  `occ` holds the occupied
/// global fermionic mode indices in ascending (canonical) order, exactly
/// one per atom ladder.  Running wave: photons = (n_q, n_{-q}); standing
/// wave: photons = (n, 0).
struct BasisState {
  std::array<int, 2> photons{0, 0};
  std::vector<std::int16_t> occ;

  bool operator==(const BasisState& o) const {
    return photons == o.photons && occ == o.occ;
  }
};

struct BasisStateHash {
  std::size_t operator()(const BasisState& s) const {
    std::size_t h = std::hash<int>()(s.photons[0] * 131071 + s.photons[1]);
    for (auto m : s.occ) h = h * 1000003u + static_cast<std::size_t>(m + 1);
    return h;
  }
};

/// Ordered basis of one total-photon-number sector.
struct Basis {
  Quantization quant = Quantization::RunningWave;
  int sector = 0;  // total photon number
  std::vector<BasisState> states;
  std::unordered_map<BasisState, int, BasisStateHash> index_of;

  int dim() const { return static_cast<int>(states.size()); }
  int index(const BasisState& s) const {
    auto it = index_of.find(s);
    return it == index_of.end() ? -1 : it->second;
  }
};

Basis enumerate_basis(const ModeTable& table, Quantization quant, int sector);

/// Applies c^dagger_{dst} c_{src} to an occupation word.  Returns nullopt
/// if the result vanishes (src empty, or dst occupied with dst != src);
/// otherwise the anticommutation sign and the new word.
std::optional<std::pair<int, BasisState>> fermionic_bilinear(
    const BasisState& state, int dst, int src);

}  // namespace fdiff
