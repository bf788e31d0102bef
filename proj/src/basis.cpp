#include "fdiff/basis.hpp"

#include <algorithm>

namespace fdiff {

Basis enumerate_basis(const ModeTable& table, Quantization quant,
                      int sector) {
  if (sector < 0) throw ConfigError("photon sector must be >= 0");
  Basis b;
  b.quant = quant;
  b.sector = sector;

  int ladder_len =
      table.regime == Regime::RamanNath ? 2 * table.nd + 1 : 2;
  std::vector<int> slot(table.Na, 0);

  std::vector<std::array<int, 2>> photon_splits;
  if (quant == Quantization::RunningWave) {
    for (int nq = 0; nq <= sector; ++nq)
      photon_splits.push_back({nq, sector - nq});
  } else {
    photon_splits.push_back({sector, 0});
  }

  while (true) {
    BasisState proto;
    proto.occ.resize(table.Na);
    for (int i = 0; i < table.Na; ++i)
      proto.occ[i] = static_cast<std::int16_t>(table.ladders[i][slot[i]]);
    std::sort(proto.occ.begin(), proto.occ.end());
    for (const auto& ph : photon_splits) {
      BasisState s = proto;
      s.photons = ph;
      b.index_of.emplace(s, static_cast<int>(b.states.size()));
      b.states.push_back(std::move(s));
    }
    int i = 0;
    for (; i < table.Na; ++i) {
      if (++slot[i] < ladder_len) break;
      slot[i] = 0;
    }
    if (i == table.Na) break;
  }
  return b;
}

std::optional<std::pair<int, BasisState>> fermionic_bilinear(
    const BasisState& state, int dst, int src) {
  if (dst < 0 || src < 0)
    throw std::out_of_range("unknown fermionic mode index");
  auto s16 = static_cast<std::int16_t>(src);
  auto d16 = static_cast<std::int16_t>(dst);
  auto it = std::lower_bound(state.occ.begin(), state.occ.end(), s16);
  if (it == state.occ.end() || *it != s16) return std::nullopt;  // c_src -> 0
  if (dst == src) return std::make_pair(1, state);  // number operator
  if (std::binary_search(state.occ.begin(), state.occ.end(), d16))
    return std::nullopt;  // Pauli blocked

  // Parity of occupied modes strictly between src and dst.
  int lo = std::min(src, dst), hi = std::max(src, dst);
  int crossings = 0;
  for (auto m : state.occ)
    if (m > lo && m < hi) ++crossings;

  BasisState out = state;
  out.occ.erase(std::lower_bound(out.occ.begin(), out.occ.end(), s16));
  out.occ.insert(std::lower_bound(out.occ.begin(), out.occ.end(), d16),
                 d16);
  return std::make_pair(crossings % 2 == 0 ? 1 : -1, std::move(out));
}

}  // namespace fdiff
