#include "fdiff/modes.hpp"

#include <algorithm>
#include <cmath>

namespace fdiff {

namespace {

std::vector<double> even_grid(double kF, int Na) {
  std::vector<double> k(Na);
  if (Na == 1) {
    k[0] = 0.0;
  } else {
    for (int i = 0; i < Na; ++i)
      k[i] = -kF + 2.0 * kF * i / (Na - 1);
  }
  return k;
}

}  // namespace

int ModeTable::base_mode(int atom) const {
  // Raman-Nath ladders are centered (m = 0); Bragg atoms start on the
  // lower of their two sites.
  return regime == Regime::RamanNath
             ? ladders[atom][nd]
             : ladders[atom][0];
}

int ModeTable::shifted(int mode, int step) const {
  int atom = atom_of_mode[mode];
  int m = offset_of_mode[mode];
  int lo = regime == Regime::RamanNath ? -nd : 0;
  int hi = regime == Regime::RamanNath ? nd : 1;
  int m2 = m + step;
  if (m2 < lo || m2 > hi) return -1;
  return ladders[atom][m2 - lo];
}

int ModeTable::mode_at(double p, double tol) const {
  for (std::size_t i = 0; i < mode_momenta.size(); ++i)
    if (std::abs(mode_momenta[i] - p) <= tol) return static_cast<int>(i);
  return -1;
}

ModeTable build_mode_table(const SimulationConfig& config) {
  config.validate();
  ModeTable t;
  t.quant = config.quantization;
  t.regime = config.regime;
  t.Na = config.Na;
  t.nd = config.regime == Regime::RamanNath ? config.nd : 0;
  t.fermi_grid = even_grid(config.kF, config.Na);

  t.base_momenta.resize(config.Na);
  for (int i = 0; i < config.Na; ++i)
    t.base_momenta[i] = config.regime == Regime::Bragg
                            ? t.fermi_grid[i] - 1.0
                            : t.fermi_grid[i];

  struct Site {
    double p;
    int atom;
    int m;
  };
  std::vector<Site> sites;
  for (int i = 0; i < config.Na; ++i) {
    if (config.regime == Regime::RamanNath) {
      for (int m = -config.nd; m <= config.nd; ++m)
        sites.push_back({t.base_momenta[i] + 2.0 * m, i, m});
    } else {
      sites.push_back({t.base_momenta[i], i, 0});
      sites.push_back({t.base_momenta[i] + 2.0, i, 1});
    }
  }
  std::sort(sites.begin(), sites.end(),
            [](const Site& a, const Site& b) { return a.p < b.p; });
  for (std::size_t i = 1; i < sites.size(); ++i)
    if (sites[i].p - sites[i - 1].p < 1e-9)
      throw ConfigError("atom momentum ladders intersect");

  int ladder_len =
      config.regime == Regime::RamanNath ? 2 * config.nd + 1 : 2;
  t.ladders.assign(config.Na, std::vector<int>(ladder_len, -1));
  for (std::size_t gi = 0; gi < sites.size(); ++gi) {
    const Site& s = sites[gi];
    t.mode_momenta.push_back(s.p);
    t.atom_of_mode.push_back(s.atom);
    t.offset_of_mode.push_back(s.m);
    int slot = config.regime == Regime::RamanNath ? s.m + config.nd : s.m;
    t.ladders[s.atom][slot] = static_cast<int>(gi);
  }
  return t;
}

}  // namespace fdiff
