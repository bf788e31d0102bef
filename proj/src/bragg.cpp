#include "fdiff/bragg.hpp"

#include <cmath>

#include "fdiff/hamiltonian.hpp"
#include "fdiff/integrate.hpp"

namespace fdiff {

std::vector<double> BraggConfig::fermi_grid() const {
  std::vector<double> k(Na);
  if (Na == 1) {
    k[0] = 0.0;
  } else {
    for (int i = 0; i < Na; ++i) k[i] = -kF + 2.0 * kF * i / (Na - 1);
  }
  return k;
}

std::vector<double> BraggConfig::detunings() const {
  std::vector<double> d = fermi_grid();
  for (double& k : d) k *= E2q;
  return d;
}

BraggConfig BraggConfig::from(const SimulationConfig& cfg) {
  BraggConfig b;
  b.Na = cfg.Na;
  b.kF = cfg.kF;
  b.E2q = cfg.E2q;
  b.g = cfg.g;
  b.field = cfg.field;
  return b;
}

SparseOperator build_bragg_hamiltonian_rw(const BraggConfig& cfg,
                                          const SchwingerSector& sector) {
  std::vector<double> delta = cfg.detunings();
  double j = sector.j();
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int mi = 0; mi < sector.n_m(); ++mi) {
    double m = mi - j;
    for (int word = 0; word < (1 << sector.Na); ++word) {
      int col = sector.index(mi, word);
      double diag = 0.0;
      for (int k = 0; k < sector.Na; ++k)
        diag += delta[k] * (((word >> k) & 1) ? 0.5 : -0.5);
      trip.emplace_back(col, col, diag);
      for (int k = 0; k < sector.Na; ++k) {
        if ((word >> k) & 1) {
          // g J^+ S_k^-: photon-difference up, atom back down.
          if (mi + 1 < sector.n_m())
            trip.emplace_back(sector.index(mi + 1, word & ~(1 << k)), col,
                              cfg.g * j_plus_element(j, m));
        } else {
          // g J^- S_k^+
          if (mi - 1 >= 0)
            trip.emplace_back(sector.index(mi - 1, word | (1 << k)), col,
                              cfg.g * j_plus_element(j, m - 1.0));
        }
      }
    }
  }
  return SparseOperator::from_triplets(sector.dim(), trip, true);
}

std::vector<Eigen::Matrix2cd> build_bragg_hamiltonian_sw(
    const BraggConfig& cfg, int N) {
  std::vector<double> delta = cfg.detunings();
  std::vector<Eigen::Matrix2cd> blocks(cfg.Na);
  for (int k = 0; k < cfg.Na; ++k) {
    Eigen::Matrix2cd h;
    // Basis {lower, upper}: S^z = diag(-1/2, +1/2).
    h << -delta[k] / 2.0, cfg.g * N / 2.0, cfg.g * N / 2.0,
        delta[k] / 2.0;
    blocks[k] = h;
  }
  return blocks;
}

SchwingerState initial_schwinger_state(const BraggConfig& cfg) {
  SchwingerState st;
  if (cfg.field.kind == FieldKind::Fock) {
    int nq = static_cast<int>(cfg.field.photons[0]);
    int nmq = static_cast<int>(cfg.field.photons[1]);
    SchwingerSectorState sec;
    sec.sector = {nq + nmq, cfg.Na};
    sec.amps = StateVector::Zero(sec.sector.dim());
    sec.amps[sec.sector.index(nq, 0)] = 1.0;
    st.sectors.push_back(std::move(sec));
    return st;
  }
  double ntot = cfg.field.photons[0] + cfg.field.photons[1];
  auto [lo, hi] = poisson_window(ntot, cfg.field.truncation_epsilon);
  cplx aq = std::sqrt(cfg.field.photons[0]) *
            std::exp(cplx(0.0, cfg.field.phases[0]));
  cplx amq = std::sqrt(cfg.field.photons[1]) *
             std::exp(cplx(0.0, cfg.field.phases[1]));
  double mass = 0.0;
  std::vector<double> w(hi - lo + 1);
  for (int n = lo; n <= hi; ++n) {
    w[n - lo] = std::exp(-ntot + n * std::log(std::max(ntot, 1e-300)) -
                         std::lgamma(n + 1.0));
    mass += w[n - lo];
  }
  for (int n = lo; n <= hi; ++n) {
    SchwingerSectorState sec;
    sec.weight = w[n - lo] / mass;
    sec.sector = {n, cfg.Na};
    sec.amps = StateVector::Zero(sec.sector.dim());
    double norm2 = 0.0;
    std::vector<cplx> amp(n + 1);
    for (int nq = 0; nq <= n; ++nq) {
      amp[nq] = std::pow(aq, nq) * std::pow(amq, n - nq) /
                std::sqrt(std::exp(std::lgamma(nq + 1.0) +
                                   std::lgamma(n - nq + 1.0)));
      norm2 += std::norm(amp[nq]);
    }
    for (int nq = 0; nq <= n; ++nq)
      sec.amps[sec.sector.index(nq, 0)] = amp[nq] / std::sqrt(norm2);
    st.sectors.push_back(std::move(sec));
  }
  return st;
}

std::vector<std::tuple<int, int, double>> fock_average_weights(
    const FieldSpec& field) {
  auto [lo_q, hi_q] = poisson_window(field.photons[0],
                                     field.truncation_epsilon);
  auto [lo_m, hi_m] = poisson_window(field.photons[1],
                                     field.truncation_epsilon);
  auto pmf = [](double nbar, int n) {
    if (nbar <= 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(-nbar + n * std::log(nbar) - std::lgamma(n + 1.0));
  };
  std::vector<std::tuple<int, int, double>> out;
  double mass = 0.0;
  for (int nq = lo_q; nq <= hi_q; ++nq)
    for (int nm = lo_m; nm <= hi_m; ++nm) {
      double w = pmf(field.photons[0], nq) * pmf(field.photons[1], nm);
      out.emplace_back(nq, nm, w);
      mass += w;
    }
  for (auto& [nq, nm, w] : out) w /= mass;
  return out;
}

double schwinger_atom_scattered(const SchwingerState& st, int atom) {
  double acc = 0.0;
  for (const auto& sec : st.sectors) {
    double p = 0.0;
    for (int i = 0; i < sec.sector.dim(); ++i)
      if ((i >> atom) & 1) p += std::norm(sec.amps[i]);
    acc += sec.weight * p;
  }
  return acc;
}

double schwinger_n_scattered(const SchwingerState& st) {
  double acc = 0.0;
  if (st.sectors.empty()) return 0.0;
  for (int atom = 0; atom < st.sectors.front().sector.Na; ++atom)
    acc += schwinger_atom_scattered(st, atom);
  return acc;
}

double analytic_sw_fock_P(double delta_omega, int N, double g, double t) {
  if (N < 0) throw ConfigError("photon number must be >= 0");
  double omega = g * N / 2.0;
  double gen = std::sqrt(omega * omega +
                         delta_omega * delta_omega / 4.0);
  if (gen == 0.0) return 0.0;
  double s = std::sin(gen * t);
  return (omega * omega) / (gen * gen) * s * s;
}

double analytic_sw_fock_nsc(const BraggConfig& cfg, int N, double t) {
  double acc = 0.0;
  for (double d : cfg.detunings())
    acc += analytic_sw_fock_P(d, N, cfg.g, t);
  return acc;
}

double j_plus_element(double j, double m) {
  if (std::abs(m) > j + 1e-12) throw std::out_of_range("|m| > j");
  return std::sqrt((j + m + 1.0) * (j - m));
}

double t_decay(double j, double g) {
  if (j < 1.0) throw ConfigError("t_decay requires j >= 1");
  return 2.0 * kPi / g /
         (std::sqrt((j + 1.0) * j) - std::sqrt(2.0 * j));
}

double t_revival(double j, double g) {
  if (j < 1.0) throw ConfigError("t_revival requires j >= 1");
  return 2.0 * kPi / g /
         (std::sqrt((j + 1.0) * j) - std::sqrt((j + 2.0) * (j - 1.0)));
}

BlochState initial_bloch_state(const BraggConfig& cfg) {
  BlochState s;
  s.spins.assign(cfg.Na, Eigen::Vector3d(0.0, 0.0, -0.5));
  if (cfg.field.kind == FieldKind::Fock) {
    s.field = Eigen::Vector3d(
        0.0, 0.0, (cfg.field.photons[0] - cfg.field.photons[1]) / 2.0);
  } else {
    cplx jplus = std::sqrt(cfg.field.photons[0] * cfg.field.photons[1]) *
                 std::exp(cplx(0.0, cfg.field.phases[0] -
                                        cfg.field.phases[1]));
    s.field = Eigen::Vector3d(
        jplus.real(), jplus.imag(),
        (cfg.field.photons[0] - cfg.field.photons[1]) / 2.0);
  }
  return s;
}

BlochState bloch_rhs(const BlochState& state, const BraggConfig& cfg) {
  std::vector<double> delta = cfg.detunings();
  BlochState d;
  d.spins.resize(state.spins.size());
  Eigen::Vector3d stot = Eigen::Vector3d::Zero();
  for (const auto& s : state.spins) stot += s;
  Eigen::Vector3d s_perp(stot.x(), stot.y(), 0.0);
  d.field = cfg.g * s_perp.cross(state.field);
  Eigen::Vector3d j_perp(state.field.x(), state.field.y(), 0.0);
  for (std::size_t k = 0; k < state.spins.size(); ++k) {
    Eigen::Vector3d axis = delta[k] * Eigen::Vector3d::UnitZ() +
                           cfg.g * j_perp;
    d.spins[k] = axis.cross(state.spins[k]);
  }
  return d;
}

namespace {

Eigen::VectorXd pack(const BlochState& s) {
  Eigen::VectorXd v(3 * s.spins.size() + 3);
  for (std::size_t k = 0; k < s.spins.size(); ++k)
    v.segment<3>(3 * k) = s.spins[k];
  v.tail<3>() = s.field;
  return v;
}

BlochState unpack(const Eigen::VectorXd& v, int Na) {
  BlochState s;
  s.spins.resize(Na);
  for (int k = 0; k < Na; ++k) s.spins[k] = v.segment<3>(3 * k);
  s.field = v.tail<3>();
  return s;
}

}  // namespace

BlochTrajectory integrate_bloch(const BlochState& s0,
                                const BraggConfig& cfg,
                                const std::vector<double>& times,
                                double tol) {
  BlochTrajectory traj;
  traj.times = times;
  std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>
      rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy = pack(bloch_rhs(unpack(y, cfg.Na), cfg));
      };
  integrate_adaptive<Eigen::VectorXd>(
      rhs, pack(s0), times, tol,
      [&](std::size_t, double, const Eigen::VectorXd& y) {
        traj.states.push_back(unpack(y, cfg.Na));
      });
  return traj;
}

double EnvelopeAnalysis::value_at(double t) const {
  if (maxima.empty()) return 0.0;
  if (t <= maxima.front().first) return maxima.front().second;
  if (t >= maxima.back().first) return maxima.back().second;
  for (std::size_t i = 1; i < maxima.size(); ++i) {
    if (t <= maxima[i].first) {
      auto [t0, v0] = maxima[i - 1];
      auto [t1, v1] = maxima[i];
      return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
  }
  return maxima.back().second;
}

EnvelopeAnalysis analyze_envelope(const std::vector<double>& times,
                                  const std::vector<double>& values) {
  EnvelopeAnalysis out;
  for (std::size_t i = 1; i + 1 < values.size(); ++i)
    if (values[i] >= values[i - 1] && values[i] >= values[i + 1])
      out.maxima.emplace_back(times[i], values[i]);
  if (out.maxima.empty()) return out;
  out.initial_amplitude = out.maxima.front().second;

  double amp0 = out.initial_amplitude;
  out.floor = amp0;
  for (const auto& [t, v] : out.maxima) out.floor = std::min(out.floor, v);

  double collapse_level = out.floor + (amp0 - out.floor) / std::exp(1.0);
  std::size_t collapse_idx = 0;
  for (std::size_t i = 0; i < out.maxima.size(); ++i) {
    if (out.maxima[i].second < collapse_level) {
      out.collapse_time = out.maxima[i].first;
      collapse_idx = i;
      break;
    }
  }
  if (!out.collapse_time) return out;

  double revival_level = out.floor + 0.5 * (amp0 - out.floor);
  std::size_t revival_idx = 0;
  for (std::size_t i = collapse_idx + 1; i < out.maxima.size(); ++i) {
    if (out.maxima[i].second > revival_level) {
      out.revival_time = out.maxima[i].first;
      revival_idx = i;
      break;
    }
  }
  if (!out.revival_time) return out;

  // Peak of the first revival lobe: scan until the envelope falls back
  // below the 50% level.
  for (std::size_t i = revival_idx; i < out.maxima.size(); ++i) {
    if (out.maxima[i].second < revival_level) break;
    if (out.maxima[i].second > out.revival_peak_value) {
      out.revival_peak_value = out.maxima[i].second;
      out.revival_peak_time = out.maxima[i].first;
    }
  }
  return out;
}

}  // namespace fdiff
