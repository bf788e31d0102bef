#include "fdiff/moments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "fdiff/integrate.hpp"
#include "fdiff/observables.hpp"
#include "fdiff/propagator.hpp"

namespace fdiff {

struct MomentSystem::Descriptor {
  enum Kind { A, F, X, NFF, NAA } kind;
  std::array<int, 4> idx{0, 0, 0, 0};

  OpString ops() const {
    switch (kind) {
      case A:
        return {cdag(idx[0]), c(idx[1])};
      case F:
        return {bdag(idx[0]), b(idx[1])};
      case X:
        return {bdag(idx[0]), b(idx[1]), cdag(idx[2]), c(idx[3])};
      case NFF:
        return {bdag(idx[0]), bdag(idx[1]), b(idx[2]), b(idx[3])};
      case NAA:
        return {cdag(idx[0]), cdag(idx[1]), c(idx[2]), c(idx[3])};
    }
    return {};
  }
};

struct MomentSystem::CachedTerm {
  cplx coeff;
  // Every equation-of-motion term is a product of "pair blocks"
  // a^dag_m a_n / c^dag_a c_b in a definite order; the closure of a
  // three-pair product depends on that pairing, so it is preserved from
  // the derivation instead of being reconstructed from a normal-ordered
  // string.
  //   KX    <(F)(A)>            idx (m,n,a,b)
  //   GFF   <(F1)(F2)>          idx (m1,n1,m2,n2)
  //   PAA   <(A1)(A2)>          idx (a,b,c,d)
  //   CaseA <(F1)(F2)(A)>       idx (m1,n1,m2,n2,a,b)
  //   CaseB <(F)(A1)(A2)>       idx (mu,nu,a,b,c,d)
  enum Kind { Const, KA, KF, KX, GFF, PAA, CaseA, CaseB } kind = Const;
  std::array<std::int16_t, 8> idx{};
  OpString raw;  // only populated with keep_raw_strings
};

namespace {

// A single a^dag_m a_n (boson) or c^dag_m c_n (fermion) block.
struct PairOp {
  bool boson;
  int m, n;
};

// Operator product: field pair blocks, then fermion pair blocks (the two
// statistics commute), each list in operator order.
struct PairTerm {
  cplx coeff;
  std::vector<PairOp> fld;
  std::vector<PairOp> frm;
};

// [p, q] for two same-statistics pairs: delta_{nq.m} (p.m,q.n) -
// delta_{p.m,q.n} (q.m,p.n).  Identical rule for bosons and fermion
// bilinears.
std::vector<std::pair<double, PairOp>> pair_comm(const PairOp& p,
                                                 const PairOp& q) {
  std::vector<std::pair<double, PairOp>> out;
  if (p.n == q.m) out.push_back({1.0, {p.boson, p.m, q.n}});
  if (p.m == q.n) out.push_back({-1.0, {p.boson, q.m, p.n}});
  return out;
}

// [B, h] for an ordered block of pairs and a single pair: Leibniz rule,
// replacing one pair at a time so the block order is preserved.
std::vector<std::pair<double, std::vector<PairOp>>> block_comm(
    const std::vector<PairOp>& blk, const PairOp& h) {
  std::vector<std::pair<double, std::vector<PairOp>>> out;
  for (std::size_t i = 0; i < blk.size(); ++i)
    for (const auto& [s, p] : pair_comm(blk[i], h)) {
      auto v = blk;
      v[i] = p;
      out.push_back({s, v});
    }
  return out;
}

// [M, H] for pair-block terms with H holding at most one pair of each
// statistics.  With M = Bf Mf and H = Bh Ah (field blocks left, the two
// statistics commuting):  [M, H] = Bf Bh [Mf, Ah] + [Bf, Bh] Ah Mf.
std::vector<PairTerm> pair_commutator(const PairTerm& M, const PairTerm& H) {
  std::vector<PairTerm> out;
  cplx w = M.coeff * H.coeff;
  if (!H.frm.empty()) {
    for (auto& [s, blk] : block_comm(M.frm, H.frm[0])) {
      PairTerm t{w * s, M.fld, std::move(blk)};
      t.fld.insert(t.fld.end(), H.fld.begin(), H.fld.end());
      out.push_back(std::move(t));
    }
  }
  if (!H.fld.empty()) {
    for (auto& [s, blk] : block_comm(M.fld, H.fld[0])) {
      PairTerm t{w * s, std::move(blk), H.frm};
      t.frm.insert(t.frm.end(), M.frm.begin(), M.frm.end());
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<int> pair_key(const PairTerm& t) {
  std::vector<int> k;
  for (const PairOp& p : t.fld) k.push_back((p.m << 10) | p.n);
  k.push_back(-1);
  for (const PairOp& p : t.frm) k.push_back((p.m << 10) | p.n);
  return k;
}

}  // namespace

MomentSystem::~MomentSystem() = default;

int MomentSystem::n_vars() const {
  return static_cast<int>(descriptors_.size());
}

MomentSystem::MomentSystem(const ModeTable& table,
                           const SimulationConfig& config, ClosureOrder order,
                           bool keep_raw_strings)
    : table_(table),
      config_(config),
      order_(order),
      running_wave_(config.quantization == Quantization::RunningWave) {
  nm_ = table_.n_modes();
  if (!running_wave_) sw_photon_number_ = config.field.photons[0];

  // Hamiltonian operator strings.
  for (int k = 0; k < nm_; ++k) {
    double ek = config_.kinetic_energy(table_.mode_momenta[k]);
    if (ek == 0.0) continue;
    hamiltonian_.push_back({cdag(k), c(k)});
    ham_coeff_.push_back(ek);
  }
  for (int up = 0; up < nm_; ++up) {
    int lo = table_.shifted(up, -1);
    if (lo < 0) continue;
    if (running_wave_) {
      hamiltonian_.push_back({bdag(0), b(1), cdag(lo), c(up)});
      ham_coeff_.push_back(config_.g);
      hamiltonian_.push_back({bdag(1), b(0), cdag(up), c(lo)});
      ham_coeff_.push_back(config_.g);
    } else {
      double w = config_.g * sw_photon_number_ / 2.0;
      hamiltonian_.push_back({cdag(lo), c(up)});
      ham_coeff_.push_back(w);
      hamiltonian_.push_back({cdag(up), c(lo)});
      ham_coeff_.push_back(w);
    }
  }

  register_moments();
  derive_equations(keep_raw_strings);
}

void MomentSystem::register_moments() {
  auto add = [&](Descriptor::Kind kind, std::array<int, 4> idx) {
    descriptors_.push_back({kind, idx});
    return static_cast<int>(descriptors_.size()) - 1;
  };

  a_lookup_.assign(std::size_t(nm_) * nm_, {});
  for (int k1 = 0; k1 < nm_; ++k1)
    for (int k2 = k1; k2 < nm_; ++k2) {
      int pos = add(Descriptor::A, {k1, k2, 0, 0});
      a_lookup_[std::size_t(k1) * nm_ + k2] = {pos, false, 1.0};
      a_lookup_[std::size_t(k2) * nm_ + k1] = {pos, k1 != k2, 1.0};
    }

  if (running_wave_) {
    f_lookup_.assign(4, {});
    for (int m = 0; m < 2; ++m)
      for (int n = m; n < 2; ++n) {
        int pos = add(Descriptor::F, {m, n, 0, 0});
        f_lookup_[std::size_t(m) * 2 + n] = {pos, false, 1.0};
        f_lookup_[std::size_t(n) * 2 + m] = {pos, m != n, 1.0};
      }
  }

  if (!running_wave_ || order_ == ClosureOrder::First) return;

  // X(mu, nu, a, b); Hermitian partner (nu, mu, b, a).
  x_lookup_.assign(std::size_t(4) * nm_ * nm_, {});
  auto xflat = [&](int m, int n, int a, int b) {
    return ((std::size_t(m) * 2 + n) * nm_ + a) * nm_ + b;
  };
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n)
      for (int a = 0; a < nm_; ++a)
        for (int bb = 0; bb < nm_; ++bb) {
          if (x_lookup_[xflat(m, n, a, bb)].pos >= 0) continue;
          int pos = add(Descriptor::X, {m, n, a, bb});
          bool self = (m == n && a == bb);
          x_lookup_[xflat(m, n, a, bb)] = {pos, false, 1.0};
          if (!self) x_lookup_[xflat(n, m, bb, a)] = {pos, true, 1.0};
        }

  // NFF(m1, m2 | n1, n2), symmetric within each pair; Hermitian partner
  // swaps the pairs.
  nff_lookup_.assign(16, {});
  auto nffflat = [&](int m1, int m2, int n1, int n2) {
    return std::size_t(((m1 * 2 + m2) * 2 + n1) * 2 + n2);
  };
  for (int m1 = 0; m1 < 2; ++m1)
    for (int m2 = m1; m2 < 2; ++m2)
      for (int n1 = 0; n1 < 2; ++n1)
        for (int n2 = n1; n2 < 2; ++n2) {
          if (nff_lookup_[nffflat(m1, m2, n1, n2)].pos >= 0) continue;
          int pos = add(Descriptor::NFF, {m1, m2, n1, n2});
          bool self = (m1 == n1 && m2 == n2);
          for (auto [p1, p2] : {std::pair{m1, m2}, std::pair{m2, m1}})
            for (auto [q1, q2] : {std::pair{n1, n2}, std::pair{n2, n1}}) {
              nff_lookup_[nffflat(p1, p2, q1, q2)] = {pos, false, 1.0};
              if (!self)
                nff_lookup_[nffflat(q1, q2, p1, p2)] = {pos, true, 1.0};
            }
        }

  // NAA(a, b | c, d) = <c^dag_a c^dag_b c_c c_d>, antisymmetric within
  // each pair; Hermitian partner NAA(c, d | a, b).
  naa_lookup_.assign(std::size_t(nm_) * nm_ * nm_ * nm_, {});
  auto naaflat = [&](int a, int bb, int cc, int d) {
    return ((std::size_t(a) * nm_ + bb) * nm_ + cc) * nm_ + d;
  };
  auto set_naa = [&](int a, int bb, int cc, int d, Entry e) {
    naa_lookup_[naaflat(a, bb, cc, d)] = e;
    naa_lookup_[naaflat(bb, a, cc, d)] = {e.pos, e.conj, -e.sign};
    naa_lookup_[naaflat(a, bb, d, cc)] = {e.pos, e.conj, -e.sign};
    naa_lookup_[naaflat(bb, a, d, cc)] = e;
  };
  for (int a = 0; a < nm_; ++a)
    for (int bb = a + 1; bb < nm_; ++bb)
      for (int cc = 0; cc < nm_; ++cc)
        for (int d = cc + 1; d < nm_; ++d) {
          if (std::pair(a, bb) > std::pair(cc, d)) continue;
          int pos = add(Descriptor::NAA, {a, bb, cc, d});
          bool self = (a == cc && bb == d);
          set_naa(a, bb, cc, d, {pos, false, 1.0});
          if (!self) set_naa(cc, d, a, bb, {pos, true, 1.0});
        }
}

void MomentSystem::derive_equations(bool keep_raw) {
  const cplx minus_i(0.0, -1.0);

  // Hamiltonian terms in pair-block form.
  std::vector<PairTerm> hterms;
  for (std::size_t hi = 0; hi < hamiltonian_.size(); ++hi) {
    PairTerm h{ham_coeff_[hi], {}, {}};
    const OpString& ops = hamiltonian_[hi];
    for (std::size_t i = 0; i + 1 < ops.size(); i += 2)
      (ops[i].boson ? h.fld : h.frm)
          .push_back({ops[i].boson, ops[i].mode, ops[i + 1].mode});
    hterms.push_back(std::move(h));
  }

  term_range_.resize(descriptors_.size());
  for (std::size_t di = 0; di < descriptors_.size(); ++di) {
    // Express the stored variable as a sum of pair-block operators.
    const Descriptor& d = descriptors_[di];
    const auto& i = d.idx;
    std::vector<PairTerm> parts;
    switch (d.kind) {
      case Descriptor::A:
        parts.push_back({1.0, {}, {{false, i[0], i[1]}}});
        break;
      case Descriptor::F:
        parts.push_back({1.0, {{true, i[0], i[1]}}, {}});
        break;
      case Descriptor::X:
        parts.push_back({1.0, {{true, i[0], i[1]}}, {{false, i[2], i[3]}}});
        break;
      case Descriptor::NFF:
        // <a+_{m1} a+_{m2} a_{n1} a_{n2}>
        //   = (a+_{m1} a_{n1})(a+_{m2} a_{n2}) - delta_{n1 m2} a+_{m1} a_{n2}
        parts.push_back(
            {1.0, {{true, i[0], i[2]}, {true, i[1], i[3]}}, {}});
        if (i[2] == i[1]) parts.push_back({-1.0, {{true, i[0], i[3]}}, {}});
        break;
      case Descriptor::NAA:
        // <c+_a c+_b c_c c_d>
        //   = delta_{bc} c+_a c_d - (c+_a c_c)(c+_b c_d)
        parts.push_back(
            {-1.0, {}, {{false, i[0], i[2]}, {false, i[1], i[3]}}});
        if (i[1] == i[2]) parts.push_back({1.0, {}, {{false, i[0], i[3]}}});
        break;
    }

    std::map<std::vector<int>, PairTerm> combined;
    for (const PairTerm& part : parts)
      for (const PairTerm& h : hterms)
        for (PairTerm& r : pair_commutator(part, h)) {
          r.coeff *= minus_i;
          auto key = pair_key(r);
          auto it = combined.find(key);
          if (it == combined.end())
            combined.emplace(std::move(key), std::move(r));
          else
            it->second.coeff += r.coeff;
        }

    int first = static_cast<int>(terms_.size());
    for (auto& [key, r] : combined) {
      if (std::abs(r.coeff) < 1e-13) continue;
      std::size_t nf = r.fld.size(), na = r.frm.size();
      if (nf > 2 || na > 2 || nf + na == 0 || nf + na > 3)
        throw std::logic_error("unexpected term shape in moment equations");

      CachedTerm t;
      t.coeff = r.coeff;
      if (keep_raw) {
        for (const PairOp& p : r.fld) {
          t.raw.push_back(bdag(p.m));
          t.raw.push_back(b(p.n));
        }
        for (const PairOp& p : r.frm) {
          t.raw.push_back(cdag(p.m));
          t.raw.push_back(c(p.n));
        }
      }
      auto i16 = [](int v) { return static_cast<std::int16_t>(v); };
      std::array<std::int16_t, 8> ix{};
      int w = 0;
      for (const PairOp& p : r.fld) {
        ix[w++] = i16(p.m);
        ix[w++] = i16(p.n);
      }
      for (const PairOp& p : r.frm) {
        ix[w++] = i16(p.m);
        ix[w++] = i16(p.n);
      }
      t.idx = ix;
      if (nf == 1 && na == 0)
        t.kind = CachedTerm::KF;
      else if (nf == 0 && na == 1)
        t.kind = CachedTerm::KA;
      else if (nf == 1 && na == 1)
        t.kind = CachedTerm::KX;
      else if (nf == 2 && na == 0)
        t.kind = CachedTerm::GFF;
      else if (nf == 0 && na == 2)
        t.kind = CachedTerm::PAA;
      else if (nf == 2 && na == 1)
        t.kind = CachedTerm::CaseA;
      else
        t.kind = CachedTerm::CaseB;
      terms_.push_back(std::move(t));
    }
    term_range_[di] = {first, static_cast<int>(terms_.size())};
  }
}

cplx MomentSystem::get(const std::vector<Entry>& lut, std::size_t flat,
                       const Eigen::VectorXcd& y) const {
  const Entry& e = lut[flat];
  if (e.pos < 0) return 0.0;
  cplx v = y[e.pos];
  if (e.conj) v = std::conj(v);
  return e.sign * v;
}

cplx MomentSystem::atom_moment(const Eigen::VectorXcd& y, int k1,
                               int k2) const {
  return get(a_lookup_, std::size_t(k1) * nm_ + k2, y);
}

cplx MomentSystem::field_moment(const Eigen::VectorXcd& y, int q1,
                                int q2) const {
  if (!running_wave_) throw SolverMismatchError("no field moments (sw)");
  return get(f_lookup_, std::size_t(q1) * 2 + q2, y);
}

cplx MomentSystem::cross_moment(const Eigen::VectorXcd& y, int q1, int q2,
                                int k1, int k2) const {
  if (order_ == ClosureOrder::First || !running_wave_)
    return field_moment(y, q1, q2) * atom_moment(y, k1, k2);
  return get(x_lookup_, ((std::size_t(q1) * 2 + q2) * nm_ + k1) * nm_ + k2,
             y);
}

double MomentSystem::occupation(const Eigen::VectorXcd& y, int mode) const {
  return std::real(atom_moment(y, mode, mode));
}

double MomentSystem::atom_trace(const Eigen::VectorXcd& y) const {
  double tr = 0.0;
  for (int k = 0; k < nm_; ++k) tr += occupation(y, k);
  return tr;
}

cplx MomentSystem::chi(const Eigen::VectorXcd& y) const {
  if (!running_wave_)
    throw SolverMismatchError("chi is defined for the running wave");
  cplx total = 0.0;
  for (int up = 0; up < nm_; ++up) {
    int lo = table_.shifted(up, -1);
    if (lo < 0) continue;
    total += cross_moment(y, 0, 1, lo, up) -
             field_moment(y, 0, 1) * atom_moment(y, lo, up);
  }
  return total;
}

cplx MomentSystem::pair3_boson(const Eigen::VectorXcd& y, int m1, int n1,
                               int m2, int n2, int a, int bb) const {
  cplx f1 = field_moment(y, m1, n1);
  cplx f2 = field_moment(y, m2, n2);
  cplx av = atom_moment(y, a, bb);
  cplx ffpair =
      get(nff_lookup_, std::size_t(((m1 * 2 + m2) * 2 + n1) * 2 + n2), y);
  if (n1 == m2) ffpair += field_moment(y, m1, n2);
  return f1 * cross_moment(y, m2, n2, a, bb) + ffpair * av +
         cross_moment(y, m1, n1, a, bb) * f2 - 2.0 * f1 * f2 * av;
}

cplx MomentSystem::pair3_fermion(const Eigen::VectorXcd& y, int mu, int nu,
                                 int a, int bb, int cc, int d) const {
  cplx a1 = atom_moment(y, a, bb);
  cplx a2 = atom_moment(y, cc, d);
  cplx fv = field_moment(y, mu, nu);
  cplx aapair =
      -get(naa_lookup_, ((std::size_t(a) * nm_ + cc) * nm_ + bb) * nm_ + d,
           y);
  if (bb == cc) aapair += atom_moment(y, a, d);
  return a1 * cross_moment(y, mu, nu, cc, d) + aapair * fv +
         cross_moment(y, mu, nu, a, bb) * a2 - 2.0 * a1 * a2 * fv;
}

cplx MomentSystem::eval_term(const CachedTerm& t,
                             const Eigen::VectorXcd& y) const {
  const auto& i = t.idx;
  switch (t.kind) {
    case CachedTerm::Const:
      return t.coeff;
    case CachedTerm::KA:
      return t.coeff * atom_moment(y, i[0], i[1]);
    case CachedTerm::KF:
      return t.coeff * field_moment(y, i[0], i[1]);
    case CachedTerm::KX:
      return t.coeff * cross_moment(y, i[0], i[1], i[2], i[3]);
    case CachedTerm::GFF: {
      // <(a+_{m1} a_{n1})(a+_{m2} a_{n2})>, exact via the stored
      // normal-ordered moment.
      cplx v = get(nff_lookup_,
                   std::size_t(((i[0] * 2 + i[2]) * 2 + i[1]) * 2 + i[3]), y);
      if (i[1] == i[2]) v += field_moment(y, i[0], i[3]);
      return t.coeff * v;
    }
    case CachedTerm::PAA: {
      // <(c+_a c_b)(c+_c c_d)>, exact via the stored moment.
      cplx v = -get(naa_lookup_,
                    ((std::size_t(i[0]) * nm_ + i[2]) * nm_ + i[1]) * nm_ +
                        i[3],
                    y);
      if (i[1] == i[2]) v += atom_moment(y, i[0], i[3]);
      return t.coeff * v;
    }
    case CachedTerm::CaseA:
      // <(F1)(F2)(A)> under the pair closure.
      return t.coeff * pair3_boson(y, i[0], i[1], i[2], i[3], i[4], i[5]);
    case CachedTerm::CaseB:
      // <(F)(A1)(A2)> under the pair closure.
      return t.coeff * pair3_fermion(y, i[0], i[1], i[2], i[3], i[4], i[5]);
  }
  return 0.0;
}

void MomentSystem::rhs(const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) const {
  dy.resize(n_vars());
  for (std::size_t di = 0; di < descriptors_.size(); ++di) {
    if ((freeze_nff && descriptors_[di].kind == Descriptor::NFF) ||
        (freeze_naa && descriptors_[di].kind == Descriptor::NAA)) {
      dy[static_cast<Eigen::Index>(di)] = 0.0;
      continue;
    }
    cplx acc = 0.0;
    auto [first, last] = term_range_[di];
    for (int ti = first; ti < last; ++ti) acc += eval_term(terms_[ti], y);
    dy[static_cast<Eigen::Index>(di)] = acc;
  }
}

Eigen::VectorXcd MomentSystem::rhs_exact_on_state(const Basis& basis,
                                                  const StateVector& psi)
    const {
  Eigen::VectorXcd dy(n_vars());
  for (std::size_t di = 0; di < descriptors_.size(); ++di) {
    cplx acc = 0.0;
    auto [first, last] = term_range_[di];
    for (int ti = first; ti < last; ++ti) {
      const CachedTerm& t = terms_[ti];
      if (t.raw.empty() && t.kind != CachedTerm::Const)
        throw std::logic_error(
            "rhs_exact_on_state requires keep_raw_strings");
      acc += t.kind == CachedTerm::Const
                 ? t.coeff
                 : t.coeff * opstring_expectation(basis, t.raw, psi);
    }
    dy[static_cast<Eigen::Index>(di)] = acc;
  }
  return dy;
}

Eigen::VectorXcd MomentSystem::moments_from_state(const Basis& basis,
                                                  const StateVector& psi)
    const {
  Eigen::VectorXcd y(n_vars());
  for (std::size_t di = 0; di < descriptors_.size(); ++di)
    y[static_cast<Eigen::Index>(di)] =
        opstring_expectation(basis, descriptors_[di].ops(), psi);
  return y;
}

Eigen::VectorXcd MomentSystem::init_moments() const {
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n_vars());
  std::vector<double> f(nm_, 0.0);
  for (int atom = 0; atom < table_.Na; ++atom)
    f[table_.base_mode(atom)] = 1.0;

  std::array<cplx, 2> alpha{0.0, 0.0};
  std::array<double, 2> nbar{config_.field.photons[0],
                             config_.field.photons[1]};
  if (!running_wave_) nbar[1] = 0.0;
  bool coherent = config_.field.kind == FieldKind::Coherent;
  if (coherent)
    for (int m = 0; m < 2; ++m)
      alpha[m] = std::sqrt(nbar[m]) *
                 std::exp(cplx(0.0, config_.field.phases[m]));

  auto fval = [&](int m, int n) -> cplx {
    if (coherent) return std::conj(alpha[m]) * alpha[n];
    return m == n ? cplx(nbar[m]) : cplx(0.0);
  };

  for (std::size_t di = 0; di < descriptors_.size(); ++di) {
    const Descriptor& d = descriptors_[di];
    const auto& i = d.idx;
    cplx v = 0.0;
    switch (d.kind) {
      case Descriptor::A:
        v = (i[0] == i[1]) ? f[i[0]] : 0.0;
        break;
      case Descriptor::F:
        v = fval(i[0], i[1]);
        break;
      case Descriptor::X:
        v = fval(i[0], i[1]) * ((i[2] == i[3]) ? f[i[2]] : 0.0);
        break;
      case Descriptor::NFF:
        if (coherent) {
          v = std::conj(alpha[i[0]] * alpha[i[1]]) * alpha[i[2]] * alpha[i[3]];
        } else if (i[0] == i[1]) {
          if (i[2] == i[0] && i[3] == i[0]) v = nbar[i[0]] * (nbar[i[0]] - 1);
        } else if (std::minmax(i[2], i[3]) == std::minmax(i[0], i[1])) {
          v = nbar[0] * nbar[1];
        }
        break;
      case Descriptor::NAA: {
        double w = f[i[0]] * f[i[1]];
        if (i[0] == i[3] && i[1] == i[2]) v += w;
        if (i[0] == i[2] && i[1] == i[3]) v -= w;
        break;
      }
    }
    y[static_cast<Eigen::Index>(di)] = v;
  }
  return y;
}

MomentTrajectory integrate_moments(const MomentSystem& sys,
                                   const Eigen::VectorXcd& m0,
                                   const std::vector<double>& times,
                                   double tol) {
  MomentTrajectory out;
  out.states.reserve(times.size());
  double trace0 = sys.atom_trace(m0);
  std::function<void(double, const Eigen::VectorXcd&, Eigen::VectorXcd&)>
      rhs = [&](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        sys.rhs(y, dy);
      };
  std::function<void(std::size_t, double, const Eigen::VectorXcd&)>
      on_sample = [&](std::size_t, double t, const Eigen::VectorXcd& y) {
        out.times.push_back(t);
        out.states.push_back(y);
        for (int k = 0; k < sys.table().n_modes(); ++k) {
          double occ = sys.occupation(y, k);
          out.min_occupation = std::min(out.min_occupation, occ);
          if (occ < -1e-9 && !out.first_negative_occupation_time)
            out.first_negative_occupation_time = t;
        }
        out.max_trace_drift = std::max(out.max_trace_drift,
                                       std::abs(sys.atom_trace(y) - trace0));
      };
  try {
    integrate_adaptive<Eigen::VectorXcd>(rhs, m0, times, tol, on_sample);
  } catch (const NumericalError&) {
    // The truncated hierarchy can blow up once correlations grow; keep
    // whatever portion of the trajectory was reached and flag it.
    out.truncated = true;
  }
  return out;
}

FactorizationReport factorization_diagnostics(const SimulationConfig& config,
                                              const std::vector<double>& times,
                                              ThirdOrderChannel which,
                                              int mode) {
  if (config.quantization != Quantization::RunningWave)
    throw SolverMismatchError(
        "factorization diagnostics require the running wave");
  ModeTable table = build_mode_table(config);
  QuantumState qs = initial_state(table, config);

  std::vector<Trajectory> trajs;
  trajs.reserve(qs.sectors.size());
  for (const auto& sec : qs.sectors) {
    SparseOperator H = build_hamiltonian(sec.basis, table, config);
    trajs.push_back(propagate(H, sec.amps, times));
  }

  auto at_time = [&](std::size_t ti) {
    QuantumState snap = qs;
    for (std::size_t s = 0; s < snap.sectors.size(); ++s)
      snap.sectors[s].amps = trajs[s].states[ti];
    return snap;
  };

  FactorizationReport rep;
  rep.times = times;
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    QuantumState snap = at_time(ti);
    auto ev = [&](const OpString& ops) { return expectation(snap, ops); };
    cplx A = ev({cdag(mode), c(mode)});
    double exact, fact;
    if (which == ThirdOrderChannel::FieldFieldAtom) {
      exact = std::real(third_order_exact(snap, table,
                                          ThirdOrderKind::FieldFieldAtom,
                                          mode));
      cplx f10 = ev({bdag(1), b(0)});
      cplx f01 = ev({bdag(0), b(1)});
      cplx x01 = ev({bdag(0), b(1), cdag(mode), c(mode)});
      cplx x10 = ev({bdag(1), b(0), cdag(mode), c(mode)});
      cplx ff = ev({bdag(1), b(0), bdag(0), b(1)});
      fact = std::real(f10 * x01 + ff * A + x10 * f01 - 2.0 * f10 * f01 * A);
    } else {
      exact = std::real(third_order_exact(snap, table,
                                          ThirdOrderKind::FieldAtomAtom,
                                          mode));
      cplx f00 = ev({bdag(0), b(0)});
      cplx x00 = ev({bdag(0), b(0), cdag(mode), c(mode)});
      cplx nn = A;  // <n_k n_k> = <n_k> for fermions
      fact = std::real(A * x00 + nn * f00 + x00 * A - 2.0 * A * A * f00);
    }
    rep.exact.push_back(exact);
    rep.factorized.push_back(fact);
    rep.abs_error.push_back(std::abs(exact - fact));
  }
  return rep;
}

}  // namespace fdiff
