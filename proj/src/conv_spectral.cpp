#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "convkernels/conv_spectral.hpp"

namespace convkernels {

namespace {

constexpr double kKeep = 1e-14;

using IMatrix = Eigen::Matrix<int64_t, Eigen::Dynamic, Eigen::Dynamic>;

IMatrix count_matrix(int d, int q, int r, int w, int D) {
  IMatrix C = IMatrix::Zero(d, d);
  for (int k = 0; k < d / D; ++k)
    for (int s = 0; s < w; ++s)
      for (int sp = 0; sp < w; ++sp)
        for (int t = 0; t <= q - r; ++t) C((k * D + s + t) % d, (k * D + sp + t) % d) += 1;
  return C;
}

std::vector<uint64_t> set_masks(const std::vector<IndexSet>& sets) {
  std::vector<uint64_t> m;
  if (!sets.empty() && sets[0].ambient_dim() > 64) return m;
  m.reserve(sets.size());
  for (const auto& s : sets) m.push_back(s.mask());
  return m;
}

struct CircMode {
  double kappa;
  int freq;
  Eigen::VectorXd v;
};

std::vector<CircMode> fourier_modes(int d, const std::vector<double>& kappa) {
  std::vector<CircMode> out;
  const double pi2 = 2 * std::numbers::pi;
  out.push_back({kappa[0], 0, Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(d))});
  for (int j = 1; 2 * j < d; ++j) {
    Eigen::VectorXd c(d), s(d);
    for (int k = 0; k < d; ++k) {
      c[k] = std::sqrt(2.0 / d) * std::cos(pi2 * j * k / d);
      s[k] = std::sqrt(2.0 / d) * std::sin(pi2 * j * k / d);
    }
    out.push_back({kappa[j], j, c});
    out.push_back({kappa[j], d - j, s});
  }
  if (d % 2 == 0) {
    Eigen::VectorXd a(d);
    for (int k = 0; k < d; ++k) a[k] = (k % 2 ? -1.0 : 1.0) / std::sqrt(d);
    out.push_back({kappa[d / 2], d / 2, a});
  }
  return out;
}

void add_constant(KernelSpectrum& sp, double lambda, int d) {
  if (lambda <= kKeep) return;
  ModeBlock b;
  b.degree = 0;
  b.translates = {IndexSet({}, d)};
  b.masks = set_masks(b.translates);
  b.basis = Eigen::MatrixXd::Ones(1, 1);
  b.eigenvalues = Eigen::VectorXd::Constant(1, lambda);
  sp.blocks.push_back(std::move(b));
  SpectralEntry e;
  e.lambda = lambda;
  e.kind = ModeKind::Constant;
  e.cls = IndexSet({}, d);
  e.block = static_cast<int>(sp.blocks.size()) - 1;
  e.column = 0;
  sp.entries.push_back(e);
}

void sort_entries(KernelSpectrum& sp) {
  std::stable_sort(sp.entries.begin(), sp.entries.end(), [](const SpectralEntry& a, const SpectralEntry& b) {
    if (a.lambda != b.lambda) return a.lambda > b.lambda;
    if (a.degree != b.degree) return a.degree < b.degree;
    if (a.cls < b.cls) return true;
    if (b.cls < a.cls) return false;
    if (a.segment != b.segment) return a.segment < b.segment;
    return a.freq < b.freq;
  });
}

// Enumerate l-subsets of [0,d) as masks (d <= 64).
template <class F>
void for_each_subset_mask(int d, int l, F&& f) {
  if (l == 0) {
    f(0ULL);
    return;
  }
  if (l > d) return;
  uint64_t v = (l == 64) ? ~0ULL : ((1ULL << l) - 1);
  const uint64_t limit = d == 64 ? 0 : (1ULL << d);
  while (true) {
    f(v);
    uint64_t t = v | (v - 1);
    uint64_t nxt = (t + 1) | (((~t & -~t) - 1) >> (__builtin_ctzll(v) + 1));
    if (nxt >= limit || nxt <= v) break;
    v = nxt;
  }
}

uint64_t rotate_set(uint64_t s, int k, int d) {
  if (k == 0) return s;
  uint64_t full = d == 64 ? ~0ULL : ((1ULL << d) - 1);
  return ((s << k) | (s >> (d - k))) & full;
}

KernelSpectrum fc_spectrum(const ConvArchitecture& arch, const InnerProductKernel& k, const SpectrumOptions& opt) {
  const int d = arch.d;
  const bool gp = arch.pooling == Pooling::Global;
  KernelSpectrum sp;
  sp.arch = arch;
  const double scale = gp ? d : 1.0;
  int64_t total = 0;
  for (int l = 1; l <= d; ++l)
    if (k.xi(l) * scale > kKeep) total += static_cast<int64_t>(binom(d, l));
  const bool expl = d <= 64 && total <= opt.max_explicit_sets;
  sp.explicit_modes = expl;
  if (expl) {
    add_constant(sp, k.xi(0) * scale, d);
  } else if (k.xi(0) * scale > kKeep) {
    add_constant(sp, k.xi(0) * scale, d);
  }
  for (int l = 1; l <= d; ++l) {
    const double lam = k.xi(l) * scale;
    if (lam <= kKeep) continue;
    if (!expl) {
      SpectralEntry e;
      e.lambda = lam;
      e.kind = gp ? ModeKind::Orbit : ModeKind::DegreeBlock;
      e.degree = l;
      e.cls = IndexSet({}, d);
      e.multiplicity = gp ? orbit_count(d, l) : static_cast<int64_t>(binom(d, l));
      sp.entries.push_back(e);
      continue;
    }
    if (!gp) {
      ModeBlock b;
      b.degree = l;
      b.identity = true;
      for_each_subset_mask(d, l, [&](uint64_t m) {
        b.translates.push_back(IndexSet::from_mask(m, d));
        b.masks.push_back(m);
      });
      b.eigenvalues = Eigen::VectorXd::Constant(static_cast<long>(b.translates.size()), lam);
      sp.blocks.push_back(std::move(b));
      const int bi = static_cast<int>(sp.blocks.size()) - 1;
      for (size_t c = 0; c < sp.blocks[bi].translates.size(); ++c) {
        SpectralEntry e;
        e.lambda = lam;
        e.kind = ModeKind::Parity;
        e.degree = l;
        e.cls = sp.blocks[bi].translates[c];
        e.block = bi;
        e.column = static_cast<int>(c);
        sp.entries.push_back(e);
      }
    } else {
      for_each_subset_mask(d, l, [&](uint64_t m) {
        uint64_t rep = m;
        for (int s = 1; s < d; ++s) rep = std::min(rep, rotate_set(m, s, d));
        if (rep != m) return;
        std::vector<uint64_t> orbit;
        for (int s = 0; s < d; ++s) {
          uint64_t r = rotate_set(m, s, d);
          if (std::find(orbit.begin(), orbit.end(), r) == orbit.end()) orbit.push_back(r);
        }
        ModeBlock b;
        b.degree = l;
        for (auto o : orbit) b.translates.push_back(IndexSet::from_mask(o, d));
        b.masks = orbit;
        b.basis = Eigen::MatrixXd::Constant(static_cast<long>(orbit.size()), 1, 1.0 / std::sqrt(orbit.size()));
        b.eigenvalues = Eigen::VectorXd::Constant(1, lam);
        sp.blocks.push_back(std::move(b));
        SpectralEntry e;
        e.lambda = lam;
        e.kind = ModeKind::Orbit;
        e.degree = l;
        e.cls = IndexSet::from_mask(m, d);
        e.block = static_cast<int>(sp.blocks.size()) - 1;
        e.column = 0;
        sp.entries.push_back(e);
      });
    }
  }
  sort_entries(sp);
  return sp;
}

KernelSpectrum no_spectrum(const ConvArchitecture& arch, const InnerProductKernel& k) {
  const int d = arch.d, q = arch.q, w = arch.omega;
  KernelSpectrum sp;
  sp.arch = arch;
  add_constant(sp, d * k.xi(0), d);
  for (int l = 1; l <= q; ++l) {
    if (k.xi(l) <= 0) continue;
    auto classes = local_classes(w, q, l);
    for (int seg = 0; seg < d / w; ++seg)
      for (const auto& c : classes) {
        const int r = q + 1 - covering_arc(c).length;
        const double lam = k.xi(l) * r;
        if (lam <= kKeep) continue;
        ModeBlock b;
        b.degree = l;
        for (int i = 0; i < w; ++i) {
          std::vector<int> m;
          for (int s : c.members()) m.push_back(seg * w + (s + i) % w);
          b.translates.emplace_back(std::move(m), d);
        }
        b.masks = set_masks(b.translates);
        b.basis = Eigen::MatrixXd::Constant(w, 1, 1.0 / std::sqrt(w));
        b.eigenvalues = Eigen::VectorXd::Constant(1, lam);
        sp.blocks.push_back(std::move(b));
        SpectralEntry e;
        e.lambda = lam;
        e.kind = ModeKind::Orbit;
        e.degree = l;
        e.cls = IndexSet(c.members(), d).translate(seg * w);
        e.segment = seg;
        e.block = static_cast<int>(sp.blocks.size()) - 1;
        e.column = 0;
        sp.entries.push_back(e);
      }
  }
  sort_entries(sp);
  return sp;
}

}  // namespace

std::string to_string(ModeKind k) {
  switch (k) {
    case ModeKind::Constant: return "constant";
    case ModeKind::Parity: return "parity";
    case ModeKind::Frequency: return "frequency";
    case ModeKind::DegreeBlock: return "degree_block";
    case ModeKind::Orbit: return "orbit";
    case ModeKind::Numeric: return "numeric";
  }
  return "?";
}

bool kappa_is_zero(int d, int omega, int j) {
  j = ((j % d) + d) % d;
  return j != 0 && (static_cast<int64_t>(j) * omega) % d == 0;
}

std::vector<double> kappa_weights_raw(int d, int omega) {
  if (omega < 1 || omega > d) throw std::invalid_argument("pooling width must satisfy 1 <= omega <= d");
  std::vector<double> kap(d);
  for (int j = 0; j < d; ++j) {
    double s = 1.0;
    for (int k = 1; k < omega; ++k)
      s += 2.0 * (1.0 - static_cast<double>(k) / omega) * std::cos(2 * std::numbers::pi * j * k / d);
    kap[j] = s;
  }
  return kap;
}

std::vector<double> kappa_weights(int d, int omega) {
  auto raw = kappa_weights_raw(d, omega);
  std::vector<double> kap(d);
  for (int j = 0; j < d; ++j) {
    int jj = std::min(j, d - j);
    kap[j] = kappa_is_zero(d, omega, j) ? 0.0 : raw[jj];
  }
  kap[0] = omega;
  return kap;
}

std::vector<double> kappa_weights_filter(int d, const std::vector<double>& tau) {
  auto c = filter_autocorrelation(d, tau);
  std::vector<double> kap(d);
  for (int j = 0; j <= d / 2; ++j) {
    double s = 0;
    for (int k = 0; k < d; ++k) s += c[k] * std::cos(2 * std::numbers::pi * j * k / d);
    kap[j] = s;
    kap[(d - j) % d] = s;
  }
  return kap;
}

PoolingMatrix pooling_matrix(int r, const ConvArchitecture& arch) {
  arch.validate();
  if (arch.full_patch()) throw std::invalid_argument("pooling matrices need q < d");
  if (arch.pooling == Pooling::NonOverlapping)
    throw std::invalid_argument("pooling matrices are not defined for non-overlapping pooling");
  if (r < 1 || r > arch.q) throw std::invalid_argument("diameter must satisfy 1 <= r <= q");
  PoolingMatrix pm;
  pm.r = r;
  pm.d = arch.d;
  pm.q = arch.q;
  pm.omega = arch.width();
  pm.delta = arch.delta;
  const int d = arch.d;
  if (arch.pooling == Pooling::Weighted) {
    auto c = filter_autocorrelation(d, arch.tau);
    pm.M.resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) pm.M(i, j) = c[((j - i) % d + d) % d];
    return pm;
  }
  pm.counts = count_matrix(d, arch.q, r, pm.omega, pm.delta);
  pm.counted = true;
  int64_t num = pm.delta, den = static_cast<int64_t>(pm.omega) * (arch.q + 1 - r);
  int64_t g = std::gcd(num, den);
  pm.num = num / g;
  pm.den = den / g;
  pm.M = pm.counts.cast<double>() * (static_cast<double>(pm.num) / static_cast<double>(pm.den));
  return pm;
}

std::vector<BlockEigenpair> block_circulant_eig(const Eigen::MatrixXd& M, int delta) {
  const int d = static_cast<int>(M.rows());
  if (M.cols() != d || delta < 1 || d % delta != 0) throw std::invalid_argument("block size must divide d");
  const double tol = 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (std::abs(M(i, j) - M(j, i)) > tol) throw std::invalid_argument("matrix is not symmetric");
      if (std::abs(M((i + delta) % d, (j + delta) % d) - M(i, j)) > tol)
        throw std::invalid_argument("matrix is not block-circulant");
    }
  const int m = d / delta;
  std::vector<BlockEigenpair> out;
  const double pi2 = 2 * std::numbers::pi;
  for (int j = 0; 2 * j <= m; ++j) {
    const bool real_block = (j == 0) || (2 * j == m);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(delta, delta);
    for (int k = 0; k < m; ++k) {
      std::complex<double> rho = std::polar(1.0, pi2 * j * k / m);
      H += rho * M.block(0, k * delta, delta, delta).cast<std::complex<double>>();
    }
    if (real_block) {
      Eigen::MatrixXd Hr = H.real();
      Hr = 0.5 * (Hr + Hr.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hr);
      for (int c = 0; c < delta; ++c) {
        Eigen::VectorXd v(d);
        for (int b = 0; b < m; ++b) {
          double sgn = (j == 0 || b % 2 == 0) ? 1.0 : -1.0;
          v.segment(b * delta, delta) = sgn * es.eigenvectors().col(c) / std::sqrt(m);
        }
        out.push_back({es.eigenvalues()[c], j, c, v});
      }
    } else {
      Eigen::MatrixXcd Hh = 0.5 * (H + H.adjoint());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Hh);
      for (int c = 0; c < delta; ++c) {
        Eigen::VectorXd re(d), im(d);
        for (int b = 0; b < m; ++b) {
          std::complex<double> rho = std::polar(1.0, pi2 * j * b / m);
          Eigen::VectorXcd g = rho * es.eigenvectors().col(c) / std::sqrt(m);
          re.segment(b * delta, delta) = std::sqrt(2.0) * g.real();
          im.segment(b * delta, delta) = std::sqrt(2.0) * g.imag();
        }
        out.push_back({es.eigenvalues()[c], j, c, re});
        out.push_back({es.eigenvalues()[c], m - j, c, im});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const BlockEigenpair& a, const BlockEigenpair& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.freq != b.freq) return a.freq < b.freq;
    return a.index < b.index;
  });
  return out;
}

DownsampleReport downsample_perturbation(int d, int q, int r, int omega, int delta) {
  if (delta != omega) throw std::invalid_argument("downsampling perturbation requires delta == omega");
  if (omega < 1 || d % omega != 0) throw std::invalid_argument("omega must divide d");
  if (r < 1 || r > q || q >= d) throw std::invalid_argument("need 1 <= r <= q < d");
  IMatrix Cds = count_matrix(d, q, r, omega, omega);
  IMatrix Cref = count_matrix(d, q, r, omega, 1);
  IMatrix numer = omega * Cds - Cref;
  const double den = static_cast<double>(omega) * (q + 1 - r);
  DownsampleReport rep;
  rep.A = numer.cast<double>() / den;
  rep.exact_zero = (numer.array() == 0).all();
  rep.predicted_zero = (q + 1 - r) % omega == 0;
  const int m = d / delta;
  rep.H0 = Eigen::MatrixXd::Zero(delta, delta);
  for (int k = 0; k < m; ++k) rep.H0 += rep.A.block(0, k * delta, delta, delta);
  rep.max_abs_H0 = rep.H0.cwiseAbs().maxCoeff();
  rep.max_abs_A1 = (rep.A * Eigen::VectorXd::Ones(d)).cwiseAbs().maxCoeff();
  return rep;
}

DownsampleComparison downsampling_numeric_report(int d, int q, int r, int omega, int delta) {
  auto a = pooling_matrix(r, ConvArchitecture::ck_lp_ds(d, q, omega, delta));
  auto b = pooling_matrix(r, ConvArchitecture::ck_lp_ds(d, q, omega, 1));
  DownsampleComparison out;
  for (const auto& e : block_circulant_eig(a.M, delta)) out.eig_downsampled.push_back(e.value);
  for (const auto& e : block_circulant_eig(b.M, 1)) out.eig_reference.push_back(e.value);
  std::sort(out.eig_downsampled.rbegin(), out.eig_downsampled.rend());
  std::sort(out.eig_reference.rbegin(), out.eig_reference.rend());
  for (size_t i = 0; i < out.eig_reference.size(); ++i)
    out.max_abs_diff = std::max(out.max_abs_diff, std::abs(out.eig_downsampled[i] - out.eig_reference[i]));
  return out;
}

Eigen::VectorXd ModeBlock::parities(const BinarySignal& x) const {
  Eigen::VectorXd t(static_cast<long>(translates.size()));
  if (!masks.empty()) {
    uint64_t xm = x.mask();
    for (size_t i = 0; i < masks.size(); ++i) t[i] = parity_mask(masks[i], xm);
  } else {
    for (size_t i = 0; i < translates.size(); ++i) t[i] = parity_eval(translates[i], x);
  }
  return t;
}

double KernelSpectrum::total_trace() const {
  double s = 0;
  for (const auto& e : entries) s += e.lambda * static_cast<double>(e.multiplicity);
  return s;
}

int64_t KernelSpectrum::mode_count() const {
  int64_t s = 0;
  for (const auto& e : entries) s += e.multiplicity;
  return s;
}

double KernelSpectrum::tail_trace(int s) const {
  double t = 0;
  for (const auto& e : entries)
    if (e.degree > s) t += e.lambda * static_cast<double>(e.multiplicity);
  return t;
}

double KernelSpectrum::mercer_eval(const BinarySignal& x, const BinarySignal& y) const {
  if (!explicit_modes) throw std::invalid_argument("mode basis too large for explicit evaluation");
  double s = 0;
  for (const auto& b : blocks) {
    Eigen::VectorXd tx = b.parities(x), ty = b.parities(y);
    if (b.identity) {
      s += (b.eigenvalues.array() * tx.array() * ty.array()).sum();
    } else {
      Eigen::VectorXd cx = b.basis.transpose() * tx, cy = b.basis.transpose() * ty;
      s += (b.eigenvalues.array() * cx.array() * cy.array()).sum();
    }
  }
  return s;
}

std::vector<double> KernelSpectrum::eigenvalue_list() const {
  std::vector<double> v;
  for (const auto& e : entries)
    for (int64_t i = 0; i < e.multiplicity; ++i) v.push_back(e.lambda);
  std::sort(v.rbegin(), v.rend());
  return v;
}

json KernelSpectrum::entry_json(const SpectralEntry& e) const {
  json j{{"lambda", e.lambda}, {"degree", e.degree}, {"class", e.cls.to_json()},
         {"multiplicity", e.multiplicity}, {"kind", to_string(e.kind)}};
  if (e.kind == ModeKind::Frequency) {
    int m = arch.d / arch.delta;
    j["freq"] = e.freq == 0 ? m : e.freq;
    if (arch.delta > 1) j["index"] = e.column;
  } else if (e.kind == ModeKind::Parity) {
    j["freq"] = "parity";
  } else {
    j["freq"] = nullptr;
  }
  if (e.segment >= 0) j["segment"] = e.segment + 1;
  return j;
}

int64_t orbit_count(int d, int l) {
  if (l < 0 || l > d) return 0;
  if (l == 0 || l == d) return 1;
  auto phi = [](int n) {
    int r = n;
    for (int p = 2; p * p <= n; ++p)
      if (n % p == 0) {
        while (n % p == 0) n /= p;
        r -= r / p;
      }
    if (n > 1) r -= r / n;
    return r;
  };
  int g = std::gcd(d, l);
  int64_t s = 0;
  for (int t = 1; t <= g; ++t)
    if (g % t == 0) s += static_cast<int64_t>(phi(t)) * static_cast<int64_t>(binom_u64(d / t, l / t));
  return s / d;
}

KernelSpectrum spectrum(const ConvArchitecture& arch, const InnerProductKernel& k, const SpectrumOptions& opt) {
  arch.validate();
  if (k.q() != arch.q) throw std::invalid_argument("kernel patch dimension does not match architecture");
  if (arch.full_patch()) return fc_spectrum(arch, k, opt);
  if (arch.pooling == Pooling::NonOverlapping) return no_spectrum(arch, k);

  const int d = arch.d, q = arch.q;
  KernelSpectrum sp;
  sp.arch = arch;
  add_constant(sp, k.xi(0) * patch_weights(arch).sum(), d);

  const bool plain = arch.pooling == Pooling::None && arch.delta == 1;
  std::map<int, std::vector<CircMode>> cache;
  auto modes_for = [&](int gamma) -> const std::vector<CircMode>& {
    auto it = cache.find(gamma);
    if (it != cache.end()) return it->second;
    std::vector<CircMode> modes;
    if (arch.delta == 1 && arch.pooling != Pooling::None) {
      auto kap = arch.pooling == Pooling::Weighted ? kappa_weights_filter(d, arch.tau) : kappa_weights(d, arch.width());
      modes = fourier_modes(d, kap);
    } else if (!plain) {
      auto pm = pooling_matrix(gamma, arch);
      for (auto& e : block_circulant_eig(pm.M, arch.delta)) modes.push_back({e.value, e.freq, std::move(e.vec)});
    }
    return cache.emplace(gamma, std::move(modes)).first->second;
  };

  for (int l = 1; l <= q; ++l) {
    if (k.xi(l) <= 0) continue;
    for (const auto& c : local_classes(d, q, l)) {
      const int gamma = covering_arc(c).length;
      const int r = q + 1 - gamma;
      ModeBlock b;
      b.degree = l;
      for (int t = 0; t < d; ++t) b.translates.push_back(c.translate(t));
      b.masks = set_masks(b.translates);
      const int bi = static_cast<int>(sp.blocks.size());
      if (plain) {
        const double lam = k.xi(l) * r / d;
        if (lam <= kKeep) continue;
        b.identity = true;
        b.eigenvalues = Eigen::VectorXd::Constant(d, lam);
        for (int t = 0; t < d; ++t) {
          SpectralEntry e;
          e.lambda = lam;
          e.kind = ModeKind::Parity;
          e.degree = l;
          e.cls = b.translates[t];
          e.block = bi;
          e.column = t;
          sp.entries.push_back(e);
        }
        sp.blocks.push_back(std::move(b));
        continue;
      }
      const auto& modes = modes_for(gamma);
      std::vector<int> keep;
      for (size_t i = 0; i < modes.size(); ++i)
        if (k.xi(l) * r * modes[i].kappa / d > kKeep) keep.push_back(static_cast<int>(i));
      if (keep.empty()) continue;
      b.basis.resize(d, static_cast<long>(keep.size()));
      b.eigenvalues.resize(static_cast<long>(keep.size()));
      for (size_t c2 = 0; c2 < keep.size(); ++c2) {
        const auto& md = modes[keep[c2]];
        const double lam = k.xi(l) * r * md.kappa / d;
        b.basis.col(static_cast<long>(c2)) = md.v;
        b.eigenvalues[static_cast<long>(c2)] = lam;
        SpectralEntry e;
        e.lambda = lam;
        e.kind = ModeKind::Frequency;
        e.degree = l;
        e.cls = c;
        e.freq = md.freq;
        e.block = bi;
        e.column = static_cast<int>(c2);
        sp.entries.push_back(e);
      }
      sp.blocks.push_back(std::move(b));
    }
  }
  sort_entries(sp);
  return sp;
}

std::vector<KernelSpectrum> brute_force_spectra(const ConvArchitecture& arch,
                                                const std::vector<InnerProductKernel>& ks) {
  arch.validate();
  const int d = arch.d;
  if (d > 14) throw std::invalid_argument("brute-force spectrum limited to d <= 14");
  const size_t N = size_t{1} << d;
  const size_t nk = ks.size();
  std::vector<const std::vector<double>*> tables;
  for (const auto& k : ks) {
    if (k.q() != arch.q) throw std::invalid_argument("kernel patch dimension does not match architecture");
    tables.push_back(&k.values());
  }
  KernelEvaluator ev(arch, ks.at(0));
  std::vector<std::vector<double>> K(nk, std::vector<double>(N * N));
  const double inv = 1.0 / static_cast<double>(N);
#pragma omp parallel for schedule(dynamic, 16)
  for (long x = 0; x < static_cast<long>(N); ++x) {
    std::vector<double> buf(nk);
    for (size_t y = static_cast<size_t>(x); y < N; ++y) {
      ev.eval_mask_multi(static_cast<uint64_t>(x), y, tables, buf.data());
      for (size_t t = 0; t < nk; ++t) {
        K[t][x * N + y] = buf[t] * inv;
        K[t][y * N + x] = buf[t] * inv;
      }
    }
  }
  std::vector<KernelSpectrum> out;
  for (size_t t = 0; t < nk; ++t) {
    auto& A = K[t];
    // Walsh-Hadamard transform on both sides: A <- Phi A Phi / N.
    for (size_t h = 1; h < N; h <<= 1)
      for (size_t i = 0; i < N; i += 2 * h)
        for (size_t j = i; j < i + h; ++j) {
          double* a = &A[j * N];
          double* b = &A[(j + h) * N];
          for (size_t c = 0; c < N; ++c) {
            double u = a[c], v = b[c];
            a[c] = u + v;
            b[c] = u - v;
          }
        }
#pragma omp parallel for
    for (long row = 0; row < static_cast<long>(N); ++row) {
      double* a = &A[row * N];
      for (size_t h = 1; h < N; h <<= 1)
        for (size_t i = 0; i < N; i += 2 * h)
          for (size_t j = i; j < i + h; ++j) {
            double u = a[j], v = a[j + h];
            a[j] = u + v;
            a[j + h] = u - v;
          }
      for (size_t c = 0; c < N; ++c) a[c] *= inv;
    }
    double mx = 0;
    for (double v : A) mx = std::max(mx, std::abs(v));
    const double tol = 1e-12 * std::max(mx, 1e-300);
    std::vector<size_t> parent(N);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](size_t u) {
      while (parent[u] != u) u = parent[u] = parent[parent[u]];
      return u;
    };
    for (size_t i = 0; i < N; ++i)
      for (size_t j = i + 1; j < N; ++j)
        if (std::abs(A[i * N + j]) > tol) {
          size_t a = find(i), b = find(j);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    std::map<size_t, std::vector<size_t>> comps;
    for (size_t i = 0; i < N; ++i) comps[find(i)].push_back(i);

    KernelSpectrum sp;
    sp.arch = arch;
    for (const auto& [root, idx] : comps) {
      const long n = static_cast<long>(idx.size());
      Eigen::MatrixXd sub(n, n);
      for (long a = 0; a < n; ++a)
        for (long b = 0; b < n; ++b) sub(a, b) = A[idx[a] * N + idx[b]];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
      std::vector<long> keep;
      for (long c = 0; c < n; ++c)
        if (std::abs(es.eigenvalues()[c]) > 1e-13) keep.push_back(c);
      if (keep.empty()) continue;
      ModeBlock b;
      for (size_t s : idx) {
        b.translates.push_back(IndexSet::from_mask(s, d));
        b.masks.push_back(s);
      }
      b.basis.resize(n, static_cast<long>(keep.size()));
      b.eigenvalues.resize(static_cast<long>(keep.size()));
      const int bi = static_cast<int>(sp.blocks.size());
      for (size_t c = 0; c < keep.size(); ++c) {
        b.basis.col(static_cast<long>(c)) = es.eigenvectors().col(keep[c]);
        b.eigenvalues[static_cast<long>(c)] = es.eigenvalues()[keep[c]];
        SpectralEntry e;
        e.lambda = es.eigenvalues()[keep[c]];
        e.kind = ModeKind::Numeric;
        e.degree = b.translates[0].size();
        e.cls = b.translates[0];
        e.block = bi;
        e.column = static_cast<int>(c);
        sp.entries.push_back(e);
      }
      sp.blocks.push_back(std::move(b));
    }
    std::stable_sort(sp.entries.begin(), sp.entries.end(),
                     [](const SpectralEntry& a, const SpectralEntry& b) { return a.lambda > b.lambda; });
    out.push_back(std::move(sp));
    std::vector<double>().swap(A);
  }
  return out;
}

KernelSpectrum brute_force_spectrum(const ConvArchitecture& arch, const InnerProductKernel& k) {
  return std::move(brute_force_spectra(arch, {k}).front());
}

namespace {

struct SparseMode {
  double lambda;
  std::vector<std::pair<uint64_t, double>> terms;
};

std::vector<SparseMode> sparse_modes(const KernelSpectrum& sp) {
  if (!sp.explicit_modes) throw std::invalid_argument("spectrum has no explicit mode basis");
  std::vector<SparseMode> out;
  for (const auto& e : sp.entries) {
    const auto& b = sp.blocks.at(e.block);
    SparseMode m{e.lambda, {}};
    if (b.identity) {
      m.terms.push_back({b.masks.at(e.column), 1.0});
    } else {
      for (long t = 0; t < b.basis.rows(); ++t)
        if (b.basis(t, e.column) != 0.0) m.terms.push_back({b.masks.at(t), b.basis(t, e.column)});
    }
    out.push_back(std::move(m));
  }
  std::stable_sort(out.begin(), out.end(), [](const SparseMode& a, const SparseMode& b) { return a.lambda > b.lambda; });
  return out;
}

}  // namespace

SpectrumComparison compare_spectra(const KernelSpectrum& closed, const KernelSpectrum& oracle) {
  SpectrumComparison res;
  auto a = closed.eigenvalue_list(), b = oracle.eigenvalue_list();
  size_t n = std::max(a.size(), b.size());
  a.resize(n, 0.0);
  b.resize(n, 0.0);
  std::sort(a.rbegin(), a.rend());
  std::sort(b.rbegin(), b.rend());
  for (size_t i = 0; i < n; ++i) res.max_eigenvalue_dev = std::max(res.max_eigenvalue_dev, std::abs(a[i] - b[i]));

  auto ma = sparse_modes(closed), mb = sparse_modes(oracle);
  const double gap = 1e-9, pad = 1e-11, floor = 1e-10;
  size_t i = 0;
  while (i < ma.size() && ma[i].lambda > floor) {
    size_t j = i + 1;
    while (j < ma.size() && ma[j - 1].lambda - ma[j].lambda <= gap) ++j;
    const double hi = ma[i].lambda + pad, lo = ma[j - 1].lambda - pad;
    std::vector<const SparseMode*> A, B;
    for (size_t t = i; t < j; ++t) A.push_back(&ma[t]);
    for (const auto& m : mb)
      if (m.lambda <= hi && m.lambda >= lo) B.push_back(&m);
    ++res.clusters;
    if (A.size() != B.size()) {
      res.max_projector_dev = std::max(res.max_projector_dev, 1.0);
    } else {
      std::unordered_map<uint64_t, long> index;
      for (auto* m : A)
        for (auto& [s, v] : m->terms) index.emplace(s, static_cast<long>(index.size()));
      for (auto* m : B)
        for (auto& [s, v] : m->terms) index.emplace(s, static_cast<long>(index.size()));
      const long dim = static_cast<long>(index.size()), k = static_cast<long>(A.size());
      Eigen::MatrixXd VA = Eigen::MatrixXd::Zero(dim, k), VB = Eigen::MatrixXd::Zero(dim, k);
      for (long c = 0; c < k; ++c) {
        for (auto& [s, v] : A[c]->terms) VA(index[s], c) += v;
        for (auto& [s, v] : B[c]->terms) VB(index[s], c) += v;
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(VA.transpose() * VB);
      double smin = std::min(1.0, svd.singularValues().minCoeff());
      res.max_projector_dev = std::max(res.max_projector_dev, std::sqrt(std::max(0.0, 1.0 - smin * smin)));
    }
    i = j;
  }
  // oracle modes that have no closed-form counterpart
  for (const auto& m : mb)
    if (m.lambda > floor) {
      bool found = false;
      for (const auto& c : ma)
        if (std::abs(c.lambda - m.lambda) <= pad) {
          found = true;
          break;
        }
      if (!found) res.max_projector_dev = std::max(res.max_projector_dev, 1.0);
    }
  return res;
}

}  // namespace convkernels
