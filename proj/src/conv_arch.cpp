#include <cmath>
#include <numbers>
#include <stdexcept>

#include "convkernels/conv_spectral.hpp"

namespace convkernels {

ConvArchitecture ConvArchitecture::fc(int d) { return {d, d, Pooling::None, 1, 1, {}}; }
ConvArchitecture ConvArchitecture::fc_gp(int d) { return {d, d, Pooling::Global, d, 1, {}}; }
ConvArchitecture ConvArchitecture::ck(int d, int q) { return {d, q, Pooling::None, 1, 1, {}}; }
ConvArchitecture ConvArchitecture::ck_lp(int d, int q, int omega) { return ck_lp_ds(d, q, omega, 1); }
ConvArchitecture ConvArchitecture::ck_gp(int d, int q) { return {d, q, Pooling::Global, d, 1, {}}; }

ConvArchitecture ConvArchitecture::ck_lp_ds(int d, int q, int omega, int delta) {
  if (omega == d) return {d, q, Pooling::Global, d, delta, {}};
  if (omega == 1) return {d, q, Pooling::None, 1, delta, {}};
  return {d, q, Pooling::Average, omega, delta, {}};
}

ConvArchitecture ConvArchitecture::weighted(int d, int q, std::vector<double> tau) {
  return {d, q, Pooling::Weighted, 1, 1, std::move(tau)};
}

ConvArchitecture ConvArchitecture::gaussian(int d, int q, double sigma) {
  return weighted(d, q, gaussian_filter(d, sigma));
}

ConvArchitecture ConvArchitecture::non_overlapping(int d, int q, int omega) {
  return {d, q, Pooling::NonOverlapping, omega, 1, {}};
}

void ConvArchitecture::validate() const {
  if (d < 1 || q < 1 || q > d) throw std::invalid_argument("architecture needs 1 <= q <= d");
  if (delta < 1 || d % delta != 0) throw std::invalid_argument("downsampling step must divide d");
  if (omega < 1 || omega > d) throw std::invalid_argument("pooling width must satisfy 1 <= omega <= d");
  if (pooling == Pooling::Global && omega != d) throw std::invalid_argument("global pooling requires omega = d");
  if (pooling == Pooling::Average && omega == d) throw std::invalid_argument("omega = d is global pooling");
  if (q == d) {
    if (pooling == Pooling::Global && delta != 1)
      throw std::invalid_argument("full-patch global pooling takes no downsampling");
    if (pooling != Pooling::None && pooling != Pooling::Global)
      throw std::invalid_argument("full patches support no pooling or global pooling only");
    return;
  }
  if (2 * q > d) throw std::invalid_argument("patch overlap regime unsupported (need q <= d/2)");
  if (pooling == Pooling::Weighted) {
    if (delta != 1) throw std::invalid_argument("weighted pooling takes no downsampling");
    if (static_cast<int>(tau.size()) != d / 2 + 1) throw std::invalid_argument("filter needs d/2+1 weights");
  }
  if (pooling == Pooling::NonOverlapping) {
    if (delta != 1) throw std::invalid_argument("non-overlapping pooling takes no downsampling");
    if (d % omega != 0) throw std::invalid_argument("non-overlapping pooling needs omega dividing d");
    if (2 * q > omega) throw std::invalid_argument("non-overlapping pooling needs q <= omega/2");
  }
}

std::string ConvArchitecture::name() const {
  if (q == d) return pooling == Pooling::Global ? "FC-GP" : "FC";
  switch (pooling) {
    case Pooling::None:
      return delta == 1 ? "CK" : "CK-DS";
    case Pooling::Average:
      return delta == 1 ? "CK-LP" : "CK-LP-DS";
    case Pooling::Global:
      return "CK-GP";
    case Pooling::Weighted:
      return "CK-W";
    case Pooling::NonOverlapping:
      return "CK-NO";
  }
  return "?";
}

json ConvArchitecture::to_json() const {
  static const char* names[] = {"none", "average", "weighted", "global", "non_overlapping"};
  json j{{"d", d}, {"q", q}, {"pooling", names[static_cast<int>(pooling)]}, {"omega", omega}, {"delta", delta}};
  if (pooling == Pooling::Weighted) j["tau"] = tau;
  return j;
}

ConvArchitecture ConvArchitecture::from_json(const json& j) {
  int d = j.at("d").get<int>();
  if (j.contains("family")) {
    std::string f = j.at("family").get<std::string>();
    int q = j.value("q", d), w = j.value("omega", 1), D = j.value("delta", 1);
    if (f == "FC") return fc(d);
    if (f == "FC-GP") return fc_gp(d);
    if (f == "CK") return ck_lp_ds(d, q, 1, D);
    if (f == "CK-LP" || f == "CK-LP-DS") return ck_lp_ds(d, q, w, D);
    if (f == "CK-GP") return ck_gp(d, q);
    if (f == "CK-NO") return non_overlapping(d, q, w);
    if (f == "CK-GAUSS") return gaussian(d, q, j.at("sigma").get<double>());
    throw std::invalid_argument("unknown family '" + f + "'");
  }
  ConvArchitecture a;
  a.d = d;
  a.q = j.value("q", d);
  a.omega = j.value("omega", 1);
  a.delta = j.value("delta", 1);
  std::string p = j.value("pooling", "none");
  if (p == "none") a.pooling = Pooling::None;
  else if (p == "average") a.pooling = a.omega == d ? Pooling::Global : Pooling::Average;
  else if (p == "global") { a.pooling = Pooling::Global; a.omega = d; }
  else if (p == "weighted") { a.pooling = Pooling::Weighted; a.tau = j.at("tau").get<std::vector<double>>(); }
  else if (p == "gaussian") return gaussian(d, a.q, j.at("sigma").get<double>());
  else if (p == "non_overlapping") a.pooling = Pooling::NonOverlapping;
  else throw std::invalid_argument("unknown pooling '" + p + "'");
  return a;
}

std::vector<double> gaussian_filter(int d, double sigma) {
  if (sigma <= 0) throw std::invalid_argument("filter width must be positive");
  std::vector<double> tau(d / 2 + 1);
  for (int x = 0; x <= d / 2; ++x)
    tau[x] = std::exp(-x * x / (2 * sigma * sigma)) / (std::sqrt(2 * std::numbers::pi) * sigma);
  return tau;
}

std::vector<double> filter_autocorrelation(int d, const std::vector<double>& tau) {
  auto t = [&](int s) {
    s = ((s % d) + d) % d;
    return tau[std::min(s, d - s)];
  };
  std::vector<double> c(d, 0.0);
  for (int delta = 0; delta < d; ++delta)
    for (int s = 0; s < d; ++s) c[delta] += t(s) * t(s + delta);
  return c;
}

Eigen::MatrixXd patch_weights(const ConvArchitecture& arch) {
  arch.validate();
  const int d = arch.d;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(d, d);
  if (arch.pooling == Pooling::NonOverlapping)
    throw std::invalid_argument("non-overlapping pooling has no single patch-weight matrix");
  if (arch.pooling == Pooling::Weighted) {
    auto c = filter_autocorrelation(d, arch.tau);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) W(a, b) = c[((b - a) % d + d) % d] / d;
    return W;
  }
  const int w = arch.width(), D = arch.delta;
  const double unit = static_cast<double>(D) / (static_cast<double>(d) * w);
  for (int k = 0; k < d / D; ++k)
    for (int s = 0; s < w; ++s)
      for (int sp = 0; sp < w; ++sp) W((k * D + s) % d, (k * D + sp) % d) += unit;
  return W;
}

KernelEvaluator::KernelEvaluator(const ConvArchitecture& arch, const InnerProductKernel& k) : arch_(arch) {
  arch_.validate();
  if (k.q() != arch.q) throw std::invalid_argument("kernel patch dimension does not match architecture");
  table_ = k.values();
  mask_path_ = arch.d <= 32;
  if (arch.pooling == Pooling::NonOverlapping) return;
  const int d = arch.d;
  Eigen::MatrixXd W = patch_weights(arch);
  for (int delta = 0; delta < d; ++delta) {
    Shift sh{delta, true, 0.0, std::vector<double>(d)};
    bool any = false;
    for (int a = 0; a < d; ++a) {
      sh.w[a] = W(a, (a + delta) % d);
      if (sh.w[a] != 0.0) any = true;
      if (sh.w[a] != sh.w[0]) sh.uniform = false;
    }
    if (!any) continue;
    if (arch.q == d) {
      double tot = 0;
      for (double v : sh.w) tot += v;
      sh.uniform = true;
      sh.weight = tot;
    } else {
      sh.weight = sh.w[0];
    }
    shifts_.push_back(std::move(sh));
  }
}

namespace {

inline uint64_t low_bits(int n) { return n >= 64 ? ~0ULL : ((1ULL << n) - 1); }

inline uint64_t rotate_down(uint64_t y, int delta, int d) {
  if (delta == 0) return y;
  return ((y >> delta) | (y << (d - delta))) & low_bits(d);
}

}  // namespace

double KernelEvaluator::eval_mask(uint64_t x, uint64_t y) const {
  const int d = arch_.d, q = arch_.q;
  const double* tab = table_.data();
  if (arch_.pooling == Pooling::NonOverlapping) {
    const int w = arch_.omega;
    const uint64_t wm = low_bits(w), qm = low_bits(q);
    double acc = 0;
    for (int seg = 0; seg < d / w; ++seg) {
      uint64_t sx = (x >> (seg * w)) & wm, sy = (y >> (seg * w)) & wm;
      for (int delta = 0; delta < w; ++delta) {
        uint64_t z = sx ^ rotate_down(sy, delta, w);
        uint64_t zz = z | (z << w);
        for (int a = 0; a < w; ++a) acc += tab[__builtin_popcountll((zz >> a) & qm)];
      }
    }
    return acc / w;
  }
  const uint64_t qm = low_bits(q);
  double acc = 0;
  for (const auto& sh : shifts_) {
    uint64_t z = x ^ rotate_down(y, sh.delta, d);
    if (q == d) {
      acc += sh.weight * tab[__builtin_popcountll(z)];
      continue;
    }
    uint64_t zz = z | (z << d);
    if (sh.uniform) {
      double s = 0;
      for (int a = 0; a < d; ++a) s += tab[__builtin_popcountll((zz >> a) & qm)];
      acc += sh.weight * s;
    } else {
      for (int a = 0; a < d; ++a)
        if (sh.w[a] != 0.0) acc += sh.w[a] * tab[__builtin_popcountll((zz >> a) & qm)];
    }
  }
  return acc;
}

void KernelEvaluator::eval_mask_multi(uint64_t x, uint64_t y, const std::vector<const std::vector<double>*>& tables,
                                      double* out) const {
  const int d = arch_.d, q = arch_.q;
  const size_t nt = tables.size();
  for (size_t t = 0; t < nt; ++t) out[t] = 0;
  auto add = [&](double wgt, int p) {
    for (size_t t = 0; t < nt; ++t) out[t] += wgt * (*tables[t])[p];
  };
  if (arch_.pooling == Pooling::NonOverlapping) {
    const int w = arch_.omega;
    const uint64_t wm = low_bits(w), qm = low_bits(q);
    for (int seg = 0; seg < d / w; ++seg) {
      uint64_t sx = (x >> (seg * w)) & wm, sy = (y >> (seg * w)) & wm;
      for (int delta = 0; delta < w; ++delta) {
        uint64_t z = sx ^ rotate_down(sy, delta, w);
        uint64_t zz = z | (z << w);
        for (int a = 0; a < w; ++a) add(1.0 / w, __builtin_popcountll((zz >> a) & qm));
      }
    }
    return;
  }
  const uint64_t qm = low_bits(q);
  for (const auto& sh : shifts_) {
    uint64_t z = x ^ rotate_down(y, sh.delta, d);
    if (q == d) {
      add(sh.weight, __builtin_popcountll(z));
      continue;
    }
    uint64_t zz = z | (z << d);
    for (int a = 0; a < d; ++a)
      if (sh.w[a] != 0.0) add(sh.w[a], __builtin_popcountll((zz >> a) & qm));
  }
}

double KernelEvaluator::operator()(const BinarySignal& x, const BinarySignal& y) const {
  const int d = arch_.d, q = arch_.q;
  if (x.dim() != d || y.dim() != d) throw std::invalid_argument("signal dimension does not match architecture");
  if (mask_path_) return eval_mask(x.mask(), y.mask());
  const auto& xv = x.entries();
  const auto& yv = y.entries();
  std::vector<int> z(d);
  auto window_sums = [&](int n, auto&& visit) {
    int s = 0;
    for (int i = 0; i < q; ++i) s += z[i % n];
    for (int a = 0; a < n; ++a) {
      visit(a, (q - s) / 2);
      s += z[(a + q) % n] - z[a];
    }
  };
  double acc = 0;
  if (arch_.pooling == Pooling::NonOverlapping) {
    const int w = arch_.omega;
    for (int seg = 0; seg < d / w; ++seg)
      for (int delta = 0; delta < w; ++delta) {
        for (int i = 0; i < w; ++i) z[i] = xv[seg * w + i] * yv[seg * w + (i + delta) % w];
        window_sums(w, [&](int, int p) { acc += table_[p]; });
      }
    return acc / w;
  }
  for (const auto& sh : shifts_) {
    for (int i = 0; i < d; ++i) z[i] = xv[i] * yv[(i + sh.delta) % d];
    if (q == d) {
      int s = 0;
      for (int i = 0; i < d; ++i) s += z[i];
      acc += sh.weight * table_[(q - s) / 2];
      continue;
    }
    window_sums(d, [&](int a, int p) { acc += sh.w[a] * table_[p]; });
  }
  return acc;
}

double kernel_eval(const ConvArchitecture& arch, const InnerProductKernel& k, const BinarySignal& x,
                   const BinarySignal& y) {
  return KernelEvaluator(arch, k)(x, y);
}

Eigen::MatrixXd cross_gram(const ConvArchitecture& arch, const InnerProductKernel& k,
                           const std::vector<BinarySignal>& A, const std::vector<BinarySignal>& B) {
  KernelEvaluator ev(arch, k);
  const long na = static_cast<long>(A.size()), nb = static_cast<long>(B.size());
  Eigen::MatrixXd G(na, nb);
  std::vector<uint64_t> ma, mb;
  if (ev.mask_path()) {
    for (const auto& x : A) ma.push_back(x.mask());
    for (const auto& x : B) mb.push_back(x.mask());
  }
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < na; ++i)
    for (long j = 0; j < nb; ++j) G(i, j) = ev.mask_path() ? ev.eval_mask(ma[i], mb[j]) : ev(A[i], B[j]);
  if (!G.allFinite()) throw std::domain_error("non-finite Gram entry");
  return G;
}

Eigen::MatrixXd gram_matrix(const ConvArchitecture& arch, const InnerProductKernel& k,
                            const std::vector<BinarySignal>& X) {
  KernelEvaluator ev(arch, k);
  const long n = static_cast<long>(X.size());
  Eigen::MatrixXd G(n, n);
  std::vector<uint64_t> m;
  if (ev.mask_path())
    for (const auto& x : X) m.push_back(x.mask());
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i)
    for (long j = 0; j <= i; ++j) {
      double v = ev.mask_path() ? ev.eval_mask(m[i], m[j]) : ev(X[i], X[j]);
      G(i, j) = v;
      G(j, i) = v;
    }
  if (!G.allFinite()) throw std::domain_error("non-finite Gram entry");
  return G;
}

}  // namespace convkernels
