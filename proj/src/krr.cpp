#include "convkernels/krr.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace convkernels {

void FourierTarget::add(const IndexSet& s, double c) {
  if (s.ambient_dim() != d_) throw std::invalid_argument("index set dimension does not match target");
  c_[s] += c;
}

double FourierTarget::coefficient(const IndexSet& s) const {
  auto it = c_.find(s);
  return it == c_.end() ? 0.0 : it->second;
}

double FourierTarget::evaluate(const BinarySignal& x) const {
  if (x.dim() != d_) throw std::invalid_argument("signal dimension does not match target");
  double v = 0;
  if (d_ <= 64) {
    uint64_t xm = x.mask();
    for (const auto& [s, c] : c_) v += c * parity_mask(s.mask(), xm);
  } else {
    for (const auto& [s, c] : c_) v += c * parity_eval(s, x);
  }
  return v;
}

double FourierTarget::norm2() const {
  double n = 0;
  for (const auto& [s, c] : c_) n += c * c;
  return n;
}

json FourierTarget::to_json() const {
  json j = json::array();
  for (const auto& [s, c] : c_) j.push_back({{"set", s.to_json()}, {"coeff", c}});
  return j;
}

Dataset sample_dataset(const FourierTarget& f, int n, double noise_sigma, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("dataset needs n >= 1");
  if (noise_sigma < 0) throw std::invalid_argument("noise level must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.noise_sigma = noise_sigma;
  ds.seed = seed;
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) ds.X.push_back(BinarySignal::random(f.dim(), rng));
  for (int i = 0; i < n; ++i) ds.y[i] = f.evaluate(ds.X[i]) + (noise_sigma > 0 ? noise_sigma * noise(rng) : 0.0);
  return ds;
}

double KRRModel::predict(const BinarySignal& x) const {
  KernelEvaluator ev(arch, kernel);
  double s = 0;
  for (size_t i = 0; i < X.size(); ++i) s += alpha[static_cast<long>(i)] * ev(x, X[i]);
  return s;
}

Eigen::VectorXd KRRModel::predict(const std::vector<BinarySignal>& xs) const {
  return cross_gram(arch, kernel, xs, X) * alpha;
}

json KRRModel::to_json() const {
  return {{"lambda", lambda},
          {"n", X.size()},
          {"arch", arch.to_json()},
          {"kernel_ref", kernel.source().to_json()},
          {"alpha", std::vector<double>(alpha.data(), alpha.data() + alpha.size())}};
}

namespace {

void check_conflicting_duplicates(const Dataset& data) {
  std::unordered_map<std::string, size_t> seen;
  for (size_t i = 0; i < data.X.size(); ++i) {
    auto [it, fresh] = seen.emplace(data.X[i].to_string(), i);
    if (fresh) continue;
    size_t j = it->second;
    double a = data.y[static_cast<long>(j)], b = data.y[static_cast<long>(i)];
    if (std::abs(a - b) > 1e-12 * (1.0 + std::abs(a) + std::abs(b)))
      throw std::domain_error("singular interpolation: duplicate inputs at indices " + std::to_string(j) + " and " +
                              std::to_string(i) + " carry conflicting labels");
  }
}

}  // namespace

KRRModel krr_fit_gram(const Dataset& data, const ConvArchitecture& arch, const InnerProductKernel& k, double lambda,
                      const Eigen::MatrixXd& G) {
  if (lambda < 0) throw std::invalid_argument("ridge parameter must be nonnegative");
  const long n = static_cast<long>(data.X.size());
  if (n < 1 || data.y.size() != n) throw std::invalid_argument("dataset inputs and labels must match");
  if (G.rows() != n || G.cols() != n) throw std::invalid_argument("Gram size does not match dataset");
  KRRModel m;
  m.arch = arch;
  m.kernel = k;
  m.X = data.X;
  m.lambda = lambda;
  if (lambda > 0) {
    Eigen::MatrixXd A = G;
    A.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw std::domain_error("Gram matrix plus ridge is not positive definite");
    m.alpha = llt.solve(data.y);
  } else {
    check_conflicting_duplicates(data);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const auto& ev = es.eigenvalues();
    const double cut = 1e-12 * std::max(ev.maxCoeff(), 0.0);
    Eigen::VectorXd proj = es.eigenvectors().transpose() * data.y;
    for (long i = 0; i < n; ++i) proj[i] = ev[i] > cut ? proj[i] / ev[i] : 0.0;
    m.alpha = es.eigenvectors() * proj;
  }
  return m;
}

KRRModel krr_fit(const Dataset& data, const ConvArchitecture& arch, const InnerProductKernel& k, double lambda) {
  return krr_fit_gram(data, arch, k, lambda, gram_matrix(arch, k, data.X));
}

NestedRidgeSolver::NestedRidgeSolver(Eigen::MatrixXd G, double lambda) : L_(std::move(G)) {
  if (lambda <= 0) throw std::invalid_argument("nested solver needs lambda > 0");
  L_.diagonal().array() += lambda;
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(L_);
  if (llt.info() != Eigen::Success) throw std::domain_error("Gram matrix plus ridge is not positive definite");
}

Eigen::VectorXd NestedRidgeSolver::solve(const Eigen::VectorXd& y, long n) const {
  if (n < 1 || n > L_.rows() || y.size() < n) throw std::invalid_argument("prefix size out of range");
  const auto Ln = L_.topLeftCorner(n, n);
  Eigen::VectorXd z = y.head(n);
  Ln.triangularView<Eigen::Lower>().solveInPlace(z);
  Ln.transpose().triangularView<Eigen::Upper>().solveInPlace(z);
  return z;
}

double exact_risk_spectral(const KernelSpectrum& sp, const std::vector<BinarySignal>& X, const Eigen::VectorXd& alpha,
                           const FourierTarget& target) {
  if (!sp.explicit_modes) throw std::invalid_argument("mode basis too large; use monte-carlo");
  const size_t n = X.size();
  const bool masks = sp.arch.d <= 64;
  std::vector<uint64_t> xm;
  if (masks)
    for (const auto& x : X) xm.push_back(x.mask());
  double err = 0, explained = 0;
  for (const auto& b : sp.blocks) {
    const long T = static_cast<long>(b.translates.size());
    Eigen::VectorXd tstar(T), bvec = Eigen::VectorXd::Zero(T);
    for (long t = 0; t < T; ++t) {
      tstar[t] = target.coefficient(b.translates[t]);
      double s = 0;
      if (masks) {
        const uint64_t m = b.masks[t];
        for (size_t i = 0; i < n; ++i) s += (__builtin_popcountll(m & xm[i]) & 1) ? -alpha[i] : alpha[i];
      } else {
        for (size_t i = 0; i < n; ++i) s += alpha[static_cast<long>(i)] * parity_eval(b.translates[t], X[i]);
      }
      bvec[t] = s;
    }
    Eigen::VectorXd p, c;
    if (b.identity) {
      p = tstar;
      c = b.eigenvalues.cwiseProduct(bvec);
    } else {
      p = b.basis.transpose() * tstar;
      c = b.eigenvalues.cwiseProduct(b.basis.transpose() * bvec);
    }
    err += (p - c).squaredNorm();
    explained += p.squaredNorm();
  }
  return err + std::max(0.0, target.norm2() - explained);
}

Eigen::VectorXd apply_operator_full(const ConvArchitecture& arch, const InnerProductKernel& k,
                                    const FourierTarget& target, const std::vector<BinarySignal>& X) {
  if (!arch.full_patch()) throw std::invalid_argument("full-patch kernel expected");
  const int d = arch.d;
  const bool gp = arch.pooling == Pooling::Global;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<long>(X.size()));
  for (const auto& [s, c] : target.coeffs()) {
    const double w = c * k.xi(s.size());
    if (w == 0) continue;
    std::vector<IndexSet> shifts{s};
    if (gp) {
      shifts.clear();
      for (int t = 0; t < d; ++t) shifts.push_back(s.translate(t));
    }
    for (size_t i = 0; i < X.size(); ++i) {
      double v = 0;
      for (const auto& sh : shifts) v += parity_eval(sh, X[i]);
      g[static_cast<long>(i)] += w * v;
    }
  }
  return g;
}

Eigen::MatrixXd squared_gram_full(const ConvArchitecture& arch, const InnerProductKernel& k,
                                  const std::vector<BinarySignal>& X) {
  if (!arch.full_patch()) throw std::invalid_argument("full-patch kernel expected");
  Eigen::MatrixXd K2 = gram_matrix(arch, k.squared(), X);
  if (arch.pooling == Pooling::Global) K2 *= arch.d;
  return K2;
}

RiskResult test_risk(const KRRModel& model, const FourierTarget& target, const RiskMode& mode,
                     const KernelSpectrum* spectrum) {
  RiskResult res;
  res.mode = mode.label();
  if (mode.kind == RiskMode::Kind::MonteCarlo) {
    if (mode.m < 2) throw std::invalid_argument("Monte-Carlo risk needs m >= 2");
    std::mt19937_64 rng(mode.seed);
    double mean = 0, m2 = 0;
    int64_t count = 0;
    const int64_t chunk = 2048;
    for (int64_t start = 0; start < mode.m; start += chunk) {
      std::vector<BinarySignal> xs;
      for (int64_t i = start; i < std::min(mode.m, start + chunk); ++i)
        xs.push_back(BinarySignal::random(target.dim(), rng));
      Eigen::VectorXd pred = model.predict(xs);
      for (size_t i = 0; i < xs.size(); ++i) {
        double e = target.evaluate(xs[i]) - pred[static_cast<long>(i)];
        double v = e * e;
        ++count;
        double delta = v - mean;
        mean += delta / count;
        m2 += delta * (v - mean);
      }
    }
    res.risk = mean;
    res.stderr_ = std::sqrt(m2 / (count - 1) / count);
    return res;
  }
  if (model.arch.full_patch()) {
    if (model.kernel.source().kind != KernelDescriptor::Kind::Poly && model.arch.d > 40)
      throw std::invalid_argument("mode basis too large; use monte-carlo");
    Eigen::VectorXd g = apply_operator_full(model.arch, model.kernel, target, model.X);
    Eigen::MatrixXd K2 = squared_gram_full(model.arch, model.kernel, model.X);
    res.risk = target.norm2() - 2 * model.alpha.dot(g) + model.alpha.dot(K2 * model.alpha);
    return res;
  }
  if (spectrum) {
    res.risk = exact_risk_spectral(*spectrum, model.X, model.alpha, target);
  } else {
    res.risk = exact_risk_spectral(convkernels::spectrum(model.arch, model.kernel), model.X, model.alpha, target);
  }
  return res;
}

ShrinkagePrediction shrinkage_predict(const FourierTarget& target, const KernelSpectrum& sp, double n, double lambda,
                                      int s) {
  if (!sp.explicit_modes) throw std::invalid_argument("shrinkage prediction needs an explicit mode basis");
  if (n <= 0) throw std::invalid_argument("sample size must be positive");
  ShrinkagePrediction out;
  out.lambda_eff = lambda + sp.tail_trace(s);
  const double shift = out.lambda_eff / n;
  double explained = 0, err = 0;
  for (const auto& b : sp.blocks) {
    const long T = static_cast<long>(b.translates.size());
    Eigen::VectorXd tstar(T);
    for (long t = 0; t < T; ++t) tstar[t] = target.coefficient(b.translates[t]);
    Eigen::VectorXd p = b.identity ? tstar : Eigen::VectorXd(b.basis.transpose() * tstar);
    Eigen::VectorXd f(p.size());
    for (long c = 0; c < p.size(); ++c) {
      const double lam = b.eigenvalues[c];
      f[c] = lam / (lam + shift);
      out.factors.push_back(f[c]);
      const double miss = p[c] * (1 - f[c]);
      err += miss * miss;
    }
    explained += p.squaredNorm();
    Eigen::VectorXd coef = b.identity ? Eigen::VectorXd(f.cwiseProduct(p)) : Eigen::VectorXd(b.basis * f.cwiseProduct(p));
    for (long t = 0; t < T; ++t)
      if (std::abs(coef[t]) > 0) out.coeffs[b.translates[t]] += coef[t];
  }
  out.off_span = std::max(0.0, target.norm2() - explained);
  out.risk = err + out.off_span;
  return out;
}

double effective_dimension(const std::vector<double>& eigenvalues, double lambda) {
  if (lambda <= 0) throw std::invalid_argument("effective dimension needs lambda > 0");
  double s = 0;
  for (double l : eigenvalues)
    if (l > 0) s += l / (l + lambda);
  return s;
}

double effective_dimension(const KernelSpectrum& sp, double lambda) {
  if (lambda <= 0) throw std::invalid_argument("effective dimension needs lambda > 0");
  double s = 0;
  for (const auto& e : sp.entries)
    if (e.lambda > 0) s += static_cast<double>(e.multiplicity) * e.lambda / (e.lambda + lambda);
  return s;
}

double pooled_effective_dim(const std::vector<double>& kappa, int omega, double alpha) {
  if (alpha <= 1) throw std::invalid_argument("capacity exponent must exceed 1");
  if (omega < 1) throw std::invalid_argument("pooling width must be positive");
  double s = 0;
  for (double k : kappa)
    if (k > 0) s += std::pow(k / omega, 1.0 / alpha);
  return s;
}

}  // namespace convkernels
