#include "convkernels/inner_kernel.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>

#include "convkernels/hypercube.hpp"

namespace convkernels {

namespace {

void check_m(int q, int m) {
  if (q < 1) throw std::invalid_argument("q must be positive");
  if (std::abs(m) > q) throw std::invalid_argument("inner product out of range");
  if (((q - m) % 2 + 2) % 2 != 0) throw std::invalid_argument("inner product must have the parity of q");
}

std::vector<double> finalize_xi(std::vector<double> xi, int& clamped) {
  clamped = 0;
  for (size_t l = 0; l < xi.size(); ++l) {
    if (xi[l] < -1e-9) throw std::domain_error("kernel not positive semidefinite (xi_" + std::to_string(l) +
                                               " = " + std::to_string(xi[l]) + ")");
    if (xi[l] < 0) {
      xi[l] = 0;
      ++clamped;
    }
  }
  if (clamped) std::clog << "warning: clamped " << clamped << " slightly negative Gegenbauer coefficients to 0\n";
  return xi;
}

std::vector<double> project(const std::vector<double>& values, int q) {
  auto p = binomial_law(q);
  std::vector<double> xi(q + 1, 0.0);
  for (int k = 0; k <= q; ++k) {
    auto row = gegenbauer_row(q, q - 2 * k);
    for (int l = 0; l <= q; ++l) xi[l] += p[k] * values[k] * row[l];
  }
  return xi;
}

}  // namespace

std::vector<double> gegenbauer_row(int q, int m) {
  check_m(q, m);
  std::vector<double> Q(q + 1);
  Q[0] = 1.0;
  if (q >= 1) Q[1] = static_cast<double>(m) / q;
  for (int l = 1; l < q; ++l) Q[l + 1] = (m * Q[l] - l * Q[l - 1]) / (q - l);
  return Q;
}

double gegenbauer_eval(int q, int l, int m) {
  check_m(q, m);
  if (l < 0 || l > q) throw std::invalid_argument("degree out of range");
  return gegenbauer_row(q, m)[l];
}

std::vector<double> binomial_law(int q) {
  std::vector<double> p(q + 1);
  double scale = std::ldexp(1.0, -q);
  for (int k = 0; k <= q; ++k) p[k] = binom(q, k) * scale;
  return p;
}

double Activation::value(double x) const {
  if (name == "relu") return x > 0 ? x : 0.0;
  if (name == "identity") return x;
  if (name == "tanh") return std::tanh(x);
  if (name == "poly") {
    double r = 0, pw = 1;
    for (double c : params) {
      r += c * pw;
      pw *= x;
    }
    return r;
  }
  throw std::invalid_argument("unknown activation '" + name + "'");
}

double Activation::derivative(double x) const {
  if (name == "relu") return x > 0 ? 1.0 : 0.0;
  if (name == "identity") return 1.0;
  if (name == "tanh") {
    double t = std::tanh(x);
    return 1 - t * t;
  }
  if (name == "poly") {
    double r = 0, pw = 1;
    for (size_t i = 1; i < params.size(); ++i) {
      r += i * params[i] * pw;
      pw *= x;
    }
    return r;
  }
  throw std::invalid_argument("unknown activation '" + name + "'");
}

json Activation::to_json() const { return {{"activation", name}, {"params", params}}; }

KernelDescriptor KernelDescriptor::poly(std::vector<double> c) {
  KernelDescriptor k;
  k.kind = Kind::Poly;
  k.coeffs = std::move(c);
  return k;
}

KernelDescriptor KernelDescriptor::table(std::vector<double> v) {
  KernelDescriptor k;
  k.kind = Kind::Table;
  k.values = std::move(v);
  return k;
}

KernelDescriptor KernelDescriptor::ntk(Activation a) {
  KernelDescriptor k;
  k.kind = Kind::Ntk;
  k.activation = std::move(a);
  return k;
}

KernelDescriptor KernelDescriptor::experiment_poly() { return poly({0.0, 0.2, 0.2, 0.2, 0.2, 0.2}); }

KernelDescriptor KernelDescriptor::from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "poly") return poly(j.at("coeffs").get<std::vector<double>>());
  if (kind == "table") return table(j.at("values").get<std::vector<double>>());
  if (kind == "ntk") {
    Activation a;
    a.name = j.at("activation").get<std::string>();
    if (j.contains("params")) a.params = j.at("params").get<std::vector<double>>();
    return ntk(a);
  }
  throw std::invalid_argument("unknown kernel kind '" + kind + "'");
}

json KernelDescriptor::to_json() const {
  switch (kind) {
    case Kind::Poly:
      return {{"kind", "poly"}, {"coeffs", coeffs}};
    case Kind::Table:
      return {{"kind", "table"}, {"values", values}};
    case Kind::Ntk:
      return {{"kind", "ntk"}, {"activation", activation.name}, {"params", activation.params}};
  }
  return {};
}

std::string KernelDescriptor::label() const { return to_json().dump(); }

InnerProductKernel::InnerProductKernel(int q, std::vector<double> values, std::vector<double> xi,
                                       KernelDescriptor source)
    : q_(q), values_(std::move(values)), xi_(std::move(xi)), source_(std::move(source)) {
  if (static_cast<int>(values_.size()) != q + 1 || static_cast<int>(xi_.size()) != q + 1)
    throw std::invalid_argument("kernel tables must have q+1 entries");
}

double InnerProductKernel::h_at(int m) const {
  check_m(q_, m);
  return values_[(q_ - m) / 2];
}

InnerProductKernel InnerProductKernel::with_dim(int q) const {
  if (q == q_) return *this;
  if (source_.kind == KernelDescriptor::Kind::Table)
    throw std::invalid_argument("tabulated kernel is tied to its patch dimension");
  return gegenbauer_coeffs(source_, q);
}

InnerProductKernel InnerProductKernel::squared() const {
  std::vector<double> xi2(q_ + 1), vals(q_ + 1, 0.0);
  for (int l = 0; l <= q_; ++l) xi2[l] = xi_[l] * xi_[l];
  for (int k = 0; k <= q_; ++k) {
    auto row = gegenbauer_row(q_, q_ - 2 * k);
    for (int l = 0; l <= q_; ++l) vals[k] += xi2[l] * binom(q_, l) * row[l];
  }
  return InnerProductKernel(q_, vals, xi2, KernelDescriptor::table(vals));
}

InnerProductKernel gegenbauer_coeffs(const KernelDescriptor& h, int q) {
  if (q < 1) throw std::invalid_argument("q must be positive");
  using K = KernelDescriptor::Kind;
  if (h.kind == K::Ntk) return ntk_from_activation(h.activation, q).kernel;
  std::vector<double> values(q + 1);
  if (h.kind == K::Table) {
    if (static_cast<int>(h.values.size()) != q + 1)
      throw std::invalid_argument("table kernel needs q+1 values, got " + std::to_string(h.values.size()));
    values = h.values;
  } else {
    for (int k = 0; k <= q; ++k) {
      double t = static_cast<double>(q - 2 * k) / q, r = 0, pw = 1;
      for (double c : h.coeffs) {
        r += c * pw;
        pw *= t;
      }
      values[k] = r;
    }
  }
  for (double v : values)
    if (!std::isfinite(v)) throw std::domain_error("non-finite kernel value");
  auto xi = project(values, q);
  if (h.kind == K::Poly) {
    int deg = static_cast<int>(h.coeffs.size()) - 1;
    while (deg >= 0 && h.coeffs[deg] == 0.0) --deg;
    for (int l = std::max(deg + 1, 0); l <= q; ++l) xi[l] = 0.0;
  }
  int clamped = 0;
  xi = finalize_xi(std::move(xi), clamped);
  InnerProductKernel k(q, std::move(values), std::move(xi), h);
  k.set_clamped(clamped);
  return k;
}

InnerProductKernel gegenbauer_coeffs(const std::function<double(double)>& h, int q) {
  std::vector<double> values(q + 1);
  for (int k = 0; k <= q; ++k) values[k] = h(static_cast<double>(q - 2 * k) / q);
  return gegenbauer_coeffs(KernelDescriptor::table(values), q);
}

double tail_mass(const InnerProductKernel& k, int s) {
  if (s < 0 || s > k.q()) throw std::invalid_argument("tail index out of range");
  double t = 0;
  for (int l = s + 1; l <= k.q(); ++l) t += k.xi(l) * binom(k.q(), l);
  return t;
}

double reconstruction_error(const InnerProductKernel& k) {
  int q = k.q();
  double err = 0;
  for (int j = 0; j <= q; ++j) {
    int m = q - 2 * j;
    auto row = gegenbauer_row(q, m);
    double s = 0;
    for (int l = 0; l <= q; ++l) s += k.xi(l) * binom(q, l) * row[l];
    err = std::max(err, std::abs(s - k.values()[j]));
  }
  return err;
}

std::vector<double> zeta_recurrence(const std::vector<double>& kappa, int q) {
  std::vector<double> z(q + 1, 0.0);
  for (int l = 0; l <= q; ++l) {
    double lo = l >= 1 ? kappa[l - 1] * kappa[l - 1] : 0.0;
    double hi = l + 1 <= q ? kappa[l + 1] * kappa[l + 1] : 0.0;
    z[l] = (static_cast<double>(l) / q) * lo + (static_cast<double>(q - l) / q) * hi;
  }
  return z;
}

NtkResult ntk_from_activation(const Activation& sigma, int q, const NtkQuadrature& quad) {
  if (q < 1) throw std::invalid_argument("q must be positive");
  const double rq = std::sqrt(static_cast<double>(q));
  auto p = binomial_law(q);
  std::vector<std::vector<double>> rows(q + 1);
  for (int k = 0; k <= q; ++k) rows[k] = gegenbauer_row(q, q - 2 * k);

  NtkResult res;
  res.chi.assign(q + 1, 0.0);
  res.kappa.assign(q + 1, 0.0);
  for (int k = 0; k <= q; ++k) {
    double x = (q - 2 * k) / rq;
    double s = sigma.value(x), ds = sigma.derivative(x);
    if (!std::isfinite(s) || !std::isfinite(ds)) throw std::domain_error("non-finite activation value");
    for (int l = 0; l <= q; ++l) {
      res.chi[l] += p[k] * s * rows[k][l];
      res.kappa[l] += p[k] * ds * rows[k][l];
    }
  }
  res.zeta2 = zeta_recurrence(res.kappa, q);

  std::vector<double> xi(q + 1);
  if (quad.mode == NtkQuadrature::Mode::Exact) {
    for (int l = 0; l <= q; ++l) xi[l] = res.chi[l] * res.chi[l] + res.zeta2[l];
  } else {
    // u = all ones, v_k = u with the first k coordinates flipped, so <u,v_k> = q - 2k.
    std::mt19937_64 rng(quad.seed);
    std::vector<double> mean(q + 1, 0.0), m2(q + 1, 0.0), g(q + 1), est(q + 1);
    std::vector<int> w(q);
    for (int64_t n = 1; n <= quad.draws; ++n) {
      int a = 0;
      for (int i = 0; i < q; i += 64) {
        uint64_t bits = rng();
        for (int b = 0; b < 64 && i + b < q; ++b) {
          w[i + b] = ((bits >> b) & 1ULL) ? -1 : 1;
          a += w[i + b];
        }
      }
      double sa = sigma.value(a / rq), dsa = sigma.derivative(a / rq);
      int bk = a;
      for (int k = 0; k <= q; ++k) {
        if (k > 0) bk -= 2 * w[k - 1];
        double m = q - 2 * k;
        g[k] = sa * sigma.value(bk / rq) + dsa * sigma.derivative(bk / rq) * m / q;
      }
      for (int l = 0; l <= q; ++l) {
        double e = 0;
        for (int k = 0; k <= q; ++k) e += p[k] * g[k] * rows[k][l];
        double delta = e - mean[l];
        mean[l] += delta / n;
        m2[l] += delta * (e - mean[l]);
      }
    }
    res.stderr_xi.resize(q + 1);
    for (int l = 0; l <= q; ++l) {
      xi[l] = mean[l];
      res.stderr_xi[l] = std::sqrt(m2[l] / (quad.draws - 1) / quad.draws);
    }
  }

  std::vector<double> values(q + 1, 0.0);
  for (int k = 0; k <= q; ++k)
    for (int l = 0; l <= q; ++l) values[k] += xi[l] * binom(q, l) * rows[k][l];
  int clamped = 0;
  if (quad.mode == NtkQuadrature::Mode::Exact) xi = finalize_xi(std::move(xi), clamped);
  res.kernel = InnerProductKernel(q, std::move(values), std::move(xi), KernelDescriptor::ntk(sigma));
  res.kernel.set_clamped(clamped);
  return res;
}

}  // namespace convkernels
