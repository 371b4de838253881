#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace convkernels {

using json = nlohmann::json;

// Q^(q)_l(m) by the three-term recurrence. m must have the parity of q.
double gegenbauer_eval(int q, int l, int m);
// (Q_0(m), ..., Q_q(m)).
std::vector<double> gegenbauer_row(int q, int m);

// Pr[<u,e> = q - 2k] = C(q,k) 2^-q.
std::vector<double> binomial_law(int q);

struct Activation {
  std::string name = "relu";  // relu | identity | tanh | poly
  std::vector<double> params;  // poly: sigma(x) = sum params[i] x^i

  double value(double x) const;
  double derivative(double x) const;
  json to_json() const;
};

// Where h comes from. Converted to a value table on the q+1 admissible inner products.
struct KernelDescriptor {
  enum class Kind { Poly, Table, Ntk };
  Kind kind = Kind::Poly;
  std::vector<double> coeffs;  // Poly: h(t) = sum coeffs[i] t^i
  std::vector<double> values;  // Table: values[k] = h((q-2k)/q), k = 0..q
  Activation activation;       // Ntk

  static KernelDescriptor poly(std::vector<double> c);
  static KernelDescriptor table(std::vector<double> v);
  static KernelDescriptor ntk(Activation a);
  // sum_{i=1}^{5} 0.2 t^i
  static KernelDescriptor experiment_poly();

  static KernelDescriptor from_json(const json& j);
  json to_json() const;
  std::string label() const;
};

class InnerProductKernel {
 public:
  InnerProductKernel() = default;
  InnerProductKernel(int q, std::vector<double> values, std::vector<double> xi, KernelDescriptor source);

  int q() const { return q_; }
  const std::vector<double>& xi() const { return xi_; }
  double xi(int l) const { return xi_[l]; }
  // values()[k] = h((q-2k)/q)
  const std::vector<double>& values() const { return values_; }
  double h_at(int m) const;  // h(m/q)
  double h_one() const { return values_[0]; }
  const KernelDescriptor& source() const { return source_; }
  int clamped() const { return clamped_; }
  void set_clamped(int c) { clamped_ = c; }

  // Same scalar kernel on another patch dimension.
  InnerProductKernel with_dim(int q) const;
  // Kernel whose coefficients are xi_l^2 (composition of the operator with itself, scaled).
  InnerProductKernel squared() const;

 private:
  int q_ = 0;
  std::vector<double> values_;
  std::vector<double> xi_;
  KernelDescriptor source_;
  int clamped_ = 0;
};

// xi_{q,l} = sum_k C(q,k) 2^-q h((q-2k)/q) Q_l(q-2k).
InnerProductKernel gegenbauer_coeffs(const KernelDescriptor& h, int q);
InnerProductKernel gegenbauer_coeffs(const std::function<double(double)>& h, int q);

// h_{q,>s}(1) = sum_{l>s} xi_l C(q,l).
double tail_mass(const InnerProductKernel& k, int s);

// max_m |sum_l xi_l C(q,l) Q_l(m) - h(m/q)|
double reconstruction_error(const InnerProductKernel& k);

struct NtkQuadrature {
  enum class Mode { Exact, MonteCarlo };
  Mode mode = Mode::Exact;
  int64_t draws = 1000000;
  uint64_t seed = 0;
};

struct NtkResult {
  InnerProductKernel kernel;
  std::vector<double> chi;    // coefficients of sigma(./sqrt q)
  std::vector<double> kappa;  // coefficients of sigma'(./sqrt q)
  std::vector<double> zeta2;
  std::vector<double> stderr_xi;  // Monte-Carlo only
};

NtkResult ntk_from_activation(const Activation& sigma, int q, const NtkQuadrature& quad = {});

// zeta^2_l = (l/q) kappa^2_{l-1} + ((q-l)/q) kappa^2_{l+1}
std::vector<double> zeta_recurrence(const std::vector<double>& kappa, int q);

}  // namespace convkernels
