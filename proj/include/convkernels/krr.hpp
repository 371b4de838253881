#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "convkernels/conv_spectral.hpp"
#include "convkernels/hypercube.hpp"
#include "convkernels/inner_kernel.hpp"

namespace convkernels {

class FourierTarget {
 public:
  FourierTarget() = default;
  explicit FourierTarget(int d) : d_(d) {}

  int dim() const { return d_; }
  void add(const IndexSet& s, double c);
  const std::map<IndexSet, double>& coeffs() const { return c_; }
  double coefficient(const IndexSet& s) const;
  double evaluate(const BinarySignal& x) const;
  double norm2() const;
  json to_json() const;

 private:
  int d_ = 0;
  std::map<IndexSet, double> c_;
};

struct Dataset {
  std::vector<BinarySignal> X;
  Eigen::VectorXd y;
  double noise_sigma = 0;
  uint64_t seed = 0;
};

Dataset sample_dataset(const FourierTarget& f, int n, double noise_sigma, uint64_t seed);

struct KRRModel {
  ConvArchitecture arch;
  InnerProductKernel kernel;
  std::vector<BinarySignal> X;
  Eigen::VectorXd alpha;
  double lambda = 0;

  double predict(const BinarySignal& x) const;
  Eigen::VectorXd predict(const std::vector<BinarySignal>& xs) const;
  json to_json() const;
};

KRRModel krr_fit(const Dataset& data, const ConvArchitecture& arch, const InnerProductKernel& k, double lambda);
// Same, with a precomputed Gram matrix.
KRRModel krr_fit_gram(const Dataset& data, const ConvArchitecture& arch, const InnerProductKernel& k, double lambda,
                      const Eigen::MatrixXd& G);

// Cholesky of G + lambda I, reused for every leading n x n block.
class NestedRidgeSolver {
 public:
  NestedRidgeSolver(Eigen::MatrixXd G, double lambda);
  Eigen::VectorXd solve(const Eigen::VectorXd& y, long n) const;
  long size() const { return L_.rows(); }

 private:
  Eigen::MatrixXd L_;
};

struct RiskMode {
  enum class Kind { Exact, MonteCarlo };
  Kind kind = Kind::Exact;
  int64_t m = 20000;
  uint64_t seed = 0;
  std::string label() const { return kind == Kind::Exact ? "exact" : "monte-carlo"; }
};

struct RiskResult {
  double risk = 0;
  double stderr_ = 0;
  std::string mode;
};

// Exact risk needs an explicit mode basis; full-patch kernels use the squared-kernel identity.
RiskResult test_risk(const KRRModel& model, const FourierTarget& target, const RiskMode& mode,
                     const KernelSpectrum* spectrum = nullptr);

// Exact risk from dual coefficients through the spectrum blocks.
double exact_risk_spectral(const KernelSpectrum& sp, const std::vector<BinarySignal>& X, const Eigen::VectorXd& alpha,
                           const FourierTarget& target);

// (H f*)(x_i) for full-patch kernels.
Eigen::VectorXd apply_operator_full(const ConvArchitecture& arch, const InnerProductKernel& k,
                                    const FourierTarget& target, const std::vector<BinarySignal>& X);
// Gram of the kernel of H^2 for full-patch kernels.
Eigen::MatrixXd squared_gram_full(const ConvArchitecture& arch, const InnerProductKernel& k,
                                  const std::vector<BinarySignal>& X);

struct ShrinkagePrediction {
  std::map<IndexSet, double> coeffs;
  double risk = 0;
  double lambda_eff = 0;
  double off_span = 0;
  std::vector<double> factors;
};

ShrinkagePrediction shrinkage_predict(const FourierTarget& target, const KernelSpectrum& sp, double n, double lambda,
                                      int s);

double effective_dimension(const KernelSpectrum& sp, double lambda);
double effective_dimension(const std::vector<double>& eigenvalues, double lambda);
double pooled_effective_dim(const std::vector<double>& kappa, int omega, double alpha);

}  // namespace convkernels
