#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "convkernels/hypercube.hpp"
#include "convkernels/inner_kernel.hpp"

namespace convkernels {

enum class Pooling { None, Average, Weighted, Global, NonOverlapping };

struct ConvArchitecture {
  int d = 0;
  int q = 0;
  Pooling pooling = Pooling::None;
  int omega = 1;
  int delta = 1;
  std::vector<double> tau;  // weighted pooling: tau[x] for cyclic distance x = 0..d/2

  static ConvArchitecture fc(int d);
  static ConvArchitecture fc_gp(int d);
  static ConvArchitecture ck(int d, int q);
  static ConvArchitecture ck_lp(int d, int q, int omega);
  static ConvArchitecture ck_gp(int d, int q);
  static ConvArchitecture ck_lp_ds(int d, int q, int omega, int delta);
  static ConvArchitecture weighted(int d, int q, std::vector<double> tau);
  static ConvArchitecture gaussian(int d, int q, double sigma);
  static ConvArchitecture non_overlapping(int d, int q, int omega);

  void validate() const;
  bool full_patch() const { return q == d; }
  int width() const { return pooling == Pooling::Global ? d : (pooling == Pooling::None ? 1 : omega); }
  std::string name() const;
  json to_json() const;
  static ConvArchitecture from_json(const json& j);
};

// Pooling/downsampling weights: H(x,y) = sum_{a,b} W_ab h(<x_(a), y_(b)>/q).
Eigen::MatrixXd patch_weights(const ConvArchitecture& arch);

class KernelEvaluator {
 public:
  KernelEvaluator(const ConvArchitecture& arch, const InnerProductKernel& k);

  double operator()(const BinarySignal& x, const BinarySignal& y) const;
  // d <= 32 only; bit i set means x_i = -1.
  double eval_mask(uint64_t x, uint64_t y) const;
  // Evaluates several kernels sharing this geometry in one pass.
  void eval_mask_multi(uint64_t x, uint64_t y, const std::vector<const std::vector<double>*>& tables,
                       double* out) const;
  bool mask_path() const { return mask_path_; }
  const ConvArchitecture& arch() const { return arch_; }

 private:
  struct Shift {
    int delta;
    bool uniform;
    double weight;
    std::vector<double> w;
  };
  ConvArchitecture arch_;
  std::vector<double> table_;  // table_[p] = h((q-2p)/q)
  std::vector<Shift> shifts_;
  bool mask_path_ = false;
};

double kernel_eval(const ConvArchitecture& arch, const InnerProductKernel& k, const BinarySignal& x,
                   const BinarySignal& y);

Eigen::MatrixXd gram_matrix(const ConvArchitecture& arch, const InnerProductKernel& k,
                            const std::vector<BinarySignal>& X);
Eigen::MatrixXd cross_gram(const ConvArchitecture& arch, const InnerProductKernel& k,
                           const std::vector<BinarySignal>& A, const std::vector<BinarySignal>& B);

// kappa[j % d] for j = 1..d, so kappa[0] is kappa_d.
std::vector<double> kappa_weights(int d, int omega);
// Same formula without snapping the exact zeros and kappa_d.
std::vector<double> kappa_weights_raw(int d, int omega);
bool kappa_is_zero(int d, int omega, int j);
// c_delta = sum_s tau(dist s) tau(dist(s+delta)), delta = 0..d-1
std::vector<double> filter_autocorrelation(int d, const std::vector<double>& tau);
std::vector<double> kappa_weights_filter(int d, const std::vector<double>& tau);
std::vector<double> gaussian_filter(int d, double sigma);

struct PoolingMatrix {
  int r = 0, d = 0, q = 0, omega = 1, delta = 1;
  Eigen::MatrixXd M;
  // M = (num/den) * counts for counting-defined matrices.
  Eigen::Matrix<int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
  int64_t num = 1, den = 1;
  bool counted = false;
};

PoolingMatrix pooling_matrix(int r, const ConvArchitecture& arch);

struct BlockEigenpair {
  double value = 0;
  int freq = 0;  // block frequency in 0..m-1; sine partners carry m-j
  int index = 0;
  Eigen::VectorXd vec;
};

// Eigenpairs of a symmetric block-circulant matrix with block size delta.
std::vector<BlockEigenpair> block_circulant_eig(const Eigen::MatrixXd& M, int delta);

struct DownsampleReport {
  Eigen::MatrixXd A;
  Eigen::MatrixXd H0;
  double max_abs_H0 = 0;
  double max_abs_A1 = 0;
  bool exact_zero = false;      // integer numerators all vanish
  bool predicted_zero = false;  // q+1-r divisible by omega
};

DownsampleReport downsample_perturbation(int d, int q, int r, int omega, int delta);

struct DownsampleComparison {
  std::vector<double> eig_downsampled;
  std::vector<double> eig_reference;
  double max_abs_diff = 0;
};
DownsampleComparison downsampling_numeric_report(int d, int q, int r, int omega, int delta);

enum class ModeKind { Constant, Parity, Frequency, DegreeBlock, Orbit, Numeric };
std::string to_string(ModeKind k);

struct SpectralEntry {
  double lambda = 0;
  ModeKind kind = ModeKind::Constant;
  int degree = 0;
  IndexSet cls;
  int freq = -1;
  int64_t multiplicity = 1;
  int block = -1;
  int column = -1;
  int segment = -1;
};

// Orthonormal modes psi_c = sum_t basis(t,c) Y_{translates[t]}.
struct ModeBlock {
  int degree = 0;
  std::vector<IndexSet> translates;
  std::vector<uint64_t> masks;
  bool identity = false;  // basis is the identity when set
  Eigen::MatrixXd basis;
  Eigen::VectorXd eigenvalues;

  Eigen::VectorXd parities(const BinarySignal& x) const;
};

struct KernelSpectrum {
  ConvArchitecture arch;
  std::vector<SpectralEntry> entries;
  std::vector<ModeBlock> blocks;
  bool explicit_modes = true;

  double total_trace() const;
  int64_t mode_count() const;
  double tail_trace(int s) const;
  // sum lambda psi(x) psi(y) over explicit modes.
  double mercer_eval(const BinarySignal& x, const BinarySignal& y) const;
  std::vector<double> eigenvalue_list() const;
  json entry_json(const SpectralEntry& e) const;
};

struct SpectrumOptions {
  int64_t max_explicit_sets = 1 << 20;
};

KernelSpectrum spectrum(const ConvArchitecture& arch, const InnerProductKernel& k, const SpectrumOptions& opt = {});

KernelSpectrum brute_force_spectrum(const ConvArchitecture& arch, const InnerProductKernel& k);
std::vector<KernelSpectrum> brute_force_spectra(const ConvArchitecture& arch,
                                                const std::vector<InnerProductKernel>& ks);

struct SpectrumComparison {
  double max_eigenvalue_dev = 0;
  double max_projector_dev = 0;
  int clusters = 0;
};
SpectrumComparison compare_spectra(const KernelSpectrum& closed, const KernelSpectrum& oracle);

// Necklace count: orbits of l-subsets of Z_d under rotation.
int64_t orbit_count(int d, int l);

}  // namespace convkernels
