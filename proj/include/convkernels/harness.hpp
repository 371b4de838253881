#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "convkernels/conv_spectral.hpp"
#include "convkernels/krr.hpp"

namespace convkernels {

struct TargetSpec {
  enum class Kind { LfChain, HfChain, Fourier, RandomLocal, Zero };
  Kind kind = Kind::LfChain;
  int degree = 3;
  int q = 0;
  uint64_t seed = 0;
  std::vector<std::pair<std::vector<int>, double>> terms;  // 1-based sets

  static TargetSpec lf_chain(int l);
  static TargetSpec hf_chain(int l);
  static TargetSpec zero();
  static TargetSpec from_json(const json& j);
  json to_json() const;
  std::string label() const;
};

FourierTarget build_target(const TargetSpec& spec, int d);

class ResourceGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArchChoice {
  std::string label;
  ConvArchitecture arch;
};

struct ExperimentConfig {
  int d = 30;
  int q = 10;
  int omega = 5;
  int delta = 5;
  KernelDescriptor kernel = KernelDescriptor::experiment_poly();
  double lambda = 1e-6;
  double noise_sigma = 0;
  std::vector<TargetSpec> targets{TargetSpec::lf_chain(3)};
  std::vector<std::string> archs{"FC", "FC-GP", "CK", "CK-LP", "CK-GP"};
  std::vector<int> n_grid;
  int seeds = 5;
  uint64_t master_seed = 0;
  RiskMode risk;
  bool risk_auto = true;  // exact everywhere, as recorded in the decisions notes
  double memory_cap_gib = 2.0;
  std::string output;

  static ExperimentConfig paper_figure_1();
  static ExperimentConfig from_json(const json& j);
  json to_json() const;
  void validate() const;
  std::vector<ArchChoice> architectures() const;
};

std::vector<int> geometric_grid(int lo, int hi, int points);
uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0);

struct CurveCell {
  std::string arch, kernel, target, mode;
  int n = 0;
  int seed = 0;
  double lambda = 0, risk = 0, risk_stderr = 0;
};

struct CurveSummary {
  std::string arch, target;
  int n = 0;
  double mean = 0, std = 0;
};

struct CurveTable {
  std::vector<CurveCell> cells;
  std::vector<CurveSummary> summary;

  std::string cells_csv() const;
  std::string summary_csv() const;
  const CurveSummary* find(const std::string& arch, const std::string& target, int n) const;
  // Smallest n with mean risk below the level; -1 if never.
  int threshold(const std::string& arch, const std::string& target, double level) const;
};

using ProgressFn = std::function<void(const std::string&)>;

CurveTable run_learning_curve(const ExperimentConfig& cfg, const ProgressFn& progress = {});

std::string curves_svg(const CurveTable& table, const std::string& target);

struct DumpOptions {
  std::vector<int> radii;  // diameters for pooling-matrix tables when delta > 1
  int64_t max_modes = 2000000;
};

// Writes spectrum.jsonl, kappa.csv and, for downsampling, pooling_eig_r*.csv into dir.
std::vector<std::string> dump_spectrum(const ConvArchitecture& arch, const InnerProductKernel& k,
                                       const std::string& dir, const DumpOptions& opt = {});

struct VerifyCheck {
  std::string name;
  double value = 0;
  double tolerance = 0;
  bool pass = false;
};

struct VerifyReport {
  std::string suite, size;
  std::vector<VerifyCheck> checks;
  double seconds = 0;
  bool pass() const;
  json to_json() const;
};

// suites: mercer, oracle, downsampling, trace, kappa, gegenbauer, risk, all
VerifyReport verify(const std::string& suite, const std::string& size);

}  // namespace convkernels
