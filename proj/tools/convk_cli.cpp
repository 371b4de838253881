#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <omp.h>

#include <CLI11.hpp>

#include "convkernels/harness.hpp"

using namespace convkernels;
namespace fs = std::filesystem;

namespace {

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  return json::parse(f);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f || !(f << text)) throw std::runtime_error("cannot write " + p.string());
}

struct ArchFlags {
  std::string family = "CK";
  int d = 30, q = 10, omega = 1, delta = 1;
  double sigma = 1.0;

  void attach(CLI::App* app) {
    app->add_option("--family", family, "FC, FC-GP, CK, CK-LP, CK-GP, CK-LP-DS, CK-NO, CK-GAUSS");
    app->add_option("--d", d);
    app->add_option("--q", q);
    app->add_option("--omega", omega);
    app->add_option("--delta", delta);
    app->add_option("--sigma", sigma, "Gaussian filter width for CK-GAUSS");
  }
  json to_json() const {
    return {{"family", family}, {"d", d}, {"q", q}, {"omega", omega}, {"delta", delta}, {"sigma", sigma}};
  }
};

// Config keys "arch" and "kernel" override the flags.
std::pair<ConvArchitecture, KernelDescriptor> arch_and_kernel(const std::string& config, const ArchFlags& flags) {
  json arch_j = flags.to_json();
  KernelDescriptor kd = KernelDescriptor::experiment_poly();
  if (!config.empty()) {
    json j = read_json(config);
    if (j.contains("arch")) arch_j = j.at("arch");
    if (j.contains("kernel")) kd = KernelDescriptor::from_json(j.at("kernel"));
  }
  auto a = ConvArchitecture::from_json(arch_j);
  a.validate();
  return {a, kd};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectra, learning curves and checks for convolutional kernels on the hypercube"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config, out;
  uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config, "JSON config file");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker threads");

  ArchFlags sflags;
  auto* c_spec = app.add_subcommand("spectrum", "dump the closed-form spectrum");
  sflags.attach(c_spec);
  int64_t max_modes = 2000000;
  std::vector<int> radii;
  c_spec->add_option("--max-modes", max_modes);
  c_spec->add_option("--radii", radii, "diameters for pooling-matrix tables");

  int kd = 30, kw = 5;
  auto* c_kappa = app.add_subcommand("kappa", "print kappa_j for average pooling");
  c_kappa->add_option("--d", kd);
  c_kappa->add_option("--omega", kw);

  ArchFlags pflags;
  int pr = 1;
  auto* c_pool = app.add_subcommand("pooling-matrix", "print M^r and its block-circulant eigenvalues");
  pflags.attach(c_pool);
  c_pool->add_option("--r", pr);

  auto* c_curve = app.add_subcommand("curve", "run a learning-curve sweep");

  ArchFlags shflags;
  double sh_n = 100, sh_lambda = 0;
  int sh_s = 2;
  std::string sh_target = "lf_chain3";
  auto* c_shrink = app.add_subcommand("shrink-predict", "shrinkage prediction of the KRR risk");
  shflags.attach(c_shrink);
  c_shrink->add_option("--n", sh_n);
  c_shrink->add_option("--lambda", sh_lambda);
  c_shrink->add_option("--s", sh_s, "degree cutoff for the effective ridge");
  c_shrink->add_option("--target", sh_target, "lf_chainL or hf_chainL");

  std::string suite = "all", size = "small";
  auto* c_verify = app.add_subcommand("verify", "run property and oracle checks");
  c_verify->add_option("--suite", suite, "mercer|oracle|downsampling|trace|kappa|gegenbauer|risk|all");
  c_verify->add_option("--size", size, "small|full");

  std::string preset = "paper_figure_1";
  auto* c_preset = app.add_subcommand("preset", "print a shipped experiment config");
  c_preset->add_option("name", preset);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*c_spec) {
      auto [a, kdesc] = arch_and_kernel(config, sflags);
      auto k = gegenbauer_coeffs(kdesc, a.q);
      if (out.empty()) {
        auto sp = spectrum(a, k);
        for (const auto& e : sp.entries) std::cout << sp.entry_json(e).dump() << '\n';
      } else {
        for (const auto& p : dump_spectrum(a, k, out, {radii, max_modes})) std::cerr << "wrote " << p << '\n';
      }
    } else if (*c_kappa) {
      auto kap = kappa_weights(kd, kw);
      std::cout << "j,kappa\n" << std::setprecision(15);
      for (int j = 1; j <= kd; ++j) std::cout << j << ',' << kap[j % kd] << '\n';
    } else if (*c_pool) {
      auto [a, kdesc] = arch_and_kernel(config, pflags);
      auto pm = pooling_matrix(pr, a);
      std::cout << std::setprecision(15);
      if (pm.counted) std::cout << "# prefactor " << pm.num << '/' << pm.den << '\n';
      for (int i = 0; i < pm.M.rows(); ++i) {
        for (int j = 0; j < pm.M.cols(); ++j) {
          if (j) std::cout << ',';
          if (pm.counted) std::cout << pm.counts(i, j);
          else std::cout << pm.M(i, j);
        }
        std::cout << '\n';
      }
      std::cout << "# eigenvalues\n";
      for (const auto& e : block_circulant_eig(pm.M, a.delta)) std::cout << e.value << ',' << e.freq << '\n';
    } else if (*c_curve) {
      ExperimentConfig cfg =
          config.empty() ? ExperimentConfig::paper_figure_1() : ExperimentConfig::from_json(read_json(config));
      if (app.get_option("--seed")->count()) cfg.master_seed = seed;
      std::string dir = out.empty() ? (cfg.output.empty() ? "." : cfg.output) : out;
      auto table = run_learning_curve(cfg, [](const std::string& s) { std::cerr << "[curve] " << s << '\n'; });
      fs::create_directories(dir);
      write_file(fs::path(dir) / "cells.csv", table.cells_csv());
      write_file(fs::path(dir) / "summary.csv", table.summary_csv());
      for (const auto& t : cfg.targets)
        write_file(fs::path(dir) / ("curves_" + t.label() + ".svg"), curves_svg(table, t.label()));
      std::cout << table.summary_csv();
    } else if (*c_shrink) {
      auto [a, kdesc] = arch_and_kernel(config, shflags);
      auto k = gegenbauer_coeffs(kdesc, a.q);
      TargetSpec ts;
      if (sh_target.rfind("lf_chain", 0) == 0) ts = TargetSpec::lf_chain(std::stoi(sh_target.substr(8)));
      else if (sh_target.rfind("hf_chain", 0) == 0) ts = TargetSpec::hf_chain(std::stoi(sh_target.substr(8)));
      else throw std::invalid_argument("unknown target '" + sh_target + "'");
      auto f = build_target(ts, a.d);
      auto sp = spectrum(a, k);
      auto pred = shrinkage_predict(f, sp, sh_n, sh_lambda, sh_s);
      std::cout << json{{"arch", a.to_json()},
                        {"n", sh_n},
                        {"lambda", sh_lambda},
                        {"s", sh_s},
                        {"lambda_eff", pred.lambda_eff},
                        {"predicted_risk", pred.risk},
                        {"off_span", pred.off_span}}
                       .dump(2)
                << '\n';
    } else if (*c_verify) {
      auto rep = verify(suite, size);
      std::cout << rep.to_json().dump(2) << '\n';
      return rep.pass() ? 0 : 2;
    } else if (*c_preset) {
      if (preset != "paper_figure_1") throw std::invalid_argument("unknown preset '" + preset + "'");
      std::cout << ExperimentConfig::paper_figure_1().to_json().dump(2) << '\n';
    }
  } catch (const ResourceGuardError& e) {
    std::cerr << "resource guard: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
