#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "convkernels/harness.hpp"

namespace convkernels {

bool VerifyReport::pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

json VerifyReport::to_json() const {
  json cs = json::array();
  for (const auto& c : checks)
    cs.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}});
  return {{"suite", suite}, {"size", size}, {"pass", pass()}, {"seconds", seconds}, {"checks", cs}};
}

namespace {

void check_le(std::vector<VerifyCheck>& out, const std::string& name, double v, double tol) {
  out.push_back({name, v, tol, std::isfinite(v) && v <= tol});
}

void check_true(std::vector<VerifyCheck>& out, const std::string& name, bool ok) {
  out.push_back({name, ok ? 1.0 : 0.0, 1.0, ok});
}

std::vector<ConvArchitecture> property_grid(bool full) {
  std::vector<ConvArchitecture> g;
  const std::vector<int> ds = full ? std::vector<int>{8, 10, 12} : std::vector<int>{8, 10};
  for (int d : ds) {
    const int q = d == 8 ? 3 : 4;
    g.push_back(ConvArchitecture::ck(d, q));
    g.push_back(ConvArchitecture::ck_lp(d, q, 2));
    g.push_back(ConvArchitecture::ck_gp(d, q));
    g.push_back(ConvArchitecture::ck_lp_ds(d, q, 2, 2));
    g.push_back(ConvArchitecture::ck_lp_ds(d, q, 1, 2));
    g.push_back(ConvArchitecture::gaussian(d, q, 1.5));
    if (d % 2 == 0 && 2 * q <= d / 2) g.push_back(ConvArchitecture::non_overlapping(d, q, d / 2));
    g.push_back(ConvArchitecture::fc(d));
    g.push_back(ConvArchitecture::fc_gp(d));
  }
  return g;
}

std::string tag(const ConvArchitecture& a) {
  return a.name() + "(d=" + std::to_string(a.d) + ",q=" + std::to_string(a.q) + ",w=" + std::to_string(a.omega) +
         ",D=" + std::to_string(a.delta) + ")";
}

void suite_mercer(bool full, std::vector<VerifyCheck>& out) {
  const auto k0 = KernelDescriptor::experiment_poly();
  std::mt19937_64 rng(7);
  for (const auto& a : property_grid(full)) {
    auto k = gegenbauer_coeffs(k0, a.q);
    auto sp = spectrum(a, k);
    double worst = 0;
    for (int i = 0; i < 500; ++i) {
      auto x = BinarySignal::random(a.d, rng), y = BinarySignal::random(a.d, rng);
      worst = std::max(worst, std::abs(kernel_eval(a, k, x, y) - sp.mercer_eval(x, y)));
    }
    check_le(out, "mercer " + tag(a), worst, 1e-8);
  }
  for (int q : {3, 5, 10, 20}) {
    check_le(out, "reconstruction poly q=" + std::to_string(q),
             reconstruction_error(gegenbauer_coeffs(k0, q)), 1e-10);
    Activation relu;
    check_le(out, "reconstruction relu ntk q=" + std::to_string(q),
             reconstruction_error(ntk_from_activation(relu, q).kernel), 1e-10);
  }
}

std::vector<ConvArchitecture> oracle_grid(const std::vector<int>& ds) {
  std::vector<ConvArchitecture> g;
  for (int d : ds)
    for (int q : {3, 4})
      for (int w : {1, 2, 5, d})
        for (int D : {1, 2, w}) {
          if (w > d || d % D != 0) continue;
          auto a = ConvArchitecture::ck_lp_ds(d, q, w, D);
          try {
            a.validate();
          } catch (const std::invalid_argument&) {
            continue;
          }
          bool dup = false;
          for (const auto& b : g) dup |= b.d == a.d && b.q == a.q && b.omega == a.omega && b.delta == a.delta;
          if (!dup) g.push_back(a);
        }
  return g;
}

void suite_oracle(bool full, std::vector<VerifyCheck>& out) {
  std::vector<InnerProductKernel> ks;
  const std::vector<KernelDescriptor> hs{KernelDescriptor::poly({0, 1}), KernelDescriptor::poly({0, 0, 1}),
                                         KernelDescriptor::experiment_poly()};
  for (const auto& a : oracle_grid(full ? std::vector<int>{10} : std::vector<int>{8})) {
    ks.clear();
    for (const auto& h : hs) ks.push_back(gegenbauer_coeffs(h, a.q));
    auto oracles = brute_force_spectra(a, ks);
    double ev = 0, pv = 0;
    for (size_t i = 0; i < ks.size(); ++i) {
      auto c = compare_spectra(spectrum(a, ks[i]), oracles[i]);
      ev = std::max(ev, c.max_eigenvalue_dev);
      pv = std::max(pv, c.max_projector_dev);
    }
    check_le(out, "oracle eigenvalues " + tag(a), ev, 1e-8);
    check_le(out, "oracle projectors " + tag(a), pv, 1e-6);
  }
}

void suite_downsampling(bool full, std::vector<VerifyCheck>& out) {
  struct T {
    int d, w, q, r;
  };
  std::vector<T> ts{{12, 3, 4, 1}, {12, 3, 4, 2}, {12, 3, 4, 3}, {20, 5, 8, 4}, {20, 5, 8, 1}};
  if (full) ts.insert(ts.end(), {{30, 5, 10, 1}, {30, 5, 10, 6}, {24, 4, 7, 4}, {24, 4, 7, 2}, {40, 8, 15, 8}});
  for (const auto& t : ts) {
    auto rep = downsample_perturbation(t.d, t.q, t.r, t.w, t.w);
    std::string s = "(d=" + std::to_string(t.d) + ",w=" + std::to_string(t.w) + ",q=" + std::to_string(t.q) +
                    ",r=" + std::to_string(t.r) + ")";
    check_le(out, "downsampling H0 " + s, rep.max_abs_H0, 1e-12);
    check_le(out, "downsampling A1 " + s, rep.max_abs_A1, 1e-12);
    if (rep.predicted_zero) check_true(out, "downsampling A vanishes " + s, rep.exact_zero);
  }
}

// h - xi_0, so that the constant mode carries no mass.
InnerProductKernel centered(const KernelDescriptor& h, int q) {
  auto k = gegenbauer_coeffs(h, q);
  std::vector<double> v = k.values();
  for (auto& x : v) x -= k.xi(0);
  return gegenbauer_coeffs(KernelDescriptor::table(v), q);
}

void suite_trace(bool full, std::vector<VerifyCheck>& out) {
  const auto k0 = KernelDescriptor::experiment_poly();
  auto grid = property_grid(true);
  if (!full) grid.resize(12);
  for (const auto& a : grid) {
    auto k = centered(k0, a.q);
    const uint64_t N = 1ULL << a.d;
    double sum = 0;
    for (uint64_t m = 0; m < N; ++m) {
      auto x = BinarySignal::from_mask(m, a.d);
      sum += kernel_eval(a, k, x, x);
    }
    const double tr = spectrum(a, k).total_trace();
    check_le(out, "spectral trace vs enumeration " + tag(a), std::abs(tr - sum / N), 1e-9);
    // the h(1) identity covers the CK family with average pooling and downsampling
    const bool ck_family = !a.full_patch() && (a.pooling == Pooling::None || a.pooling == Pooling::Average ||
                                               a.pooling == Pooling::Global);
    if (ck_family || (a.full_patch() && a.pooling == Pooling::None))
      check_le(out, "trace equals h(1) " + tag(a), std::abs(sum / N - k.h_one()), 1e-9);
  }
}

void suite_kappa(bool full, std::vector<VerifyCheck>& out) {
  std::vector<std::pair<int, int>> pairs;
  for (int d : {12, 30, 36, 60, 101, 120})
    for (int w : {2, 3, 4, 5, 6, 10, 12, 25})
      if (w < d) pairs.emplace_back(d, w);
  if (!full) pairs.resize(30);
  for (auto [d, w] : pairs) {
    auto kap = kappa_weights(d, w);
    auto raw = kappa_weights_raw(d, w);
    int rule = 0, numeric = 0;
    double sym = 0;
    for (int j = 1; j < d; ++j) {
      rule += kappa_is_zero(d, w, j);
      numeric += std::abs(raw[j]) < 1e-9;
      sym = std::max(sym, std::abs(kap[j] - kap[d - j]));
    }
    const int expect = std::gcd(w, d) - 1;
    std::string s = "(d=" + std::to_string(d) + ",w=" + std::to_string(w) + ")";
    check_true(out, "kappa_d equals omega " + s, kap[0] == static_cast<double>(w));
    check_le(out, "kappa symmetry " + s, sym, 0.0);
    check_true(out, "kappa zero count by rule " + s, rule == expect);
    check_true(out, "kappa zero count numeric " + s, numeric == expect);
  }
}

void suite_gegenbauer(bool, std::vector<VerifyCheck>& out) {
  for (int q = 1; q <= 20; ++q) {
    auto p = binomial_law(q);
    std::vector<std::vector<double>> rows(q + 1);
    for (int k = 0; k <= q; ++k) rows[k] = gegenbauer_row(q, q - 2 * k);
    double worst = 0;
    for (int l = 0; l <= q; ++l)
      for (int m = 0; m <= q; ++m) {
        double s = 0;
        for (int k = 0; k <= q; ++k) s += p[k] * rows[k][l] * rows[k][m];
        worst = std::max(worst, std::abs(s - (l == m ? 1.0 / binom(q, l) : 0.0)));
      }
    check_le(out, "gegenbauer orthogonality q=" + std::to_string(q), worst, 1e-10);
  }
  for (const std::string name : {"relu", "tanh"}) {
    Activation a;
    a.name = name;
    for (int q : {4, 9, 16}) {
      auto r = ntk_from_activation(a, q);
      auto p = binomial_law(q);
      double z = 0, kk = 0, norm = 0;
      for (int l = 0; l <= q; ++l) {
        z += r.zeta2[l] * binom(q, l);
        kk += r.kappa[l] * r.kappa[l] * binom(q, l);
      }
      for (int k = 0; k <= q; ++k) {
        double ds = a.derivative((q - 2 * k) / std::sqrt(static_cast<double>(q)));
        norm += p[k] * ds * ds;
      }
      std::string s = name + " q=" + std::to_string(q);
      check_le(out, "zeta mass vs kappa mass " + s, std::abs(z - kk), 1e-10);
      check_le(out, "kappa mass vs derivative norm " + s, std::abs(kk - norm), 1e-10);
    }
  }
  Activation id;
  id.name = "identity";
  for (int q : {3, 7, 12}) {
    auto r = ntk_from_activation(id, q);
    double worst = 0;
    for (int l = 0; l <= q; ++l) worst = std::max(worst, std::abs(r.kernel.xi(l) - (l == 1 ? 2.0 / q : 0.0)));
    check_le(out, "ntk identity activation q=" + std::to_string(q), worst, 1e-12);
  }
}

void suite_risk(bool full, std::vector<VerifyCheck>& out) {
  const auto k0 = KernelDescriptor::experiment_poly();
  std::vector<ConvArchitecture> archs{ConvArchitecture::ck_lp(12, 4, 3), ConvArchitecture::ck_gp(12, 4),
                                      ConvArchitecture::fc(12), ConvArchitecture::fc_gp(12)};
  if (full) archs.push_back(ConvArchitecture::ck_lp_ds(20, 5, 5, 5));
  for (const auto& a : archs) {
    auto f = build_target(TargetSpec::lf_chain(3), a.d);
    auto k = gegenbauer_coeffs(k0, a.q);
    auto ds = sample_dataset(f, 60, 0.0, 11);
    auto model = krr_fit(ds, a, k, 1e-3);
    auto sp = a.full_patch() ? KernelSpectrum{} : spectrum(a, k);
    auto ex = test_risk(model, f, RiskMode{RiskMode::Kind::Exact, 0, 0}, a.full_patch() ? nullptr : &sp);
    auto mc = test_risk(model, f, RiskMode{RiskMode::Kind::MonteCarlo, full ? 100000 : 20000, 5});
    check_le(out, "exact vs monte-carlo risk " + tag(a), std::abs(ex.risk - mc.risk), 4 * mc.stderr_ + 1e-12);
  }
}

}  // namespace

VerifyReport verify(const std::string& suite, const std::string& size) {
  if (size != "small" && size != "full") throw std::invalid_argument("size must be small or full");
  const bool full = size == "full";
  using Fn = void (*)(bool, std::vector<VerifyCheck>&);
  const std::vector<std::pair<std::string, Fn>> suites{
      {"mercer", suite_mercer}, {"oracle", suite_oracle},         {"downsampling", suite_downsampling},
      {"trace", suite_trace},   {"kappa", suite_kappa},           {"gegenbauer", suite_gegenbauer},
      {"risk", suite_risk}};
  VerifyReport rep;
  rep.suite = suite;
  rep.size = size;
  auto t0 = std::chrono::steady_clock::now();
  bool found = false;
  for (const auto& [name, fn] : suites) {
    if (suite == name || suite == "all") {
      fn(full, rep.checks);
      found = true;
    }
  }
  if (!found) throw std::invalid_argument("unknown verify suite '" + suite + "'");
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace convkernels
