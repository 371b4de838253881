#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "convkernels/harness.hpp"

namespace convkernels {

namespace fs = std::filesystem;

std::vector<int> geometric_grid(int lo, int hi, int points) {
  if (lo < 1 || hi < lo || points < 1) throw std::invalid_argument("invalid grid bounds");
  std::vector<int> g;
  for (int i = 0; i < points; ++i) {
    double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    int v = static_cast<int>(std::lround(lo * std::pow(static_cast<double>(hi) / lo, t)));
    if (g.empty() || v > g.back()) g.push_back(v);
  }
  return g;
}

uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b) {
  auto mix = [](uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

ExperimentConfig ExperimentConfig::paper_figure_1() {
  ExperimentConfig c;
  c.targets = {TargetSpec::lf_chain(3), TargetSpec::hf_chain(3)};
  c.n_grid = geometric_grid(10, 8000, 12);
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (j.contains("preset")) {
    std::string p = j.at("preset").get<std::string>();
    if (p != "paper_figure_1") throw std::invalid_argument("unknown preset '" + p + "'");
    ExperimentConfig c = paper_figure_1();
    json rest = j;
    rest.erase("preset");
    json merged = c.to_json();
    merged.merge_patch(rest);
    return from_json(merged);
  }
  ExperimentConfig c;
  c.d = j.value("d", c.d);
  c.q = j.value("q", c.q);
  c.omega = j.value("omega", c.omega);
  c.delta = j.value("delta", c.delta);
  if (j.contains("kernel")) c.kernel = KernelDescriptor::from_json(j.at("kernel"));
  c.lambda = j.value("lambda", c.lambda);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  if (j.contains("targets")) {
    c.targets.clear();
    for (const auto& t : j.at("targets")) c.targets.push_back(TargetSpec::from_json(t));
  } else if (j.contains("target")) {
    c.targets = {TargetSpec::from_json(j.at("target"))};
  }
  if (j.contains("archs")) c.archs = j.at("archs").get<std::vector<std::string>>();
  if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<int>>();
  c.seeds = j.value("seeds", c.seeds);
  c.master_seed = j.value("master_seed", c.master_seed);
  if (j.contains("risk")) {
    const auto& r = j.at("risk");
    std::string mode = r.value("mode", "exact");
    c.risk_auto = false;
    c.risk.kind = mode == "exact" ? RiskMode::Kind::Exact : RiskMode::Kind::MonteCarlo;
    c.risk.m = r.value("m", c.risk.m);
  }
  c.memory_cap_gib = j.value("memory_cap_gib", c.memory_cap_gib);
  c.output = j.value("output", c.output);
  return c;
}

json ExperimentConfig::to_json() const {
  json t = json::array();
  for (const auto& s : targets) t.push_back(s.to_json());
  json j{{"d", d},
         {"q", q},
         {"omega", omega},
         {"delta", delta},
         {"kernel", kernel.to_json()},
         {"lambda", lambda},
         {"noise_sigma", noise_sigma},
         {"targets", t},
         {"archs", archs},
         {"n_grid", n_grid},
         {"seeds", seeds},
         {"master_seed", master_seed},
         {"memory_cap_gib", memory_cap_gib}};
  if (!risk_auto) j["risk"] = {{"mode", risk.kind == RiskMode::Kind::Exact ? "exact" : "monte-carlo"}, {"m", risk.m}};
  if (!output.empty()) j["output"] = output;
  return j;
}

void ExperimentConfig::validate() const {
  if (n_grid.empty()) throw std::invalid_argument("n_grid must not be empty");
  for (size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw std::invalid_argument("n_grid entries must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw std::invalid_argument("n_grid must be strictly increasing");
  }
  if (seeds < 1) throw std::invalid_argument("need at least one seed");
  if (lambda < 0 || noise_sigma < 0) throw std::invalid_argument("lambda and noise must be nonnegative");
  if (targets.empty()) throw std::invalid_argument("need at least one target");
  for (const auto& a : architectures()) a.arch.validate();
}

std::vector<ArchChoice> ExperimentConfig::architectures() const {
  std::vector<ArchChoice> out;
  for (const auto& label : archs) {
    ConvArchitecture a;
    if (label == "FC") a = ConvArchitecture::fc(d);
    else if (label == "FC-GP") a = ConvArchitecture::fc_gp(d);
    else if (label == "CK") a = ConvArchitecture::ck(d, q);
    else if (label == "CK-LP") a = ConvArchitecture::ck_lp(d, q, omega);
    else if (label == "CK-GP") a = ConvArchitecture::ck_gp(d, q);
    else if (label == "CK-LP-DS") a = ConvArchitecture::ck_lp_ds(d, q, omega, delta);
    else if (label == "CK-NO") a = ConvArchitecture::non_overlapping(d, q, omega);
    else throw std::invalid_argument("unknown architecture label '" + label + "'");
    out.push_back({label, a});
  }
  return out;
}

namespace {

std::string csv_quote(const std::string& s) {
  std::string o = "\"";
  for (char c : s) o += c == '"' ? std::string("\"\"") : std::string(1, c);
  return o + "\"";
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(12) << v;
  return o.str();
}

}  // namespace

std::string CurveTable::cells_csv() const {
  std::ostringstream o;
  o << "arch,kernel,target,n,seed,lambda,risk,risk_stderr,mode\n";
  for (const auto& c : cells)
    o << c.arch << ',' << csv_quote(c.kernel) << ',' << c.target << ',' << c.n << ',' << c.seed << ',' << fmt(c.lambda) << ','
      << fmt(c.risk) << ',' << fmt(c.risk_stderr) << ',' << c.mode << '\n';
  return o.str();
}

std::string CurveTable::summary_csv() const {
  std::ostringstream o;
  o << "arch,target,n,mean_risk,std_risk\n";
  for (const auto& s : summary) o << s.arch << ',' << s.target << ',' << s.n << ',' << fmt(s.mean) << ',' << fmt(s.std) << '\n';
  return o.str();
}

const CurveSummary* CurveTable::find(const std::string& arch, const std::string& target, int n) const {
  for (const auto& s : summary)
    if (s.arch == arch && s.target == target && s.n == n) return &s;
  return nullptr;
}

int CurveTable::threshold(const std::string& arch, const std::string& target, double level) const {
  for (const auto& s : summary)
    if (s.arch == arch && s.target == target && s.mean < level) return s.n;
  return -1;
}

CurveTable run_learning_curve(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const long N = cfg.n_grid.back();
  const auto archs = cfg.architectures();
  bool any_full = false;
  for (const auto& a : archs) any_full |= a.arch.full_patch();
  const double bytes = static_cast<double>(N) * N * 8.0 * (any_full ? 2.0 : 1.0) * (cfg.lambda == 0 ? 2.0 : 1.0);
  if (bytes > cfg.memory_cap_gib * 1024.0 * 1024.0 * 1024.0)
    throw ResourceGuardError("projected Gram memory " + fmt(bytes / (1 << 30)) + " GiB exceeds cap of " +
                             fmt(cfg.memory_cap_gib) + " GiB");

  std::vector<FourierTarget> fs;
  for (const auto& t : cfg.targets) fs.push_back(build_target(t, cfg.d));
  const bool exact = cfg.risk_auto || cfg.risk.kind == RiskMode::Kind::Exact;
  const std::string mode = exact ? "exact" : "monte-carlo";
  const std::string klabel = cfg.kernel.label();

  CurveTable table;
  for (size_t ai = 0; ai < archs.size(); ++ai) {
    const auto& arch = archs[ai].arch;
    InnerProductKernel k = gegenbauer_coeffs(cfg.kernel, arch.q);
    KernelSpectrum sp;
    if (exact && !arch.full_patch()) sp = spectrum(arch, k);
    for (int s = 0; s < cfg.seeds; ++s) {
      if (progress) progress(archs[ai].label + " seed " + std::to_string(s));
      std::mt19937_64 rng(derive_seed(cfg.master_seed, static_cast<uint64_t>(s)));
      std::vector<BinarySignal> X;
      X.reserve(N);
      for (long i = 0; i < N; ++i) X.push_back(BinarySignal::random(cfg.d, rng));
      Eigen::MatrixXd G = gram_matrix(arch, k, X);
      Eigen::MatrixXd K2;
      std::vector<Eigen::VectorXd> g;
      if (exact && arch.full_patch()) {
        K2 = squared_gram_full(arch, k, X);
        for (const auto& f : fs) g.push_back(apply_operator_full(arch, k, f, X));
      }
      std::unique_ptr<NestedRidgeSolver> solver;
      if (cfg.lambda > 0) solver = std::make_unique<NestedRidgeSolver>(std::move(G), cfg.lambda);
      for (size_t ti = 0; ti < fs.size(); ++ti) {
        std::mt19937_64 nrng(derive_seed(cfg.master_seed, static_cast<uint64_t>(s), 1000 + ti));
        std::normal_distribution<double> noise(0.0, 1.0);
        Eigen::VectorXd y(N);
        for (long i = 0; i < N; ++i)
          y[i] = fs[ti].evaluate(X[i]) + (cfg.noise_sigma > 0 ? cfg.noise_sigma * noise(nrng) : 0.0);
        for (int n : cfg.n_grid) {
          Eigen::VectorXd alpha;
          std::vector<BinarySignal> Xn(X.begin(), X.begin() + n);
          if (solver) {
            alpha = solver->solve(y, n);
          } else {
            Dataset ds{Xn, y.head(n), cfg.noise_sigma, 0};
            alpha = krr_fit_gram(ds, arch, k, 0.0, G.topLeftCorner(n, n)).alpha;
          }
          CurveCell cell{archs[ai].label, klabel, cfg.targets[ti].label(), mode, n, s, cfg.lambda, 0, 0};
          if (exact && arch.full_patch()) {
            cell.risk = fs[ti].norm2() - 2 * alpha.dot(g[ti].head(n)) +
                        alpha.dot(K2.topLeftCorner(n, n).selfadjointView<Eigen::Lower>() * alpha);
          } else if (exact) {
            cell.risk = exact_risk_spectral(sp, Xn, alpha, fs[ti]);
          } else {
            KRRModel m{arch, k, Xn, alpha, cfg.lambda};
            RiskMode rm = cfg.risk;
            rm.seed = derive_seed(cfg.master_seed, static_cast<uint64_t>(s), 5000 + n);
            auto r = test_risk(m, fs[ti], rm);
            cell.risk = r.risk;
            cell.risk_stderr = r.stderr_;
          }
          table.cells.push_back(cell);
        }
      }
    }
  }
  std::map<std::string, size_t> arch_order, target_order;
  for (size_t i = 0; i < archs.size(); ++i) arch_order[archs[i].label] = i;
  for (size_t i = 0; i < cfg.targets.size(); ++i) target_order[cfg.targets[i].label()] = i;
  std::stable_sort(table.cells.begin(), table.cells.end(), [&](const CurveCell& a, const CurveCell& b) {
    if (a.arch != b.arch) return arch_order[a.arch] < arch_order[b.arch];
    if (a.target != b.target) return target_order[a.target] < target_order[b.target];
    if (a.n != b.n) return a.n < b.n;
    return a.seed < b.seed;
  });
  for (size_t i = 0; i < table.cells.size();) {
    size_t j = i;
    double sum = 0;
    while (j < table.cells.size() && table.cells[j].arch == table.cells[i].arch &&
           table.cells[j].target == table.cells[i].target && table.cells[j].n == table.cells[i].n)
      sum += table.cells[j++].risk;
    const double cnt = static_cast<double>(j - i), mean = sum / cnt;
    double var = 0;
    for (size_t t = i; t < j; ++t) var += (table.cells[t].risk - mean) * (table.cells[t].risk - mean);
    table.summary.push_back(
        {table.cells[i].arch, table.cells[i].target, table.cells[i].n, mean, cnt > 1 ? std::sqrt(var / (cnt - 1)) : 0.0});
    i = j;
  }
  return table;
}

std::string curves_svg(const CurveTable& table, const std::string& target) {
  const double W = 640, H = 420, L = 60, R = 130, T = 20, B = 50;
  std::map<std::string, std::vector<const CurveSummary*>> series;
  std::vector<std::string> order;
  double nmin = 1e300, nmax = 0, ymax = 0;
  for (const auto& s : table.summary) {
    if (s.target != target) continue;
    if (!series.count(s.arch)) order.push_back(s.arch);
    series[s.arch].push_back(&s);
    nmin = std::min(nmin, static_cast<double>(s.n));
    nmax = std::max(nmax, static_cast<double>(s.n));
    ymax = std::max(ymax, s.mean);
  }
  if (order.empty()) return "";
  ymax = std::max(ymax * 1.05, 1e-12);
  const double lx0 = std::log10(nmin), lx1 = std::max(std::log10(nmax), lx0 + 1e-9);
  auto px = [&](double n) { return L + (std::log10(n) - lx0) / (lx1 - lx0) * (W - L - R); };
  auto py = [&](double y) { return H - B - y / ymax * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << (W - R + L) / 2 << "\" y=\"" << H - 10 << "\" font-size=\"12\">n (log scale)</text>\n";
  o << "<text x=\"5\" y=\"" << T + 10 << "\" font-size=\"12\">risk</text>\n";
  for (int e = static_cast<int>(std::ceil(lx0)); e <= static_cast<int>(std::floor(lx1)); ++e)
    o << "<text x=\"" << px(std::pow(10.0, e)) - 10 << "\" y=\"" << H - B + 15 << "\" font-size=\"10\">1e" << e
      << "</text>\n";
  o << "<text x=\"" << L - 40 << "\" y=\"" << py(ymax / 1.05) + 4 << "\" font-size=\"10\">" << fmt(ymax / 1.05).substr(0, 6)
    << "</text>\n";
  for (size_t i = 0; i < order.size(); ++i) {
    const char* col = colors[i % 7];
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (const auto* s : series[order[i]]) o << px(s->n) << ',' << py(s->mean) << ' ';
    o << "\"/>\n";
    o << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 15 * (i + 1) << "\" font-size=\"12\" fill=\"" << col << "\">"
      << order[i] << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot open output file " + p.string());
  return f;
}

}  // namespace

std::vector<std::string> dump_spectrum(const ConvArchitecture& arch, const InnerProductKernel& k,
                                       const std::string& dir, const DumpOptions& opt) {
  arch.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  std::vector<std::string> written;
  const int d = arch.d, q = arch.q;

  double est = 0;
  if (arch.full_patch()) {
    est = 1;  // grouped by degree when large
  } else {
    for (int l = 1; l <= q; ++l)
      if (k.xi(l) > 0) est += d * binom(q - 1, l - 1);
  }
  if (est <= static_cast<double>(opt.max_modes)) {
    auto sp = spectrum(arch, k);
    fs::path p = fs::path(dir) / "spectrum.jsonl";
    auto f = open_out(p);
    for (const auto& e : sp.entries) f << sp.entry_json(e).dump() << '\n';
    if (!f) throw std::runtime_error("write failed for " + p.string());
    written.push_back(p.string());
  }
  if (!arch.full_patch() && arch.pooling != Pooling::NonOverlapping) {
    std::vector<double> kap = arch.pooling == Pooling::Weighted ? kappa_weights_filter(d, arch.tau)
                                                                 : kappa_weights(d, arch.width());
    fs::path p = fs::path(dir) / "kappa.csv";
    auto f = open_out(p);
    f << "j,kappa\n";
    for (int j = 1; j <= d; ++j) f << j << ',' << std::setprecision(15) << kap[j % d] << '\n';
    written.push_back(p.string());
    if (arch.delta > 1) {
      std::vector<int> radii = opt.radii.empty() ? std::vector<int>{1} : opt.radii;
      for (int r : radii) {
        auto pm = pooling_matrix(r, arch);
        fs::path pe = fs::path(dir) / ("pooling_eig_r" + std::to_string(r) + ".csv");
        auto fe = open_out(pe);
        fe << "rank,eigenvalue,block_freq,index\n";
        int rank = 0;
        for (const auto& e : block_circulant_eig(pm.M, arch.delta))
          fe << ++rank << ',' << std::setprecision(15) << e.value << ',' << e.freq << ',' << e.index << '\n';
        written.push_back(pe.string());
      }
    }
  }
  return written;
}

}  // namespace convkernels
