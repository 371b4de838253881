#include <cmath>
#include <random>
#include <stdexcept>

#include "convkernels/harness.hpp"

namespace convkernels {

TargetSpec TargetSpec::lf_chain(int l) {
  TargetSpec t;
  t.kind = Kind::LfChain;
  t.degree = l;
  return t;
}

TargetSpec TargetSpec::hf_chain(int l) {
  TargetSpec t;
  t.kind = Kind::HfChain;
  t.degree = l;
  return t;
}

TargetSpec TargetSpec::zero() {
  TargetSpec t;
  t.kind = Kind::Zero;
  t.degree = 0;
  return t;
}

TargetSpec TargetSpec::from_json(const json& j) {
  TargetSpec t;
  std::string k = j.at("kind").get<std::string>();
  if (k == "lf_chain") return lf_chain(j.at("degree").get<int>());
  if (k == "hf_chain") return hf_chain(j.at("degree").get<int>());
  if (k == "zero") return zero();
  if (k == "fourier") {
    t.kind = Kind::Fourier;
    for (const auto& term : j.at("terms"))
      t.terms.emplace_back(term.at("set").get<std::vector<int>>(), term.at("coeff").get<double>());
    return t;
  }
  if (k == "random_local") {
    t.kind = Kind::RandomLocal;
    t.q = j.at("q").get<int>();
    t.degree = j.at("degree").get<int>();
    t.seed = j.value("seed", 0ULL);
    return t;
  }
  throw std::invalid_argument("unknown target kind '" + k + "'");
}

json TargetSpec::to_json() const {
  switch (kind) {
    case Kind::LfChain:
      return {{"kind", "lf_chain"}, {"degree", degree}};
    case Kind::HfChain:
      return {{"kind", "hf_chain"}, {"degree", degree}};
    case Kind::Zero:
      return {{"kind", "zero"}};
    case Kind::RandomLocal:
      return {{"kind", "random_local"}, {"q", q}, {"degree", degree}, {"seed", seed}};
    case Kind::Fourier: {
      json terms_j = json::array();
      for (const auto& [s, c] : terms) terms_j.push_back({{"set", s}, {"coeff", c}});
      return {{"kind", "fourier"}, {"terms", terms_j}};
    }
  }
  return {};
}

std::string TargetSpec::label() const {
  switch (kind) {
    case Kind::LfChain:
      return "lf_chain" + std::to_string(degree);
    case Kind::HfChain:
      return "hf_chain" + std::to_string(degree);
    case Kind::Zero:
      return "zero";
    case Kind::RandomLocal:
      return "random_local" + std::to_string(degree);
    case Kind::Fourier:
      return "fourier";
  }
  return "?";
}

FourierTarget build_target(const TargetSpec& spec, int d) {
  FourierTarget f(d);
  auto chain = [&](int start, int l) {
    std::vector<int> m;
    for (int i = 0; i < l; ++i) m.push_back((start + i) % d);
    return IndexSet(std::move(m), d);
  };
  switch (spec.kind) {
    case TargetSpec::Kind::Zero:
      break;
    case TargetSpec::Kind::LfChain:
      if (spec.degree < 1 || spec.degree > d) throw std::invalid_argument("chain degree out of range");
      for (int i = 0; i < d; ++i) f.add(chain(i, spec.degree), 1.0 / std::sqrt(d));
      break;
    case TargetSpec::Kind::HfChain:
      if (d % 2 != 0)
        throw std::invalid_argument("hf_chain needs even d: the sign (-1)^i is not consistent around an odd cycle");
      if (spec.degree < 1 || spec.degree > d) throw std::invalid_argument("chain degree out of range");
      // position i (1-based) carries (-1)^i
      for (int i = 0; i < d; ++i) f.add(chain(i, spec.degree), ((i + 1) % 2 ? -1.0 : 1.0) / std::sqrt(d));
      break;
    case TargetSpec::Kind::Fourier:
      for (const auto& [s, c] : spec.terms) f.add(IndexSet::from_one_based(s, d), c);
      break;
    case TargetSpec::Kind::RandomLocal: {
      auto fam = enumerate_local_sets(d, spec.q, spec.degree);
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> g(0.0, 1.0);
      double n2 = 0;
      std::vector<double> c(fam.sets.size());
      for (auto& v : c) {
        v = g(rng);
        n2 += v * v;
      }
      for (size_t i = 0; i < c.size(); ++i) f.add(fam.sets[i].set, c[i] / std::sqrt(n2));
      break;
    }
  }
  return f;
}

}  // namespace convkernels
