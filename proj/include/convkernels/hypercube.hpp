#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace convkernels {

using json = nlohmann::json;

// Point of {-1,+1}^d. Positions are 0-based.
class BinarySignal {
 public:
  BinarySignal() = default;
  explicit BinarySignal(std::vector<int8_t> entries);

  // Accepts '+', '-' and U+2212.
  static BinarySignal from_string(std::string_view s);
  static BinarySignal from_json(const json& j);
  // Bit i set means x_i = -1.
  static BinarySignal from_mask(uint64_t mask, int d);
  static BinarySignal random(int d, std::mt19937_64& rng);

  int dim() const { return static_cast<int>(v_.size()); }
  int operator[](int i) const { return v_[i]; }
  const std::vector<int8_t>& entries() const { return v_; }

  uint64_t mask() const;
  std::string to_string() const;
  json to_json() const;

  // x_(k) = (x_k, ..., x_{k+q-1}), cyclic.
  BinarySignal patch(int k, int q) const;
  // (t_m x)_i = x_{i+m}, cyclic.
  BinarySignal shift(int m) const;

  bool operator==(const BinarySignal& o) const { return v_ == o.v_; }

 private:
  std::vector<int8_t> v_;
};

// Subset of {0..d-1}, sorted.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::vector<int> members, int ambient_dim);

  static IndexSet from_one_based(const std::vector<int>& members, int d);
  static IndexSet from_json(const json& j, int d);
  static IndexSet from_mask(uint64_t mask, int d);

  int ambient_dim() const { return d_; }
  int size() const { return static_cast<int>(m_.size()); }
  bool empty() const { return m_.empty(); }
  const std::vector<int>& members() const { return m_; }
  bool contains(int i) const;

  // k + S with cyclic convention.
  IndexSet translate(int k) const;
  IndexSet symmetric_difference(int i) const;
  uint64_t mask() const;

  json to_json() const;
  std::string to_string() const;

  bool operator==(const IndexSet& o) const { return d_ == o.d_ && m_ == o.m_; }
  bool operator<(const IndexSet& o) const;

 private:
  std::vector<int> m_;
  int d_ = 0;
};

double binom(int n, int k);
uint64_t binom_u64(int n, int k);

// gamma(S) = max over pairs of min(mod(j-i,d)+1, mod(i-j,d)+1).
int diameter(const IndexSet& s);

// Length of the shortest cyclic arc containing S, and its start position.
struct CoveringArc {
  int start = 0;
  int length = 0;
};
CoveringArc covering_arc(const IndexSet& s);

// Y_S(x) = prod_{i in S} x_i.
double parity_eval(const IndexSet& s, const BinarySignal& x);

inline int parity_mask(uint64_t s, uint64_t x) {
  return (__builtin_popcountll(s & x) & 1) ? -1 : 1;
}

struct LocalSet {
  IndexSet set;
  int diameter = 0;
  int class_index = 0;
  int offset = 0;  // set = class representative translated by offset
};

struct LocalSetFamily {
  int d = 0;
  int q = 0;
  int degree = 0;
  std::vector<LocalSet> sets;      // E_l
  std::vector<IndexSet> classes;   // C_l, representatives inside [0, q) containing 0
  std::vector<int> class_diameter;

  int r(const LocalSet& s) const { return q + 1 - s.diameter; }
};

LocalSetFamily enumerate_local_sets(int d, int q, int degree);

// Class representatives of degree l: subsets of [0, q) containing 0.
std::vector<IndexSet> local_classes(int d, int q, int degree);

// Translate of S whose covering arc starts at 0.
IndexSet canonical_representative(const IndexSet& s);

}  // namespace convkernels
