#include "convkernels/hypercube.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace convkernels {

BinarySignal::BinarySignal(std::vector<int8_t> entries) : v_(std::move(entries)) {
  if (v_.empty()) throw std::invalid_argument("signal dimension must be positive");
  for (auto e : v_)
    if (e != 1 && e != -1) throw std::invalid_argument("signal entries must be -1 or +1");
}

BinarySignal BinarySignal::from_string(std::string_view s) {
  std::vector<int8_t> v;
  for (size_t i = 0; i < s.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c == '+') {
      v.push_back(1);
    } else if (c == '-') {
      v.push_back(-1);
    } else if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x88 &&
               static_cast<unsigned char>(s[i + 2]) == 0x92) {
      v.push_back(-1);
      i += 2;
    } else if (c == ' ') {
      continue;
    } else {
      throw std::invalid_argument("invalid signal character in '" + std::string(s) + "'");
    }
  }
  return BinarySignal(std::move(v));
}

BinarySignal BinarySignal::from_json(const json& j) {
  if (j.is_string()) return from_string(j.get<std::string>());
  std::vector<int8_t> v;
  for (const auto& e : j) v.push_back(static_cast<int8_t>(e.get<int>()));
  return BinarySignal(std::move(v));
}

BinarySignal BinarySignal::from_mask(uint64_t mask, int d) {
  if (d <= 0 || d > 64) throw std::invalid_argument("mask signals need 1 <= d <= 64");
  std::vector<int8_t> v(d);
  for (int i = 0; i < d; ++i) v[i] = ((mask >> i) & 1ULL) ? -1 : 1;
  return BinarySignal(std::move(v));
}

BinarySignal BinarySignal::random(int d, std::mt19937_64& rng) {
  std::vector<int8_t> v(d);
  for (int i = 0; i < d; i += 64) {
    uint64_t bits = rng();
    for (int b = 0; b < 64 && i + b < d; ++b) v[i + b] = ((bits >> b) & 1ULL) ? -1 : 1;
  }
  return BinarySignal(std::move(v));
}

uint64_t BinarySignal::mask() const {
  if (dim() > 64) throw std::invalid_argument("mask requires d <= 64");
  uint64_t m = 0;
  for (int i = 0; i < dim(); ++i)
    if (v_[i] < 0) m |= 1ULL << i;
  return m;
}

std::string BinarySignal::to_string() const {
  std::string s;
  for (auto e : v_) s.push_back(e > 0 ? '+' : '-');
  return s;
}

json BinarySignal::to_json() const {
  json j = json::array();
  for (auto e : v_) j.push_back(static_cast<int>(e));
  return j;
}

BinarySignal BinarySignal::patch(int k, int q) const {
  int d = dim();
  if (q < 1 || q > d) throw std::invalid_argument("patch size must satisfy 1 <= q <= d");
  std::vector<int8_t> p(q);
  int start = ((k % d) + d) % d;
  for (int i = 0; i < q; ++i) p[i] = v_[(start + i) % d];
  return BinarySignal(std::move(p));
}

BinarySignal BinarySignal::shift(int m) const { return patch(m, dim()); }

IndexSet::IndexSet(std::vector<int> members, int ambient_dim) : m_(std::move(members)), d_(ambient_dim) {
  if (d_ <= 0) throw std::invalid_argument("ambient dimension must be positive");
  std::sort(m_.begin(), m_.end());
  for (size_t i = 0; i < m_.size(); ++i) {
    if (m_[i] < 0 || m_[i] >= d_) throw std::invalid_argument("index out of range");
    if (i > 0 && m_[i] == m_[i - 1]) throw std::invalid_argument("duplicate index");
  }
}

IndexSet IndexSet::from_one_based(const std::vector<int>& members, int d) {
  std::vector<int> z;
  z.reserve(members.size());
  for (int m : members) z.push_back(m - 1);
  return IndexSet(std::move(z), d);
}

IndexSet IndexSet::from_json(const json& j, int d) { return from_one_based(j.get<std::vector<int>>(), d); }

IndexSet IndexSet::from_mask(uint64_t mask, int d) {
  std::vector<int> m;
  for (int i = 0; i < d; ++i)
    if ((mask >> i) & 1ULL) m.push_back(i);
  return IndexSet(std::move(m), d);
}

bool IndexSet::contains(int i) const { return std::binary_search(m_.begin(), m_.end(), i); }

IndexSet IndexSet::translate(int k) const {
  std::vector<int> t;
  t.reserve(m_.size());
  int kk = ((k % d_) + d_) % d_;
  for (int m : m_) t.push_back((m + kk) % d_);
  return IndexSet(std::move(t), d_);
}

IndexSet IndexSet::symmetric_difference(int i) const {
  std::vector<int> t = m_;
  auto it = std::lower_bound(t.begin(), t.end(), i);
  if (it != t.end() && *it == i)
    t.erase(it);
  else
    t.insert(it, i);
  return IndexSet(std::move(t), d_);
}

uint64_t IndexSet::mask() const {
  if (d_ > 64) throw std::invalid_argument("mask requires d <= 64");
  uint64_t r = 0;
  for (int m : m_) r |= 1ULL << m;
  return r;
}

json IndexSet::to_json() const {
  json j = json::array();
  for (int m : m_) j.push_back(m + 1);
  return j;
}

std::string IndexSet::to_string() const { return to_json().dump(); }

bool IndexSet::operator<(const IndexSet& o) const {
  if (d_ != o.d_) return d_ < o.d_;
  return m_ < o.m_;
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return n <= 60 ? std::round(r) : r;
}

uint64_t binom_u64(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
  return static_cast<uint64_t>(r);
}

int diameter(const IndexSet& s) {
  if (s.empty()) throw std::invalid_argument("diameter undefined for empty set");
  int d = s.ambient_dim();
  const auto& m = s.members();
  int best = 1;
  for (size_t a = 0; a < m.size(); ++a)
    for (size_t b = a + 1; b < m.size(); ++b) {
      int fw = ((m[b] - m[a]) % d + d) % d + 1;
      int bw = ((m[a] - m[b]) % d + d) % d + 1;
      best = std::max(best, std::min(fw, bw));
    }
  return best;
}

CoveringArc covering_arc(const IndexSet& s) {
  if (s.empty()) throw std::invalid_argument("covering arc undefined for empty set");
  int d = s.ambient_dim();
  const auto& m = s.members();
  int n = s.size();
  int best_gap = -1, start = m[0];
  for (int a = 0; a < n; ++a) {
    int next = m[(a + 1) % n];
    int gap = n == 1 ? d : ((next - m[a]) % d + d) % d;
    if (gap > best_gap) {
      best_gap = gap;
      start = next;
    }
  }
  return {start, d - best_gap + 1};
}

IndexSet canonical_representative(const IndexSet& s) {
  if (s.empty()) return s;
  return s.translate(-covering_arc(s).start);
}

double parity_eval(const IndexSet& s, const BinarySignal& x) {
  if (s.ambient_dim() != x.dim()) throw std::invalid_argument("dimension mismatch in parity_eval");
  int sign = 1;
  for (int i : s.members()) sign *= x[i];
  return sign;
}

std::vector<IndexSet> local_classes(int d, int q, int degree) {
  std::vector<IndexSet> out;
  if (degree < 1 || degree > q) return out;
  // choose degree-1 further elements out of {1..q-1}
  std::vector<int> pick(degree - 1);
  for (int i = 0; i < degree - 1; ++i) pick[i] = i + 1;
  while (true) {
    std::vector<int> m{0};
    m.insert(m.end(), pick.begin(), pick.end());
    out.emplace_back(std::move(m), d);
    int i = degree - 2;
    while (i >= 0 && pick[i] == q - 1 - (degree - 2 - i)) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < degree - 1; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

LocalSetFamily enumerate_local_sets(int d, int q, int degree) {
  if (q < 1 || 2 * q > d) throw std::invalid_argument("patch overlap regime unsupported");
  if (degree < 1 || degree > q) throw std::invalid_argument("degree must satisfy 1 <= l <= q");
  LocalSetFamily fam;
  fam.d = d;
  fam.q = q;
  fam.degree = degree;
  fam.classes = local_classes(d, q, degree);
  for (size_t c = 0; c < fam.classes.size(); ++c) {
    int g = covering_arc(fam.classes[c]).length;
    fam.class_diameter.push_back(g);
    for (int k = 0; k < d; ++k)
      fam.sets.push_back({fam.classes[c].translate(k), g, static_cast<int>(c), k});
  }
  return fam;
}

}  // namespace convkernels
