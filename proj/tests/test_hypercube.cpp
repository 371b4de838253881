#include <gtest/gtest.h>

#include <random>
#include <set>

#include "convkernels/hypercube.hpp"

using namespace convkernels;

namespace {

// Shortest cyclic arc covering S, by trying every start.
int arc_oracle(const std::vector<int>& s, int d) {
  int best = d;
  for (int start = 0; start < d; ++start) {
    int len = 0;
    for (int i : s) len = std::max(len, ((i - start) % d + d) % d + 1);
    best = std::min(best, len);
  }
  return best;
}

}  // namespace

TEST(Diameter, WrapPair) {
  for (int d = 4; d <= 12; ++d) EXPECT_EQ(diameter(IndexSet::from_one_based({2, d}, d)), 3);
  EXPECT_EQ(diameter(IndexSet::from_one_based({2, 3}, 3)), 2);
}

TEST(Diameter, Singleton) { EXPECT_EQ(diameter(IndexSet::from_one_based({5}, 9)), 1); }

TEST(Diameter, PairwiseFormula) { EXPECT_EQ(diameter(IndexSet::from_one_based({1, 4}, 10)), 4); }

TEST(Diameter, EmptySetThrows) {
  try {
    diameter(IndexSet({}, 5));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("diameter undefined for empty set"), std::string::npos);
  }
}

TEST(CoveringArc, MatchesExhaustiveStartSearch) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    int d = 5 + static_cast<int>(rng() % 12);
    std::vector<int> m;
    for (int i = 0; i < d; ++i)
      if (rng() % 3 == 0) m.push_back(i);
    if (m.empty()) m.push_back(0);
    IndexSet s(m, d);
    auto arc = covering_arc(s);
    EXPECT_EQ(arc.length, arc_oracle(m, d));
    for (int i : m) EXPECT_LT(((i - arc.start) % d + d) % d, arc.length);
    auto c = canonical_representative(s);
    // ties between starts are possible, so only require that 0 is one of them
    for (int i : c.members()) EXPECT_LT(i, arc.length);
    EXPECT_EQ(covering_arc(c).length, arc.length);
  }
}

TEST(Parity, EmptySetIsOne) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(parity_eval(IndexSet({}, 7), BinarySignal::random(7, rng)), 1.0);
}

TEST(Parity, ProductOfTwoNegatives) {
  auto x = BinarySignal::from_string("--+-+");
  EXPECT_EQ(parity_eval(IndexSet::from_one_based({1, 2}, 5), x), 1.0);
  EXPECT_EQ(parity_eval(IndexSet::from_one_based({1, 3}, 5), x), -1.0);
}

TEST(Parity, DimensionMismatchThrows) {
  EXPECT_THROW(parity_eval(IndexSet({0}, 4), BinarySignal::from_string("+++")), std::invalid_argument);
}

TEST(Parity, OrthonormalOverFullCube) {
  const int d = 6;
  for (uint64_t s = 0; s < 64; ++s)
    for (uint64_t t = 0; t < 64; ++t) {
      double sum = 0;
      for (uint64_t x = 0; x < 64; ++x) {
        auto xs = BinarySignal::from_mask(x, d);
        sum += parity_eval(IndexSet::from_mask(s, d), xs) * parity_eval(IndexSet::from_mask(t, d), xs);
      }
      EXPECT_EQ(sum / 64, s == t ? 1.0 : 0.0);
    }
}

TEST(Parity, Multiplicative) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 1000; ++t) {
    const int d = 10;
    auto x = BinarySignal::random(d, rng);
    auto s = IndexSet::from_mask(rng() & 1023, d);
    int i = static_cast<int>(rng() % d);
    EXPECT_EQ(parity_eval(s, x) * x[i], parity_eval(s.symmetric_difference(i), x));
  }
}

TEST(Signal, StringRoundTripAndUnicodeMinus) {
  auto x = BinarySignal::from_string("+−+-");
  EXPECT_EQ(x.dim(), 4);
  EXPECT_EQ(x[1], -1);
  EXPECT_EQ(x[3], -1);
  EXPECT_EQ(BinarySignal::from_string(x.to_string()), x);
  EXPECT_EQ(BinarySignal::from_json(x.to_json()), x);
  EXPECT_THROW(BinarySignal::from_string("+0+"), std::invalid_argument);
}

TEST(Patch, WrapAround) {
  auto x = BinarySignal::from_string("+--+");  // (a,b,c,d0) = (+,-,-,+)
  auto p = x.patch(3, 2);                       // 1-based k=4
  EXPECT_EQ(p.to_string(), "++");
  auto y = BinarySignal::from_string("-++-");
  EXPECT_EQ(y.patch(3, 2).to_string(), "--");
}

TEST(Patch, FullPatchIsSignal) {
  std::mt19937_64 rng(2);
  auto x = BinarySignal::random(9, rng);
  EXPECT_EQ(x.patch(0, 9), x);
  EXPECT_THROW(x.patch(0, 10), std::invalid_argument);
}

TEST(Patch, ShiftCommutes) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    auto x = BinarySignal::random(12, rng);
    int k = static_cast<int>(rng() % 12), m = static_cast<int>(rng() % 12), q = 1 + static_cast<int>(rng() % 12);
    EXPECT_EQ(x.shift(m).patch(k, q), x.patch((k + m) % 12, q));
  }
}

TEST(IndexSetJson, OneBasedIo) {
  auto s = IndexSet::from_json(json::parse("[1, 4, 7]"), 8);
  EXPECT_EQ(s.members(), (std::vector<int>{0, 3, 6}));
  EXPECT_EQ(s.to_json(), json::parse("[1,4,7]"));
  EXPECT_THROW(IndexSet::from_one_based({0}, 8), std::invalid_argument);
  EXPECT_THROW(IndexSet::from_one_based({9}, 8), std::invalid_argument);
}

TEST(LocalSets, Singletons) {
  auto f = enumerate_local_sets(8, 4, 1);
  EXPECT_EQ(f.sets.size(), 8u);
  for (const auto& s : f.sets) EXPECT_EQ(s.diameter, 1);
}

TEST(LocalSets, PairsAgainstBruteForce) {
  const int d = 8, q = 4;
  int count = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) count += arc_oracle({i, j}, d) <= q;
  auto f = enumerate_local_sets(d, q, 2);
  EXPECT_EQ(static_cast<int>(f.sets.size()), count);
  EXPECT_EQ(count, 24);
}

TEST(LocalSets, FlagshipCount) {
  auto f = enumerate_local_sets(30, 10, 3);
  EXPECT_EQ(f.sets.size(), 1080u);
  EXPECT_EQ(f.classes.size(), static_cast<size_t>(binom(9, 2)));
}

TEST(LocalSets, OverlapRegimeRejected) {
  try {
    enumerate_local_sets(10, 6, 2);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("patch overlap regime unsupported"), std::string::npos);
  }
}

TEST(LocalSets, InvariantsAndRSums) {
  for (int d = 6; d <= 16; ++d)
    for (int q = 1; 2 * q <= d; ++q)
      for (int l = 1; l <= q; ++l) {
        auto f = enumerate_local_sets(d, q, l);
        ASSERT_EQ(f.sets.size(), static_cast<size_t>(d * binom(q - 1, l - 1)));
        ASSERT_EQ(f.classes.size(), static_cast<size_t>(binom(q - 1, l - 1)));
        std::set<std::vector<int>> seen;
        double rsum = 0;
        std::vector<int> per_class(f.classes.size(), 0);
        for (const auto& s : f.sets) {
          EXPECT_EQ(s.set.size(), l);
          EXPECT_EQ(s.diameter, arc_oracle(s.set.members(), d));
          EXPECT_GE(s.diameter, l);
          EXPECT_LE(s.diameter, q);
          EXPECT_GE(f.r(s), 1);
          EXPECT_LE(f.r(s), q + 1 - l);
          EXPECT_EQ(f.classes[s.class_index].translate(s.offset), s.set);
          EXPECT_TRUE(seen.insert(s.set.members()).second);
          rsum += f.r(s);
          ++per_class[s.class_index];
        }
        EXPECT_EQ(rsum, d * binom(q, l));
        for (int c : per_class) EXPECT_EQ(c, d);
      }
}

TEST(LocalSets, PairwiseDiameterCanUndercountArc) {
  auto s = IndexSet::from_one_based({1, 4, 7}, 8);
  EXPECT_EQ(diameter(s), 4);
  EXPECT_EQ(covering_arc(s).length, 6);
}

TEST(LocalSets, PairwiseDiameterAgreesWithArcForShortArcs) {
  for (int l = 2; l <= 4; ++l) {
    auto f = enumerate_local_sets(16, 4, l);
    for (const auto& s : f.sets) EXPECT_EQ(diameter(s.set), s.diameter);
  }
}

TEST(Binom, Values) {
  EXPECT_EQ(binom(10, 3), 120.0);
  EXPECT_EQ(binom(5, 7), 0.0);
  EXPECT_EQ(binom_u64(60, 30), 118264581564861424ULL);
}
