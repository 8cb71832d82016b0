#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "ibp/perturb.hpp"
#include "support.hpp"

using namespace ibp;
using namespace ibp::perturb;
using testing_support::brute_force_space;
using testing_support::random_sentence;
using testing_support::random_table;

TEST_CASE("substitution table ignores self-maps and keeps sorted unique options") {
  SubstitutionTable t;
  t.add(3, 7);
  t.add(3, 5);
  t.add(3, 7);
  t.add(4, 4);
  const auto o = t.options(3);
  CHECK(std::vector<TokenId>(o.begin(), o.end()) == std::vector<TokenId>{5, 7});
  CHECK_FALSE(t.contains(4));
  CHECK(t.options(9).empty());
  CHECK(t.pair_count() == 2);
}

TEST_CASE("elementary perturbations are position-major") {
  SubstitutionTable t;
  t.add(2, 9);
  t.add(2, 8);
  t.add(4, 5);
  const std::vector<TokenId> s{2, 3, 4, 2};
  const auto p = elementary_perturbations(s, t, 2);
  REQUIRE(p.size() == 5);
  CHECK(p.elems[0] == ElementaryPerturbation{0, 8});
  CHECK(p.elems[1] == ElementaryPerturbation{0, 9});
  CHECK(p.elems[2] == ElementaryPerturbation{2, 5});
  CHECK(p.elems[4] == ElementaryPerturbation{3, 9});
  CHECK(p.positions == std::vector<std::size_t>{0, 2, 3});
  CHECK(p.options_at(1) == 1);
  CHECK_THROWS_AS(elementary_perturbations(s, t, 2, 4), std::out_of_range);
}

TEST_CASE("count_space reproduces the 26-letter, budget-3 anchor") {
  const std::vector<std::size_t> ones(26, 1);
  // C(26,1) + C(26,2) + C(26,3) = 26 + 325 + 2600
  CHECK(count_space(ones, 3) == 2951);
  CHECK(count_space(ones, 0) == 0);
  CHECK(count_space(std::vector<std::size_t>{}, 3) == 0);
  CHECK(count_space(std::vector<std::size_t>{2, 3}, 5) == 2 + 3 + 6);
}

TEST_CASE("count_space detects 64-bit overflow") {
  const std::vector<std::size_t> many(200, 50);
  CHECK_THROWS_AS(count_space(many, 30), CountOverflow);
}

TEST_CASE("space cursor enumerates exactly the brute-force space, in documented order") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto table = random_table(10, 3, 0.6, rng);
    const auto s = random_sentence(1 + trial % 8, 10, rng);
    const std::size_t delta = trial % 4;
    const auto pset = elementary_perturbations(s, table, delta);
    std::vector<std::vector<TokenId>> walked;
    std::vector<std::size_t> ks;
    SpaceCursor cur(pset);
    while (cur.next()) {
      walked.push_back(cur.tokens());
      ks.push_back(cur.substitution_count());
      CHECK(apply_substitutions(s, cur.substitutions()) == cur.tokens());
    }
    auto expected = brute_force_space(s, table, delta);
    REQUIRE(walked.size() == expected.size());
    CHECK(walked.front() == s);
    CHECK(count_space(pset) == expected.size() - 1);
    CHECK(std::is_sorted(ks.begin(), ks.end()));
    std::set<std::vector<TokenId>> a(walked.begin(), walked.end()),
        b(expected.begin(), expected.end());
    CHECK(a.size() == walked.size());
    CHECK(a == b);

    // Chunks partition everything but the original.
    std::set<std::vector<TokenId>> chunked;
    std::size_t n = 0;
    for (std::size_t slot = 0; slot < (delta ? pset.perturbable() : 0); ++slot) {
      SpaceCursor c(pset, slot);
      while (c.next()) {
        chunked.insert(c.tokens());
        ++n;
        CHECK(c.substitutions().front().position == pset.positions[slot]);
      }
    }
    CHECK(n == expected.size() - 1);
    CHECK(chunked.count(s) == 0);
  }
}

TEST_CASE("simplex vertices are dilated single substitutions") {
  Tensor<double> table({6, 2}, std::vector<double>{0, 0, 0, 0, 1, 2, 3, 5, -1, 4, 2, 2});
  SubstitutionTable t;
  t.add(2, 3);
  t.add(4, 5);
  const std::vector<TokenId> s{2, 4};
  const auto pset = elementary_perturbations(s, t, 3);
  const auto v = build_simplex(pset, table);
  REQUIRE(v.size() == 3);
  // x0 + 3 (p - x0) at the perturbed position
  const auto m1 = v.materialize(1);
  CHECK(m1.at(0, 0) == 1 + 3 * (3 - 1));
  CHECK(m1.at(0, 1) == 2 + 3 * (5 - 2));
  CHECK(m1.at(1, 0) == -1);
  const auto m2 = v.materialize(2);
  CHECK(m2.at(1, 0) == -1 + 3 * (2 + 1));
  CHECK(m2.at(1, 1) == 4 + 3 * (2 - 4));
  CHECK(v.materialize(0).at(1, 1) == 4);
  CHECK_THROWS_AS(build_simplex(pset.with_budget(0), table), std::invalid_argument);
  CHECK(make_vertices(pset.with_budget(0), table).size() == 1);
}

TEST_CASE("every in-budget perturbation lies in the convex hull of the simplex vertices") {
  // Substituting k <= delta positions equals sum_i (1/delta) m_i + (1 - k/delta) x0.
  std::mt19937_64 rng(3);
  Tensor<double> table({10, 3});
  std::normal_distribution<double> n;
  for (auto& x : table.storage()) x = n(rng);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_table(10, 2, 0.7, rng);
    const auto s = random_sentence(6, 10, rng);
    const std::size_t delta = 1 + trial % 3;
    const auto pset = elementary_perturbations(s, t, delta);
    if (pset.size() == 0) continue;
    const auto v = build_simplex(pset, table);
    const auto sample = sample_perturbation(pset, rng);
    Tensor<double> combo({s.size(), 3});
    double w0 = 1.0;
    for (const auto& sub : sample.substitutions) {
      std::size_t m = 0;
      while (!(pset.elems[m] == sub)) ++m;
      const auto vm = v.materialize(m + 1);
      for (std::size_t i = 0; i < combo.size(); ++i) combo[i] += vm[i] / double(delta);
      w0 -= 1.0 / double(delta);
    }
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] += w0 * v.origin[i];
    CHECK(w0 >= -1e-12);
    const auto direct = Tensor<double>([&] {
      Tensor<double> e({s.size(), 3});
      for (std::size_t p = 0; p < s.size(); ++p)
        for (std::size_t c = 0; c < 3; ++c) e.at(p, c) = table.at(sample.tokens[p], c);
      return e;
    }());
    for (std::size_t i = 0; i < combo.size(); ++i)
      CHECK(combo[i] == doctest::Approx(direct[i]).epsilon(1e-12));
  }
}

TEST_CASE("sampling follows its documented law") {
  // k ~ U{1..min(delta, P)}, positions uniform without replacement,
  // replacements uniform. Compare frequencies with the exact probabilities.
  SubstitutionTable t;
  t.add(2, 5);
  t.add(3, 5);
  t.add(3, 6);
  t.add(4, 7);
  const std::vector<TokenId> s{2, 3, 4};
  const auto pset = elementary_perturbations(s, t, 2);
  std::mt19937_64 rng(123);
  const int n = 200000;
  std::map<std::vector<TokenId>, int> freq;
  std::map<std::size_t, int> kfreq;
  for (int i = 0; i < n; ++i) {
    const auto smp = sample_perturbation(pset, rng);
    CHECK(smp.perturbed);
    ++freq[smp.tokens];
    ++kfreq[smp.substitutions.size()];
  }
  // Exact probabilities: P(k) = 1/2; subsets of size k equally likely;
  // option counts {1, 2, 1}.
  std::map<std::vector<TokenId>, double> expected;
  const std::vector<std::vector<TokenId>> opts{{5}, {5, 6}, {7}};
  auto add = [&](std::vector<std::size_t> slots, double p) {
    std::vector<std::vector<TokenId>> seqs{s};
    for (std::size_t slot : slots) {
      std::vector<std::vector<TokenId>> next;
      for (const auto& q : seqs)
        for (TokenId r : opts[slot]) {
          auto c = q;
          c[slot] = r;
          next.push_back(c);
        }
      seqs = next;
    }
    for (const auto& q : seqs) expected[q] += p / double(seqs.size());
  };
  for (std::size_t a = 0; a < 3; ++a) add({a}, 0.5 / 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) add({a, b}, 0.5 / 3);
  CHECK(freq.size() == expected.size());
  double chi2 = 0;
  for (const auto& [seq, p] : expected) {
    const double e = p * n;
    const double o = freq.count(seq) ? freq.at(seq) : 0;
    chi2 += (o - e) * (o - e) / e;
  }
  // 10 cells, 9 degrees of freedom: the 99.9% quantile is 27.9.
  CHECK(chi2 < 27.9);
  CHECK(std::abs(kfreq[1] / double(n) - 0.5) < 0.01);
}

TEST_CASE("nothing to sample returns the original") {
  SubstitutionTable t;
  const std::vector<TokenId> s{2, 3};
  std::mt19937_64 rng(1);
  const auto smp = sample_perturbation(elementary_perturbations(s, t, 3), rng);
  CHECK_FALSE(smp.perturbed);
  CHECK(smp.tokens == s);
}
