#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fixtures.hpp"

using namespace qergodic;

namespace {

PathFamily family_of(const Matrix& q, const Vector& pi, bool restrict = true) {
  const auto f = condense(q);
  const auto s = compute_spectra(f);
  return path_family(f, s, f.to_normal(pi), restrict);
}

std::set<Path> maximal_set(const PathFamily& fam) {
  std::set<Path> out;
  for (size_t i : fam.maximal) out.insert(fam.at(i).theta);
  return out;
}

}  // namespace

TEST(Enumerate, ExampleStructures) {
  const auto f = condense(fx::ex42(0.5, 0.1, 0.2, 0.1));
  EXPECT_EQ(enumerate_paths(f), (std::vector<Path>{{0}, {1}, {1, 0}, {2}, {2, 0}, {2, 1}, {2, 1, 0}}));
  Matrix one(2, 2);
  one << 0.2, 0.1, 0.1, 0.0;
  EXPECT_EQ(enumerate_paths(condense(one)), (std::vector<Path>{{0}}));
  const auto paths = enumerate_paths(condense(fx::ex43(0.6, 0.2, 0.2, 0.1, 0.2)));
  const std::set<Path> ps(paths.begin(), paths.end());
  EXPECT_TRUE(ps.count({3, 2, 1}));
  EXPECT_TRUE(ps.count({3, 0}));
  EXPECT_FALSE(ps.count({2, 0}));
}

TEST(Enumerate, CapRaisesPathExplosion) {
  const auto f = condense(fx::ex42(0.5, 0.1, 0.2, 0.1));
  try {
    enumerate_paths(f, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PathExplosion);
  }
}

TEST(Classify, Examples) {
  const auto f = condense(fx::ex42(0.5, 0.1, 0.2, 0.1));
  const auto s = compute_spectra(f);
  const auto p = classify_path(f, s, {2, 1, 0}, fx::uniform(3));
  EXPECT_EQ(p.h_plus, 3);
  EXPECT_EQ(p.h_minus, 0);
  EXPECT_EQ(p.kappa, 3);
  const auto g = condense(fx::ex41());
  const auto sg = compute_spectra(g);
  const auto q = classify_path(g, sg, {1, 0}, fx::vec({0.5, 0.5}));
  EXPECT_EQ(q.h_plus, 1);
  EXPECT_EQ(q.H_minus, (std::vector<Index>{1}));
  EXPECT_EQ(q.rho_theta, 0.5);
  const auto single = classify_path(g, sg, {0}, fx::vec({0.5, 0.5}));
  EXPECT_EQ(single.h_plus, 1);
  EXPECT_EQ(single.h_minus, 0);
}

TEST(Maximal, PaperFamilies) {
  auto fam = family_of(fx::ex41(), fx::vec({0.5, 0.5}));
  EXPECT_EQ(maximal_set(fam), (std::set<Path>{{1}, {1, 0}}));
  EXPECT_EQ(fam.h_max, 1);
  fam = family_of(fx::ex42(0.5, 0.1, 0.2, 0.1), fx::uniform(3));
  EXPECT_EQ(maximal_set(fam), (std::set<Path>{{2, 1, 0}}));
  EXPECT_EQ(fam.h_max, 3);
  fam = family_of(fx::ex42(0.5, 0.1, 0.2, 0.0), fx::vec({0, 0.5, 0.5}));
  EXPECT_EQ(maximal_set(fam), (std::set<Path>{{2, 0}, {1, 0}}));
  EXPECT_EQ(fam.h_max, 2);
  fam = family_of(fx::ex43(0.6, 0.2, 0.2, 0.1, 0.2), fx::uniform(4));
  EXPECT_EQ(maximal_set(fam), (std::set<Path>{{3, 2, 1}, {3, 0}}));
  fam = family_of(fx::ex44(), fx::vec({0.1, 0.05, 0.05, 0.5, 0.3}));
  EXPECT_EQ(maximal_set(fam), (std::set<Path>{{4, 1}, {3, 2}, {3, 2, 0}}));
  EXPECT_EQ(fam.per_block[0].size(), 1u);
  EXPECT_EQ(fam.per_block[2].size(), 2u);
  fam = family_of(fx::ex45(), fx::vec({0.3, 0.3, 0.4}));
  EXPECT_EQ(maximal_set(fam), (std::set<Path>{{0}, {1, 0}}));
}

TEST(Maximal, PiRestriction) {
  auto fam = family_of(fx::ex41(), fx::vec({1, 0}));
  EXPECT_EQ(maximal_set(fam), (std::set<Path>{{0}}));
  EXPECT_EQ(fam.rho_max_eff, 0.3);
  fam = family_of(fx::ex41(), fx::vec({1, 0}), false);
  EXPECT_EQ(maximal_set(fam), (std::set<Path>{{1}, {1, 0}}));
  EXPECT_FALSE(fam.pi_restricted);
  const auto f = condense(fx::ex41());
  const auto s = compute_spectra(f);
  auto paths = std::vector<AdmissiblePath>{classify_path(f, s, {0}, fx::vec({0, 1}))};
  try {
    maximal_paths(paths, s, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyFamily);
  }
}

TEST(Maximal, InvariantsOnRandomModels) {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 300; ++rep) {
    const Index d = 1 + rep % 7;
    const Matrix q = rep % 2 ? fx::random_scalar_chain(d, rng) : fx::random_q(d, rng, 0.25);
    const Vector pi = fx::random_pi(d, rng, 0.4);
    const auto f = condense(q);
    const auto s = compute_spectra(f);
    const auto fam = path_family(f, s, f.to_normal(pi));
    std::set<Path> singles;
    for (const auto& p : fam.all) {
      ASSERT_EQ(p.h_plus + p.h_minus, p.kappa);
      ASSERT_GE(p.h_plus, 1);
      for (size_t u = 0; u + 1 < p.theta.size(); ++u) {
        ASSERT_GT(p.theta[u], p.theta[u + 1]);
        ASSERT_TRUE((f.block(p.theta[u], p.theta[u + 1]).array() != 0.0).any());
      }
      const bool has_mass = (f.segment(f.to_normal(pi), p.theta.front()).array() != 0.0).any();
      ASSERT_EQ(p.pi_mass != 0.0, has_mass);
      if (p.kappa == 1) singles.insert(p.theta);
    }
    ASSERT_EQ(static_cast<Index>(singles.size()), f.k());
    for (size_t i : fam.maximal) {
      const auto& p = fam.at(i);
      ASSERT_TRUE(s.rho_equal(p.top, fam.rho_max_block));
      ASSERT_EQ(p.h_plus, fam.h_max);
      Index top_entries = 0;
      for (Index b : p.theta) top_entries += s.rho_equal(b, fam.rho_max_block);
      ASSERT_EQ(top_entries, fam.h_max);
    }
    for (Index l = 0; l < f.k(); ++l) {
      for (size_t i : fam.per_block[static_cast<size_t>(l)]) {
        const auto& th = fam.at(i).theta;
        ASSERT_NE(std::find(th.begin(), th.end(), l), th.end());
      }
    }
    // each maximal path is counted once per top-rho block it visits
    size_t weighted = 0;
    for (Index l = 0; l < f.k(); ++l)
      if (s.rho_equal(l, fam.rho_max_block)) weighted += fam.per_block[static_cast<size_t>(l)].size();
    ASSERT_EQ(weighted, static_cast<size_t>(fam.h_max) * fam.maximal.size());
  }
}

TEST(Split, Definition) {
  EXPECT_EQ(split_at({2, 1, 0}, 1), (std::pair<Path, Path>{{2, 1}, {1, 0}}));
  EXPECT_EQ(split_at({2, 1, 0}, 2), (std::pair<Path, Path>{{2}, {2, 1, 0}}));
  try {
    split_at({1, 0}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BlockNotOnPath);
  }
  const Path th{6, 4, 3, 1};
  for (Index l : th) {
    auto [a, b] = split_at(th, l);
    EXPECT_EQ(a.size() + b.size(), th.size() + 1);
    Path joined = a;
    joined.insert(joined.end(), b.begin() + 1, b.end());
    EXPECT_EQ(joined, th);
  }
}

TEST(Gamma, Counts) {
  EXPECT_EQ(gamma_count(3, 2), 6u);
  EXPECT_EQ(gamma_count(1, 17), 1u);
  EXPECT_EQ(gamma_count(2, 3), 4u);
  EXPECT_EQ(gamma_count(4, -1), 0u);
  EXPECT_THROW(gamma_count(0, 3), Error);
  try {
    gamma_count(40, 1000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Overflow);
  }
}

TEST(Gamma, EnumerationMatchesCount) {
  EXPECT_EQ(gamma_enumerate(2, 1), (std::vector<std::vector<std::int64_t>>{{0, 1}, {1, 0}}));
  EXPECT_TRUE(gamma_enumerate(3, -1).empty());
  for (std::int64_t k = 1; k <= 6; ++k) {
    for (std::int64_t m = 0; m <= 10; ++m) {
      const auto all = gamma_enumerate(k, m);
      ASSERT_EQ(all.size(), gamma_count(k, m));
      std::set<std::vector<std::int64_t>> uniq(all.begin(), all.end());
      ASSERT_EQ(uniq.size(), all.size());
      ASSERT_TRUE(std::is_sorted(all.begin(), all.end()));
      for (const auto& e : all) {
        ASSERT_EQ(std::accumulate(e.begin(), e.end(), std::int64_t{0}), m);
        ASSERT_GE(*std::min_element(e.begin(), e.end()), 0);
      }
    }
  }
}

TEST(Format, OneBased) { EXPECT_EQ(format_path({2, 1, 0}), "(3,2,1)"); }
