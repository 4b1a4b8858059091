#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "sbgd/datagen.hpp"
#include "sbgd/eval.hpp"
#include "test_util.hpp"

using namespace sbgd;
using namespace sbgd::eval;

namespace {

Graph complete(std::size_t n) {
  Graph g(n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) g.add_edge(u, v);
  return g;
}

Graph cycle(std::size_t n) {
  Graph g(n);
  for (std::size_t v = 0; v < n; ++v) g.add_edge(v, (v + 1) % n);
  return g;
}

Graph k33() {
  Graph g(6);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 3; b < 6; ++b) g.add_edge(a, b);
  return g;
}

const std::map<std::size_t, std::vector<Graph>>& catalogue8() {
  static const auto c = oracle::connected_catalogue(8);
  return c;
}

double total_sum(const std::vector<double>& h) {
  double s = 0;
  for (double x : h) s += x;
  return s;
}

}  // namespace

TEST(Catalogue, ConnectedGraphCounts) {
  const std::vector<std::size_t> expected{1, 1, 2, 6, 21, 112, 853, 11117};
  for (std::size_t n = 1; n <= 8; ++n) EXPECT_EQ(catalogue8().at(n).size(), expected[n - 1]) << "n=" << n;
}

TEST(Orbits, CompleteGraphK4) {
  auto k4 = complete(4);
  auto counts = graphlet_counts(k4);
  EXPECT_EQ(counts, (std::array<std::uint64_t, 6>{0, 0, 0, 0, 0, 1}));
  for (const auto& row : node_orbit_counts(k4)) {
    for (std::size_t k = 0; k + 1 < kOrbitCount; ++k) EXPECT_EQ(row[k], 0u);
    EXPECT_EQ(row[kOrbitCount - 1], 1u);
  }
  for (double c : clustering(k4)) EXPECT_EQ(c, 1.0);
}

TEST(Orbits, StarS3) {
  Graph s(4);
  for (std::size_t v = 1; v < 4; ++v) s.add_edge(0, v);
  EXPECT_EQ(graphlet_counts(s), (std::array<std::uint64_t, 6>{0, 1, 0, 0, 0, 0}));
  const auto rows = node_orbit_counts(s);
  EXPECT_EQ(rows[0][7 - kFirstOrbit], 1u);
  EXPECT_EQ(rows[1][6 - kFirstOrbit], 1u);
  EXPECT_EQ(clustering(s)[0], 0.0);
}

TEST(Orbits, FiveCycleMatchesTemplateOracle) {
  auto c5 = cycle(5);
  auto fast = node_orbit_counts(c5);
  auto slow = oracle::template_orbits(c5);
  for (std::size_t v = 0; v < 5; ++v) {
    for (std::size_t k = 0; k < kOrbitCount; ++k) EXPECT_EQ(fast[v][k], slow[v][k]);
    EXPECT_EQ(fast[v][4 - kFirstOrbit], 2u);
    EXPECT_EQ(fast[v][5 - kFirstOrbit], 2u);
  }
}

TEST(Orbits, AllConnectedGraphsUpToSevenNodes) {
  std::size_t checked = 0;
  for (std::size_t n = 1; n <= 7; ++n)
    for (const auto& g : catalogue8().at(n)) {
      auto fast = node_orbit_counts(g);
      auto slow = oracle::template_orbits(g);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t k = 0; k < kOrbitCount; ++k) ASSERT_EQ(fast[v][k], slow[v][k]) << "n=" << n;
      ++checked;
    }
  EXPECT_EQ(checked, 996u);
}

TEST(Orbits, RefusesLargeGraphs) { EXPECT_THROW(node_orbit_counts(Graph(201)), Refusal); }

TEST(Descriptors, ClusteringMatchesTriangleFormula) {
  for (const auto& g : catalogue8().at(6)) {
    const auto c = clustering(g);
    for (std::size_t v = 0; v < g.n(); ++v) {
      const std::size_t d = g.degree(v);
      std::size_t tri = 0;
      for (std::size_t a = 0; a < g.n(); ++a)
        for (std::size_t b = a + 1; b < g.n(); ++b) tri += g.has_edge(v, a) && g.has_edge(v, b) && g.has_edge(a, b);
      EXPECT_DOUBLE_EQ(c[v], d < 2 ? 0.0 : 2.0 * tri / static_cast<double>(d * (d - 1)));
    }
  }
}

TEST(Descriptors, HistogramsNormalized) {
  auto g = gen_er(30, 0.2, 4);
  auto d = descriptors(g);
  EXPECT_NEAR(total_sum(d.degree_hist), 1.0, 1e-12);
  EXPECT_NEAR(total_sum(d.clustering_hist), 1.0, 1e-12);
  EXPECT_NEAR(total_sum(d.spectrum_hist), 1.0, 1e-12);
  EXPECT_EQ(d.clustering_hist.size(), kClusteringBins);
  EXPECT_EQ(d.spectrum_hist.size(), kSpectrumBins);
  for (double x : d.spectrum_hist) EXPECT_GE(x, 0.0);
}

TEST(Mmd, IdenticalSetsGiveZero) {
  std::vector<Graph> gs;
  for (std::uint64_t s = 0; s < 10; ++s) gs.push_back(gen_er(20, 0.3, s));
  auto d = descriptors(gs);
  for (auto which : {Descriptor::degree, Descriptor::clustering, Descriptor::orbit, Descriptor::spectrum})
    EXPECT_NEAR(mmd(d, d, which), 0.0, 1e-7) << to_string(which);
}

TEST(Mmd, SingletonClosedForm) {
  std::vector<std::vector<double>> x{{1.0, 0.0}}, y{{0.5, 0.5}};
  auto k = [](const auto& a, const auto& b) { return gaussian_tv_kernel(a, b, 1.0); };
  EXPECT_NEAR(tv_distance(x[0], y[0]), 0.5, 1e-15);
  const double m = mmd_from_kernel(x, y, k);
  EXPECT_NEAR(m * m, 2.0 - 2.0 * std::exp(-0.125), 1e-14);
}

TEST(Mmd, SymmetricAndNonnegative) {
  std::vector<Graph> a, b;
  for (std::uint64_t s = 0; s < 8; ++s) {
    a.push_back(gen_er(16, 0.2, s));
    b.push_back(gen_er(16, 0.4, 100 + s));
  }
  auto da = descriptors(a), db = descriptors(b);
  for (auto which : {Descriptor::degree, Descriptor::clustering, Descriptor::orbit, Descriptor::spectrum}) {
    EXPECT_GE(mmd(da, db, which), 0.0);
    EXPECT_NEAR(mmd(da, db, which), mmd(db, da, which), 1e-12);
  }
  EXPECT_THROW(mmd({}, db, Descriptor::degree), ContractViolation);
}

TEST(Mmd, SeparatesDistantErDensities) {
  std::vector<Graph> p10, p12, p50;
  for (std::uint64_t s = 0; s < 100; ++s) {
    p10.push_back(gen_er(40, 0.10, s));
    p12.push_back(gen_er(40, 0.12, 1000 + s));
    p50.push_back(gen_er(40, 0.50, 2000 + s));
  }
  auto d10 = descriptors(p10, false), d12 = descriptors(p12, false), d50 = descriptors(p50, false);
  EXPECT_GT(mmd(d10, d50, Descriptor::degree), mmd(d10, d12, Descriptor::degree));
}

TEST(Fid, ClosedForms) {
  auto eye = linalg::Matrix::identity(2);
  EXPECT_NEAR(frechet_distance({0, 0}, eye, {2, 0}, eye), 4.0, 1e-12);
  linalg::Matrix a(2), b(2);
  a(0, 0) = 1;
  a(1, 1) = 4;
  b(0, 0) = 4;
  b(1, 1) = 1;
  EXPECT_NEAR(frechet_distance({0, 0}, a, {0, 0}, b), 2.0, 1e-12);
  linalg::Matrix bad(2);
  bad(0, 0) = -1;
  EXPECT_THROW(frechet_distance({0, 0}, bad, {0, 0}, eye), NumericFault);
}

TEST(Fid, SameSetIsZeroAndPermutationInvariant) {
  std::vector<Graph> a, b;
  for (std::uint64_t s = 0; s < 20; ++s) {
    a.push_back(gen_er(24, 0.2, s));
    b.push_back(gen_er(24, 0.35, 50 + s));
  }
  EXPECT_NEAR(fid(a, a), 0.0, 1e-8);
  Rng rng(3);
  std::vector<Graph> pa, pb;
  for (const auto& g : a) pa.push_back(permute(g, sbgd::testing::random_permutation(g.n(), rng)));
  for (const auto& g : b) pb.push_back(permute(g, sbgd::testing::random_permutation(g.n(), rng)));
  const double base = fid(a, b);
  EXPECT_GT(base, 0.0);
  EXPECT_NEAR(fid(pa, pb), base, 1e-8);
  EXPECT_THROW(fid({a[0]}, b), ContractViolation);
}

TEST(Wl, RelabellingsAlwaysCollide) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    auto g = gen_er(n, rng.uniform(), rng.next_u64());
    ASSERT_EQ(wl_hash(g), wl_hash(permute(g, sbgd::testing::random_permutation(n, rng))));
  }
}

TEST(Wl, CollisionsOnlyForWlEquivalentPairs) {
  std::size_t collisions = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    std::map<std::uint64_t, std::vector<const Graph*>> groups;
    for (const auto& g : catalogue8().at(n)) groups[wl_hash(g)].push_back(&g);
    for (const auto& [h, members] : groups)
      for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j) {
          ++collisions;
          ASSERT_TRUE(oracle::wl_equivalent(*members[i], *members[j], 3)) << "n=" << n;
        }
  }
  EXPECT_GT(collisions, 0u);  // e.g. C6 and two triangles are not both connected, but regular pairs exist
}

TEST(Planarity, KuratowskiGraphs) {
  EXPECT_FALSE(is_planar(complete(5)));
  EXPECT_FALSE(is_planar(k33()));
  EXPECT_TRUE(is_planar(complete(4)));
  EXPECT_TRUE(is_planar(cycle(12)));
  EXPECT_THROW(is_planar(Graph(25)), Refusal);
}

TEST(Planarity, MatchesMinorOracleUpToSevenNodes) {
  std::size_t nonplanar = 0;
  for (std::size_t n = 1; n <= 7; ++n)
    for (const auto& g : catalogue8().at(n)) {
      const bool expected = oracle::planar_by_minors(g);
      ASSERT_EQ(is_planar(g), expected) << "n=" << n << " edges=" << g.edge_count();
      nonplanar += !expected;
    }
  EXPECT_GT(nonplanar, 0u);
}

TEST(Planarity, SubdividedK33AndDelaunay) {
  Graph g(9);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 3; b < 6; ++b)
      if (a == 0 && b < 6 && b > 2 && b - 3 < 3) {
        g.add_edge(a, 6 + (b - 3));
        g.add_edge(6 + (b - 3), b);
      } else {
        g.add_edge(a, b);
      }
  EXPECT_FALSE(is_planar(g));
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_TRUE(is_planar(gen_planar(24, s)));
}

TEST(Vun, Rules) {
  std::vector<Graph> train{cycle(5), complete(4)};
  EXPECT_EQ(vun(train, train, Validity::none), 0.0);
  std::vector<Graph> gen{cycle(6), cycle(6), complete(5)};
  auto b = vun_breakdown(gen, train, Validity::planarity);
  EXPECT_EQ(b.unique, 2u);
  EXPECT_EQ(b.valid, 2u);
  EXPECT_EQ(b.vun, 1u);
  EXPECT_NEAR(b.fraction(), 1.0 / 3.0, 1e-15);
  Graph split(4);
  split.add_edge(0, 1);
  split.add_edge(2, 3);
  EXPECT_EQ(vun({split}, train, Validity::connectivity), 0.0);
  EXPECT_THROW(validity_from("chemistry"), ContractViolation);
}

TEST(MemoryRatio, SelfComparisonIsOne) {
  std::vector<Graph> data;
  for (std::uint64_t s = 0; s < 2; ++s) {
    CsbmSpec c;
    c.n = 16;
    c.feature_dim = 2;
    c.seed = s;
    data.push_back(gen_csbm(c));
  }
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.blocks = 1;
  cfg.pairs_per_batch = 2;
  auto cache = build_decomposition_cache(data, cfg);
  auto a = measure_step_memory(cache, cfg), b = measure_step_memory(cache, cfg);
  EXPECT_NEAR(memory_ratio(a, b), 1.0, 0.02);
  EXPECT_THROW(memory_ratio(StepMemory{}, b), ContractViolation);
  EXPECT_NEAR(memory_model_ratio(128, 32, 0), 4.0, 1e-12);
}

TEST(Report, JsonAndCsv) {
  std::vector<Graph> a, b;
  for (std::uint64_t s = 0; s < 6; ++s) {
    a.push_back(gen_er(12, 0.3, s));
    b.push_back(gen_er(12, 0.3, 100 + s));
  }
  EvalConfig cfg;
  cfg.validity = Validity::connectivity;
  auto r = evaluate(a, b, cfg, &a);
  EXPECT_NEAR(r.avg_mmd, (r.mmd_degree + r.mmd_clustering + r.mmd_orbit + r.mmd_spectrum) / 4.0, 1e-15);
  ASSERT_TRUE(r.vun.has_value());
  auto j = r.to_json();
  EXPECT_EQ(j["generated_count"], 6);
  EXPECT_TRUE(j["memory_ratio"].is_null());
  const auto row = r.csv_row(), header = MetricsReport::csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
  cfg.orbits = false;
  auto r2 = evaluate(a, b, cfg);
  EXPECT_TRUE(std::isnan(r2.mmd_orbit));
  EXPECT_TRUE(r2.to_json()["mmd_orbit"].is_null());
}
