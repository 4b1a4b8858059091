#include <gtest/gtest.h>

#include "sbgd/datagen.hpp"

using namespace sbgd;

TEST(Csbm, DegenerateProbabilitiesGiveCliques) {
  CsbmSpec s;
  s.n = 10;
  s.p_in = 1.0;
  s.p_out = 0.0;
  auto g = gen_csbm(s);
  EXPECT_EQ(component_count(g), 2u);
  EXPECT_EQ(g.edge_count(), 20u);
}

TEST(Csbm, WithinCommunityDensity) {
  CsbmSpec s;
  s.n = 100;
  s.p_in = 0.5;
  s.p_out = 0.05;
  s.feature_dim = 0;
  double in_edges = 0, in_pairs = 0;
  for (int rep = 0; rep < 200; ++rep) {
    s.seed = static_cast<std::uint64_t>(rep);
    auto g = gen_csbm(s);
    for (std::size_t u = 0; u < 100; ++u)
      for (std::size_t v = u + 1; v < 100; ++v)
        if (csbm_community(u, 100, 2) == csbm_community(v, 100, 2)) {
          in_pairs += 1;
          in_edges += g.has_edge(u, v);
        }
  }
  EXPECT_NEAR(in_edges / in_pairs, 0.5, 0.01);
}

TEST(Csbm, ZeroSignalFeaturesCentered) {
  CsbmSpec s;
  s.n = 400;
  s.mu = 0.0;
  s.feature_dim = 8;
  auto g = gen_csbm(s);
  double m = 0;
  for (std::size_t v = 0; v < s.n; ++v)
    for (std::size_t k = 0; k < 8; ++k) m += g.feature(v, k);
  EXPECT_NEAR(m / (400.0 * 8.0), 0.0, 0.02);
}

TEST(Csbm, InvalidProbabilities) {
  CsbmSpec s;
  s.p_in = 1.5;
  EXPECT_THROW(gen_csbm(s), ContractViolation);
  s.p_in = 0.1;
  s.p_out = 0.2;
  EXPECT_THROW(gen_csbm(s), ContractViolation);
}

TEST(Er, Extremes) {
  EXPECT_EQ(gen_er(10, 0.0, 1).edge_count(), 0u);
  EXPECT_EQ(gen_er(10, 1.0, 1).edge_count(), 45u);
  EXPECT_EQ(gen_er(30, 0.3, 5), gen_er(30, 0.3, 5));
}

TEST(Er, MeanEdgeCount) {
  double total = 0;
  for (int rep = 0; rep < 2000; ++rep) total += static_cast<double>(gen_er(50, 0.2, rep).edge_count());
  EXPECT_NEAR(total / 2000.0, 245.0, 3.0);
}

TEST(Planar, EdgeBoundAndConnected) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 3 + seed * 3;
    auto g = gen_planar(n, seed);
    EXPECT_LE(g.edge_count(), 3 * n - 6 + (n == 3 ? 3 : 0));
    EXPECT_TRUE(is_connected(g));
  }
}

TEST(Planar, ConvexQuadrilateral) {
  auto g = delaunay_graph({{0, 0}, {1, 0.1}, {1.1, 1}, {-0.1, 0.9}});
  EXPECT_EQ(g.edge_count(), 5u);
}

TEST(Planar, Triangle) {
  EXPECT_EQ(gen_planar(3, 1).edge_count(), 3u);
  EXPECT_THROW(gen_planar(2, 1), ContractViolation);
}
