#include "tkgat/graph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tkgat/errors.hpp"

using namespace tkgat;

namespace {

GraphSnapshot make(std::size_t n, std::vector<Edge> edges, std::vector<double> weights) {
  return GraphSnapshot(n, std::move(edges), std::move(weights), Tensor::zeros({n, 1}),
                       std::vector<double>(n, 0.0));
}

std::vector<std::size_t> nodes_of(std::span<const Neighbor> ns) {
  std::vector<std::size_t> out;
  for (const auto& nb : ns) out.push_back(nb.node);
  return out;
}

}  // namespace

TEST(GraphSnapshot, AcceptsValidInput) {
  const auto s = make(3, {{0, 1}, {2, 1}, {1, 1}}, {0.5, 1.0, 2.0});
  EXPECT_EQ(s.num_nodes(), 3u);
  EXPECT_EQ(s.edges().size(), 3u);
  EXPECT_EQ(s.num_features(), 1u);
}

TEST(GraphSnapshot, WeightCountMismatchNamesWeights) {
  try {
    make(3, {{0, 1}, {1, 2}}, {1.0});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos);
  }
}

TEST(GraphSnapshot, RejectsBadInput) {
  EXPECT_THROW(make(3, {{0, 3}}, {1.0}), ValidationError);
  EXPECT_THROW(make(3, {{0, 1}, {0, 1}}, {1.0, 2.0}), ValidationError);
  EXPECT_THROW(make(3, {{0, 1}}, {std::numeric_limits<double>::quiet_NaN()}), ValidationError);
  EXPECT_THROW(make(3, {{0, 1}}, {std::numeric_limits<double>::infinity()}), ValidationError);
  EXPECT_THROW(GraphSnapshot(3, {}, {}, Tensor::zeros({2, 1}), {0, 0, 0}), ValidationError);
  EXPECT_THROW(GraphSnapshot(3, {}, {}, Tensor::zeros({3, 0}), {0, 0, 0}), ValidationError);
  EXPECT_THROW(GraphSnapshot(3, {}, {}, Tensor::zeros({3, 2}), {0, 0}), ValidationError);
}

TEST(NeighborIndex, OrdersByWeightDescending) {
  const auto s = make(3, {{0, 2}, {1, 2}}, {0.3, 0.9});
  const NeighborIndex idx(s);
  const auto n2 = idx.neighbors(2);
  ASSERT_EQ(n2.size(), 2u);
  EXPECT_EQ(n2[0], (Neighbor{1, 0.9}));
  EXPECT_EQ(n2[1], (Neighbor{0, 0.3}));
  EXPECT_TRUE(idx.neighbors(0).empty());
  EXPECT_EQ(idx.max_in_degree(), 2u);
  EXPECT_EQ(idx.total_pairs(), 2u);
}

TEST(NeighborIndex, TiesBrokenBySmallerSource) {
  const auto s = make(10, {{9, 0}, {4, 0}, {7, 0}}, {0.5, 0.5, 0.5});
  EXPECT_EQ(nodes_of(NeighborIndex(s).neighbors(0)), (std::vector<std::size_t>{4, 7, 9}));
}

TEST(NeighborIndex, SelfLoopIsOwnNeighbor) {
  const auto s = make(2, {{1, 1}}, {1.0});
  EXPECT_EQ(nodes_of(NeighborIndex(s).neighbors(1)), (std::vector<std::size_t>{1}));
}

TEST(NeighborIndex, OutOfRangeNode) {
  const NeighborIndex idx(make(2, {}, {}));
  EXPECT_THROW(idx.neighbors(2), ContractError);
}

TEST(NeighborIndex, MatchesOracleOnRandomGraphs) {
  std::mt19937_64 rng(1);
  for (int g = 0; g < 1000; ++g) {
    const std::size_t n = 1 + rng() % 12;
    // Quantised weights produce plenty of ties.
    std::vector<Edge> edges;
    std::vector<double> weights;
    for (std::size_t d = 0; d < n; ++d)
      for (std::size_t s = 0; s < n; ++s)
        if (oracle::uniform(rng, 0, 1) < 0.4) {
          edges.push_back({s, d});
          weights.push_back(static_cast<double>(rng() % 4) * 0.25);
        }
    std::vector<std::size_t> perm(edges.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Edge> pe;
    std::vector<double> pw;
    for (auto p : perm) {
      pe.push_back(edges[p]);
      pw.push_back(weights[p]);
    }
    const NeighborIndex idx(n, pe, pw);
    EXPECT_EQ(idx.total_pairs(), edges.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto expected = oracle::sorted_in_neighbors(i, edges, weights);
      const auto got = idx.neighbors(i);
      ASSERT_TRUE(std::equal(got.begin(), got.end(), expected.begin(), expected.end())) << "graph " << g;
    }
  }
}

TEST(TopK, SelectsStrongest) {
  const auto s = make(4, {{0, 3}, {1, 3}, {2, 3}}, {0.2, 0.8, 0.5});
  const NeighborIndex idx(s);
  EXPECT_EQ(nodes_of(select_top_k_neighbors(3, idx, 2)), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(nodes_of(select_top_k_neighbors(3, idx, 1)), (std::vector<std::size_t>{1}));
  EXPECT_EQ(nodes_of(select_top_k_neighbors(3, idx, 10)), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(TopK, TieBreakPrefersSmallerIndex) {
  const auto s = make(10, {{9, 0}, {4, 0}}, {0.7, 0.7});
  EXPECT_EQ(nodes_of(select_top_k_neighbors(0, NeighborIndex(s), 1)), (std::vector<std::size_t>{4}));
}

TEST(TopK, IsolatedNodeGivesEmpty) {
  const auto s = make(3, {{0, 1}}, {1.0});
  EXPECT_TRUE(select_top_k_neighbors(2, NeighborIndex(s), 3).empty());
}

TEST(TopK, ZeroKRejected) {
  const auto s = make(3, {{0, 1}}, {1.0});
  EXPECT_THROW(select_top_k_neighbors(1, NeighborIndex(s), 0), ContractError);
}

TEST(TopKProperty, AgreesWithBruteForceAndNests) {
  std::mt19937_64 rng(77);
  for (int g = 0; g < 300; ++g) {
    const std::size_t n = 2 + rng() % 10;
    const auto s = oracle::random_snapshot(rng, n, 1, 0.6);
    const std::vector<Edge> edges(s.edges().begin(), s.edges().end());
    const std::vector<double> weights(s.weights().begin(), s.weights().end());
    const NeighborIndex idx(s);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t deg = idx.neighbors(i).size();
      std::vector<Neighbor> prev;
      for (std::size_t k = 1; k <= deg + 2; ++k) {
        const auto sel = select_top_k_neighbors(i, idx, k);
        EXPECT_EQ(sel, oracle::brute_top_k(i, edges, weights, k));
        EXPECT_EQ(sel.size(), std::min(k, deg));
        // Top-(k-1) is a prefix of top-k.
        EXPECT_TRUE(std::equal(prev.begin(), prev.end(), sel.begin()));
        // Nothing left out outweighs anything kept.
        const auto all = idx.neighbors(i);
        for (std::size_t r = sel.size(); r < all.size(); ++r)
          for (const auto& kept : sel) EXPECT_LE(all[r].weight, kept.weight);
        prev = sel;
      }
      const auto full = select_top_k_neighbors(i, idx, std::max<std::size_t>(1, idx.max_in_degree()));
      EXPECT_EQ(full.size(), deg);
    }
  }
}

TEST(TopKProperty, InvariantUnderEdgeOrder) {
  std::mt19937_64 rng(31);
  for (int g = 0; g < 100; ++g) {
    const auto s = oracle::random_snapshot(rng, 8, 1, 0.5);
    std::vector<std::size_t> perm(s.edges().size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Edge> pe;
    std::vector<double> pw;
    for (auto p : perm) {
      pe.push_back(s.edges()[p]);
      pw.push_back(s.weights()[p]);
    }
    const NeighborIndex a(s);
    const NeighborIndex b(8, pe, pw);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t k = 1; k <= 4; ++k)
        EXPECT_EQ(select_top_k_neighbors(i, a, k), select_top_k_neighbors(i, b, k));
  }
}

TEST(AverageInDegree, Examples) {
  std::vector<Edge> complete;
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = 0; j < 15; ++j) complete.push_back({j, i});
  EXPECT_DOUBLE_EQ(average_in_degree(make(15, complete, std::vector<double>(225, 1.0))), 15.0);

  std::vector<Edge> some;
  for (std::size_t e = 0; e < 102; ++e) some.push_back({e % 20, (e / 20 + e) % 20});
  std::sort(some.begin(), some.end(), [](Edge a, Edge b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
  some.erase(std::unique(some.begin(), some.end()), some.end());
  ASSERT_EQ(some.size(), 102u);
  EXPECT_DOUBLE_EQ(average_in_degree(make(20, some, std::vector<double>(102, 1.0))), 5.1);

  EXPECT_EQ(average_in_degree(make(4, {}, {})), 0.0);
}
