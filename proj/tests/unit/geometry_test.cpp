#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "mcgi/error.hpp"
#include "mcgi/geometry.hpp"
#include "test_util.hpp"

namespace mcgi {
namespace {

using testing::gaussian_points;
using testing::points_1d;

const std::filesystem::path kFixtures = MCGI_FIXTURE_DIR;

EdgeSet read_edge_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  EdgeSet edges;
  node_id u, v;
  while (in >> u >> v) edges.insert(u, v);
  return edges;
}

double weight(const VectorDataset& pts, const EdgeSet& edges) {
  double w = 0.0;
  for (auto [u, v] : edges) w += l2_distance(pts.row(u), pts.row(v));
  return w;
}

bool spanning_tree(std::size_t n, const EdgeSet& edges) {
  if (edges.size() + 1 != n) return false;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [u, v] : edges) {
    const auto a = find(u), b = find(v);
    if (a == b) return false;
    parent[a] = b;
  }
  return true;
}

// Minimum weight over every labeled tree, enumerated through Pruefer codes.
double brute_force_mst_weight(const VectorDataset& pts) {
  const std::size_t n = pts.count;
  if (n < 2) return 0.0;
  if (n == 2) return l2_distance(pts.row(0), pts.row(1));
  std::vector<std::size_t> code(n - 2, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<std::size_t> degree(n, 1);
    for (auto c : code) ++degree[c];
    double w = 0.0;
    for (auto c : code) {
      std::size_t leaf = 0;
      while (degree[leaf] != 1) ++leaf;
      w += l2_distance(pts.row(leaf), pts.row(c));
      --degree[leaf];
      --degree[c];
    }
    std::size_t a = n, b = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (degree[i] == 1) (a == n ? a : b) = i;
    }
    w += l2_distance(pts.row(a), pts.row(b));
    best = std::min(best, w);
    std::size_t i = 0;
    while (i < code.size() && ++code[i] == n) code[i++] = 0;
    if (i == code.size()) break;
  }
  return best;
}

TEST(L2Distance, Basics) {
  const std::vector<float> a{0, 0}, b{3, 4};
  EXPECT_EQ(l2_distance(a, b), 5.0);
  EXPECT_EQ(l2_distance(a, a), 0.0);
  const auto pts = gaussian_points(20, 7, 1);
  for (std::size_t i = 1; i < 20; ++i) {
    EXPECT_EQ(l2_distance(pts.row(i - 1), pts.row(i)), l2_distance(pts.row(i), pts.row(i - 1)));
  }
}

TEST(L2Distance, Errors) {
  const std::vector<float> a{0, 0}, b{1, 2, 3};
  EXPECT_THROW(l2_distance(a, b), ParameterError);
  const std::vector<float> c{NAN, 0};
  EXPECT_THROW(l2_distance(a, c), ParameterError);
  const std::vector<float> d{INFINITY, 0};
  EXPECT_THROW(l2_distance(d, a), ParameterError);
}

TEST(ExactKnn, HandExample) {
  const auto r = exact_knn(points_1d({0, 1, 3}), std::vector<float>{0.9f}, 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].id, 1u);
  EXPECT_EQ(r[1].id, 0u);
  EXPECT_EQ(r[2].id, 2u);
  EXPECT_NEAR(r[0].distance, 0.1, 1e-6);
  EXPECT_NEAR(r[1].distance, 0.9, 1e-6);
  EXPECT_NEAR(r[2].distance, 2.1, 1e-6);
}

TEST(ExactKnn, SelfQueryAndOrdering) {
  const auto pts = gaussian_points(100, 5, 2);
  const auto r = exact_knn(pts, pts.row(42), 1);
  EXPECT_EQ(r[0].id, 42u);
  EXPECT_EQ(r[0].distance, 0.0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto q = gaussian_points(1, 5, 100 + s);
    const auto all = exact_knn(pts, q.row(0), 100);
    for (std::size_t i = 1; i < all.size(); ++i) EXPECT_LE(all[i - 1].distance, all[i].distance);
  }
  EXPECT_THROW(exact_knn(pts, pts.row(0), 101), ParameterError);
  EXPECT_THROW(exact_knn(pts, pts.row(0), 0), ParameterError);
}

TEST(EdgeSetType, CanonicalAndNoSelfLoops) {
  EdgeSet e;
  EXPECT_TRUE(e.insert(3, 1));
  EXPECT_FALSE(e.insert(1, 3));
  EXPECT_TRUE(e.contains(1, 3));
  EXPECT_TRUE(e.contains(3, 1));
  EXPECT_EQ(*e.begin(), (EdgeSet::Edge{1, 3}));
  EXPECT_THROW(e.insert(2, 2), ParameterError);
}

TEST(Emst, HandExample) {
  EXPECT_EQ(emst_edges(points_1d({0, 1, 3})), (EdgeSet{{0, 1}, {1, 2}}));
  EXPECT_TRUE(emst_edges(points_1d({4})).empty());
  EXPECT_THROW(emst_edges(VectorDataset{}), ParameterError);
}

TEST(Emst, TieBreakIsLexicographic) {
  // All four sides weigh 1.
  const VectorDataset sq(2, {0, 0, 1, 0, 0, 1, 1, 1});
  EXPECT_EQ(emst_edges(sq), (EdgeSet{{0, 1}, {0, 2}, {1, 3}}));
}

TEST(Emst, MatchesExhaustiveEnumeration) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const std::size_t n = 3 + seed % 6;  // 3..8
    const auto pts = gaussian_points(n, 2 + seed % 3, 500 + seed);
    const auto tree = emst_edges(pts);
    ASSERT_TRUE(spanning_tree(n, tree));
    EXPECT_NEAR(weight(pts, tree), brute_force_mst_weight(pts), 1e-9) << "seed " << seed;
  }
}

TEST(Emst, SpanningTreeOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pts = gaussian_points(50 + 25 * seed, 4, seed);
    EXPECT_TRUE(spanning_tree(pts.count, emst_edges(pts)));
  }
}

TEST(Rng, HandExamples) {
  // The longest side of a scalene triangle is always occluded.
  const VectorDataset tri(2, {0, 0, 4, 0, 1, 3});
  EXPECT_EQ(rng_edges(tri), (EdgeSet{{0, 1}, {0, 2}}));
  const VectorDataset sq(2, {0, 0, 1, 0, 0, 1, 1, 1});
  EXPECT_EQ(rng_edges(sq), (EdgeSet{{0, 1}, {0, 2}, {1, 3}, {2, 3}}));
  EXPECT_EQ(rng_edges(points_1d({0, 5})), (EdgeSet{{0, 1}}));
}

TEST(Rng, OpenLuneKeepsBoundaryTies) {
  // Witness 2 sits exactly on the lune boundary of {0, 1}: d(2,0) == d(0,1) == 5.
  const VectorDataset pts(2, {0, 0, 5, 0, 3, 4});
  std::size_t ties = 0;
  const auto e = rng_edges(pts, &ties);
  EXPECT_TRUE(e.contains(0, 1));
  EXPECT_GT(ties, 0u);
}

TEST(Rng, ContainsEmstOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto pts = gaussian_points(40 + 37 * seed, 2 + seed, seed);
    const auto rng = rng_edges(pts);
    for (auto [u, v] : emst_edges(pts)) EXPECT_TRUE(rng.contains(u, v)) << u << " " << v;
  }
}

TEST(Rng, RelabelingIsEquivariant) {
  const auto pts = gaussian_points(60, 3, 17);
  std::vector<node_id> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  std::vector<float> values(pts.values.size());
  for (std::size_t i = 0; i < 60; ++i) {
    std::copy(pts.row(i).begin(), pts.row(i).end(), values.begin() + perm[i] * 3);
  }
  const auto moved = rng_edges(VectorDataset(3, values));
  EdgeSet expected;
  for (auto [u, v] : rng_edges(pts)) expected.insert(perm[u], perm[v]);
  EXPECT_EQ(moved, expected);
}

TEST(Oracle, RefusesLargeInputs) {
  const VectorDataset big(1, std::vector<float>(kOracleMaxPoints + 1, 0.0f));
  EXPECT_THROW(emst_edges(big), ParameterError);
  EXPECT_THROW(rng_edges(big), ParameterError);
}

TEST(Oracle, MatchesScipyFixtures) {
  std::size_t checked = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kFixtures)) {
    if (entry.path().extension() != ".fvecs") continue;
    const auto pts = read_vecs(entry.path(), ElementKind::float32);
    auto stem = entry.path();
    EXPECT_EQ(emst_edges(pts), read_edge_file(stem.replace_extension(".emst"))) << stem;
    EXPECT_EQ(rng_edges(pts), read_edge_file(stem.replace_extension(".rng"))) << stem;
    ++checked;
  }
  EXPECT_EQ(checked, 5u);
}

TEST(Inclusion, Examples) {
  Graph g;
  g.n = 3;
  g.entry_point = 0;
  g.max_degree = 2;
  g.out_neighbors = {{1}, {}, {}};
  EXPECT_TRUE(check_inclusion(EdgeSet{}, g).holds);
  EXPECT_TRUE(check_inclusion(EdgeSet{{0, 1}}, g).holds);
  g.out_neighbors = {{}, {0}, {}};
  EXPECT_TRUE(check_inclusion(EdgeSet{{0, 1}}, g).holds);
  const auto r = check_inclusion(EdgeSet{{0, 1}, {1, 2}}, g);
  EXPECT_FALSE(r.holds);
  EXPECT_EQ(r.missing, (std::vector<EdgeSet::Edge>{{1, 2}}));
  EXPECT_THROW(check_inclusion(EdgeSet{{0, 7}}, g), ParameterError);
}

TEST(EdgeExport, SortedLines) {
  testing::TempDir dir;
  write_edges(EdgeSet{{3, 1}, {0, 2}}, dir / "e.txt");
  std::ifstream in(dir / "e.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "0 2\n1 3\n");
}

}  // namespace
}  // namespace mcgi
