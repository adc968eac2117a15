#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dagconv/arch_graph.hpp"

using namespace dagconv;

namespace {

// Independent path counting by dynamic programming over the 4-node cell.
// weight[src][dst] = -1 for no edge, else the Param count contributed.
struct DpOracle {
  long paths = 0;
  long sum_depth = 0;
};

DpOracle dp_paths(const std::array<std::array<int, 4>, 4>& weight) {
  std::array<long, 4> count{1, 0, 0, 0};
  std::array<long, 4> depth{0, 0, 0, 0};
  for (int dst = 1; dst < 4; ++dst) {
    for (int src = 0; src < dst; ++src) {
      const int w = weight[src][dst];
      if (w < 0) continue;
      count[dst] += count[src];
      depth[dst] += depth[src] + w * count[src];
    }
  }
  return {count[3], depth[3]};
}

// Digit k of the space index, most significant first, in edge order
// (0,1),(0,2),(1,2),(0,3),(1,3),(2,3).
constexpr std::array<std::pair<int, int>, 6> kEdgeOrder = {{{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}};

std::array<std::array<int, 4>, 4> weights_for_index(std::size_t index) {
  // token order: none, skip_connect, nor_conv_1x1, nor_conv_3x3, avg_pool_3x3
  constexpr std::array<int, 5> kWeight = {-1, 0, 1, 1, 0};
  std::array<std::array<int, 4>, 4> w{};
  for (auto& row : w) row.fill(-1);
  for (int k = 5; k >= 0; --k) {
    w[kEdgeOrder[static_cast<std::size_t>(k)].first][kEdgeOrder[static_cast<std::size_t>(k)].second] =
        kWeight[index % 5];
    index /= 5;
  }
  return w;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::InvariantViolation;
}

}  // namespace

TEST(ParseNb201, Dag1IsSequential) {
  const ArchGraph g = parse_nb201(builtin::kDag1);
  EXPECT_EQ(g.num_nodes(), 4);
  EXPECT_EQ(g.op(0, 1), OpKind::Param);
  EXPECT_EQ(g.op(1, 2), OpKind::Param);
  EXPECT_EQ(g.op(2, 3), OpKind::Param);
  EXPECT_EQ(g.op(0, 2), OpKind::Zero);
  EXPECT_EQ(g.op(0, 3), OpKind::Zero);
  EXPECT_EQ(g.op(1, 3), OpKind::Zero);
}

TEST(ParseNb201, Dag2Assignment) {
  const ArchGraph g = parse_nb201(builtin::kDag2);
  EXPECT_EQ(g.op(0, 1), OpKind::Skip);
  EXPECT_EQ(g.op(1, 2), OpKind::Skip);
  EXPECT_EQ(g.op(0, 2), OpKind::Zero);
  EXPECT_EQ(g.op(0, 3), OpKind::Param);
  EXPECT_EQ(g.op(1, 3), OpKind::Param);
  EXPECT_EQ(g.op(2, 3), OpKind::Param);
}

TEST(ParseNb201, OpTable) {
  const ArchGraph g = parse_nb201("|avg_pool_3x3~0|+|nor_conv_1x1~0|skip_connect~1|+|none~0|nor_conv_3x3~1|avg_pool_3x3~2|");
  EXPECT_EQ(g.op(0, 1), OpKind::NonParam);
  EXPECT_EQ(g.op(0, 2), OpKind::Param);
  EXPECT_EQ(g.op(1, 2), OpKind::Skip);
  EXPECT_EQ(g.op(0, 3), OpKind::Zero);
  EXPECT_EQ(g.op(1, 3), OpKind::Param);
  EXPECT_EQ(g.op(2, 3), OpKind::NonParam);
}

TEST(ParseNb201, Errors) {
  EXPECT_EQ(code_of([] { parse_nb201("|x~0|+|none~0|none~1|+|none~0|none~1|none~2|"); }), ErrorCode::UnknownOp);
  EXPECT_EQ(code_of([] { parse_nb201("|none~1|+|none~0|none~1|+|none~0|none~1|none~2|"); }), ErrorCode::BadIndex);
  EXPECT_EQ(code_of([] { parse_nb201("|none~0|+|none~0|none~0|+|none~0|none~1|none~2|"); }), ErrorCode::BadIndex);
  EXPECT_EQ(code_of([] { parse_nb201(""); }), ErrorCode::MalformedString);
  EXPECT_EQ(code_of([] { parse_nb201("none~0|+|none~0|none~1|"); }), ErrorCode::MalformedString);
  EXPECT_EQ(code_of([] { parse_nb201("|none0|"); }), ErrorCode::MalformedString);
  EXPECT_EQ(code_of([] { parse_nb201("|none~a|"); }), ErrorCode::MalformedString);
  EXPECT_EQ(code_of([] { parse_nb201("|none~0|+|none~0|"); }), ErrorCode::BadIndex);
}

TEST(ParseNb201, RoundTripWholeSpace) {
  std::size_t n = 0;
  for (const auto& entry : Nb201Space{}) {
    ASSERT_EQ(to_nb201(entry.graph), entry.arch);
    ++n;
  }
  EXPECT_EQ(n, nb201::kSpaceSize);
}

TEST(ParseNb201, SurvivesDslRoundTrip) {
  for (std::size_t i = 0; i < Nb201Space::size(); i += 97) {
    const ArchGraph g = parse_nb201(Nb201Space::arch_string(i));
    EXPECT_EQ(parse_dag_dsl(to_dag_dsl(g)), g);
  }
}

TEST(Nb201Space, DistinctAndComplete) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < Nb201Space::size(); ++i) seen.insert(Nb201Space::arch_string(i));
  EXPECT_EQ(seen.size(), 15625u);
  EXPECT_EQ(Nb201Space::arch_string(0), "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|");
}

TEST(Nb201Space, AllNoneAndAllSkip) {
  const ArchGraph none = parse_nb201(Nb201Space::arch_string(0));
  EXPECT_EQ(enumerate_paths(none).num_paths, 0);
  EXPECT_TRUE(enumerate_paths(none).depths.empty());
  const ArchGraph skip = parse_nb201("|skip_connect~0|+|skip_connect~0|skip_connect~1|+|skip_connect~0|skip_connect~1|skip_connect~2|");
  const PathProfile p = enumerate_paths(skip);
  EXPECT_EQ(p.num_paths, 4);
  EXPECT_EQ(p.depths, (std::vector<int>{0, 0, 0, 0}));
}

TEST(ParseDsl, Dag3Document) {
  const ArchGraph g = parse_dag_dsl(R"({"num_nodes":4,"edges":[
    {"src":0,"dst":1,"op":"param"},{"src":0,"dst":2,"op":"param"},{"src":2,"dst":3,"op":"param"},
    {"src":0,"dst":3,"op":"skip"},{"src":1,"dst":2,"op":"skip"},{"src":1,"dst":3,"op":"skip"}]})");
  EXPECT_EQ(g, builtin::dag3());
}

TEST(ParseDsl, SingleEdge) {
  const ArchGraph g = parse_dag_dsl(R"({"num_nodes":2,"edges":[{"src":0,"dst":1,"op":"param"}]})");
  EXPECT_EQ(g.num_nodes(), 2);
  EXPECT_EQ(enumerate_paths(g).depths, std::vector<int>{1});
}

TEST(ParseDsl, Errors) {
  EXPECT_EQ(code_of([] { parse_dag_dsl(R"({"num_nodes":3,"edges":[{"src":2,"dst":1,"op":"param"}]})"); }),
            ErrorCode::CycleOrBackwardEdge);
  EXPECT_EQ(code_of([] { parse_dag_dsl(R"({"num_nodes":3,"edges":[{"src":1,"dst":1,"op":"param"}]})"); }),
            ErrorCode::CycleOrBackwardEdge);
  EXPECT_EQ(code_of([] {
              parse_dag_dsl(R"({"num_nodes":3,"edges":[{"src":0,"dst":1,"op":"param"},{"src":0,"dst":1,"op":"skip"}]})");
            }),
            ErrorCode::DuplicateEdge);
  EXPECT_EQ(code_of([] { parse_dag_dsl(R"({"num_nodes":3,"edges":[{"src":0,"dst":5,"op":"param"}]})"); }),
            ErrorCode::NodeOutOfRange);
  EXPECT_EQ(code_of([] { parse_dag_dsl(R"({"num_nodes":3,"edges":[{"src":0,"dst":1,"op":"conv"}]})"); }),
            ErrorCode::UnknownOp);
  EXPECT_EQ(code_of([] { parse_dag_dsl(R"({"edges":[]})"); }), ErrorCode::MalformedDocument);
  EXPECT_EQ(code_of([] { parse_dag_dsl("not json"); }), ErrorCode::MalformedDocument);
  EXPECT_EQ(code_of([] { parse_dag_dsl(R"({"num_nodes":40,"edges":[]})"); }), ErrorCode::TooManyNodes);
  EXPECT_NO_THROW(parse_dag_dsl(R"({"num_nodes":40,"edges":[]})", 64));
}

TEST(EnumeratePaths, ReferenceDags) {
  EXPECT_EQ(enumerate_paths(builtin::dag1()).depths, std::vector<int>{3});
  EXPECT_EQ(enumerate_paths(builtin::dag2()).depths, (std::vector<int>{1, 1, 1}));
  auto d3 = enumerate_paths(builtin::dag3()).depths;
  std::sort(d3.begin(), d3.end());
  EXPECT_EQ(d3, (std::vector<int>{0, 1, 2, 2}));
}

TEST(EnumeratePaths, LexicographicOrder) {
  std::vector<std::vector<int>> seqs;
  for_each_path(builtin::dag3(), [&](std::span<const int> nodes, int) { seqs.emplace_back(nodes.begin(), nodes.end()); });
  EXPECT_EQ(seqs, (std::vector<std::vector<int>>{{0, 1, 2, 3}, {0, 1, 3}, {0, 2, 3}, {0, 3}}));
  EXPECT_EQ(enumerate_paths(builtin::dag3()).depths, (std::vector<int>{2, 1, 2, 0}));
}

TEST(EnumeratePaths, FullyConnectedCellHasFourPaths) {
  for (OpKind op : {OpKind::Skip, OpKind::Param, OpKind::NonParam}) {
    std::vector<Edge> edges;
    for (auto [s, d] : kEdgeOrder) edges.push_back({s, d, op, {}});
    EXPECT_EQ(enumerate_paths(ArchGraph(4, edges)).num_paths, 4);
  }
}

TEST(EnumeratePaths, MatchesDpOracleOnWholeSpace) {
  for (std::size_t i = 0; i < Nb201Space::size(); ++i) {
    const PathProfile p = enumerate_paths(parse_nb201(Nb201Space::arch_string(i)));
    const DpOracle o = dp_paths(weights_for_index(i));
    ASSERT_EQ(p.num_paths, o.paths) << i;
    ASSERT_EQ(p.sum_depths(), o.sum_depth) << i;
    ASSERT_EQ(p.depths.size(), static_cast<std::size_t>(p.num_paths));
  }
}

TEST(EnumeratePaths, InvariantUnderEdgeReordering) {
  std::mt19937 rng(7);
  for (std::size_t i = 3; i < Nb201Space::size(); i += 131) {
    const ArchGraph g = parse_nb201(Nb201Space::arch_string(i));
    std::vector<Edge> edges(g.edges().begin(), g.edges().end());
    std::shuffle(edges.begin(), edges.end(), rng);
    const ArchGraph h(g.num_nodes(), edges);
    EXPECT_EQ(enumerate_paths(h).depths, enumerate_paths(g).depths);
  }
}

TEST(EnumeratePaths, RemovingAnEdgeNeverAddsPaths) {
  for (std::size_t i = 0; i < Nb201Space::size(); i += 7) {
    const ArchGraph g = parse_nb201(Nb201Space::arch_string(i));
    const int p = enumerate_paths(g).num_paths;
    for (const Edge& e : g.edges()) {
      if (e.op == OpKind::Zero) continue;
      EXPECT_LE(enumerate_paths(g.with_op(e.src, e.dst, OpKind::Zero)).num_paths, p);
    }
  }
}

TEST(EnumeratePaths, ParamToSkipDropsDepthByPathsThroughEdge) {
  for (std::size_t i = 0; i < Nb201Space::size(); i += 5) {
    const ArchGraph g = parse_nb201(Nb201Space::arch_string(i));
    const PathProfile before = enumerate_paths(g);
    for (const Edge& e : g.edges()) {
      if (e.op != OpKind::Param) continue;
      long through = 0;
      for_each_path(g, [&](std::span<const int> nodes, int) {
        for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
          if (nodes[k] == e.src && nodes[k + 1] == e.dst) ++through;
        }
      });
      const PathProfile after = enumerate_paths(g.with_op(e.src, e.dst, OpKind::Skip));
      EXPECT_EQ(after.num_paths, before.num_paths);
      EXPECT_EQ(after.sum_depths(), before.sum_depths() - through);
    }
  }
}

TEST(ArchGraph, Validation) {
  EXPECT_EQ(code_of([] { ArchGraph(1, {}); }), ErrorCode::NodeOutOfRange);
  EXPECT_EQ(code_of([] { ArchGraph(17, {}); }), ErrorCode::TooManyNodes);
  EXPECT_EQ(code_of([] { ArchGraph(3, {{0, 3, OpKind::Param, {}}}); }), ErrorCode::NodeOutOfRange);
  EXPECT_EQ(code_of([] { ArchGraph(3, {{-1, 2, OpKind::Param, {}}}); }), ErrorCode::NodeOutOfRange);
}

TEST(ArchGraph, LargerDagPathCount) {
  // Fully connected 6-node DAG: 2^(n-2) paths from 0 to 5.
  std::vector<Edge> edges;
  for (int s = 0; s < 6; ++s) {
    for (int d = s + 1; d < 6; ++d) edges.push_back({s, d, OpKind::Param, {}});
  }
  const PathProfile p = enumerate_paths(ArchGraph(6, edges));
  EXPECT_EQ(p.num_paths, 16);
  // Each path of length L contributes L; sum over subsets of 4 interior nodes of (k+1).
  EXPECT_EQ(p.sum_depths(), 1 * 1 + 4 * 2 + 6 * 3 + 4 * 4 + 1 * 5);
}
