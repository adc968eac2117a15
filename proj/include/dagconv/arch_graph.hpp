#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dagconv/error.hpp"

namespace dagconv {

// ---------------------------------------------------------------------------
// Operation kinds
// ---------------------------------------------------------------------------

/// Edge operation class. Zero edges are structural non-edges; Skip and
/// NonParam carry no weights; Param is a weighted linear map + activation.
enum class OpKind : std::uint8_t { Zero, Skip, Param, NonParam };

inline constexpr std::array<OpKind, 4> kAllOpKinds = {OpKind::Zero, OpKind::Skip, OpKind::Param,
                                                      OpKind::NonParam};

/// DSL spelling of an op kind.
constexpr std::string_view op_name(OpKind op) noexcept {
  switch (op) {
    case OpKind::Zero: return "zero";
    case OpKind::Skip: return "skip";
    case OpKind::Param: return "param";
    case OpKind::NonParam: return "nonparam";
  }
  return "zero";
}

constexpr std::optional<OpKind> op_from_name(std::string_view name) noexcept {
  for (OpKind op : kAllOpKinds) {
    if (op_name(op) == name) return op;
  }
  return std::nullopt;
}

/// Contribution of one edge to a path's parameterized-op count.
constexpr int depth_weight(OpKind op) noexcept { return op == OpKind::Param ? 1 : 0; }

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

struct Edge {
  int src = 0;
  int dst = 0;
  OpKind op = OpKind::Zero;
  // Original op token (e.g. "nor_conv_1x1") when parsed from an
  // architecture string; empty otherwise. Not part of edge identity.
  std::string label;

  friend bool operator==(const Edge& a, const Edge& b) noexcept {
    return a.src == b.src && a.dst == b.dst && a.op == b.op;
  }
};

inline constexpr int kDefaultMaxNodes = 16;

/// Validated cell DAG over nodes 0..H. Node 0 is the input, node H the
/// output. Every edge satisfies src < dst, so node index order is a
/// topological order. Edges are kept sorted by (src, dst).
class ArchGraph {
 public:
  ArchGraph() = default;

  ArchGraph(int num_nodes, std::vector<Edge> edges, int max_nodes = kDefaultMaxNodes)
      : num_nodes_(num_nodes), edges_(std::move(edges)) {
    if (num_nodes_ < 2) {
      throw Error(ErrorCode::NodeOutOfRange,
                  "a graph needs at least 2 nodes, got " + std::to_string(num_nodes_));
    }
    if (num_nodes_ > max_nodes) {
      throw Error(ErrorCode::TooManyNodes, std::to_string(num_nodes_) +
                                               " nodes exceeds the limit of " +
                                               std::to_string(max_nodes) +
                                               " (path enumeration is exponential)");
    }
    for (const Edge& e : edges_) {
      if (e.src < 0 || e.dst < 0 || e.src >= num_nodes_ || e.dst >= num_nodes_) {
        throw Error(ErrorCode::NodeOutOfRange, "edge (" + std::to_string(e.src) + "," +
                                                   std::to_string(e.dst) + ") outside 0.." +
                                                   std::to_string(num_nodes_ - 1));
      }
      if (e.src >= e.dst) {
        throw Error(ErrorCode::CycleOrBackwardEdge, "edge (" + std::to_string(e.src) + "," +
                                                        std::to_string(e.dst) +
                                                        ") does not point forward");
      }
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
    });
    for (std::size_t i = 1; i < edges_.size(); ++i) {
      if (edges_[i - 1].src == edges_[i].src && edges_[i - 1].dst == edges_[i].dst) {
        throw Error(ErrorCode::DuplicateEdge, "edge (" + std::to_string(edges_[i].src) + "," +
                                                  std::to_string(edges_[i].dst) +
                                                  ") listed twice");
      }
    }
  }

  int num_nodes() const noexcept { return num_nodes_; }
  int input() const noexcept { return 0; }
  int output() const noexcept { return num_nodes_ - 1; }

  std::span<const Edge> edges() const noexcept { return edges_; }

  /// Operation on (src, dst); Zero when the pair carries no edge.
  OpKind op(int src, int dst) const noexcept {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), std::pair(src, dst),
                               [](const Edge& e, const std::pair<int, int>& key) {
                                 return std::pair(e.src, e.dst) < key;
                               });
    if (it != edges_.end() && it->src == src && it->dst == dst) return it->op;
    return OpKind::Zero;
  }

  std::size_t count(OpKind kind) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(edges_.begin(), edges_.end(), [kind](const Edge& e) { return e.op == kind; }));
  }

  /// Non-zero edges ending at `dst`, ordered by source.
  std::vector<Edge> incoming(int dst) const {
    std::vector<Edge> in;
    for (const Edge& e : edges_) {
      if (e.dst == dst && e.op != OpKind::Zero) in.push_back(e);
    }
    return in;
  }

  /// Copy with one edge's operation replaced (inserted if absent).
  ArchGraph with_op(int src, int dst, OpKind op) const {
    std::vector<Edge> edges = edges_;
    auto it = std::find_if(edges.begin(), edges.end(),
                           [&](const Edge& e) { return e.src == src && e.dst == dst; });
    if (it == edges.end()) {
      edges.push_back(Edge{src, dst, op, {}});
    } else {
      it->op = op;
      it->label.clear();
    }
    return ArchGraph(num_nodes_, std::move(edges), std::max(num_nodes_, kDefaultMaxNodes));
  }

  /// Structural equality: same node count and same non-Zero edges.
  friend bool operator==(const ArchGraph& a, const ArchGraph& b) {
    if (a.num_nodes_ != b.num_nodes_) return false;
    auto live = [](const ArchGraph& g) {
      std::vector<Edge> out;
      for (const Edge& e : g.edges_)
        if (e.op != OpKind::Zero) out.push_back(e);
      return out;
    };
    return live(a) == live(b);
  }

 private:
  int num_nodes_ = 0;
  std::vector<Edge> edges_;
};

// ---------------------------------------------------------------------------
// Path enumeration
// ---------------------------------------------------------------------------

struct PathProfile {
  int num_paths = 0;
  std::vector<int> depths;  // one entry per path, enumeration order
  int source = 0;
  int sink = 0;

  long sum_depths() const noexcept {
    long s = 0;
    for (int d : depths) s += d;
    return s;
  }
};

/// Visits every simple input-to-output path over non-Zero edges, in
/// lexicographic order of node sequence. The callback receives the node
/// sequence and the number of Param edges on it.
template <typename Visitor>
void for_each_path(const ArchGraph& g, Visitor&& visit) {
  const int n = g.num_nodes();
  std::vector<std::vector<std::pair<int, int>>> out(static_cast<std::size_t>(n));
  for (const Edge& e : g.edges()) {
    if (e.op == OpKind::Zero) continue;
    out[static_cast<std::size_t>(e.src)].emplace_back(e.dst, depth_weight(e.op));
  }
  std::vector<int> nodes{g.input()};
  // Explicit DFS stack of (node, next out-edge index, depth so far).
  struct Frame {
    int node;
    std::size_t next;
    int depth;
  };
  std::vector<Frame> stack{{g.input(), 0, 0}};
  if (g.input() == g.output()) {
    visit(std::span<const int>(nodes), 0);
    return;
  }
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& succ = out[static_cast<std::size_t>(top.node)];
    if (top.next == succ.size()) {
      stack.pop_back();
      nodes.pop_back();
      continue;
    }
    auto [dst, w] = succ[top.next++];
    const int depth = top.depth + w;
    nodes.push_back(dst);
    if (dst == g.output()) {
      visit(std::span<const int>(nodes), depth);
      nodes.pop_back();
    } else {
      stack.push_back({dst, 0, depth});
    }
  }
}

inline PathProfile enumerate_paths(const ArchGraph& g) {
  PathProfile profile;
  profile.source = g.input();
  profile.sink = g.output();
  for_each_path(g, [&](std::span<const int>, int depth) { profile.depths.push_back(depth); });
  profile.num_paths = static_cast<int>(profile.depths.size());
  return profile;
}

// ---------------------------------------------------------------------------
// NAS-Bench-201 strings
// ---------------------------------------------------------------------------

namespace nb201 {

inline constexpr std::array<std::string_view, 5> kOpNames = {
    "none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"};

inline constexpr int kNumNodes = 4;
inline constexpr int kNumEdges = 6;
inline constexpr std::size_t kSpaceSize = 15625;  // 5^6

inline std::optional<OpKind> op_kind(std::string_view token) noexcept {
  if (token == "none") return OpKind::Zero;
  if (token == "skip_connect") return OpKind::Skip;
  if (token == "nor_conv_1x1" || token == "nor_conv_3x3") return OpKind::Param;
  if (token == "avg_pool_3x3") return OpKind::NonParam;
  return std::nullopt;
}

inline std::string_view default_token(OpKind op) noexcept {
  switch (op) {
    case OpKind::Zero: return "none";
    case OpKind::Skip: return "skip_connect";
    case OpKind::Param: return "nor_conv_3x3";
    case OpKind::NonParam: return "avg_pool_3x3";
  }
  return "none";
}

}  // namespace nb201

/// Parses `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|`. Each `+`-separated group
/// describes the incoming edges of the next node; token k in a group must
/// name source k. Cells with more than four nodes use the same grammar.
inline ArchGraph parse_nb201(std::string_view text) {
  auto malformed = [&](const std::string& why) {
    return Error(ErrorCode::MalformedString, why + " in '" + std::string(text) + "'");
  };
  if (text.empty()) throw malformed("empty architecture string");

  std::vector<Edge> edges;
  int dst = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t plus = text.find('+', pos);
    std::string_view group = text.substr(pos, plus == std::string_view::npos ? std::string_view::npos
                                                                             : plus - pos);
    ++dst;
    if (group.size() < 2 || group.front() != '|' || group.back() != '|') {
      throw malformed("node group " + std::to_string(dst) + " is not enclosed in '|'");
    }
    std::string_view body = group.substr(1, group.size() - 2);
    int expected_src = 0;
    std::size_t tpos = 0;
    while (true) {
      std::size_t bar = body.find('|', tpos);
      std::string_view token =
          body.substr(tpos, bar == std::string_view::npos ? std::string_view::npos : bar - tpos);
      std::size_t tilde = token.find('~');
      if (tilde == std::string_view::npos || tilde == 0 || tilde + 1 == token.size()) {
        throw malformed("token '" + std::string(token) + "' is not of the form op~index");
      }
      std::string_view name = token.substr(0, tilde);
      std::string_view index = token.substr(tilde + 1);
      int src = -1;
      auto [ptr, ec] = std::from_chars(index.data(), index.data() + index.size(), src);
      if (ec != std::errc() || ptr != index.data() + index.size()) {
        throw malformed("edge index '" + std::string(index) + "' is not an integer");
      }
      auto kind = nb201::op_kind(name);
      if (!kind) throw Error(ErrorCode::UnknownOp, "unknown operation '" + std::string(name) + "'");
      if (src != expected_src) {
        throw Error(ErrorCode::BadIndex, "node " + std::to_string(dst) + " token " +
                                             std::to_string(expected_src) + " names source " +
                                             std::to_string(src));
      }
      edges.push_back(Edge{src, dst, *kind, std::string(name)});
      ++expected_src;
      if (bar == std::string_view::npos) break;
      tpos = bar + 1;
    }
    if (expected_src != dst) {
      throw Error(ErrorCode::BadIndex, "node " + std::to_string(dst) + " lists " +
                                           std::to_string(expected_src) + " inputs, expected " +
                                           std::to_string(dst));
    }
    if (plus == std::string_view::npos) break;
    pos = plus + 1;
  }
  return ArchGraph(dst + 1, std::move(edges));
}

/// Inverse of parse_nb201. Missing pairs are written as `none`; edges
/// without an original token use the default token for their kind.
inline std::string to_nb201(const ArchGraph& g) {
  std::string out;
  for (int dst = 1; dst < g.num_nodes(); ++dst) {
    if (dst > 1) out += '+';
    out += '|';
    for (int src = 0; src < dst; ++src) {
      std::string_view token = "none";
      for (const Edge& e : g.edges()) {
        if (e.src == src && e.dst == dst) {
          token = e.label.empty() ? nb201::default_token(e.op) : std::string_view(e.label);
          break;
        }
      }
      out += token;
      out += '~';
      out += std::to_string(src);
      out += '|';
    }
  }
  return out;
}

/// The full 4-node NAS-Bench-201 cell space, in base-5 order over the
/// edges (0,1), (0,2), (1,2), (0,3), (1,3), (2,3) with the last edge
/// varying fastest.
class Nb201Space {
 public:
  static constexpr std::size_t size() noexcept { return nb201::kSpaceSize; }

  static std::string arch_string(std::size_t index) {
    std::array<std::size_t, nb201::kNumEdges> digit{};
    for (int k = nb201::kNumEdges - 1; k >= 0; --k) {
      digit[static_cast<std::size_t>(k)] = index % 5;
      index /= 5;
    }
    auto tok = [&](int k, int src) {
      return std::string(nb201::kOpNames[digit[static_cast<std::size_t>(k)]]) + "~" +
             std::to_string(src) + "|";
    };
    return "|" + tok(0, 0) + "+|" + tok(1, 0) + tok(2, 1) + "+|" + tok(3, 0) + tok(4, 1) +
           tok(5, 2);
  }

  struct Entry {
    std::string arch;
    ArchGraph graph;
  };

  class iterator {
   public:
    using value_type = Entry;
    using difference_type = std::ptrdiff_t;
    using iterator_category = std::input_iterator_tag;

    iterator() = default;
    explicit iterator(std::size_t index) : index_(index) {}

    Entry operator*() const {
      std::string s = arch_string(index_);
      ArchGraph g = parse_nb201(s);
      return Entry{std::move(s), std::move(g)};
    }
    iterator& operator++() {
      ++index_;
      return *this;
    }
    iterator operator++(int) {
      iterator tmp = *this;
      ++index_;
      return tmp;
    }
    friend bool operator==(const iterator& a, const iterator& b) noexcept {
      return a.index_ == b.index_;
    }

   private:
    std::size_t index_ = 0;
  };

  iterator begin() const { return iterator(0); }
  iterator end() const { return iterator(size()); }
};

// ---------------------------------------------------------------------------
// DAG DSL (JSON)
// ---------------------------------------------------------------------------

/// Parses a graph document:
///   {"num_nodes": 4, "edges": [{"src": 0, "dst": 1, "op": "param"}, ...]}
/// op is one of zero|skip|param|nonparam. Nodes are never created
/// implicitly.
inline ArchGraph parse_dag_dsl(std::string_view document, int max_nodes = kDefaultMaxNodes) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedDocument, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedDocument, "document must be an object");
  if (!doc.contains("num_nodes") || !doc["num_nodes"].is_number_integer()) {
    throw Error(ErrorCode::MalformedDocument, "missing integer field 'num_nodes'");
  }
  if (!doc.contains("edges") || !doc["edges"].is_array()) {
    throw Error(ErrorCode::MalformedDocument, "missing list field 'edges'");
  }
  const int num_nodes = doc["num_nodes"].get<int>();
  std::vector<Edge> edges;
  for (const json& item : doc["edges"]) {
    if (!item.is_object() || !item.contains("src") || !item.contains("dst") ||
        !item.contains("op") || !item["src"].is_number_integer() ||
        !item["dst"].is_number_integer() || !item["op"].is_string()) {
      throw Error(ErrorCode::MalformedDocument,
                  "edge entries need integer src/dst and string op: " + item.dump());
    }
    const std::string name = item["op"].get<std::string>();
    auto op = op_from_name(name);
    if (!op) throw Error(ErrorCode::UnknownOp, "unknown operation '" + name + "'");
    edges.push_back(Edge{item["src"].get<int>(), item["dst"].get<int>(), *op, {}});
  }
  // Range errors take precedence over ordering errors.
  for (const Edge& e : edges) {
    if (e.src < 0 || e.dst < 0 || e.src >= num_nodes || e.dst >= num_nodes) {
      throw Error(ErrorCode::NodeOutOfRange, "edge (" + std::to_string(e.src) + "," +
                                                 std::to_string(e.dst) + ") outside 0.." +
                                                 std::to_string(num_nodes - 1));
    }
  }
  return ArchGraph(num_nodes, std::move(edges), max_nodes);
}

inline std::string to_dag_dsl(const ArchGraph& g) {
  nlohmann::json doc;
  doc["num_nodes"] = g.num_nodes();
  doc["edges"] = nlohmann::json::array();
  for (const Edge& e : g.edges()) {
    doc["edges"].push_back({{"src", e.src}, {"dst", e.dst}, {"op", std::string(op_name(e.op))}});
  }
  return doc.dump();
}

// ---------------------------------------------------------------------------
// Reference cells
// ---------------------------------------------------------------------------

namespace builtin {

/// Sequential cell: three Param edges in a chain.
inline const char* const kDag1 =
    "|nor_conv_3x3~0|+|none~0|nor_conv_3x3~1|+|none~0|none~1|nor_conv_3x3~2|";
/// Parallel cell: skips 0->1->2, Param edges from every node into the output.
inline const char* const kDag2 =
    "|skip_connect~0|+|none~0|skip_connect~1|+|nor_conv_3x3~0|nor_conv_3x3~1|nor_conv_3x3~2|";
/// Mixed cell: Param on (0,1), (0,2), (2,3); skips elsewhere.
inline const char* const kDag3 =
    "|nor_conv_3x3~0|+|nor_conv_3x3~0|skip_connect~1|+|skip_connect~0|skip_connect~1|nor_conv_3x3~2|";

inline ArchGraph dag1() { return parse_nb201(kDag1); }
inline ArchGraph dag2() { return parse_nb201(kDag2); }
inline ArchGraph dag3() { return parse_nb201(kDag3); }

struct NamedGraph {
  std::string name;
  ArchGraph graph;
};

inline std::vector<NamedGraph> reference_dags() {
  return {{"DAG1", dag1()}, {"DAG2", dag2()}, {"DAG3", dag3()}};
}

}  // namespace builtin

}  // namespace dagconv
