#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dagconv/arch_graph.hpp"
#include "dagconv/error.hpp"

namespace dagconv {

// ---------------------------------------------------------------------------
// ReLU correlation map
// ---------------------------------------------------------------------------

inline constexpr double kCorrelationClamp = 1e-12;

namespace detail {
inline double clamp_correlation(double c) {
  if (!(std::abs(c) <= 1.0 + kCorrelationClamp)) {
    throw Error(ErrorCode::DomainError, "correlation " + std::to_string(c) + " outside [-1, 1]");
  }
  return std::clamp(c, -1.0, 1.0);
}
}  // namespace detail

/// Normalized arc-cosine kernel of degree one (ReLU with c_sigma = 2):
///   h(c) = (2c asin c + 2 sqrt(1 - c^2) + pi c) / (2 pi).
/// Maps [-1, 1] onto [0, 1] with h(1) = 1 and h(0) = 1/pi.
inline double relu_h(double c) {
  c = detail::clamp_correlation(c);
  using std::numbers::pi;
  return (2.0 * c * std::asin(c) + 2.0 * std::sqrt(1.0 - c * c) + pi * c) / (2.0 * pi);
}

/// h'(c) = asin(c) / pi + 1/2.
inline double relu_h_prime(double c) {
  c = detail::clamp_correlation(c);
  return std::asin(c) / std::numbers::pi + 0.5;
}

/// d-fold composition of h; h^0 is the identity.
inline double relu_h_power(double c, int times) {
  for (int i = 0; i < times; ++i) c = relu_h(c);
  return c;
}

// ---------------------------------------------------------------------------
// Pairwise state propagation
// ---------------------------------------------------------------------------

/// Kernel entries for one input pair (i, j) at some node.
struct PairKernelState {
  double k_ii = 0.0;
  double k_jj = 0.0;
  double k_ij = 0.0;

  PairKernelState& operator+=(const PairKernelState& o) noexcept {
    k_ii += o.k_ii;
    k_jj += o.k_jj;
    k_ij += o.k_ij;
    return *this;
  }
  friend PairKernelState operator+(PairKernelState a, const PairKernelState& b) noexcept {
    return a += b;
  }
  friend PairKernelState operator*(double s, const PairKernelState& a) noexcept {
    return {s * a.k_ii, s * a.k_jj, s * a.k_ij};
  }

  double correlation() const {
    const double norm = std::sqrt(k_ii * k_jj);
    return norm > 0.0 ? k_ij / norm : 0.0;
  }
};

inline PairKernelState propagate_edge(const PairKernelState& s, OpKind op) {
  switch (op) {
    case OpKind::Zero:
      return {};
    case OpKind::Skip:
    case OpKind::NonParam:  // pooling has no kernel map of its own; treated as identity
      return s;
    case OpKind::Param: {
      const double norm = std::sqrt(s.k_ii * s.k_jj);
      if (norm == 0.0) return {s.k_ii, s.k_jj, 0.0};
      return {s.k_ii, s.k_jj, relu_h(s.k_ij / norm) * norm};
    }
  }
  return {};
}

/// Node-by-node sweep in index order; each node sums the propagated states
/// of its incoming edges. Returns the output-node state. No range check on
/// the input correlation beyond Cauchy-Schwarz.
inline PairKernelState propagate_state(const ArchGraph& g, const PairKernelState& input) {
  std::vector<PairKernelState> node(static_cast<std::size_t>(g.num_nodes()));
  node[0] = input;
  for (const Edge& e : g.edges()) {
    // Edges are sorted by source, so node[e.src] is final once any edge
    // leaving it is reached.
    if (e.op == OpKind::Zero) continue;
    node[static_cast<std::size_t>(e.dst)] += propagate_edge(node[static_cast<std::size_t>(e.src)], e.op);
  }
  return node.back();
}

/// Output state for unit-variance inputs with correlation k0 in [0, 1).
inline PairKernelState propagate_graph(const ArchGraph& g, double k0_ij) {
  if (!(k0_ij >= 0.0 && k0_ij < 1.0)) {
    throw Error(ErrorCode::DomainError, "k0 must lie in [0, 1), got " + std::to_string(k0_ij));
  }
  PairKernelState out = propagate_state(g, {1.0, 1.0, k0_ij});
  if (out.k_ii == 0.0 && out.k_jj == 0.0) {
    throw Error(ErrorCode::Unreachable, "output node receives no signal");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eigenvalue bounds
// ---------------------------------------------------------------------------

struct EigBound {
  double lambda_upper = 0.0;
  std::pair<int, int> pair_index{0, 1};
};

/// Smallest eigenvalue of [[a, c], [c, b]].
inline double min_eigenvalue_2x2(double a, double b, double c) {
  return 0.5 * (a + b) - std::hypot(0.5 * (a - b), c);
}

inline EigBound lambda_bound(const PairKernelState& s) {
  return EigBound{min_eigenvalue_2x2(s.k_ii, s.k_jj, s.k_ij), {0, 1}};
}

/// Minimum over all 2x2 principal blocks of a symmetric matrix. This upper
/// bounds its smallest eigenvalue (Cauchy interlacing).
inline EigBound pairwise_bound(const Eigen::MatrixXd& k) {
  EigBound best{std::numeric_limits<double>::infinity(), {0, 1}};
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < k.cols(); ++j) {
      const double v = min_eigenvalue_2x2(k(i, i), k(j, j), k(i, j));
      if (v < best.lambda_upper) best = {v, {static_cast<int>(i), static_cast<int>(j)}};
    }
  }
  return best;
}

inline double min_eigenvalue(const Eigen::MatrixXd& k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::InvariantViolation, "symmetric eigensolver did not converge");
  }
  return solver.eigenvalues().minCoeff();
}

/// P - sum_p h^{d_p}(k0): the path-count rule, taken literally. It differs
/// from exact propagation whenever several paths merge before their last
/// Param edge.
inline double simplified_rule_bound(const PathProfile& profile, double k0_ij) {
  if (profile.num_paths <= 0) throw Error(ErrorCode::NoPath, "no input-to-output path");
  if (!(k0_ij >= 0.0 && k0_ij < 1.0)) {
    throw Error(ErrorCode::DomainError, "k0 must lie in [0, 1), got " + std::to_string(k0_ij));
  }
  double sum = 0.0;
  for (int d : profile.depths) sum += relu_h_power(k0_ij, d);
  return static_cast<double>(profile.num_paths) - sum;
}

// ---------------------------------------------------------------------------
// Full Gram matrix
// ---------------------------------------------------------------------------

inline constexpr double kGramTolerance = 1e-9;

/// Output-node kernel for every input pair. Expects a symmetric Gram matrix
/// with unit diagonal and off-diagonal entries strictly inside (-1, 1).
inline Eigen::MatrixXd full_kernel(const ArchGraph& g, const Eigen::MatrixXd& gram0) {
  const Eigen::Index n = gram0.rows();
  if (gram0.cols() != n || n < 2) {
    throw Error(ErrorCode::BadGram, "expected a square matrix with N >= 2");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(gram0(i, i) - 1.0) > kGramTolerance) {
      throw Error(ErrorCode::BadGram, "diagonal entry " + std::to_string(i) + " is not 1");
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(gram0(i, j) - gram0(j, i)) > kGramTolerance) {
        throw Error(ErrorCode::BadGram, "matrix is not symmetric");
      }
      if (!(std::abs(gram0(i, j)) < 1.0)) {
        throw Error(ErrorCode::BadGram, "entry (" + std::to_string(i) + "," + std::to_string(j) +
                                            ") has |value| >= 1 (parallel inputs)");
      }
    }
  }
  if (enumerate_paths(g).num_paths == 0) {
    throw Error(ErrorCode::Unreachable, "output node receives no signal");
  }
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // k_ij = 1 on the diagonal: h(1) = 1, so this is the variance sweep.
    out(i, i) = propagate_state(g, {1.0, 1.0, 1.0}).k_ij;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      out(i, j) = out(j, i) = propagate_state(g, {1.0, 1.0, gram0(i, j)}).k_ij;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference-cell ordering
// ---------------------------------------------------------------------------

struct OrderingRow {
  double k0 = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;

  bool strictly_ordered() const noexcept { return lambda1 < lambda2 && lambda2 < lambda3; }
};

/// Exact-propagation bounds of the three reference cells at each k0.
inline std::vector<OrderingRow> ordering_rows(const std::vector<double>& k0_grid) {
  const ArchGraph d1 = builtin::dag1(), d2 = builtin::dag2(), d3 = builtin::dag3();
  std::vector<OrderingRow> rows;
  rows.reserve(k0_grid.size());
  for (double k0 : k0_grid) {
    rows.push_back({k0, lambda_bound(propagate_graph(d1, k0)).lambda_upper,
                    lambda_bound(propagate_graph(d2, k0)).lambda_upper,
                    lambda_bound(propagate_graph(d3, k0)).lambda_upper});
  }
  return rows;
}

/// As ordering_rows, but throws OrderingViolation unless
/// lambda1 < lambda2 < lambda3 at every grid point.
inline std::vector<OrderingRow> ordering_report(const std::vector<double>& k0_grid) {
  auto rows = ordering_rows(k0_grid);
  for (const auto& r : rows) {
    if (!r.strictly_ordered()) {
      throw Error(ErrorCode::OrderingViolation,
                  "bounds not strictly ordered at k0=" + std::to_string(r.k0));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Dense matrix text format: first line N, then N rows of N numbers.
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd read_matrix(std::istream& in) {
  long n = 0;
  if (!(in >> n) || n <= 0) throw Error(ErrorCode::BadGram, "matrix must start with a positive size");
  Eigen::MatrixXd m(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      if (!(in >> m(i, j))) {
        throw Error(ErrorCode::BadGram, "matrix truncated at row " + std::to_string(i));
      }
    }
  }
  return m;
}

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  const auto old = out.precision(17);
  out << m.rows() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << m(i, j);
    }
    out << '\n';
  }
  out.precision(old);
}

}  // namespace dagconv
