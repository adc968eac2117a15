#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dagconv/arch_graph.hpp"
#include "dagconv/error.hpp"

namespace dagconv {

enum class Loss { Mse, CrossEntropy };

/// Plain: each Param edge emits sqrt(2/m) relu(W x).
/// Symmetric: the same, times a fixed random +-1 per output unit, drawn at
/// init and never trained. The sign leaves every second moment of an edge
/// unchanged but removes the cross-edge mean terms, so node sums follow the
/// variance-only kernel recursion.
enum class SignMode { Symmetric, Plain };

enum class DatasetKind { SyntheticGaussian, CsvFeatures };

struct SimConfig {
  int width = 256;
  double lr = 0.5;
  int batch_size = 128;
  int epochs = 30;
  std::uint64_t seed = 0;
  Loss loss = Loss::CrossEntropy;
  SignMode signs = SignMode::Symmetric;
  DatasetKind dataset = DatasetKind::SyntheticGaussian;

  void validate() const {
    if (width < 1) throw Error(ErrorCode::InvalidConfig, "width must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::InvalidConfig, "lr must be >= 0");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// Column-major sample matrix (dim x N) with unit-norm columns.
struct Dataset {
  Eigen::MatrixXd x;
  std::vector<int> labels;
  int num_classes = 0;

  int size() const noexcept { return static_cast<int>(x.cols()); }
  int dim() const noexcept { return static_cast<int>(x.rows()); }
};

struct BlobSpec {
  int num_classes = 10;
  int clusters_per_class = 1;
  int num_samples = 1000;
  int dim = 128;
  double noise = 1.0;  // isotropic std around unit-variance cluster centers
  std::uint64_t seed = 1234;
};

/// Gaussian blobs: standard-normal cluster centers, samples = center +
/// noise * N(0, I), then normalized to the unit sphere.
inline Dataset make_gaussian_blobs(const BlobSpec& blobs) {
  if (blobs.num_classes < 2 || blobs.clusters_per_class < 1 || blobs.num_samples < 1 || blobs.dim < 1) {
    throw Error(ErrorCode::InvalidConfig, "invalid blob parameters");
  }
  std::mt19937_64 rng(blobs.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int clusters = blobs.num_classes * blobs.clusters_per_class;
  Eigen::MatrixXd centers(blobs.dim, clusters);
  for (Eigen::Index k = 0; k < centers.size(); ++k) centers.data()[k] = normal(rng);
  std::uniform_int_distribution<int> pick(0, clusters - 1);

  Dataset data;
  data.num_classes = blobs.num_classes;
  data.x.resize(blobs.dim, blobs.num_samples);
  data.labels.resize(static_cast<std::size_t>(blobs.num_samples));
  for (int i = 0; i < blobs.num_samples; ++i) {
    const int c = pick(rng);
    data.labels[static_cast<std::size_t>(i)] = c % blobs.num_classes;
    for (int r = 0; r < blobs.dim; ++r) data.x(r, i) = centers(r, c) + blobs.noise * normal(rng);
    const double norm = data.x.col(i).norm();
    if (norm > 0.0) data.x.col(i) /= norm;
  }
  return data;
}

/// Rows of `label,feat0,feat1,...`; features must already have unit norm.
inline Dataset read_csv_features(std::istream& in, double norm_tolerance = 1e-6) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream s(line);
    long label = 0;
    if (!(s >> label) || label < 0) {
      throw Error(ErrorCode::UnparsableRow, "line " + std::to_string(lineno) + ": bad label");
    }
    std::vector<double> feats;
    double v = 0.0;
    while (s >> v) feats.push_back(v);
    if (!s.eof() || feats.empty()) {
      throw Error(ErrorCode::UnparsableRow, "line " + std::to_string(lineno) + ": bad features");
    }
    if (!rows.empty() && feats.size() != rows.front().size()) {
      throw Error(ErrorCode::DimensionMismatch, "line " + std::to_string(lineno) + ": has " +
                                                    std::to_string(feats.size()) + " features, expected " +
                                                    std::to_string(rows.front().size()));
    }
    double sq = 0.0;
    for (double f : feats) sq += f * f;
    if (std::abs(std::sqrt(sq) - 1.0) > norm_tolerance) {
      throw Error(ErrorCode::UnparsableRow, "line " + std::to_string(lineno) + ": features are not unit norm");
    }
    rows.push_back(std::move(feats));
    labels.push_back(static_cast<int>(label));
  }
  if (rows.empty()) throw Error(ErrorCode::UnparsableRow, "no samples");
  Dataset data;
  data.x.resize(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t r = 0; r < rows[i].size(); ++r) {
      data.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = rows[i][r];
    }
  }
  data.labels = std::move(labels);
  data.num_classes = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  if (data.num_classes < 2) data.num_classes = 2;
  return data;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Fully-connected network whose wiring mirrors an ArchGraph. Every node is
/// an m-dimensional feature map that sums its incoming edges; node 0 is the
/// raw input, zero-padded to m dimensions where a skip leaves it.
class DagNet {
 public:
  struct ParamEdge {
    int src = 0;
    int dst = 0;
    Eigen::MatrixXd weight;  // m x fan_in, entries N(0, 1)
    Eigen::VectorXd sign;    // per output unit, +-1 or all ones
  };

  struct Activations {
    std::vector<Eigen::MatrixXd> nodes;  // nodes[0] is the raw input
    std::vector<Eigen::MatrixXd> pre;    // W x for each Param edge
  };

  struct Gradients {
    std::vector<Eigen::MatrixXd> weight;
    Eigen::MatrixXd readout;
  };

  DagNet(const ArchGraph& g, int input_dim, int num_classes, const SimConfig& cfg)
      : graph_(g), width_(cfg.width), input_dim_(input_dim), num_classes_(num_classes) {
    cfg.validate();
    if (enumerate_paths(g).num_paths == 0) {
      throw Error(ErrorCode::Unreachable, "output node is unreachable; nothing to train");
    }
    if (input_dim < 1 || num_classes < 1) {
      throw Error(ErrorCode::DimensionMismatch, "input_dim and num_classes must be positive");
    }
    for (const Edge& e : g.edges()) {
      if (e.src == 0 && (e.op == OpKind::Skip || e.op == OpKind::NonParam) && input_dim > width_) {
        throw Error(ErrorCode::DimensionMismatch, "skip from the input needs input_dim <= width (" +
                                                      std::to_string(input_dim) + " > " +
                                                      std::to_string(width_) + ")");
      }
    }
    scale_ = std::sqrt(2.0 / static_cast<double>(width_));

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    for (const Edge& e : g.edges()) {
      if (e.op != OpKind::Param) continue;
      ParamEdge p;
      p.src = e.src;
      p.dst = e.dst;
      const int fan_in = e.src == 0 ? input_dim_ : width_;
      p.weight.resize(width_, fan_in);
      for (Eigen::Index k = 0; k < p.weight.size(); ++k) p.weight.data()[k] = normal(rng);
      p.sign = Eigen::VectorXd::Ones(width_);
      if (cfg.signs == SignMode::Symmetric) {
        for (Eigen::Index k = 0; k < p.sign.size(); ++k) p.sign[k] = coin(rng) ? 1.0 : -1.0;
      }
      params_.push_back(std::move(p));
    }
    readout_.resize(num_classes_, width_);
    for (Eigen::Index k = 0; k < readout_.size(); ++k) readout_.data()[k] = normal(rng);
  }

  const ArchGraph& graph() const noexcept { return graph_; }
  int width() const noexcept { return width_; }
  int input_dim() const noexcept { return input_dim_; }
  int num_classes() const noexcept { return num_classes_; }

  std::span<const ParamEdge> param_edges() const noexcept { return params_; }
  std::span<ParamEdge> param_edges() noexcept { return params_; }
  const Eigen::MatrixXd& readout() const noexcept { return readout_; }
  Eigen::MatrixXd& readout() noexcept { return readout_; }

  std::size_t num_parameters() const noexcept {
    std::size_t n = static_cast<std::size_t>(readout_.size());
    for (const auto& p : params_) n += static_cast<std::size_t>(p.weight.size());
    return n;
  }

  /// Forward pass for a batch of column samples (input_dim x B).
  Activations forward(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim_) {
      throw Error(ErrorCode::DimensionMismatch, "batch has " + std::to_string(x.rows()) +
                                                    " features, network expects " +
                                                    std::to_string(input_dim_));
    }
    const Eigen::Index batch = x.cols();
    Activations act;
    act.nodes.resize(static_cast<std::size_t>(graph_.num_nodes()));
    act.nodes[0] = x;
    for (int t = 1; t < graph_.num_nodes(); ++t) act.nodes[static_cast<std::size_t>(t)].setZero(width_, batch);
    act.pre.resize(params_.size());
    std::size_t pi = 0;
    // Edges are sorted by source, so a node is complete before it is read.
    for (const Edge& e : graph_.edges()) {
      auto& dst = act.nodes[static_cast<std::size_t>(e.dst)];
      const auto& src = act.nodes[static_cast<std::size_t>(e.src)];
      switch (e.op) {
        case OpKind::Zero:
          break;
        case OpKind::Skip:
        case OpKind::NonParam:
          if (e.src == 0) dst.topRows(input_dim_) += src;
          else dst += src;
          break;
        case OpKind::Param: {
          const ParamEdge& p = params_[pi];
          act.pre[pi].noalias() = p.weight * src;
          dst.noalias() += scale_ * (p.sign.asDiagonal() * act.pre[pi].cwiseMax(0.0));
          ++pi;
          break;
        }
      }
    }
    return act;
  }

  /// Output-node features (m x B).
  Eigen::MatrixXd features(const Eigen::MatrixXd& x) const { return forward(x).nodes.back(); }

  /// Logits (C x B).
  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const { return readout_ * forward(x).nodes.back(); }

  /// Mean loss over the batch; fills `grads` when non-null.
  double loss(const Eigen::MatrixXd& x, std::span<const int> labels, Loss kind,
              Gradients* grads = nullptr) const {
    const Activations act = forward(x);
    const Eigen::Index batch = x.cols();
    if (static_cast<Eigen::Index>(labels.size()) != batch) {
      throw Error(ErrorCode::DimensionMismatch, "label count does not match batch size");
    }
    const Eigen::MatrixXd u = readout_ * act.nodes.back();
    Eigen::MatrixXd residual(u.rows(), u.cols());
    double total = 0.0;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const int y = labels[static_cast<std::size_t>(b)];
      if (kind == Loss::Mse) {
        residual.col(b) = u.col(b);
        residual(y, b) -= 1.0;
        total += 0.5 * residual.col(b).squaredNorm();
      } else {
        const double top = u.col(b).maxCoeff();
        const Eigen::VectorXd e = (u.col(b).array() - top).exp().matrix();
        const double z = e.sum();
        residual.col(b) = e / z;
        residual(y, b) -= 1.0;
        total += std::log(z) - (u(y, b) - top);
      }
    }
    const double inv = 1.0 / static_cast<double>(batch);
    if (grads) backward(act, residual * inv, *grads);
    return total * inv;
  }

  void apply(const Gradients& g, double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].weight.noalias() -= lr * g.weight[i];
    readout_.noalias() -= lr * g.readout;
  }

 private:
  void backward(const Activations& act, const Eigen::MatrixXd& dlogits, Gradients& out) const {
    const std::size_t n = static_cast<std::size_t>(graph_.num_nodes());
    std::vector<Eigen::MatrixXd> g(n);
    const Eigen::Index batch = dlogits.cols();
    for (std::size_t t = 1; t < n; ++t) g[t].setZero(width_, batch);
    out.readout.noalias() = dlogits * act.nodes.back().transpose();
    g[n - 1].noalias() = readout_.transpose() * dlogits;
    out.weight.resize(params_.size());

    // Reverse (src, dst) order: every edge leaving a node is handled before
    // that node's gradient is propagated further back.
    auto edges = graph_.edges();
    std::size_t pi = params_.size();
    for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
      const Edge& e = *it;
      const auto& gd = g[static_cast<std::size_t>(e.dst)];
      switch (e.op) {
        case OpKind::Zero:
          break;
        case OpKind::Skip:
        case OpKind::NonParam:
          if (e.src != 0) g[static_cast<std::size_t>(e.src)] += gd;
          break;
        case OpKind::Param: {
          --pi;
          const ParamEdge& p = params_[pi];
          const Eigen::MatrixXd gz =
              (scale_ * (p.sign.asDiagonal() * gd)).cwiseProduct(
                  (act.pre[pi].array() > 0.0).cast<double>().matrix());
          out.weight[pi].noalias() = gz * act.nodes[static_cast<std::size_t>(e.src)].transpose();
          if (e.src != 0) g[static_cast<std::size_t>(e.src)].noalias() += p.weight.transpose() * gz;
          break;
        }
      }
    }
  }

  ArchGraph graph_;
  int width_ = 0;
  int input_dim_ = 0;
  int num_classes_ = 0;
  double scale_ = 1.0;
  std::vector<ParamEdge> params_;
  Eigen::MatrixXd readout_;
};

inline DagNet build_net(const ArchGraph& g, int input_dim, int num_classes, const SimConfig& cfg) {
  return DagNet(g, input_dim, num_classes, cfg);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochStats {
  int epoch = 0;  // 0 = before any update
  double loss = 0.0;
  double accuracy = 0.0;  // fraction in [0, 1]
};

struct RunTrace {
  std::vector<EpochStats> epochs;

  /// First epoch whose training accuracy reaches tau.
  std::optional<int> epochs_to_threshold(double tau) const {
    for (const auto& e : epochs) {
      if (e.accuracy >= tau) return e.epoch;
    }
    return std::nullopt;
  }

  /// Fraction of epoch-to-epoch steps whose loss did not increase; 1 with no steps.
  double nonincreasing_fraction() const {
    if (epochs.size() < 2) return 1.0;
    std::size_t ok = 0;
    for (std::size_t i = 1; i < epochs.size(); ++i) ok += epochs[i].loss <= epochs[i - 1].loss;
    return static_cast<double>(ok) / static_cast<double>(epochs.size() - 1);
  }

  double final_accuracy() const { return epochs.empty() ? 0.0 : epochs.back().accuracy; }

  void write_csv(std::ostream& out) const {
    const auto old = out.precision(10);
    out << "epoch,loss,accuracy\n";
    for (const auto& e : epochs) out << e.epoch << ',' << e.loss << ',' << e.accuracy << '\n';
    out.precision(old);
  }
};

/// Thrown when the loss stops being finite; carries the trace so far.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, RunTrace trace)
      : Error(ErrorCode::Divergence, message), trace_(std::move(trace)) {}
  const RunTrace& trace() const noexcept { return trace_; }

 private:
  RunTrace trace_;
};

inline EpochStats evaluate(const DagNet& net, const Dataset& data, Loss kind, int epoch) {
  constexpr int kChunk = 512;
  double loss_sum = 0.0;
  long correct = 0;
  for (int start = 0; start < data.size(); start += kChunk) {
    const int len = std::min(kChunk, data.size() - start);
    const Eigen::MatrixXd x = data.x.middleCols(start, len);
    std::span<const int> y(data.labels.data() + start, static_cast<std::size_t>(len));
    loss_sum += net.loss(x, y, kind) * len;
    const Eigen::MatrixXd u = net.logits(x);
    for (int b = 0; b < len; ++b) {
      Eigen::Index arg = 0;
      u.col(b).maxCoeff(&arg);
      if (arg == y[static_cast<std::size_t>(b)]) ++correct;
    }
  }
  return {epoch, loss_sum / data.size(), static_cast<double>(correct) / data.size()};
}

/// Plain mini-batch SGD: no momentum, weight decay or schedule. The batch
/// order is a per-epoch shuffle driven by cfg.seed.
inline RunTrace train(DagNet& net, const Dataset& data, const SimConfig& cfg) {
  cfg.validate();
  if (data.dim() != net.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "dataset dimension does not match the network");
  }
  for (int y : data.labels) {
    if (y < 0 || y >= net.num_classes()) {
      throw Error(ErrorCode::DimensionMismatch, "label " + std::to_string(y) + " out of range");
    }
  }
  RunTrace trace;
  trace.epochs.push_back(evaluate(net, data, cfg.loss, 0));
  std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  DagNet::Gradients grads;
  Eigen::MatrixXd xb;
  std::vector<int> yb;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (int start = 0; start < data.size(); start += cfg.batch_size) {
      const int len = std::min(cfg.batch_size, data.size() - start);
      xb.resize(data.dim(), len);
      yb.resize(static_cast<std::size_t>(len));
      for (int b = 0; b < len; ++b) {
        const int idx = order[static_cast<std::size_t>(start + b)];
        xb.col(b) = data.x.col(idx);
        yb[static_cast<std::size_t>(b)] = data.labels[static_cast<std::size_t>(idx)];
      }
      const double batch_loss = net.loss(xb, yb, cfg.loss, &grads);
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch), trace);
      }
      if (cfg.lr > 0.0) net.apply(grads, cfg.lr);
    }
    EpochStats stats = evaluate(net, data, cfg.loss, epoch);
    if (!std::isfinite(stats.loss)) {
      throw DivergenceError("non-finite loss after epoch " + std::to_string(epoch), trace);
    }
    trace.epochs.push_back(stats);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Comparison across graphs and seeds
// ---------------------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  RunTrace trace;
  std::optional<int> epochs_to_threshold;
  std::string error;  // empty on success
};

struct ComparisonRow {
  std::string name;
  std::optional<double> median_epochs;  // none if the median run never reached the threshold
  double median_final_accuracy = 0.0;
  std::vector<SeedRun> runs;
};

namespace detail {
inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

/// Trains every graph under every seed on the same data and ranks graphs by
/// median epochs-to-threshold (never reached counts as infinity), breaking
/// ties by higher median final accuracy. Failed runs are recorded and
/// count as never reaching the threshold.
inline std::vector<ComparisonRow> compare_dags(const std::vector<builtin::NamedGraph>& graphs,
                                               const Dataset& data, const SimConfig& cfg,
                                               const std::vector<std::uint64_t>& seeds,
                                               double threshold = 0.8) {
  if (graphs.size() < 2) throw Error(ErrorCode::InvalidConfig, "need at least two graphs to compare");
  if (seeds.empty()) throw Error(ErrorCode::InvalidConfig, "need at least one seed");
  std::vector<ComparisonRow> rows;
  for (const auto& [name, graph] : graphs) {
    ComparisonRow row;
    row.name = name;
    std::vector<double> epochs, finals;
    for (std::uint64_t seed : seeds) {
      SimConfig run_cfg = cfg;
      run_cfg.seed = seed;
      SeedRun run;
      run.seed = seed;
      try {
        DagNet net = build_net(graph, data.dim(), data.num_classes, run_cfg);
        run.trace = train(net, data, run_cfg);
        run.epochs_to_threshold = run.trace.epochs_to_threshold(threshold);
      } catch (const DivergenceError& e) {
        run.trace = e.trace();
        run.error = e.what();
      } catch (const Error& e) {
        run.error = e.what();
      }
      epochs.push_back(run.epochs_to_threshold ? *run.epochs_to_threshold
                                               : std::numeric_limits<double>::infinity());
      finals.push_back(run.error.empty() ? run.trace.final_accuracy() : 0.0);
      row.runs.push_back(std::move(run));
    }
    const double med = detail::median(epochs);
    if (std::isfinite(med)) row.median_epochs = med;
    row.median_final_accuracy = detail::median(finals);
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    const double ea = a.median_epochs.value_or(std::numeric_limits<double>::infinity());
    const double eb = b.median_epochs.value_or(std::numeric_limits<double>::infinity());
    if (ea != eb) return ea < eb;
    return a.median_final_accuracy > b.median_final_accuracy;
  });
  return rows;
}

}  // namespace dagconv
