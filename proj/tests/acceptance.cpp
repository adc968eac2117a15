// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dagconv/arch_graph.hpp"
#include "dagconv/nngp.hpp"
#include "dagconv/stats.hpp"
#include "dagconv/topo_metrics.hpp"
#include "dagconv/train_sim.hpp"

using namespace dagconv;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> grid100() {
  std::vector<double> g;
  for (int i = 0; i < 100; ++i) g.push_back(i / 100.0);
  return g;
}

Eigen::MatrixXd unit_columns(int dim, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd x(dim, n);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = nd(rng);
  x.colwise().normalize();
  return x;
}

// ---------------------------------------------------------------------------

Outcome lambda_ordering() {
  const auto t0 = Clock::now();
  std::size_t ok = 0;
  const auto rows = ordering_rows(grid100());
  for (const auto& r : rows) ok += r.strictly_ordered();
  const double secs = seconds_since(t0);
  return {ok == rows.size() && secs < 1.0,
          fmt("%zu/%zu grid points strictly ordered, %.4f s", ok, rows.size(), secs)};
}

Outcome closed_forms() {
  double worst = 0.0;
  for (double x : grid100()) {
    const double h = relu_h(x), hh = relu_h(h), hhh = relu_h(hh);
    worst = std::max(worst, std::abs(lambda_bound(propagate_graph(builtin::dag1(), x)).lambda_upper - (1 - hhh)));
    worst = std::max(worst, std::abs(lambda_bound(propagate_graph(builtin::dag2(), x)).lambda_upper - 3 * (1 - h)));
    worst = std::max(worst, std::abs(lambda_bound(propagate_graph(builtin::dag3(), x)).lambda_upper -
                                     (4 - (x + h + 2 * hh))));
  }
  return {worst <= 1e-12, fmt("max abs deviation %.3g", worst)};
}

Outcome h_oracle() {
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> nd(0.0, 1.0);
  constexpr int kSamples = 10'000'000;
  double worst = 0.0;
  for (double c : {0.0, 0.25, 0.5, 0.75, 0.95}) {
    const double s = std::sqrt(1.0 - c * c);
    double acc = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const double u = nd(rng), z = nd(rng);
      const double v = c * u + s * z;
      if (u > 0 && v > 0) acc += u * v;
    }
    worst = std::max(worst, std::abs(relu_h(c) - 2.0 * acc / kSamples));
  }
  const double e0 = std::abs(relu_h(0.0) - 1.0 / std::numbers::pi);
  const double e1 = std::abs(relu_h(1.0) - 1.0);
  return {worst <= 3e-3 && e0 <= 1e-12 && e1 <= 1e-12,
          fmt("max Monte-Carlo gap %.2e; |h(0)-1/pi|=%.1e, |h(1)-1|=%.1e", worst, e0, e1)};
}

Outcome cauchy_interlace() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(2, 10);
  std::normal_distribution<double> nd(0.0, 1.0);
  int held = 0;
  double worst = -1e300;
  for (int t = 0; t < 200; ++t) {
    const int n = size(rng);
    const int rank = std::uniform_int_distribution<int>(1, n + 2)(rng);
    Eigen::MatrixXd a(n, rank);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = nd(rng);
    const Eigen::MatrixXd k = a * a.transpose();
    const double gap = min_eigenvalue(k) - pairwise_bound(k).lambda_upper;
    worst = std::max(worst, gap);
    held += gap <= 1e-10;
  }
  return {held == 200, fmt("%d/200 matrices satisfy the bound; max(lambda_min - bound)=%.2e", held, worst)};
}

Outcome full_rank() {
  std::mt19937_64 rng(5);
  double smallest = 1e300;
  int ok = 0, total = 0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd x = unit_columns(16, 8, rng);
    const Eigen::MatrixXd g0 = x.transpose() * x;
    for (const auto& [name, g] : builtin::reference_dags()) {
      const double lmin = min_eigenvalue(full_kernel(g, g0));
      smallest = std::min(smallest, lmin);
      ok += lmin > 1e-8;
      ++total;
    }
  }
  return {ok == total, fmt("%d/%d kernels positive definite; smallest lambda_min %.4g", ok, total, smallest)};
}

Outcome metrics_sweep() {
  const auto t0 = Clock::now();
  ExtremesAccumulator all, conv3;
  for (const auto& e : Nb201Space{}) {
    all.add(e.graph);
    if (e.graph.count(OpKind::Param) == 3) conv3.add(e.graph);
  }
  const double secs = seconds_since(t0);
  const TopoMetrics m1 = compute_metrics(builtin::dag1()), m2 = compute_metrics(builtin::dag2()),
                    m3 = compute_metrics(builtin::dag3());
  const bool exact = m1.eff_depth == 3.0 && std::abs(m1.eff_width - 1.0 / 3.0) < 1e-15 && m2.eff_depth == 1.0 &&
                     m2.eff_width == 3.0 && m3.eff_depth == 1.25 && m3.eff_width == 2.4;
  const SpaceExtremes ea = finish(all), ec = finish(conv3);
  auto near = [](const SpaceExtremes& e) {
    return std::abs(e.config.center_depth - 1.6) <= 0.1 && std::abs(e.config.center_width - 2.2) <= 0.1;
  };
  return {secs < 10.0 && exact && (near(ea) || near(ec)),
          fmt("sweep %.3f s; reference metrics exact=%s; center full=(%.4f, %.4f) 3-conv=(%.4f, %.4f)", secs,
              exact ? "yes" : "no", ea.config.center_depth, ea.config.center_width, ec.config.center_depth,
              ec.config.center_width)};
}

Outcome filter_behavior() {
  FilterConfig cfg = nb201_reference_config();
  const bool dag1_dropped = !filter_keep(compute_metrics(parse_nb201(builtin::kDag1)), cfg);
  const auto t0 = Clock::now();
  std::vector<TopoMetrics> metrics;
  std::vector<bool> valid;
  for (const auto& e : Nb201Space{}) {
    try {
      metrics.push_back(compute_metrics(e.graph));
      valid.push_back(true);
    } catch (const Error&) {
      metrics.emplace_back();
      valid.push_back(false);
    }
  }
  const double secs = seconds_since(t0);
  std::vector<std::size_t> counts;
  bool nested = true;
  std::vector<bool> prev(metrics.size(), true);
  for (double f : {1.0, 0.75, 0.5, 0.25}) {
    cfg.keep_fraction = f;
    std::size_t n = 0;
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      const bool k = valid[i] && filter_keep(metrics[i], cfg);
      if (k && !prev[i]) nested = false;
      prev[i] = k;
      n += k;
    }
    counts.push_back(n);
  }
  return {dag1_dropped && nested && secs < 10.0,
          fmt("DAG#1 dropped=%s; kept at f=1,3/4,1/2,1/4: %zu, %zu, %zu, %zu; nested=%s; run %.3f s",
              dag1_dropped ? "yes" : "no", counts[0], counts[1], counts[2], counts[3], nested ? "yes" : "no", secs)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd x = unit_columns(5, 3, rng);
  const std::vector<int> y = {0, 2, 1};
  double worst = 0.0;
  for (const auto& [name, g] : builtin::reference_dags()) {
    for (Loss loss : {Loss::Mse, Loss::CrossEntropy}) {
      SimConfig cfg;
      cfg.width = 8;
      cfg.seed = 3;
      DagNet net(g, 5, 3, cfg);
      DagNet::Gradients grads;
      net.loss(x, y, loss, &grads);
      auto check = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& analytic) {
        for (Eigen::Index k = 0; k < p.size(); ++k) {
          const double keep = p.data()[k];
          p.data()[k] = keep + 1e-4;
          const double up = net.loss(x, y, loss);
          p.data()[k] = keep - 1e-4;
          const double down = net.loss(x, y, loss);
          p.data()[k] = keep;
          const double fd = (up - down) / 2e-4, a = analytic.data()[k];
          const double scale = std::max({std::abs(a), std::abs(fd), 1e-5});
          worst = std::max(worst, std::abs(a - fd) / scale);
        }
      };
      for (std::size_t i = 0; i < net.param_edges().size(); ++i) check(net.param_edges()[i].weight, grads.weight[i]);
      check(net.readout(), grads.readout);
    }
  }
  return {worst <= 1e-3, fmt("max relative gap %.2e over DAG#1/2/3, MSE and cross-entropy", worst)};
}

Outcome kernel_consistency() {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = unit_columns(32, 4, rng);
  const Eigen::MatrixXd g0 = x.transpose() * x;
  std::string detail;
  double worst = 0.0;
  for (const auto& [name, g] : builtin::reference_dags()) {
    SimConfig cfg;
    cfg.width = 512;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(4, 4);
    for (int s = 0; s < 200; ++s) {
      cfg.seed = static_cast<std::uint64_t>(s + 1);
      const DagNet net(g, 32, 2, cfg);
      const Eigen::MatrixXd f = net.features(x);
      acc += f.transpose() * f;
    }
    acc /= 200.0;
    const Eigen::MatrixXd k = full_kernel(g, g0);
    const double err = ((acc - k).array().abs() / k.array().abs()).maxCoeff();
    worst = std::max(worst, err);
    detail += fmt("%s %.2f%% ", name.c_str(), 100 * err);
  }
  return {worst <= 0.05, "max relative error " + detail};
}

Outcome training_speed_ordering() {
  const auto t0 = Clock::now();
  BlobSpec blobs;  // 10 classes, 1000 unit-norm samples in 128 dims
  const Dataset data = make_gaussian_blobs(blobs);
  SimConfig cfg;  // width 256, 30 epochs
  const auto rows = compare_dags(builtin::reference_dags(), data, cfg, {1, 2, 3, 4, 5}, 0.8);
  const double secs = seconds_since(t0);
  auto median_of = [&](const std::string& name) {
    for (const auto& r : rows) {
      if (r.name == name) return r.median_epochs.value_or(std::numeric_limits<double>::infinity());
    }
    return std::numeric_limits<double>::infinity();
  };
  const double e1 = median_of("DAG1"), e2 = median_of("DAG2"), e3 = median_of("DAG3");
  return {std::isfinite(e1) && e3 <= e2 && e2 <= e1 && secs < 600.0,
          fmt("median epochs to 80%%: DAG1=%g DAG2=%g DAG3=%g; %.1f s for 15 runs", e1, e2, e3, secs)};
}

Outcome multi_correlation_checks() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> d, m, y_lin, y_ind;
  for (int i = 0; i < 10000; ++i) {
    d.push_back(nd(rng));
    m.push_back(nd(rng));
    y_lin.push_back(2 * d.back() + 3 * m.back());
    y_ind.push_back(nd(rng));
  }
  const double r_lin = multiple_correlation(d, m, y_lin).r;
  const double r_ind = multiple_correlation(d, m, y_ind).r;
  std::vector<double> d2, m2, y2, y_noisy;
  for (std::size_t i = 0; i < d.size(); ++i) y_noisy.push_back(d[i] - 0.5 * m[i] + 2 * y_ind[i]);
  for (std::size_t i = 0; i < d.size(); ++i) {
    d2.push_back(-3.5 * d[i] + 7);
    m2.push_back(0.25 * m[i] - 2);
    y2.push_back(40 * y_noisy[i] + 55);
  }
  const double r_base = multiple_correlation(d, m, y_noisy).r;
  const double r_aff = multiple_correlation(d2, m2, y2).r;
  const bool pass = std::abs(r_lin - 1.0) <= 1e-9 && r_ind < 0.05 && std::abs(r_base - r_aff) <= 1e-9;
  return {pass, fmt("R(linear)=%.12f R(independent)=%.4f |R-R(affine)|=%.1e", r_lin, r_ind, std::abs(r_base - r_aff))};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"lambda ordering over k0 grid", lambda_ordering},
      {"closed-form equivalence", closed_forms},
      {"h-function oracle", h_oracle},
      {"Cauchy interlace bound", cauchy_interlace},
      {"full rank of output kernel", full_rank},
      {"effective depth/width metrics", metrics_sweep},
      {"filter behavior", filter_behavior},
      {"simulator gradient check", gradient_check},
      {"kernel vs simulator consistency", kernel_consistency},
      {"training-speed ordering", training_speed_ordering},
      {"multiple correlation", multi_correlation_checks},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %zu: %s (%s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
