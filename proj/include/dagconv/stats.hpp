#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dagconv/arch_graph.hpp"
#include "dagconv/error.hpp"
#include "dagconv/topo_metrics.hpp"

namespace dagconv {

struct BenchmarkRecord {
  std::string arch_id;
  double eff_depth = 0.0;
  double eff_width = 0.0;
  double accuracy = 0.0;  // percent
};

struct BinSummary {
  double eff_depth = 0.0;
  double eff_width = 0.0;
  std::size_t count = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // population standard deviation
};

struct RowError {
  std::size_t row = 0;  // 1-based line number in the input
  ErrorCode code = ErrorCode::UnparsableRow;
  std::string reason;
};

struct IngestResult {
  std::vector<BenchmarkRecord> records;
  std::vector<RowError> errors;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                       : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline bool parse_double(const std::string& text, double& value) {
  std::istringstream s(text);
  s >> value;
  return !s.fail() && (s >> std::ws).eof() && std::isfinite(value);
}

}  // namespace detail

/// Reads `arch,accuracy` or `arch,d,m,accuracy` CSV. In the two-column
/// form the metrics are derived from the architecture string. Bad rows are
/// reported in `errors`, never dropped silently.
inline IngestResult ingest_csv(std::istream& in) {
  IngestResult result;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  bool with_metrics = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv(line);
    if (!have_header) {
      if (fields == std::vector<std::string>{"arch", "accuracy"}) {
        with_metrics = false;
      } else if (fields == std::vector<std::string>{"arch", "d", "m", "accuracy"}) {
        with_metrics = true;
      } else {
        throw Error(ErrorCode::MissingHeader,
                    "expected header 'arch,accuracy' or 'arch,d,m,accuracy', got '" + line + "'");
      }
      have_header = true;
      continue;
    }
    auto fail = [&](ErrorCode code, std::string reason) {
      result.errors.push_back({lineno, code, std::move(reason)});
    };
    const std::size_t expected = with_metrics ? 4 : 2;
    if (fields.size() != expected) {
      fail(ErrorCode::UnparsableRow, "expected " + std::to_string(expected) + " fields, got " +
                                         std::to_string(fields.size()));
      continue;
    }
    BenchmarkRecord rec;
    rec.arch_id = fields[0];
    if (!detail::parse_double(fields.back(), rec.accuracy)) {
      fail(ErrorCode::UnparsableRow, "accuracy '" + fields.back() + "' is not a number");
      continue;
    }
    if (rec.accuracy < 0.0 || rec.accuracy > 100.0) {
      fail(ErrorCode::UnparsableRow, "accuracy " + fields.back() + " outside [0, 100]");
      continue;
    }
    if (with_metrics) {
      if (!detail::parse_double(fields[1], rec.eff_depth) ||
          !detail::parse_double(fields[2], rec.eff_width)) {
        fail(ErrorCode::UnparsableRow, "metrics are not finite numbers");
        continue;
      }
    } else {
      try {
        const TopoMetrics m = compute_metrics(parse_nb201(rec.arch_id));
        rec.eff_depth = m.eff_depth;
        rec.eff_width = m.eff_width;
      } catch (const Error& e) {
        fail(e.code(), e.what());
        continue;
      }
    }
    result.records.push_back(std::move(rec));
  }
  if (!have_header) throw Error(ErrorCode::MissingHeader, "input is empty");
  return result;
}

inline constexpr double kBinScale = 1e6;  // 6-decimal rounding

/// Groups records with equal (d, m) after rounding to 6 decimals. Bins are
/// returned in ascending (d, m) order.
inline std::vector<BinSummary> bin_by_metrics(std::span<const BenchmarkRecord> records) {
  struct Moments {
    double d = 0, m = 0;
    std::size_t n = 0;
    double sum_sq_dev = 0, mean = 0;  // Welford
  };
  std::map<std::pair<long long, long long>, Moments> bins;
  for (const auto& r : records) {
    const auto key = std::pair(std::llround(r.eff_depth * kBinScale), std::llround(r.eff_width * kBinScale));
    Moments& b = bins[key];
    if (b.n == 0) {
      b.d = static_cast<double>(key.first) / kBinScale;
      b.m = static_cast<double>(key.second) / kBinScale;
    }
    ++b.n;
    const double delta = r.accuracy - b.mean;
    b.mean += delta / static_cast<double>(b.n);
    b.sum_sq_dev += delta * (r.accuracy - b.mean);
  }
  std::vector<BinSummary> out;
  out.reserve(bins.size());
  for (const auto& [key, b] : bins) {
    out.push_back({b.d, b.m, b.n, b.mean, std::sqrt(std::max(0.0, b.sum_sq_dev / static_cast<double>(b.n)))});
  }
  return out;
}

/// Pearson correlation. Throws DegenerateVariance when either side is
/// (numerically) constant.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) {
    throw Error(ErrorCode::DegenerateVariance, "need two equally sized samples of size >= 2");
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0, ax = 0, ay = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    ax = std::max(ax, std::abs(x[i]));
    ay = std::max(ay, std::abs(y[i]));
  }
  const double nn = static_cast<double>(n);
  auto constant = [&](double ss, double scale) { return !(std::sqrt(ss / nn) > 1e-12 * std::max(scale, 1e-300)); };
  if (constant(sxx, ax) || constant(syy, ay)) {
    throw Error(ErrorCode::DegenerateVariance, "a variable is constant");
  }
  return sxy / std::sqrt(sxx * syy);
}

enum class CorrelationMode { PerRecord, BinMean };

struct MultiCorrelation {
  double r = 0.0;
  double r_depth = 0.0;   // corr(d, y)
  double r_width = 0.0;   // corr(m, y)
  double r_predictors = 0.0;  // corr(d, m)
  std::size_t samples = 0;
};

/// Coefficient of multiple correlation of y on (x1, x2):
///   R^2 = c^T Rxx^{-1} c,  c = [r(x1,y), r(x2,y)].
inline MultiCorrelation multiple_correlation(std::span<const double> x1, std::span<const double> x2,
                                             std::span<const double> y) {
  if (y.size() < 3) throw Error(ErrorCode::DegenerateVariance, "need at least 3 samples");
  MultiCorrelation out;
  out.samples = y.size();
  out.r_depth = pearson(x1, y);
  out.r_width = pearson(x2, y);
  out.r_predictors = pearson(x1, x2);
  const double rp = out.r_predictors;
  if (std::abs(rp) >= 1.0 - 1e-12) {
    throw Error(ErrorCode::SingularPredictorMatrix, "predictors are perfectly correlated");
  }
  // Closed-form 2x2 inverse.
  double r2 = (out.r_depth * out.r_depth + out.r_width * out.r_width -
               2.0 * out.r_depth * out.r_width * rp) /
              (1.0 - rp * rp);
  if (r2 < -1e-9 || r2 > 1.0 + 1e-9) {
    throw Error(ErrorCode::InvariantViolation, "R^2 = " + std::to_string(r2) + " outside [0, 1]");
  }
  out.r = std::sqrt(std::clamp(r2, 0.0, 1.0));
  return out;
}

/// R between accuracy and the joint (d, m). PerRecord uses every record;
/// BinMean uses one point per (d, m) bin with its mean accuracy.
inline MultiCorrelation multi_correlation(std::span<const BenchmarkRecord> records,
                                          CorrelationMode mode = CorrelationMode::PerRecord) {
  std::vector<double> d, m, y;
  if (mode == CorrelationMode::PerRecord) {
    for (const auto& r : records) {
      d.push_back(r.eff_depth);
      m.push_back(r.eff_width);
      y.push_back(r.accuracy);
    }
  } else {
    for (const auto& b : bin_by_metrics(records)) {
      d.push_back(b.eff_depth);
      m.push_back(b.eff_width);
      y.push_back(b.mean_acc);
    }
  }
  return multiple_correlation(d, m, y);
}

}  // namespace dagconv
