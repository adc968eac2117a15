#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include "dagconv/arch_graph.hpp"
#include "dagconv/error.hpp"

namespace dagconv {

/// Effective depth and width of a cell, with the path statistics they come
/// from. Plain double arithmetic; the inputs are small integers so results
/// are exact up to one rounding.
struct TopoMetrics {
  double eff_depth = 0.0;
  double eff_width = 0.0;
  int num_paths = 0;
  long sum_depths = 0;
  int num_param_paths = 0;
};

struct FilterConfig {
  double center_depth = 0.0;
  double center_width = 0.0;
  double radius_depth = 0.0;
  double radius_width = 0.0;
  double keep_fraction = 0.5;

  void validate() const {
    if (!(radius_depth > 0.0) || !(radius_width > 0.0)) {
      throw Error(ErrorCode::RadiusZero, "filter radii must be positive");
    }
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "keep_fraction must lie in (0, 1]");
    }
    if (!std::isfinite(center_depth) || !std::isfinite(center_width)) {
      throw Error(ErrorCode::InvalidConfig, "filter center must be finite");
    }
  }
};

/// Reference configuration for the NAS-Bench-201 space: center (1.6, 2.2),
/// half-radii (0.7, 0.9).
inline FilterConfig nb201_reference_config() {
  return FilterConfig{1.6, 2.2, 1.4, 1.8, 0.5};
}

inline TopoMetrics compute_metrics(const PathProfile& profile) {
  if (profile.num_paths <= 0) {
    throw Error(ErrorCode::NoPath, "output node is unreachable from the input");
  }
  TopoMetrics m;
  m.num_paths = profile.num_paths;
  m.sum_depths = profile.sum_depths();
  m.num_param_paths =
      static_cast<int>(std::count_if(profile.depths.begin(), profile.depths.end(),
                                     [](int d) { return d > 0; }));
  m.eff_depth = static_cast<double>(m.sum_depths) / static_cast<double>(m.num_paths);
  if (m.sum_depths == 0) {
    throw Error(ErrorCode::DepthZero, "every path is parameter-free; effective width undefined");
  }
  // m_bar = count / (sum / P), written to keep one division.
  m.eff_width = static_cast<double>(m.num_param_paths) * static_cast<double>(m.num_paths) /
                static_cast<double>(m.sum_depths);
  return m;
}

inline TopoMetrics compute_metrics(const ArchGraph& g) { return compute_metrics(enumerate_paths(g)); }

// ---------------------------------------------------------------------------
// Filter
// ---------------------------------------------------------------------------

enum class FilterVerdict { Keep, DepthOut, WidthOut, BothOut };

constexpr std::string_view to_string(FilterVerdict v) noexcept {
  switch (v) {
    case FilterVerdict::Keep: return "keep";
    case FilterVerdict::DepthOut: return "depth";
    case FilterVerdict::WidthOut: return "width";
    case FilterVerdict::BothOut: return "both";
  }
  return "keep";
}

namespace detail {
// Absorbs one rounding of the center/radius arithmetic so that values sitting
// exactly on the boundary stay inside.
inline bool within(double value, double center, double limit) {
  return std::abs(value - center) <= limit + 1e-12 * std::max(1.0, std::abs(limit));
}
}  // namespace detail

inline FilterVerdict classify(const TopoMetrics& m, const FilterConfig& cfg) {
  const bool depth_ok = detail::within(m.eff_depth, cfg.center_depth, cfg.keep_fraction * cfg.radius_depth);
  const bool width_ok = detail::within(m.eff_width, cfg.center_width, cfg.keep_fraction * cfg.radius_width);
  if (depth_ok && width_ok) return FilterVerdict::Keep;
  if (!depth_ok && !width_ok) return FilterVerdict::BothOut;
  return depth_ok ? FilterVerdict::WidthOut : FilterVerdict::DepthOut;
}

/// Keep iff |d - d*| <= f r_d and |m - m*| <= f r_m, boundaries inclusive.
inline bool filter_keep(const TopoMetrics& m, const FilterConfig& cfg) {
  return classify(m, cfg) == FilterVerdict::Keep;
}

// ---------------------------------------------------------------------------
// Space extremes
// ---------------------------------------------------------------------------

/// Associative min/max fold over observed metrics.
class ExtremesAccumulator {
 public:
  void add(const TopoMetrics& m) {
    depth_min_ = std::min(depth_min_, m.eff_depth);
    depth_max_ = std::max(depth_max_, m.eff_depth);
    width_min_ = std::min(width_min_, m.eff_width);
    width_max_ = std::max(width_max_, m.eff_width);
    ++used_;
  }

  /// Adds a graph, skipping (and counting) those with P = 0 or d = 0.
  void add(const ArchGraph& g) {
    try {
      add(compute_metrics(g));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPath && e.code() != ErrorCode::DepthZero) throw;
      ++skipped_;
    }
  }

  void merge(const ExtremesAccumulator& other) {
    depth_min_ = std::min(depth_min_, other.depth_min_);
    depth_max_ = std::max(depth_max_, other.depth_max_);
    width_min_ = std::min(width_min_, other.width_min_);
    width_max_ = std::max(width_max_, other.width_max_);
    used_ += other.used_;
    skipped_ += other.skipped_;
  }

  std::size_t used() const noexcept { return used_; }
  std::size_t skipped() const noexcept { return skipped_; }
  double depth_min() const noexcept { return depth_min_; }
  double depth_max() const noexcept { return depth_max_; }
  double width_min() const noexcept { return width_min_; }
  double width_max() const noexcept { return width_max_; }

 private:
  double depth_min_ = std::numeric_limits<double>::infinity();
  double depth_max_ = -std::numeric_limits<double>::infinity();
  double width_min_ = std::numeric_limits<double>::infinity();
  double width_max_ = -std::numeric_limits<double>::infinity();
  std::size_t used_ = 0;
  std::size_t skipped_ = 0;
};

struct SpaceExtremes {
  FilterConfig config;
  double depth_min = 0.0;
  double depth_max = 0.0;
  double width_min = 0.0;
  double width_max = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Center = midpoint of the observed range, radius = half the range.
/// Throws EmptySpace when nothing was usable and RadiusZero when either
/// range collapses to a point.
inline SpaceExtremes finish(const ExtremesAccumulator& acc, double keep_fraction = 0.5) {
  if (acc.used() == 0) {
    throw Error(ErrorCode::EmptySpace, "no architecture with a path and non-zero depth (" +
                                           std::to_string(acc.skipped()) + " skipped)");
  }
  SpaceExtremes out;
  out.depth_min = acc.depth_min();
  out.depth_max = acc.depth_max();
  out.width_min = acc.width_min();
  out.width_max = acc.width_max();
  out.used = acc.used();
  out.skipped = acc.skipped();
  out.config.center_depth = 0.5 * (out.depth_max + out.depth_min);
  out.config.center_width = 0.5 * (out.width_max + out.width_min);
  out.config.radius_depth = 0.5 * (out.depth_max - out.depth_min);
  out.config.radius_width = 0.5 * (out.width_max - out.width_min);
  out.config.keep_fraction = keep_fraction;
  if (!(out.config.radius_depth > 0.0) || !(out.config.radius_width > 0.0)) {
    throw Error(ErrorCode::RadiusZero, "observed metric range is a single point");
  }
  return out;
}

/// Fold over any range of ArchGraph (or of objects exposing `.graph`).
template <typename Range>
SpaceExtremes space_extremes(Range&& graphs, double keep_fraction = 0.5) {
  ExtremesAccumulator acc;
  for (auto&& item : graphs) {
    if constexpr (requires { item.graph; }) {
      acc.add(item.graph);
    } else {
      acc.add(static_cast<const ArchGraph&>(item));
    }
  }
  return finish(acc, keep_fraction);
}

// ---------------------------------------------------------------------------
// key=value config files
// ---------------------------------------------------------------------------

/// Partial config as read from a file or flags; unset keys stay empty.
struct FilterConfigOverrides {
  std::optional<double> center_depth, center_width, radius_depth, radius_width, keep_fraction;

  void apply_over(const FilterConfigOverrides& top) {
    if (top.center_depth) center_depth = top.center_depth;
    if (top.center_width) center_width = top.center_width;
    if (top.radius_depth) radius_depth = top.radius_depth;
    if (top.radius_width) radius_width = top.radius_width;
    if (top.keep_fraction) keep_fraction = top.keep_fraction;
  }

  bool complete() const {
    return center_depth && center_width && radius_depth && radius_width;
  }

  FilterConfig resolve() const {
    if (!complete()) {
      throw Error(ErrorCode::ConfigMissing,
                  "center_depth, center_width, radius_depth and radius_width are required");
    }
    FilterConfig cfg{*center_depth, *center_width, *radius_depth, *radius_width,
                     keep_fraction.value_or(0.5)};
    cfg.validate();
    return cfg;
  }
};

inline FilterConfigOverrides read_filter_config(std::istream& in) {
  FilterConfigOverrides out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string text = trim(line.substr(eq + 1));
    double value = 0.0;
    std::istringstream vs(text);
    if (!(vs >> value) || !(vs >> std::ws).eof()) {
      throw Error(ErrorCode::InvalidConfig,
                  "line " + std::to_string(lineno) + ": '" + text + "' is not a number");
    }
    if (key == "center_depth") out.center_depth = value;
    else if (key == "center_width") out.center_width = value;
    else if (key == "radius_depth") out.radius_depth = value;
    else if (key == "radius_width") out.radius_width = value;
    else if (key == "keep_fraction") out.keep_fraction = value;
    else throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return out;
}

// Shortest text that reads back to the same double.
inline std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_filter_config(std::ostream& out, const FilterConfig& cfg) {
  out << "center_depth=" << shortest(cfg.center_depth) << '\n'
      << "center_width=" << shortest(cfg.center_width) << '\n'
      << "radius_depth=" << shortest(cfg.radius_depth) << '\n'
      << "radius_width=" << shortest(cfg.radius_width) << '\n'
      << "keep_fraction=" << shortest(cfg.keep_fraction) << '\n';
}

}  // namespace dagconv
