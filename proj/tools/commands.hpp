#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dagconv/error.hpp"
#include "dagconv/stats.hpp"
#include "dagconv/topo_metrics.hpp"
#include "dagconv/train_sim.hpp"

namespace dagconv::cli {

/// Process exit codes. Row-level errors in streaming commands do not change
/// the exit code.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitInput = 3,
  kExitInternal = 4,
};

int exit_code_for(ErrorCode code) noexcept;

/// Writes `code=<Code>` and `message=<text>` lines to `err` and returns the
/// matching exit code.
int report_error(std::ostream& err, const Error& e);

/// Resolves one input line: `@path` loads a DSL document, anything else is
/// parsed as a NAS-Bench-201 string.
ArchGraph resolve_arch(const std::string& line);

struct AnalyzeOptions {
  double k0 = 0.5;
  bool nb201_space = false;  // ignore input, enumerate the full space
  int jobs = 1;
};

struct FilterOptions {
  std::optional<std::string> config_path;
  FilterConfigOverrides flags;
  bool auto_config = false;
  bool nb201_space = false;
  int jobs = 1;
};

struct KernelOptions {
  std::optional<std::string> dags;  // "builtin3"
  std::optional<std::string> grid;  // start:stop:count, inclusive
  std::optional<double> k0;
  std::optional<std::string> graph_path;
  std::optional<std::string> arch;
  std::optional<std::string> gram_path;
};

struct CorrelateOptions {
  std::string csv_path;  // "-" for stdin
  CorrelationMode mode = CorrelationMode::PerRecord;
};

struct SimulateOptions {
  bool builtin3 = false;
  std::vector<std::string> graph_paths;
  std::vector<std::string> archs;
  int seeds = 5;
  std::uint64_t base_seed = 1;
  SimConfig sim;
  BlobSpec blobs;
  std::optional<std::string> features_csv;
  double threshold = 0.8;
  std::optional<std::string> trace_dir;
};

struct SpaceStatsOptions {
  bool nb201_space = false;
  std::optional<int> param_edges;
  double keep_fraction = 0.5;
  std::optional<std::string> write_config;
};

int cmd_analyze(std::istream& in, std::ostream& out, std::ostream& err, const AnalyzeOptions& opts);
int cmd_filter(std::istream& in, std::ostream& out, std::ostream& err, const FilterOptions& opts);
int cmd_kernel(std::ostream& out, std::ostream& err, const KernelOptions& opts);
int cmd_correlate(std::istream& in, std::ostream& out, std::ostream& err, const CorrelateOptions& opts);
int cmd_simulate(std::ostream& out, std::ostream& err, const SimulateOptions& opts);
int cmd_space_stats(std::istream& in, std::ostream& out, std::ostream& err, const SpaceStatsOptions& opts);

/// Parses `start:stop:count` into `count` evenly spaced points including
/// both ends.
std::vector<double> parse_grid(const std::string& spec);

/// Default seed: DAGCONV_SEED if set and numeric, otherwise `fallback`.
std::uint64_t default_seed(std::uint64_t fallback = 1);

}  // namespace dagconv::cli
