#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using namespace dagconv;
using namespace dagconv::cli;

// Opens the input stream: a file path, or stdin for "" / "-".
std::istream& open_input(const std::string& path, std::unique_ptr<std::ifstream>& holder) {
  if (path.empty() || path == "-") return std::cin;
  holder = std::make_unique<std::ifstream>(path);
  if (!*holder) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return *holder;
}

std::ostream& open_output(const std::string& path, std::unique_ptr<std::ofstream>& holder) {
  if (path.empty() || path == "-") return std::cout;
  holder = std::make_unique<std::ofstream>(path);
  if (!*holder) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  return *holder;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dagconv: convergence analysis and zero-cost filtering of architecture DAGs"};
  app.require_subcommand(1);
  app.footer(
      "Architectures are NAS-Bench-201 strings such as |nor_conv_3x3~0|+|none~0|skip_connect~1|+|...|\n"
      "or @path references to a JSON DAG file {\"num_nodes\":N,\"edges\":[{\"src\":0,\"dst\":1,\"op\":\"param\"}]}.\n"
      "Exit codes: 0 ok (row-level errors allowed), 2 config error, 3 input error, 4 invariant violation.\n"
      "DAGCONV_SEED sets the default simulate seed.");

  std::string input, output;
  auto add_io = [&](CLI::App* sub, bool with_input) {
    if (with_input) sub->add_option("input", input, "input file, one architecture per line (default: stdin)");
    sub->add_option("-o,--output", output, "output file (default: stdout)");
  };

  // analyze
  AnalyzeOptions analyze;
  auto* a = app.add_subcommand("analyze", "per-architecture paths, effective depth/width and lambda bounds (TSV)");
  add_io(a, true);
  a->add_option("--k0", analyze.k0, "input correlation k0 in [0, 1) for the lambda columns")->capture_default_str();
  a->add_flag("--nb201", analyze.nb201_space, "ignore input and enumerate all 15625 NAS-Bench-201 cells");
  a->add_option("-j,--jobs", analyze.jobs, "worker threads; output order is preserved")->check(CLI::PositiveNumber)
      ->capture_default_str();

  // filter
  FilterOptions filter;
  std::string filter_config;
  double center_depth = 0, center_width = 0, radius_depth = 0, radius_width = 0, keep_fraction = 0;
  auto* f = app.add_subcommand("filter", "zero-cost keep/drop filter on (effective depth, effective width)");
  add_io(f, true);
  f->add_option("-c,--config", filter_config, "key=value config file (flags override it)");
  auto* o_cd = f->add_option("--center-depth", center_depth, "center of effective depth");
  auto* o_cw = f->add_option("--center-width", center_width, "center of effective width");
  auto* o_rd = f->add_option("--radius-depth", radius_depth, "full radius of effective depth");
  auto* o_rw = f->add_option("--radius-width", radius_width, "full radius of effective width");
  auto* o_kf = f->add_option("--keep-fraction", keep_fraction, "fraction of each radius kept (default 0.5)");
  f->add_flag("--auto", filter.auto_config,
              "derive center/radii from the input's own extremes; buffers the whole input in memory");
  f->add_flag("--nb201", filter.nb201_space, "ignore input and enumerate all 15625 NAS-Bench-201 cells");
  f->add_option("-j,--jobs", filter.jobs, "worker threads; output order is preserved")->check(CLI::PositiveNumber);

  // kernel
  KernelOptions kernel;
  auto* k = app.add_subcommand("kernel", "NNGP kernel propagation and lambda ordering (TSV)");
  add_io(k, false);
  k->add_option("--dags", kernel.dags, "builtin3: tabulate lambda for the three reference DAGs");
  k->add_option("--grid", kernel.grid, "k0 grid start:stop:count, both ends included");
  k->add_option("--k0", kernel.k0, "single k0 value in [0, 1)");
  k->add_option("--graph", kernel.graph_path, "JSON DAG file");
  k->add_option("--arch", kernel.arch, "NAS-Bench-201 string");
  k->add_option("--gram", kernel.gram_path,
                "input Gram matrix file (first line N, then N rows); prints the output kernel matrix");

  // correlate
  CorrelateOptions correlate;
  std::string mode = "record";
  auto* c = app.add_subcommand("correlate", "multiple correlation of accuracy on (effective depth, effective width)");
  add_io(c, true);
  c->add_option("--mode", mode, "record: every row is a sample; bin: one sample per (d, m) bin mean")
      ->check(CLI::IsMember({"record", "bin"}))
      ->capture_default_str();

  // simulate
  SimulateOptions sim;
  sim.base_seed = default_seed(1);
  std::string loss = "ce", signs = "symmetric";
  auto* s = app.add_subcommand("simulate", "train small DAG networks and rank them by epochs to reach a train accuracy");
  add_io(s, false);
  s->add_flag("--builtin3", sim.builtin3, "include the three reference DAGs");
  s->add_option("--graph", sim.graph_paths, "JSON DAG file (repeatable)");
  s->add_option("--arch", sim.archs, "NAS-Bench-201 string (repeatable)");
  s->add_option("--seeds", sim.seeds, "number of seeds per graph")->capture_default_str();
  s->add_option("--seed", sim.base_seed, "first seed; runs use seed, seed+1, ... (default DAGCONV_SEED or 1)");
  s->add_option("--width", sim.sim.width, "hidden width m")->capture_default_str();
  s->add_option("--lr", sim.sim.lr, "SGD learning rate")->capture_default_str();
  s->add_option("--batch-size", sim.sim.batch_size, "minibatch size")->capture_default_str();
  s->add_option("--epochs", sim.sim.epochs, "maximum epochs")->capture_default_str();
  s->add_option("--loss", loss, "ce (softmax cross-entropy) or mse (one-hot squared error)")
      ->check(CLI::IsMember({"ce", "mse"}))
      ->capture_default_str();
  s->add_option("--signs", signs, "symmetric: fixed random +-1 per unit on parameterized edges; plain: none")
      ->check(CLI::IsMember({"symmetric", "plain"}))
      ->capture_default_str();
  s->add_option("--threshold", sim.threshold, "train accuracy target in (0, 1]")->capture_default_str();
  s->add_option("--classes", sim.blobs.num_classes, "synthetic data: classes")->capture_default_str();
  s->add_option("--clusters", sim.blobs.clusters_per_class, "synthetic data: clusters per class")
      ->capture_default_str();
  s->add_option("--samples", sim.blobs.num_samples, "synthetic data: samples")->capture_default_str();
  s->add_option("--dim", sim.blobs.dim, "synthetic data: input dimension")->capture_default_str();
  s->add_option("--noise", sim.blobs.noise, "synthetic data: noise std around cluster centers")
      ->capture_default_str();
  s->add_option("--data-seed", sim.blobs.seed, "synthetic data: seed")->capture_default_str();
  s->add_option("--features", sim.features_csv, "CSV of label,x1,...,xd rows with unit-norm features");
  s->add_option("--trace-dir", sim.trace_dir, "write per-run epoch traces as CSV here");

  // space-stats
  SpaceStatsOptions stats;
  auto* ss = app.add_subcommand("space-stats", "extremes, center and radii of (effective depth, effective width)");
  add_io(ss, true);
  ss->add_flag("--nb201", stats.nb201_space,
               "enumerate NAS-Bench-201; reports the full space and the 3-parameterized-edge subset");
  ss->add_option("--param-edges", stats.param_edges, "only cells with exactly this many parameterized edges");
  ss->add_option("--keep-fraction", stats.keep_fraction, "keep fraction written to the config")
      ->capture_default_str();
  ss->add_option("--write-config", stats.write_config, "write the (first) resulting config as key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    std::unique_ptr<std::ifstream> in_holder;
    std::unique_ptr<std::ofstream> out_holder;
    std::ostream& out = open_output(output, out_holder);
    if (a->parsed()) {
      const bool need_in = !analyze.nb201_space;
      return cmd_analyze(need_in ? open_input(input, in_holder) : std::cin, out, std::cerr, analyze);
    }
    if (f->parsed()) {
      if (!filter_config.empty()) filter.config_path = filter_config;
      if (*o_cd) filter.flags.center_depth = center_depth;
      if (*o_cw) filter.flags.center_width = center_width;
      if (*o_rd) filter.flags.radius_depth = radius_depth;
      if (*o_rw) filter.flags.radius_width = radius_width;
      if (*o_kf) filter.flags.keep_fraction = keep_fraction;
      return cmd_filter(filter.nb201_space ? std::cin : open_input(input, in_holder), out, std::cerr, filter);
    }
    if (k->parsed()) return cmd_kernel(out, std::cerr, kernel);
    if (c->parsed()) {
      correlate.mode = mode == "bin" ? CorrelationMode::BinMean : CorrelationMode::PerRecord;
      return cmd_correlate(open_input(input, in_holder), out, std::cerr, correlate);
    }
    if (s->parsed()) {
      sim.sim.loss = loss == "mse" ? Loss::Mse : Loss::CrossEntropy;
      sim.sim.signs = signs == "plain" ? SignMode::Plain : SignMode::Symmetric;
      return cmd_simulate(out, std::cerr, sim);
    }
    if (ss->parsed()) {
      return cmd_space_stats(stats.nb201_space ? std::cin : open_input(input, in_holder), out, std::cerr, stats);
    }
  } catch (const Error& e) {
    return report_error(std::cerr, e);
  } catch (const std::exception& e) {
    std::cerr << "code=Internal\nmessage=" << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
