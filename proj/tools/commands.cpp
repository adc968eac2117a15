#include "commands.hpp"

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string_view>

#include "dagconv/arch_graph.hpp"
#include "dagconv/nngp.hpp"

namespace dagconv::cli {

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigMissing:
    case ErrorCode::InvalidConfig:
    case ErrorCode::RadiusZero:
    case ErrorCode::EmptySpace:
    case ErrorCode::DomainError:
      return kExitConfig;
    case ErrorCode::OrderingViolation:
    case ErrorCode::InvariantViolation:
    case ErrorCode::Divergence:
      return kExitInternal;
    default:
      return kExitInput;
  }
}

int report_error(std::ostream& err, const Error& e) {
  err << "code=" << to_string(e.code()) << '\n' << "message=" << e.what() << '\n';
  return exit_code_for(e.code());
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// One processed input line. `tag` feeds the stderr summary (an error code
// or filter verdict); empty means plain success.
struct LineResult {
  std::string text;
  bool emit = true;
  std::string tag;
};

// Pulls architecture lines either from a stream (skipping blanks and '#'
// lines) or from the enumerated NAS-Bench-201 space.
class LineSource {
 public:
  LineSource(std::istream& in, bool nb201) : in_(in), nb201_(nb201) {}

  bool next(std::string& line) {
    if (nb201_) {
      if (index_ >= Nb201Space::size()) return false;
      line = Nb201Space::arch_string(index_++);
      return true;
    }
    std::string raw;
    while (std::getline(in_, raw)) {
      line = trim(raw);
      if (line.empty() || line.front() == '#') continue;
      return true;
    }
    return false;
  }

 private:
  std::istream& in_;
  bool nb201_;
  std::size_t index_ = 0;
};

// Applies `fn` to every line and writes results in input order. With
// jobs > 1, blocks of lines are computed concurrently; at most `jobs`
// blocks are in flight, so memory stays bounded.
template <typename Fn, typename Sink>
void process_ordered(LineSource& src, int jobs, Fn fn, Sink sink) {
  constexpr std::size_t kBlock = 256;
  auto run_block = [fn](std::vector<std::string> lines) {
    std::vector<LineResult> out;
    out.reserve(lines.size());
    for (const auto& l : lines) out.push_back(fn(l));
    return out;
  };
  std::deque<std::future<std::vector<LineResult>>> pending;
  auto drain_one = [&] {
    for (auto& r : pending.front().get()) sink(r);
    pending.pop_front();
  };
  std::string line;
  bool more = true;
  while (more) {
    std::vector<std::string> block;
    while (block.size() < kBlock && (more = src.next(line))) block.push_back(line);
    if (block.empty()) break;
    if (jobs <= 1) {
      for (auto& r : run_block(std::move(block))) sink(r);
      continue;
    }
    pending.push_back(std::async(std::launch::async, run_block, std::move(block)));
    if (pending.size() >= static_cast<std::size_t>(jobs)) drain_one();
  }
  while (!pending.empty()) drain_one();
}

std::string fixed4(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

std::string general(double v, int precision = 10) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

void write_summary(std::ostream& err, std::size_t rows, const std::map<std::string, std::size_t>& tags,
                   std::string_view prefix) {
  err << "rows=" << rows << '\n';
  std::size_t errors = 0;
  for (const auto& [tag, n] : tags) {
    err << prefix << tag << '=' << n << '\n';
    errors += n;
  }
  if (prefix == "error.") err << "errors=" << errors << '\n';
}

LineResult analyze_line(const std::string& arch, double k0) {
  LineResult r;
  auto err_cells = [&](ErrorCode code, int count) {
    std::string cells;
    for (int i = 0; i < count; ++i) cells += "\tERR:" + std::string(to_string(code));
    return cells;
  };
  ArchGraph g;
  try {
    g = resolve_arch(arch);
  } catch (const Error& e) {
    r.text = arch + err_cells(e.code(), 6);
    r.tag = to_string(e.code());
    return r;
  }
  const PathProfile profile = enumerate_paths(g);
  r.text = arch + '\t' + std::to_string(profile.num_paths) + '\t' + std::to_string(profile.sum_depths());
  if (profile.num_paths == 0) {
    r.text += err_cells(ErrorCode::NoPath, 4);
    r.tag = to_string(ErrorCode::NoPath);
    return r;
  }
  try {
    const TopoMetrics m = compute_metrics(profile);
    r.text += '\t' + fixed4(m.eff_depth) + '\t' + fixed4(m.eff_width);
  } catch (const Error& e) {
    r.text += '\t' + fixed4(0.0) + err_cells(e.code(), 1);
    r.tag = to_string(e.code());
  }
  r.text += '\t' + general(lambda_bound(propagate_graph(g, k0)).lambda_upper) + '\t' +
            general(simplified_rule_bound(profile, k0));
  return r;
}

}  // namespace

ArchGraph resolve_arch(const std::string& line) {
  if (!line.empty() && line.front() == '@') return parse_dag_dsl(read_file(line.substr(1)));
  return parse_nb201(line);
}

std::uint64_t default_seed(std::uint64_t fallback) {
  if (const char* env = std::getenv("DAGCONV_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return v;
  }
  return fallback;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::istringstream s(spec);
  double start = 0, stop = 0;
  long count = 0;
  char c1 = 0, c2 = 0;
  if (!(s >> start >> c1 >> stop >> c2 >> count) || c1 != ':' || c2 != ':' || count < 1 ||
      !(s >> std::ws).eof()) {
    throw Error(ErrorCode::InvalidConfig, "grid must look like start:stop:count, got '" + spec + "'");
  }
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    if (count == 1) grid.push_back(start);
    else if (i == count - 1) grid.push_back(stop);
    else grid.push_back(start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return grid;
}

// ---------------------------------------------------------------------------

int cmd_analyze(std::istream& in, std::ostream& out, std::ostream& err, const AnalyzeOptions& opts) {
  if (!(opts.k0 >= 0.0 && opts.k0 < 1.0)) {
    return report_error(err, Error(ErrorCode::DomainError, "k0 must lie in [0, 1)"));
  }
  out << "# analyze k0=" << opts.k0 << '\n'
      << "# arch\tP\tsum_d\td_bar\tm_bar\tlambda_exact\tlambda_rule\n";
  LineSource src(in, opts.nb201_space);
  std::size_t rows = 0;
  std::map<std::string, std::size_t> tags;
  const double k0 = opts.k0;
  process_ordered(
      src, opts.jobs, [k0](const std::string& l) { return analyze_line(l, k0); },
      [&](const LineResult& r) {
        out << r.text << '\n';
        ++rows;
        if (!r.tag.empty()) ++tags[r.tag];
      });
  write_summary(err, rows, tags, "error.");
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_filter(std::istream& in, std::ostream& out, std::ostream& err, const FilterOptions& opts) {
  try {
    FilterConfigOverrides layered;
    if (opts.config_path) {
      std::ifstream f(*opts.config_path);
      if (!f) throw Error(ErrorCode::IoError, "cannot open '" + *opts.config_path + "'");
      layered = read_filter_config(f);
    }
    layered.apply_over(opts.flags);

    LineSource src(in, opts.nb201_space);
    std::vector<std::string> buffered;
    if (opts.auto_config) {
      std::string line;
      ExtremesAccumulator acc;
      while (src.next(line)) {
        try {
          acc.add(resolve_arch(line));
        } catch (const Error&) {
          // unparsable lines are dropped later with their own reason
        }
        buffered.push_back(line);
      }
      const SpaceExtremes ext = finish(acc, layered.keep_fraction.value_or(0.5));
      FilterConfigOverrides computed{ext.config.center_depth, ext.config.center_width,
                                     ext.config.radius_depth, ext.config.radius_width,
                                     ext.config.keep_fraction};
      computed.apply_over(layered);
      layered = computed;
      err << "auto.used=" << ext.used << '\n' << "auto.skipped=" << ext.skipped << '\n';
    } else if (!layered.complete()) {
      throw Error(ErrorCode::ConfigMissing, "give --config, all four center/radius flags, or --auto");
    }
    const FilterConfig cfg = layered.resolve();

    out << "# filter center_depth=" << shortest(cfg.center_depth) << " center_width=" << shortest(cfg.center_width)
        << " radius_depth=" << shortest(cfg.radius_depth) << " radius_width=" << shortest(cfg.radius_width)
        << " keep_fraction=" << shortest(cfg.keep_fraction) << '\n';

    auto decide = [cfg](const std::string& line) {
      LineResult r{line, false, {}};
      try {
        const FilterVerdict v = classify(compute_metrics(resolve_arch(line)), cfg);
        r.emit = v == FilterVerdict::Keep;
        if (!r.emit) r.tag = to_string(v);
      } catch (const Error& e) {
        r.tag = to_string(e.code());
      }
      return r;
    };
    std::size_t kept = 0, dropped = 0;
    std::map<std::string, std::size_t> reasons;
    auto sink = [&](const LineResult& r) {
      if (r.emit) {
        out << r.text << '\n';
        ++kept;
      } else {
        ++dropped;
        ++reasons[r.tag];
      }
    };
    if (opts.auto_config) {
      for (const auto& line : buffered) sink(decide(line));
    } else {
      process_ordered(src, opts.jobs, decide, sink);
    }
    err << "kept=" << kept << '\n' << "dropped=" << dropped << '\n';
    for (const auto& [reason, n] : reasons) err << "drop." << reason << '=' << n << '\n';
    return kExitOk;
  } catch (const Error& e) {
    return report_error(err, e);
  }
}

// ---------------------------------------------------------------------------

int cmd_kernel(std::ostream& out, std::ostream& err, const KernelOptions& opts) {
  try {
    std::vector<double> grid;
    if (opts.grid) grid = parse_grid(*opts.grid);
    if (opts.k0) grid.push_back(*opts.k0);
    if (grid.empty()) grid.push_back(0.5);
    for (double k0 : grid) {
      if (!(k0 >= 0.0 && k0 < 1.0)) {
        throw Error(ErrorCode::DomainError, "k0 must lie in [0, 1), got " + general(k0));
      }
    }

    const bool single_graph = opts.graph_path || opts.arch;
    if (opts.dags && *opts.dags != "builtin3") {
      throw Error(ErrorCode::InvalidConfig, "unknown --dags value '" + *opts.dags + "' (expected builtin3)");
    }
    if (single_graph == opts.dags.has_value()) {
      throw Error(ErrorCode::ConfigMissing, "give exactly one of --dags builtin3, --graph, --arch");
    }

    if (opts.dags) {
      out << "# kernel dags=builtin3 points=" << grid.size() << '\n'
          << "# k0\tlambda1\tlambda2\tlambda3\tordering\n";
      bool all_ok = true;
      for (const auto& row : ordering_rows(grid)) {
        const bool ok = row.strictly_ordered();
        all_ok = all_ok && ok;
        out << general(row.k0) << '\t' << general(row.lambda1, 15) << '\t' << general(row.lambda2, 15)
            << '\t' << general(row.lambda3, 15) << '\t' << (ok ? "ok" : "VIOLATION") << '\n';
      }
      if (!all_ok) throw Error(ErrorCode::OrderingViolation, "lambda1 < lambda2 < lambda3 fails on the grid");
      return kExitOk;
    }

    const ArchGraph g = opts.graph_path ? parse_dag_dsl(read_file(*opts.graph_path)) : parse_nb201(*opts.arch);
    if (opts.gram_path) {
      std::ifstream f(*opts.gram_path);
      if (!f) throw Error(ErrorCode::IoError, "cannot open '" + *opts.gram_path + "'");
      const Eigen::MatrixXd k = full_kernel(g, read_matrix(f));
      write_matrix(out, k);
      const EigBound pb = pairwise_bound(k);
      err << std::setprecision(15) << "lambda_min=" << min_eigenvalue(k) << '\n'
          << "pairwise_bound=" << pb.lambda_upper << '\n'
          << "pair=" << pb.pair_index.first << ',' << pb.pair_index.second << '\n';
      return kExitOk;
    }
    const PathProfile profile = enumerate_paths(g);
    out << "# kernel graph=" << (opts.graph_path ? *opts.graph_path : *opts.arch) << " P=" << profile.num_paths
        << '\n'
        << "# k0\tk_ii\tk_jj\tk_ij\tlambda_exact\tlambda_rule\n";
    for (double k0 : grid) {
      const PairKernelState s = propagate_graph(g, k0);
      out << general(k0) << '\t' << general(s.k_ii, 15) << '\t' << general(s.k_jj, 15) << '\t'
          << general(s.k_ij, 15) << '\t' << general(lambda_bound(s).lambda_upper, 15) << '\t'
          << general(simplified_rule_bound(profile, k0), 15) << '\n';
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(err, e);
  }
}

// ---------------------------------------------------------------------------

int cmd_correlate(std::istream& in, std::ostream& out, std::ostream& err, const CorrelateOptions& opts) {
  try {
    IngestResult data;
    if (opts.csv_path.empty() || opts.csv_path == "-") {
      data = ingest_csv(in);
    } else {
      std::ifstream f(opts.csv_path);
      if (!f) throw Error(ErrorCode::IoError, "cannot open '" + opts.csv_path + "'");
      data = ingest_csv(f);
    }
    for (const auto& e : data.errors) {
      err << "row=" << e.row << " code=" << to_string(e.code) << " reason=" << e.reason << '\n';
    }
    err << "records=" << data.records.size() << '\n' << "row_errors=" << data.errors.size() << '\n';
    const auto bins = bin_by_metrics(data.records);
    const MultiCorrelation mc = multi_correlation(data.records, opts.mode);
    out << "# correlate mode=" << (opts.mode == CorrelationMode::PerRecord ? "record" : "bin")
        << " records=" << data.records.size() << " bins=" << bins.size() << '\n'
        << "# r_depth=" << general(mc.r_depth) << " r_width=" << general(mc.r_width)
        << " r_depth_width=" << general(mc.r_predictors) << '\n'
        << "# d_bar\tm_bar\tcount\tmean_acc\tstd_acc\n";
    for (const auto& b : bins) {
      out << general(b.eff_depth) << '\t' << general(b.eff_width) << '\t' << b.count << '\t'
          << general(b.mean_acc) << '\t' << general(b.std_acc) << '\n';
    }
    out << "R=" << general(mc.r, 12) << '\n';
    return kExitOk;
  } catch (const Error& e) {
    return report_error(err, e);
  }
}

// ---------------------------------------------------------------------------

int cmd_simulate(std::ostream& out, std::ostream& err, const SimulateOptions& opts) {
  try {
    std::vector<builtin::NamedGraph> graphs;
    if (opts.builtin3) graphs = builtin::reference_dags();
    for (const auto& p : opts.graph_paths) graphs.push_back({p, parse_dag_dsl(read_file(p))});
    for (const auto& a : opts.archs) graphs.push_back({a, parse_nb201(a)});
    if (graphs.size() < 2) throw Error(ErrorCode::ConfigMissing, "need at least two graphs (--builtin3, --graph, --arch)");
    if (opts.seeds < 1) throw Error(ErrorCode::InvalidConfig, "--seeds must be >= 1");

    Dataset data;
    std::string data_desc;
    if (opts.features_csv) {
      std::ifstream f(*opts.features_csv);
      if (!f) throw Error(ErrorCode::IoError, "cannot open '" + *opts.features_csv + "'");
      data = read_csv_features(f);
      data_desc = "csv:" + *opts.features_csv;
    } else {
      data = make_gaussian_blobs(opts.blobs);
      std::ostringstream d;
      d << "blobs(classes=" << opts.blobs.num_classes << ",clusters_per_class=" << opts.blobs.clusters_per_class
        << ",samples=" << opts.blobs.num_samples << ",dim=" << opts.blobs.dim << ",noise=" << opts.blobs.noise
        << ",seed=" << opts.blobs.seed << ")";
      data_desc = d.str();
    }
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < opts.seeds; ++i) seeds.push_back(opts.base_seed + static_cast<std::uint64_t>(i));

    const auto rows = compare_dags(graphs, data, opts.sim, seeds, opts.threshold);

    out << "# simulate width=" << opts.sim.width << " lr=" << opts.sim.lr << " batch_size=" << opts.sim.batch_size
        << " epochs=" << opts.sim.epochs << " loss=" << (opts.sim.loss == Loss::Mse ? "mse" : "ce")
        << " signs=" << (opts.sim.signs == SignMode::Symmetric ? "symmetric" : "plain")
        << " threshold=" << opts.threshold << " seeds=" << seeds.front() << ".." << seeds.back()
        << " data=" << data_desc << '\n'
        << "# rank\tname\tmedian_epochs\tmedian_final_acc\tepochs_per_seed\n";
    int rank = 0;
    for (const auto& row : rows) {
      out << ++rank << '\t' << row.name << '\t'
          << (row.median_epochs ? general(*row.median_epochs) : std::string("none")) << '\t'
          << general(row.median_final_accuracy, 6) << '\t';
      for (std::size_t i = 0; i < row.runs.size(); ++i) {
        const auto& run = row.runs[i];
        out << (i ? "," : "") << (run.epochs_to_threshold ? std::to_string(*run.epochs_to_threshold) : "none");
        if (!run.error.empty()) err << "run=" << row.name << " seed=" << run.seed << " error=" << run.error << '\n';
        if (opts.trace_dir) {
          std::filesystem::create_directories(*opts.trace_dir);
          std::string stem = row.name;
          for (char& c : stem) {
            if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
          }
          std::ofstream f(std::filesystem::path(*opts.trace_dir) / (stem + "_seed" + std::to_string(run.seed) + ".csv"));
          if (!f) throw Error(ErrorCode::IoError, "cannot write traces under '" + *opts.trace_dir + "'");
          run.trace.write_csv(f);
        }
      }
      out << '\n';
      std::optional<double> worst;
      for (const auto& run : row.runs) {
        if (run.error.empty()) worst = std::min(worst.value_or(1.0), run.trace.nonincreasing_fraction());
      }
      err << "loss_nonincreasing." << row.name << '='
          << (worst ? general(*worst, 4) + (*worst < 0.9 ? " (below 0.9)" : "") : std::string("n/a")) << '\n';
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(err, e);
  }
}

// ---------------------------------------------------------------------------

int cmd_space_stats(std::istream& in, std::ostream& out, std::ostream& err, const SpaceStatsOptions& opts) {
  try {
    struct Variant {
      std::string name;
      std::optional<int> param_edges;
      ExtremesAccumulator acc;
    };
    std::vector<Variant> variants;
    if (opts.param_edges) {
      variants.push_back({"param_edges=" + std::to_string(*opts.param_edges), opts.param_edges, {}});
    } else {
      variants.push_back({"all", std::nullopt, {}});
      if (opts.nb201_space) variants.push_back({"param_edges=3", 3, {}});
    }
    LineSource src(in, opts.nb201_space);
    std::string line;
    std::size_t unparsable = 0;
    while (src.next(line)) {
      ArchGraph g;
      try {
        g = resolve_arch(line);
      } catch (const Error&) {
        ++unparsable;
        continue;
      }
      const auto params = static_cast<int>(g.count(OpKind::Param));
      for (auto& v : variants) {
        if (!v.param_edges || *v.param_edges == params) v.acc.add(g);
      }
    }
    if (unparsable) err << "unparsable=" << unparsable << '\n';
    out << "# space-stats keep_fraction=" << opts.keep_fraction << '\n'
        << "# space\tused\tskipped\td_min\td_max\tm_min\tm_max\tcenter_depth\tcenter_width\tradius_depth\tradius_"
           "width\n";
    std::optional<FilterConfig> first;
    for (const auto& v : variants) {
      const SpaceExtremes ext = finish(v.acc, opts.keep_fraction);
      if (!first) first = ext.config;
      out << v.name << '\t' << ext.used << '\t' << ext.skipped << '\t' << general(ext.depth_min) << '\t'
          << general(ext.depth_max) << '\t' << general(ext.width_min) << '\t' << general(ext.width_max) << '\t'
          << general(ext.config.center_depth) << '\t' << general(ext.config.center_width) << '\t'
          << general(ext.config.radius_depth) << '\t' << general(ext.config.radius_width) << '\n';
    }
    if (opts.write_config && first) {
      std::ofstream f(*opts.write_config);
      if (!f) throw Error(ErrorCode::IoError, "cannot write '" + *opts.write_config + "'");
      write_filter_config(f, *first);
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(err, e);
  }
}

}  // namespace dagconv::cli
