#include "foray/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string_view>

#include "CLI11.hpp"
#include "foray/emitter.hpp"
#include "foray/error.hpp"
#include "foray/model.hpp"
#include "foray/synth.hpp"
#include "foray/trace.hpp"

namespace foray::cli {

namespace {

// FORAY_LOG = error | warn | info | debug (default warn).
class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {
    if (const char* v = std::getenv("FORAY_LOG")) {
      const std::string_view s(v);
      level_ = s == "error" ? 0 : s == "warn" ? 1 : s == "info" ? 2 : s == "debug" ? 3 : 1;
    }
  }
  void info(const std::string& msg) const {
    if (level_ >= 2) err_ << "foray: " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ >= 3) err_ << "foray: " << msg << '\n';
  }

 private:
  std::ostream& err_;
  int level_ = 1;
};

struct AnalyzeFlags {
  std::string trace;
  std::string emit = "c";
  std::string out;
  std::uint64_t nexec = 20;
  std::uint64_t nloc = 10;
  std::size_t footprint_cap = 0;
  bool stats = false;
};

struct SynthFlags {
  std::string spec;
  std::uint64_t seed = 0;
  std::string out = "-";
};

struct CheckFlags {
  std::string spec;
  std::uint64_t seed = 0;
  std::size_t random = 0;
  std::uint64_t nexec = 20;
  std::uint64_t nloc = 10;
  bool quiet = false;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::ios_base::failure("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_artifact(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw std::ios_base::failure("cannot write " + path);
}

int cmd_analyze(const AnalyzeFlags& fl, std::istream& in, std::ostream& out, std::ostream& err,
                const Log& log) {
  FilterConfig cfg;
  cfg.n_exec = fl.nexec;
  cfg.n_loc = fl.nloc;
  cfg.footprint_cap = fl.footprint_cap;

  std::ifstream file;
  std::istream* src = &in;
  if (fl.trace != "-") {
    file.open(fl.trace, std::ios::binary);
    if (!file) {
      err << "foray: cannot open trace " << fl.trace << '\n';
      return kIoError;
    }
    src = &file;
  }

  const auto t0 = std::chrono::steady_clock::now();
  ForayModel model;
  try {
    TraceReader reader(*src);
    model = analyze(reader, cfg);
  } catch (const TraceError& e) {
    err << "foray: " << e.what() << '\n';
    return kIoError;
  }
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  log.info("analyzed " + std::to_string(model.memory_events) + " accesses, " +
           std::to_string(model.checkpoint_events) + " checkpoints in " + std::to_string(ms) +
           " ms; peak live state " + std::to_string(model.peak_live_state));

  const bool want_c = fl.emit == "c" || fl.emit == "both";
  const bool want_report = fl.emit == "report" || fl.emit == "both";
  const std::string prefix = fl.out;
  try {
    if (want_c) write_artifact(prefix.empty() ? "" : prefix + ".c", emit_c(model), out);
    if (want_report)
      write_artifact(prefix.empty() ? "" : prefix + ".json", emit_report(model), out);
    if (fl.stats)
      write_artifact(prefix.empty() ? "" : prefix + ".stats.txt", format_stats(model.stats), out);
  } catch (const std::ios_base::failure& e) {
    err << "foray: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}

int cmd_synth(const SynthFlags& fl, std::ostream& out, std::ostream& err) {
  synth::WorkloadSpec spec;
  try {
    spec = synth::parse_spec(read_file(fl.spec));
  } catch (const std::ios_base::failure& e) {
    err << "foray: " << e.what() << '\n';
    return kIoError;
  } catch (const SpecError& e) {
    err << "foray: " << e.what() << '\n';
    return kFailure;
  }

  std::ofstream file;
  std::ostream* dst = &out;
  if (fl.out != "-") {
    file.open(fl.out, std::ios::binary);
    if (!file) {
      err << "foray: cannot write " << fl.out << '\n';
      return kIoError;
    }
    dst = &file;
  }
  try {
    synth::run(spec, fl.seed,
               synth::EventSink{[&](const TraceRecord& r) { *dst << encode_record(r) << '\n'; },
                                {}});
  } catch (const SpecError& e) {
    err << "foray: " << e.what() << '\n';
    return kFailure;
  }
  dst->flush();
  if (!*dst) {
    err << "foray: write failed\n";
    return kIoError;
  }
  return kOk;
}

int cmd_check(const CheckFlags& fl, std::ostream& out, std::ostream& err, const Log& log) {
  FilterConfig cfg;
  cfg.n_exec = fl.nexec;
  cfg.n_loc = fl.nloc;

  if (fl.random > 0) {
    std::size_t failed = 0, refs = 0;
    for (std::size_t i = 0; i < fl.random; ++i) {
      const std::uint64_t seed = fl.seed + i;
      const auto spec = synth::random_spec(seed);
      const auto rep = synth::check(spec, seed, cfg);
      refs += rep.references;
      log.debug("random spec " + std::to_string(seed) + ": " + std::to_string(rep.references) +
                " references");
      if (!rep.ok()) {
        ++failed;
        out << "spec seed " << seed << ": " << rep.mismatches.size() << " mismatches\n";
        if (!fl.quiet)
          for (const auto& m : rep.mismatches) out << "  " << m << '\n';
      }
    }
    out << "checked " << fl.random << " random specs, " << refs << " references: " << failed
        << " failing specs\n";
    return failed ? kFailure : kOk;
  }

  if (fl.spec.empty()) {
    err << "foray: check needs --spec or --random\n";
    return kIoError;
  }
  synth::CheckReport rep;
  try {
    rep = synth::check(synth::parse_spec(read_file(fl.spec)), fl.seed, cfg);
  } catch (const std::ios_base::failure& e) {
    err << "foray: " << e.what() << '\n';
    return kIoError;
  } catch (const SpecError& e) {
    err << "foray: " << e.what() << '\n';
    return kFailure;
  }
  for (const auto& m : rep.mismatches) out << m << '\n';
  out << "checked " << rep.references << " references: " << rep.mismatches.size()
      << " mismatches\n";
  return rep.ok() ? kOk : kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Loop-nest and affine index expression extraction from memory traces", "foray"};
  app.require_subcommand(1);

  AnalyzeFlags af;
  auto* analyze_cmd = app.add_subcommand("analyze", "Build a model from a trace");
  analyze_cmd->add_option("--trace", af.trace, "Trace file, or - for standard input")->required();
  analyze_cmd->add_option("--emit", af.emit, "Output: c, report or both")
      ->check(CLI::IsMember({"c", "report", "both"}));
  analyze_cmd->add_option("--out", af.out, "Output path prefix (default: standard output)");
  analyze_cmd->add_option("--nexec", af.nexec, "Minimum executions")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--nloc", af.nloc, "Minimum distinct addresses")
      ->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--footprint-cap", af.footprint_cap,
                          "Stop tracking distinct addresses past this many (0 = exact)");
  analyze_cmd->add_flag("--stats", af.stats, "Also print per-category statistics");

  SynthFlags sf;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a trace from a workload spec");
  synth_cmd->add_option("--spec", sf.spec, "Workload spec (JSON)")->required();
  synth_cmd->add_option("--seed", sf.seed, "Seed for perturbation and noise");
  synth_cmd->add_option("--out", sf.out, "Trace output path, or - for standard output");

  CheckFlags cf;
  auto* check_cmd = app.add_subcommand("check", "Compare analysis against the workload oracle");
  check_cmd->add_option("--spec", cf.spec, "Workload spec (JSON)");
  check_cmd->add_option("--random", cf.random, "Check this many seeded random specs instead");
  check_cmd->add_option("--seed", cf.seed, "Seed (first seed with --random)");
  check_cmd->add_option("--nexec", cf.nexec, "Minimum executions")->check(CLI::PositiveNumber);
  check_cmd->add_option("--nloc", cf.nloc, "Minimum distinct addresses")->check(CLI::PositiveNumber);
  check_cmd->add_flag("--quiet", cf.quiet, "Only print per-spec summaries");

  std::vector<std::string> argv_store{"foray"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "foray: " << e.what() << '\n';
    return kIoError;
  }

  const Log log(err);
  if (analyze_cmd->parsed()) return cmd_analyze(af, in, out, err, log);
  if (synth_cmd->parsed()) return cmd_synth(sf, out, err);
  return cmd_check(cf, out, err, log);
}

}  // namespace foray::cli
