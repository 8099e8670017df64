// lee: command-line front end.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "lee/bench/bench.hpp"
#include "lee/bench/latent.hpp"
#include "lee/cli/run_config.hpp"
#include "lee/expr/codec.hpp"
#include "lee/model/checkpoint.hpp"
#include "lee/search/search.hpp"
#include "lee/train/trainer.hpp"
#include "lee/util/fields.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lee;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key = value config file");
  cmd->add_option("--set", c.overrides, "override, e.g. --set search.iterations=50");
  cmd->add_option("--seed", c.seed, "root seed");
  cmd->add_option("--workers", c.workers, "parallel rounds (LEE_WORKERS overrides)");
}

cli::RunConfig load_config(const Common& c) {
  cli::RunConfig cfg;
  if (!c.config_file.empty()) cfg.merge_file(c.config_file);
  for (const auto& kv : c.overrides) cfg.merge_text(kv, "--set");
  if (c.seed) cfg.seed = *c.seed;
  cfg.resolve();
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", p.string()));
  return out;
}

json header(const std::string& command, const cli::RunConfig& cfg, const std::string& checkpoint = {}) {
  json h;
  h["command"] = command;
  h["config"] = cfg.echo();
  if (!checkpoint.empty()) h["checkpoint_provenance"] = checkpoint;
  return h;
}

std::unique_ptr<model::Model> load_model(const std::string& path, model::CheckpointInfo& info) {
  return model::load_checkpoint(path, &info);
}

search::Mode mode_arg(const std::string& name) {
  const auto m = search::parse_mode(name);
  if (!m) throw UsageError(fmt::format("unknown mode '{}' (iter, grad, pg, oneshot, cmaes)", name));
  return *m;
}

std::vector<fs::path> dataset_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        if (e.is_regular_file() && (e.path().extension() == ".csv" || e.path().extension() == ".tsv" ||
                                    e.path().extension() == ".txt")) {
          found.push_back(e.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(in);
    }
  }
  if (out.empty()) throw UsageError("no dataset files found");
  return out;
}

json candidate_json(const search::TrialResult& t) {
  json j;
  j["r2_test"] = t.r2_test ? json(*t.r2_test) : json(nullptr);
  if (t.winner) {
    j["expr_text"] = t.winner->text;
    j["expr_infix"] = t.winner->expr.to_infix();
    j["complexity"] = t.complexity;
    j["r2_val"] = t.winner->r2_val;
  }
  json rounds = json::array();
  for (const auto& r : t.rounds) {
    json jr;
    jr["failed"] = r.failed;
    if (r.failed) jr["diagnostic"] = r.diagnostic;
    if (r.winner) {
      jr["expr_text"] = r.winner->text;
      jr["r2_val"] = r.winner->r2_val;
      jr["origin"] = std::string(search::origin_name(r.winner->origin));
    }
    jr["fallback_applied"] = r.fallback_applied;
    jr["decodes"] = r.decodes;
    jr["gradient_decodes"] = r.gradient_decodes;
    jr["unparseable"] = r.unparseable;
    rounds.push_back(jr);
  }
  j["rounds"] = rounds;
  return j;
}

// ---- commands ----

int cmd_gen_data(const Common& c, const std::string& out_dir, std::optional<std::size_t> n) {
  cli::RunConfig cfg = load_config(c);
  if (n) cfg.data.n_total = *n;
  auto opts = cfg.data;
  if (opts.k_max == 0) opts.k_max = cfg.grammar.k_max;
  const auto corpus = datagen::build_corpus(cfg.grammar, opts);
  datagen::write_corpus(corpus, out_dir);
  json j;
  j["records"] = corpus.records.size();
  j["duplicates"] = corpus.duplicates;
  j["coverage_relaxed"] = corpus.coverage_relaxed;
  for (auto s : {datagen::Split::Train, datagen::Split::Val, datagen::Split::Test})
    j[std::string(datagen::split_name(s))] = corpus.split(s).size();
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& data_dir, const std::string& out, const std::string& log_path) {
  const cli::RunConfig cfg = load_config(c);
  const auto corpus = datagen::read_corpus(data_dir);
  if (corpus.k_max > cfg.model.k_max) {
    throw util::ConfigError(fmt::format("corpus k_max {} exceeds model.k_max {}", corpus.k_max, cfg.model.k_max));
  }
  const std::uint64_t init_seed = mix_seed(cfg.seed, seed_stream::kInit);
  model::Model m(cfg.model, init_seed);
  std::size_t dropped = 0;
  const auto train = train::make_examples(corpus, datagen::Split::Train, cfg.train, cfg.model.max_len, &dropped);
  const auto val = train::make_examples(corpus, datagen::Split::Val, cfg.train, cfg.model.max_len);
  std::optional<std::ofstream> log;
  if (!log_path.empty()) {
    log = open_out(log_path);
    *log << header("train", cfg).dump() << "\n";
  }
  const auto summary = train::Trainer(m, cfg.train).run(train, val, log ? &*log : nullptr);
  const std::string provenance = cfg.echo() + "# corpus\n" + corpus.config_echo;
  model::save_checkpoint(m, out, init_seed, provenance);
  json j;
  j["checkpoint"] = out;
  j["parameters"] = m.parameter_count();
  j["steps"] = summary.steps;
  j["skipped_steps"] = summary.skipped_steps;
  j["dropped_records"] = dropped;
  j["loss_total_train"] = summary.last_train.total;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_infer(const Common& c, const std::string& ckpt, const std::string& data, const std::string& mode_s,
              std::optional<int> iters, int trial, const std::string& out, const std::string& convergence) {
  cli::RunConfig cfg = load_config(c);
  if (iters) cfg.search.iterations = *iters;
  cfg.search.validate();
  model::CheckpointInfo info;
  const auto m = load_model(ckpt, info);
  const auto ds = bench::read_dataset(data);
  const auto mode = mode_arg(mode_s);
  const auto t = search::run_trial(ds, cfg.protocol.eps, *m, cfg.search, mode, trial, cfg.protocol.s_base,
                                   cfg.protocol, cli::effective_workers(c.workers));
  json j = json::parse(bench::to_json_line(bench::make_record(ds, "", cfg.protocol.eps, t)));
  j["detail"] = candidate_json(t);
  if (!out.empty()) {
    auto f = open_out(out);
    f << header("infer", cfg, info.provenance).dump() << "\n" << j.dump() << "\n";
  }
  if (!convergence.empty()) {
    auto f = open_out(convergence);
    bench::write_convergence_csv(ds.name, t, f, true);
  }
  std::cout << j.dump() << "\n";
  return 0;
}

struct BenchArgs {
  std::string ckpt;
  std::vector<std::string> data;
  std::vector<std::string> modes{"pg"};
  std::optional<int> trials;
  std::vector<double> eps;
  std::string out = "report.jsonl";
  std::string summary;
  std::string plots;
};

int cmd_bench(const Common& c, BenchArgs a) {
  cli::RunConfig cfg = load_config(c);
  if (a.trials) cfg.protocol.n_trials = *a.trials;
  if (a.eps.empty()) a.eps = {cfg.protocol.eps};
  cfg.validate();
  model::CheckpointInfo info;
  const auto m = load_model(a.ckpt, info);
  const int workers = cli::effective_workers(c.workers);
  std::vector<search::Mode> modes;
  for (const auto& s : a.modes) modes.push_back(mode_arg(s));

  auto report = open_out(a.out);
  json h = header("bench", cfg, info.provenance);
  h["eps"] = a.eps;
  h["modes"] = a.modes;
  report << h.dump() << "\n";

  std::map<std::string, std::vector<bench::ReportRecord>> by_mode;
  std::map<std::string, std::string> convergence;
  for (const auto& file : dataset_files(a.data)) {
    const auto ds = bench::read_dataset(file);
    const std::string group = file.parent_path().filename().string();
    for (double eps : a.eps) {
      for (int trial = 0; trial < cfg.protocol.n_trials; ++trial) {
        for (auto mode : modes) {
          const auto t = search::run_trial(ds, eps, *m, cfg.search, mode, trial, cfg.protocol.s_base, cfg.protocol,
                                           workers);
          const auto rec = bench::make_record(ds, group, eps, t);
          report << bench::to_json_line(rec) << "\n";
          report.flush();
          by_mode[rec.mode].push_back(rec);
          std::ostringstream conv;
          bench::write_convergence_csv(ds.name, t, conv, false);
          convergence[rec.mode] += conv.str();
          std::cerr << fmt::format("{} eps={} trial={} mode={} r2_test={}\n", ds.name, eps, trial, rec.mode,
                                   rec.r2_test ? fmt::format("{:.4f}", *rec.r2_test) : "null");
        }
      }
    }
  }

  auto write_echo = [&](std::ostream& os) {
    std::istringstream echo(cfg.echo());
    for (std::string line; std::getline(echo, line);) os << "# " << line << "\n";
  };
  if (!a.summary.empty()) {
    auto f = open_out(a.summary);
    write_echo(f);
    f << "mode,group,eps,r2_mean,r2_std,complexity_mean,complexity_std,datasets,trials,failures\n";
    for (const auto& [mode, recs] : by_mode) {
      for (const auto& s : bench::aggregate(recs)) {
        f << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", mode, s.group, s.eps, s.r2_mean, s.r2_std,
                         s.complexity_mean, s.complexity_std, s.datasets, s.trials, s.failures);
      }
    }
  }
  if (!a.plots.empty()) {
    fs::create_directories(a.plots);
    for (const auto& [mode, recs] : by_mode) {
      std::vector<bench::FrontPoint> pts;
      for (const auto& r : recs)
        if (r.r2_test) pts.push_back({*r.r2_test, static_cast<double>(*r.complexity)});
      auto f = open_out(fs::path(a.plots) / fmt::format("front_{}.csv", mode));
      bench::write_front_csv(bench::pareto_front(pts), f);
      auto g = open_out(fs::path(a.plots) / fmt::format("convergence_{}.csv", mode));
      g << "dataset,trial,round,iteration,best_score,best_r2_train,best_complexity\n" << convergence[mode];
    }
  }
  return 0;
}

int cmd_probe(const Common& c, const std::string& ckpt, const std::string& data_dir, const std::string& split_s,
              std::size_t limit, int high_dim_k, const std::string& out) {
  const cli::RunConfig cfg = load_config(c);
  model::CheckpointInfo info;
  const auto m = load_model(ckpt, info);
  const auto corpus = datagen::read_corpus(data_dir);
  datagen::Split split = datagen::Split::Test;
  if (split_s == "train") split = datagen::Split::Train;
  else if (split_s == "val") split = datagen::Split::Val;
  else if (split_s != "test") throw UsageError("--split must be train, val or test");
  auto recs = corpus.split(split);
  if (recs.size() > limit) recs.resize(limit);
  if (recs.empty()) throw UsageError("no records in the chosen split");
  const auto z = bench::encode_records(*m, recs);

  std::optional<std::ofstream> file;
  if (!out.empty()) {
    file = open_out(out);
    *file << header("probe", cfg, info.provenance).dump() << "\n";
  }
  bench::ProbeConfig pc;
  pc.seed = cfg.seed;
  for (const auto& labeler : bench::standard_labelers(high_dim_k)) {
    std::vector<int> labels;
    for (const auto* r : recs) labels.push_back(labeler.label(expr::parse_text(r->text), r->k));
    const auto task = labeler.multiclass ? bench::ProbeTask::Multiclass : bench::ProbeTask::Binary;
    const auto res = bench::linear_probe(z, labels, task, pc);
    json j;
    j["probe"] = labeler.name;
    j["records"] = recs.size();
    j["skipped"] = res.skipped;
    if (res.skipped) {
      j["reason"] = res.reason;
      std::cerr << fmt::format("probe {} skipped: {}\n", labeler.name, res.reason);
    } else {
      j["classes"] = res.classes;
      j["accuracy"] = res.accuracy;
      j["majority"] = res.majority;
      j["auc"] = res.auc ? json(*res.auc) : json(nullptr);
      if (res.auc) {
        auto shuffled = labels;
        Rng rng(mix_seed(cfg.seed, seed_stream::kShuffle));
        rng.shuffle(shuffled);
        const auto null = bench::linear_probe(z, shuffled, task, pc);
        j["null_auc"] = null.auc ? json(*null.auc) : json(nullptr);
      }
    }
    std::cout << j.dump() << "\n";
    if (file) *file << j.dump() << "\n";
  }
  return 0;
}

int cmd_interp(const Common& c, const std::string& ckpt, const std::string& a_text, const std::string& b_text,
               const std::string& out) {
  const cli::RunConfig cfg = load_config(c);
  model::CheckpointInfo info;
  const auto m = load_model(ckpt, info);
  const expr::Expr a = expr::parse_text(a_text), b = expr::parse_text(b_text);
  const int k = std::max({1, a.max_variable() + 1, b.max_variable() + 1});
  Rng rng(mix_seed(cfg.seed, seed_stream::kData));
  const auto sa = datagen::sample_scatter(a, rng, static_cast<std::size_t>(cfg.grammar.n_scatter), k, cfg.grammar);
  const auto sb = datagen::sample_scatter(b, rng, static_cast<std::size_t>(cfg.grammar.n_scatter), k, cfg.grammar);
  const auto grid = datagen::query_grid(k, cfg.grammar.domain_lo, cfg.grammar.domain_hi);
  const expr::MatrixView q{grid, grid.size() / static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
  bench::InterpConfig ic;
  ic.seed = cfg.seed;
  ic.temperature = cfg.search.temperature;
  ic.max_len = cfg.search.max_len;
  std::optional<std::ofstream> file;
  if (!out.empty()) {
    file = open_out(out);
    *file << header("interp", cfg, info.provenance).dump() << "\n";
  }
  for (const auto& s : bench::interpolate(*m, a, sa, b, sb, q, ic)) {
    json j;
    j["t"] = s.t;
    j["z"] = s.z;
    j["parsed"] = s.parsed;
    if (s.best) {
      j["expr_text"] = expr::canonical_text(*s.best);
      j["expr_infix"] = s.best->to_infix();
      j["mae"] = s.mae;
    } else {
      j["expr_text"] = nullptr;
    }
    std::cout << j.dump() << "\n";
    if (file) *file << j.dump() << "\n";
  }
  return 0;
}

int cmd_inspect(const std::string& ckpt) {
  model::CheckpointInfo info;
  const auto m = load_model(ckpt, info);
  std::cout << "# model config\n" << model::config_text(info.config);
  std::cout << fmt::format("# init_seed = {}\n", info.init_seed);
  if (!info.provenance.empty()) {
    std::cout << "# provenance\n";
    std::istringstream p(info.provenance);
    for (std::string line; std::getline(p, line);) std::cout << "#   " << line << "\n";
  }
  static constexpr const char* kGroups[] = {"encoder", "expr_decoder", "eval_decoder"};
  std::cout << "# parameters\n";
  for (const auto& p : m->params()) {
    std::cout << fmt::format("{} {} {}x{}\n", p.name, kGroups[static_cast<int>(p.group)], p.tensor.value().rows(),
                             p.tensor.value().cols());
  }
  std::cout << fmt::format("# total {}\n", m->parameter_count());
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int fail(std::string_view kind, const std::exception& e, int code) {
  std::cerr << "error: " << kind << ": " << one_line(e.what()) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lee: latent expression search"};
  app.require_subcommand(1);
  Common common;

  std::string out_dir;
  std::optional<std::size_t> n_total;
  auto* gen = app.add_subcommand("gen-data", "sample a corpus");
  add_common(gen, common);
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--n", n_total, "expressions to draw (data.n_total)");

  std::string data_dir, ckpt_out, log_path;
  auto* train = app.add_subcommand("train", "train a model on a corpus");
  add_common(train, common);
  train->add_option("--data", data_dir, "corpus directory")->required();
  train->add_option("--out", ckpt_out, "checkpoint path")->required();
  train->add_option("--log", log_path, "JSONL loss log");

  std::string ckpt, data_file, mode = "pg", out, convergence;
  std::optional<int> iters;
  int trial = 0;
  auto* infer = app.add_subcommand("infer", "search one dataset");
  add_common(infer, common);
  infer->add_option("--ckpt", ckpt)->required();
  infer->add_option("--data", data_file, "delimited x0..,y file")->required();
  infer->add_option("--mode", mode, "iter, grad, pg, oneshot or cmaes");
  infer->add_option("--iters", iters, "search.iterations");
  infer->add_option("--trial", trial);
  infer->add_option("--out", out, "JSONL record with config header");
  infer->add_option("--convergence", convergence, "convergence CSV");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "benchmark over datasets, noise levels, trials and modes");
  add_common(bench, common);
  bench->add_option("--ckpt", bench_args.ckpt)->required();
  bench->add_option("--data", bench_args.data, "dataset files or directories")->required();
  bench->add_option("--mode", bench_args.modes, "one or more modes")->delimiter(',');
  bench->add_option("--trials", bench_args.trials);
  bench->add_option("--eps", bench_args.eps, "noise levels")->delimiter(',');
  bench->add_option("--out", bench_args.out, "JSONL report");
  bench->add_option("--summary", bench_args.summary, "aggregate CSV");
  bench->add_option("--plots", bench_args.plots, "directory for frontier and convergence CSVs");

  std::string split = "test";
  std::size_t limit = 5000;
  int high_dim_k = 2;
  auto* probe = app.add_subcommand("probe", "linear property probes on latents");
  add_common(probe, common);
  probe->add_option("--ckpt", ckpt)->required();
  probe->add_option("--data", data_dir, "corpus directory")->required();
  probe->add_option("--split", split);
  probe->add_option("--limit", limit, "max records");
  probe->add_option("--high-dim-k", high_dim_k);
  probe->add_option("--out", out);

  std::string a_text, b_text;
  auto* interp = app.add_subcommand("interp", "latent interpolation between two expressions");
  add_common(interp, common);
  interp->add_option("--ckpt", ckpt)->required();
  interp->add_option("--a", a_text, "token text, e.g. 'add x0 x1'")->required();
  interp->add_option("--b", b_text)->required();
  interp->add_option("--out", out);

  auto* inspect = app.add_subcommand("inspect-ckpt", "print checkpoint config and parameters");
  inspect->add_option("--ckpt", ckpt)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("UsageError", e, 2);
  }

  try {
    if (*gen) return cmd_gen_data(common, out_dir, n_total);
    if (*train) return cmd_train(common, data_dir, ckpt_out, log_path);
    if (*infer) return cmd_infer(common, ckpt, data_file, mode, iters, trial, out, convergence);
    if (*bench) return cmd_bench(common, bench_args);
    if (*probe) return cmd_probe(common, ckpt, data_dir, split, limit, high_dim_k, out);
    if (*interp) return cmd_interp(common, ckpt, a_text, b_text, out);
    if (*inspect) return cmd_inspect(ckpt);
  } catch (const util::ConfigError& e) {
    return fail("ConfigError", e, 2);
  } catch (const UsageError& e) {
    return fail("UsageError", e, 2);
  } catch (const expr::ParseError& e) {
    return fail("ParseError", e, 1);
  } catch (const bench::ProtocolViolation& e) {
    return fail("ProtocolViolation", e, 1);
  } catch (const train::TrainingAborted& e) {
    return fail("TrainingAborted", e, 1);
  } catch (const search::RoundFailure& e) {
    return fail("RoundFailure", e, 1);
  } catch (const std::invalid_argument& e) {
    return fail("InvalidArgument", e, 1);
  } catch (const std::runtime_error& e) {
    return fail("RuntimeError", e, 1);
  } catch (const std::exception& e) {
    return fail("InternalError", e, 3);
  }
  return 0;
}
