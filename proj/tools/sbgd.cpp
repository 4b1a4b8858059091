#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sbgd/experiments.hpp"
#include "sbgd/graph_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sbgd;

namespace {

constexpr int kExitUser = 1;
constexpr int kExitNumeric = 2;

const std::set<std::string> kRunConfigKeys = {"output", "seed", "dataset", "data", "train",
                                               "sample", "eval", "sweep", "membench"};

/// Flags shared by every subcommand.
struct Common {
  std::string config_path;
  std::string out;
  std::size_t threads = 1;
};

json load_run_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ContractViolation("config file not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
  }
  require(j.is_object(), "config " + path + " must hold a JSON object");
  for (const auto& [k, v] : j.items())
    if (!kRunConfigKeys.count(k)) throw ContractViolation("config " + path + ": unknown key '" + k + "'");
  return j;
}

json section(const json& cfg, const char* key) { return cfg.contains(key) ? cfg[key] : json::object(); }

/// Output directory: the flag, else the config's "output", else the command
/// name; relative paths land under $SBGD_OUTPUT_ROOT when it is set.
fs::path output_dir(const Common& c, const json& cfg, const std::string& command) {
  std::string out = c.out;
  if (out.empty() && cfg.contains("output")) out = cfg["output"].get<std::string>();
  if (out.empty()) out = command;
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv("SBGD_OUTPUT_ROOT"); root && *root) p = fs::path(root) / p;
  }
  fs::create_directories(p);
  return p;
}

std::string write_resolved(const fs::path& dir, const std::string& command, json resolved) {
  resolved["command"] = command;
  const auto path = dir / "resolved_config.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << resolved.dump(2) << '\n';
  return path.string();
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ContractViolation(std::string(what) + " is required");
  if (!fs::is_directory(path)) throw ContractViolation(std::string(what) + " not found: " + path);
}

std::string dataset_path(const std::string& flag, const json& cfg) {
  if (!flag.empty()) return flag;
  if (cfg.contains("dataset")) return cfg["dataset"].get<std::string>();
  return "";
}

/// Train graphs of a dataset; a dataset without a train split is used whole.
std::vector<Graph> load_split(const std::string& dir, const std::string& split) {
  auto graphs = load_dataset(dir, split);
  if (graphs.empty()) graphs = load_dataset(dir);
  require(!graphs.empty(), "dataset " + dir + " holds no graphs");
  return graphs;
}

std::vector<std::size_t> parse_list(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t v = 0;
    if (!detail::parse_size(tok, v))
      throw ContractViolation(std::string(what) + ": '" + tok + "' is not a nonnegative integer");
    out.push_back(v);
  }
  require(!out.empty(), std::string(what) + ": empty list");
  return out;
}

Checkpoint load_checkpoint_arg(const std::string& path) {
  if (path.empty()) throw ContractViolation("--checkpoint is required");
  if (!fs::exists(path)) throw ContractViolation("checkpoint not found: " + path);
  return load_checkpoint(path);
}

void print_report(const eval::MetricsReport& r) {
  std::printf("%-16s %s\n", "metric", "value");
  auto row = [](const char* name, double v) { std::printf("%-16s %.6g\n", name, v); };
  row("MMD degree", r.mmd_degree);
  row("MMD clustering", r.mmd_clustering);
  if (std::isnan(r.mmd_orbit)) std::printf("%-16s %s\n", "MMD orbit", "n/a");
  else row("MMD orbit", r.mmd_orbit);
  row("MMD spectrum", r.mmd_spectrum);
  row("MMD avg", r.avg_mmd);
  row("FID", r.fid);
  if (r.vun) row("V.U.N", *r.vun);
  std::printf("%-16s %zu / %zu\n", "graphs ref/gen", r.reference_count, r.generated_count);
}

// ---- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> count;
  std::optional<std::size_t> test_count;
  std::string kind;
};

int cmd_gen_data(const Common& c, const GenDataArgs& a) {
  const json cfg = load_run_config(c.config_path);
  DataSpec spec = data_spec_from_json(section(cfg, "data"));
  if (cfg.contains("seed")) spec.seed = cfg["seed"].get<std::uint64_t>();
  if (a.seed) spec.seed = *a.seed;
  if (a.count) {
    spec.count = *a.count;
    if (!a.test_count && spec.test_count >= spec.count) spec.test_count = spec.count / 2;
  }
  if (a.test_count) spec.test_count = *a.test_count;
  if (!a.kind.empty()) spec.kind = a.kind;
  spec.validate();
  const auto dir = output_dir(c, cfg, "data");
  const auto data = generate_data(spec);
  write_dataset(dir, data.graphs, data.splits, to_json(spec), spec.seed);
  write_resolved(dir, "gen-data", {{"data", to_json(spec)}, {"output", dir.string()}});
  std::printf("wrote %zu graphs to %s\n", data.graphs.size(), dir.string().c_str());
  return 0;
}

// ---- partition --------------------------------------------------------------

struct PartitionArgs {
  std::string dataset;
  std::size_t k = 0;
  std::size_t block_size = 16;
  double eps = 0.1;
  std::uint64_t seed = 0;
};

int cmd_partition(const Common& c, const PartitionArgs& a) {
  const json cfg = load_run_config(c.config_path);
  const auto ds = dataset_path(a.dataset, cfg);
  require_dir(ds, "--dataset");
  const auto manifest = read_manifest(ds);
  const auto dir = output_dir(c, cfg, "partition");
  const json resolved = {{"dataset", ds}, {"k", a.k}, {"block_size", a.block_size}, {"balance_eps", a.eps},
                         {"seed", a.seed}, {"output", dir.string()}};
  const auto cfg_path = write_resolved(dir, "partition", resolved);
  std::vector<std::string> rows;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto g = read_graph_file(fs::path(ds) / manifest.entries[i].file);
    PartitionOptions opt;
    opt.k = a.k > 0 ? std::min(a.k, std::max<std::size_t>(g.n(), 1)) : block_count_for(g.n(), a.block_size);
    opt.balance_eps = a.eps;
    opt.seed = a.seed ^ (0x9e3779b97f4a7c15ULL * (i + 1));
    const auto p = partition_graph(g, opt);
    const auto name = fs::path(manifest.entries[i].file).stem().string() + ".part";
    std::ofstream out(dir / name);
    write_partition(out, p);
    std::size_t largest = 0;
    for (auto s : p.block_sizes()) largest = std::max(largest, s);
    rows.push_back(manifest.entries[i].file + ',' + std::to_string(g.n()) + ',' + std::to_string(p.k) + ',' +
                   std::to_string(cut_size(g, p)) + ',' + std::to_string(largest));
  }
  write_csv(dir / "partitions.csv", cfg_path, "graph,n,k,cut,largest_block", rows);
  std::printf("partitioned %zu graphs into %s\n", rows.size(), dir.string().c_str());
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::optional<std::size_t> steps;
  std::optional<double> lr;
  std::optional<std::size_t> blocks;
  std::string resume;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  const json cfg = load_run_config(c.config_path);
  TrainConfig tc = train_config_from_json(section(cfg, "train"));
  if (cfg.contains("seed")) tc.seed = cfg["seed"].get<std::uint64_t>();
  if (a.steps) tc.total_steps = *a.steps;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.blocks) tc.blocks = *a.blocks;
  tc.validate();
  const auto ds = dataset_path(a.dataset, cfg);
  require_dir(ds, "--dataset");
  const auto dir = output_dir(c, cfg, "train");
  const auto ckpt = dir / "model.ckpt";
  const auto cfg_path = write_resolved(
      dir, "train", {{"dataset", ds}, {"train", to_json(tc)}, {"resume", a.resume}, {"output", dir.string()}});
  const auto graphs = load_split(ds, "train");
  FitOptions opt;
  opt.checkpoint_path = ckpt;
  if (!a.resume.empty()) opt.resume = load_checkpoint_arg(a.resume);
  opt.on_log = [&](const LossRecord& r) {
    std::printf("step %zu  loss %.6f  (A_i %.4f A_j %.4f X_i %.4f X_j %.4f I %.4f)\n", r.step, r.loss.total(),
                r.loss.a_i, r.loss.a_j, r.loss.x_i, r.loss.x_j, r.loss.inter);
    std::fflush(stdout);
  };
  const auto result = fit(graphs, tc, std::move(opt));
  write_loss_csv(dir / "loss.csv", result.losses, cfg_path);
  std::printf("checkpoint: %s\n", ckpt.string().c_str());
  return 0;
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
  std::string checkpoint;
  std::size_t count = 10;
  std::optional<std::size_t> k;
  std::optional<std::size_t> fixed_n;
  std::string mode;
  std::optional<int> stride;
  std::optional<double> tau;
  std::optional<std::uint64_t> seed;
};

int cmd_sample(const Common& c, const SampleArgs& a) {
  const json cfg = load_run_config(c.config_path);
  SampleConfig sc = sample_config_from_json(section(cfg, "sample"));
  if (cfg.contains("seed")) sc.seed = cfg["seed"].get<std::uint64_t>();
  if (a.k) sc.k = *a.k;
  if (a.fixed_n) {
    sc.size_source = SizeSource::fixed;
    sc.fixed_n = *a.fixed_n;
  }
  if (!a.mode.empty()) sc = sample_config_from_json({{"mode", a.mode}}, sc);
  if (a.stride) sc.ddim_stride = *a.stride;
  if (a.tau) sc.tau = *a.tau;
  if (a.seed) sc.seed = *a.seed;
  sc.threads = c.threads;
  sc.validate();
  const auto ck = load_checkpoint_arg(a.checkpoint);
  const auto dir = output_dir(c, cfg, "samples");
  sample_dataset(ck, a.count, sc, dir, a.checkpoint);
  write_resolved(dir, "sample",
                 {{"checkpoint", a.checkpoint}, {"count", a.count}, {"sample", to_json(sc)}, {"output", dir.string()}});
  std::printf("wrote %zu samples to %s\n", a.count, dir.string().c_str());
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string reference;
  std::string reference_split = "test";
  std::string generated;
  std::string train;
  std::string validity;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  const json cfg = load_run_config(c.config_path);
  auto ec = eval_config_from_json(section(cfg, "eval"));
  if (!a.validity.empty()) ec = eval_config_from_json({{"validity", a.validity}}, ec);
  ec.threads = c.threads;
  require_dir(a.reference, "--reference");
  require_dir(a.generated, "--generated");
  const auto reference = load_split(a.reference, a.reference_split);
  const auto generated = load_dataset(a.generated);
  require(!generated.empty(), "generated set " + a.generated + " holds no graphs");
  std::optional<std::vector<Graph>> train;
  if (!a.train.empty()) {
    require_dir(a.train, "--train");
    train = load_split(a.train, "train");
  }
  bool small = true;
  for (const auto* set : {&reference, &generated})
    for (const auto& g : *set) small = small && g.n() <= eval::kMaxOrbitNodes;
  if (!small && ec.orbits) {
    std::fprintf(stderr, "warning: graphs above %zu nodes, orbit MMD skipped\n", eval::kMaxOrbitNodes);
    ec.orbits = false;
  }
  const auto dir = output_dir(c, cfg, "eval");
  const auto cfg_path = write_resolved(dir, "eval",
                                       {{"reference", a.reference}, {"reference_split", a.reference_split},
                                        {"generated", a.generated}, {"train", a.train}, {"eval", to_json(ec)},
                                        {"output", dir.string()}});
  auto report = eval::evaluate(reference, generated, ec, train ? &*train : nullptr);
  report.config["reference"] = a.reference;
  report.config["generated"] = a.generated;
  std::ofstream(dir / "metrics.json") << report.to_json().dump(2) << '\n';
  write_csv(dir / "metrics.csv", cfg_path, eval::MetricsReport::csv_header(), {report.csv_row()});
  print_report(report);
  return 0;
}

// ---- size-sweep -------------------------------------------------------------

struct SizeSweepArgs {
  std::string checkpoint;
  std::string dataset;
  std::string sizes = "16,32,64,128";
  std::size_t block_size = 0;
  std::size_t count = 20;
  std::uint64_t reference_seed = 7777;
};

int cmd_size_sweep(const Common& c, const SizeSweepArgs& a) {
  const json cfg = load_run_config(c.config_path);
  const auto ck = load_checkpoint_arg(a.checkpoint);
  DataSpec data;
  if (cfg.contains("data")) {
    data = data_spec_from_json(cfg["data"]);
  } else {
    const auto ds = dataset_path(a.dataset, cfg);
    require_dir(ds, "--dataset (or a data section)");
    data = data_spec_from_json(read_manifest(ds).generator);
  }
  SampleConfig sc = sample_config_from_json(section(cfg, "sample"));
  sc.threads = c.threads;
  auto ec = eval_config_from_json(section(cfg, "eval"));
  ec.threads = c.threads;
  const std::size_t block = a.block_size > 0 ? a.block_size : ck.config.block_size;
  const auto sizes = parse_list(a.sizes, "--sizes");
  const auto dir = output_dir(c, cfg, "size_sweep");
  const auto cfg_path = write_resolved(dir, "size-sweep",
                                       {{"checkpoint", a.checkpoint}, {"data", to_json(data)}, {"sizes", sizes},
                                        {"block_size", block}, {"count", a.count},
                                        {"reference_seed", a.reference_seed}, {"sample", to_json(sc)},
                                        {"eval", to_json(ec)}, {"output", dir.string()}});
  const auto rows = size_sweep(ck, data, sizes, block, a.count, sc, ec, a.reference_seed);
  std::vector<std::string> lines;
  for (const auto& r : rows) {
    lines.push_back(r.csv_row());
    if (r.skipped) std::fprintf(stderr, "warning: size %zu skipped (%s)\n", r.target, r.note.c_str());
    else std::printf("size %4zu  k %2zu  FID %.4g  MMD avg %.4g\n", r.target, r.k, r.report->fid, r.report->avg_mmd);
  }
  write_csv(dir / "size_sweep.csv", cfg_path, SizeSweepRow::csv_header(), lines);
  return 0;
}

// ---- partition-sweep --------------------------------------------------------

struct PartitionSweepArgs {
  std::string dataset;
  std::string ks = "1,2,4,8";
  std::optional<std::size_t> steps;
  std::size_t samples = 20;
};

int cmd_partition_sweep(const Common& c, const PartitionSweepArgs& a) {
  const json cfg = load_run_config(c.config_path);
  TrainConfig tc = train_config_from_json(section(cfg, "train"));
  if (cfg.contains("seed")) tc.seed = cfg["seed"].get<std::uint64_t>();
  if (a.steps) tc.total_steps = *a.steps;
  SampleConfig sc = sample_config_from_json(section(cfg, "sample"));
  sc.threads = c.threads;
  auto ec = eval_config_from_json(section(cfg, "eval"));
  ec.threads = c.threads;
  const auto ds = dataset_path(a.dataset, cfg);
  require_dir(ds, "--dataset");
  const auto ks = parse_list(a.ks, "--ks");
  const auto train = load_split(ds, "train");
  const auto test = load_split(ds, "test");
  const auto dir = output_dir(c, cfg, "partition_sweep");
  const auto cfg_path = write_resolved(dir, "partition-sweep",
                                       {{"dataset", ds}, {"ks", ks}, {"samples", a.samples}, {"train", to_json(tc)},
                                        {"sample", to_json(sc)}, {"eval", to_json(ec)}, {"output", dir.string()}});
  const auto rows = partition_sweep(train, test, tc, ks, a.samples, sc, ec);
  std::vector<std::string> lines;
  for (const auto& r : rows) {
    lines.push_back(r.csv_row());
    if (r.skipped) std::fprintf(stderr, "warning: k=%zu skipped (%s)\n", r.k, r.note.c_str());
    else
      std::printf("k %2zu  peak %lld  FID %.4g  MMD avg %.4g\n", r.k, static_cast<long long>(r.memory.peak),
                  r.report->fid, r.report->avg_mmd);
  }
  write_csv(dir / "partition_sweep.csv", cfg_path, PartitionSweepRow::csv_header(), lines);
  return 0;
}

// ---- membench ---------------------------------------------------------------

struct MembenchArgs {
  std::string dataset;
  std::size_t k = 4;
};

int cmd_membench(const Common& c, const MembenchArgs& a) {
  const json cfg = load_run_config(c.config_path);
  TrainConfig tc = train_config_from_json(section(cfg, "train"));
  std::vector<Graph> graphs;
  json data_echo;
  if (cfg.contains("data")) {
    const auto spec = data_spec_from_json(cfg["data"]);
    graphs = generate_data(spec).split("train");
    data_echo = to_json(spec);
  } else {
    const auto ds = dataset_path(a.dataset, cfg);
    require_dir(ds, "--dataset (or a data section)");
    graphs = load_split(ds, "train");
    data_echo = ds;
  }
  const auto dir = output_dir(c, cfg, "membench");
  write_resolved(dir, "membench", {{"data", data_echo}, {"k", a.k}, {"train", to_json(tc)}, {"output", dir.string()}});
  const auto r = membench(graphs, tc, a.k);
  std::ofstream(dir / "membench.json") << r.to_json().dump(2) << '\n';
  std::printf("baseline peak %lld elements, SBGD peak %lld elements\n", static_cast<long long>(r.baseline.peak),
              static_cast<long long>(r.sbgd.peak));
  std::printf("memory ratio %.4f (element-count model %.4f)\n", r.ratio, r.model_ratio);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic block graph diffusion: data, training, sampling and evaluation"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker thread cap")->check(CLI::PositiveNumber);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Run config (JSON)");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--threads", common.threads, "Worker thread cap")->check(CLI::PositiveNumber);
  };

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(gen_cmd);
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--count", gen.count);
  gen_cmd->add_option("--test-count", gen.test_count, "Graphs held out as the test split");
  gen_cmd->add_option("--kind", gen.kind, "csbm | planar | er");

  PartitionArgs part;
  auto* part_cmd = app.add_subcommand("partition", "Partition every graph of a dataset");
  add_common(part_cmd);
  part_cmd->add_option("--dataset", part.dataset);
  part_cmd->add_option("--k", part.k, "Block count (overrides --block-size)");
  part_cmd->add_option("--block-size", part.block_size);
  part_cmd->add_option("--eps", part.eps, "Balance tolerance");
  part_cmd->add_option("--seed", part.seed);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the block denoiser and inter-block predictor");
  add_common(train_cmd);
  train_cmd->add_option("--dataset", train.dataset);
  train_cmd->add_option("--steps", train.steps);
  train_cmd->add_option("--lr", train.lr);
  train_cmd->add_option("--blocks", train.blocks, "Fixed block count per graph (1 = full-graph baseline)");
  train_cmd->add_option("--resume", train.resume, "Checkpoint to continue from");

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "Sample graphs from a checkpoint");
  add_common(sample_cmd);
  sample_cmd->add_option("--checkpoint", sample.checkpoint);
  sample_cmd->add_option("--count", sample.count);
  sample_cmd->add_option("--k", sample.k);
  sample_cmd->add_option("--fixed-n", sample.fixed_n, "Nodes per block");
  sample_cmd->add_option("--mode", sample.mode, "ddpm | ddim");
  sample_cmd->add_option("--stride", sample.stride, "DDIM stride");
  sample_cmd->add_option("--tau", sample.tau, "Inter-edge threshold");
  sample_cmd->add_option("--seed", sample.seed);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Compare a generated set with a reference set");
  add_common(eval_cmd);
  eval_cmd->add_option("--reference", ev.reference);
  eval_cmd->add_option("--reference-split", ev.reference_split);
  eval_cmd->add_option("--generated", ev.generated);
  eval_cmd->add_option("--train", ev.train, "Training dataset for novelty");
  eval_cmd->add_option("--validity", ev.validity, "planarity | connectivity | none | off");

  SizeSweepArgs sweep;
  auto* size_cmd = app.add_subcommand("size-sweep", "Sample and evaluate at several target sizes");
  add_common(size_cmd);
  size_cmd->add_option("--checkpoint", sweep.checkpoint);
  size_cmd->add_option("--dataset", sweep.dataset, "Dataset whose generator defines the references");
  size_cmd->add_option("--sizes", sweep.sizes, "Comma-separated target sizes");
  size_cmd->add_option("--block-size", sweep.block_size);
  size_cmd->add_option("--count", sweep.count, "Samples per size");
  size_cmd->add_option("--reference-seed", sweep.reference_seed);

  PartitionSweepArgs psweep;
  auto* psweep_cmd = app.add_subcommand("partition-sweep", "Train, sample and evaluate for several k");
  add_common(psweep_cmd);
  psweep_cmd->add_option("--dataset", psweep.dataset);
  psweep_cmd->add_option("--ks", psweep.ks, "Comma-separated block counts");
  psweep_cmd->add_option("--steps", psweep.steps);
  psweep_cmd->add_option("--samples", psweep.samples);

  MembenchArgs mem;
  auto* mem_cmd = app.add_subcommand("membench", "Peak memory of one training step, baseline vs SBGD");
  add_common(mem_cmd);
  mem_cmd->add_option("--dataset", mem.dataset);
  mem_cmd->add_option("--k", mem.k);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUser;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(common, gen);
    if (*part_cmd) return cmd_partition(common, part);
    if (*train_cmd) return cmd_train(common, train);
    if (*sample_cmd) return cmd_sample(common, sample);
    if (*eval_cmd) return cmd_eval(common, ev);
    if (*size_cmd) return cmd_size_sweep(common, sweep);
    if (*psweep_cmd) return cmd_partition_sweep(common, psweep);
    if (*mem_cmd) return cmd_membench(common, mem);
  } catch (const NumericFault& e) {
    std::fprintf(stderr, "numeric fault: %s\n", e.what());
    return kExitNumeric;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUser;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUser;
  }
  return kExitUser;
}
