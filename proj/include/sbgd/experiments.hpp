#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "datagen.hpp"
#include "dataset.hpp"
#include "eval.hpp"
#include "json.hpp"
#include "sampler.hpp"
#include "trainer.hpp"

namespace sbgd {

// ---- synthetic datasets -----------------------------------------------------

/// Declarative dataset: `count` graphs of one generator, the last
/// `test_count` of them tagged "test" and the rest "train".
struct DataSpec {
  std::string kind = "csbm";  // csbm | planar | er
  std::size_t count = 100;
  std::size_t test_count = 50;
  std::uint64_t seed = 0;
  CsbmSpec csbm;              // csbm.seed is ignored; graph seeds derive from `seed`
  std::size_t n = 32;         // planar and er
  double p = 0.1;             // er

  void validate() const {
    require(kind == "csbm" || kind == "planar" || kind == "er",
            "data: kind must be 'csbm', 'planar' or 'er', got '" + kind + "'");
    require(count >= 1, "data: count must be at least 1");
    require(test_count < count, "data: test_count must be smaller than count");
    if (kind == "csbm") csbm.validate();
    if (kind == "planar") require(n >= 3, "data: planar graphs need n >= 3");
    if (kind == "er") require(p >= 0.0 && p <= 1.0, "data: p must lie in [0, 1]");
  }
};

inline nlohmann::json to_json(const CsbmSpec& s) {
  return {{"n", s.n},   {"communities", s.communities}, {"p_in", s.p_in}, {"p_out", s.p_out},
          {"feature_dim", s.feature_dim}, {"mu", s.mu}};
}

inline CsbmSpec csbm_from_json(const nlohmann::json& j, CsbmSpec base = {}) {
  require(j.is_object(), "data.csbm must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "n") base.n = v.get<std::size_t>();
    else if (k == "communities") base.communities = v.get<std::size_t>();
    else if (k == "p_in") base.p_in = v.get<double>();
    else if (k == "p_out") base.p_out = v.get<double>();
    else if (k == "feature_dim") base.feature_dim = v.get<std::size_t>();
    else if (k == "mu") base.mu = v.get<double>();
    else throw ContractViolation("data.csbm: unknown key '" + k + "'");
  }
  return base;
}

inline nlohmann::json to_json(const DataSpec& d) {
  nlohmann::json j = {{"kind", d.kind}, {"count", d.count}, {"test_count", d.test_count}, {"seed", d.seed}};
  if (d.kind == "csbm") j["csbm"] = to_json(d.csbm);
  else j["n"] = d.n;
  if (d.kind == "er") j["p"] = d.p;
  return j;
}

inline DataSpec data_spec_from_json(const nlohmann::json& j, DataSpec base = {}) {
  require(j.is_object(), "data section must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "kind") base.kind = v.get<std::string>();
    else if (k == "count") base.count = v.get<std::size_t>();
    else if (k == "test_count") base.test_count = v.get<std::size_t>();
    else if (k == "seed") base.seed = v.get<std::uint64_t>();
    else if (k == "csbm") base.csbm = csbm_from_json(v, base.csbm);
    else if (k == "n") base.n = v.get<std::size_t>();
    else if (k == "p") base.p = v.get<double>();
    else throw ContractViolation("data: unknown key '" + k + "'");
  }
  base.validate();
  return base;
}

inline std::uint64_t graph_seed(std::uint64_t base, std::size_t index) {
  return Rng(base * 0x9e3779b97f4a7c15ULL + index + 1).next_u64();
}

/// Graph `index` of the dataset; a pure function of the spec.
inline Graph generate_graph(const DataSpec& d, std::size_t index) {
  if (d.kind == "csbm") {
    CsbmSpec s = d.csbm;
    s.seed = graph_seed(d.seed, index);
    s.mean_seed = d.seed;
    return gen_csbm(s);
  }
  if (d.kind == "planar") return gen_planar(d.n, graph_seed(d.seed, index));
  return gen_er(d.n, d.p, graph_seed(d.seed, index));
}

struct GeneratedData {
  std::vector<Graph> graphs;
  std::vector<std::string> splits;

  std::vector<Graph> split(const std::string& name) const {
    std::vector<Graph> out;
    for (std::size_t i = 0; i < graphs.size(); ++i)
      if (splits[i] == name) out.push_back(graphs[i]);
    return out;
  }
};

inline GeneratedData generate_data(const DataSpec& d) {
  d.validate();
  GeneratedData out;
  for (std::size_t i = 0; i < d.count; ++i) {
    out.graphs.push_back(generate_graph(d, i));
    out.splits.push_back(i + d.test_count < d.count ? "train" : "test");
  }
  return out;
}

/// Held-out graphs like those of `d` but with `size` nodes, drawn from
/// `seed`. For cSBM the community size and the community means are kept,
/// so the community count scales with the size.
inline std::vector<Graph> reference_at_size(const DataSpec& d, std::size_t size, std::size_t count,
                                            std::uint64_t seed) {
  std::vector<Graph> out;
  for (std::size_t i = 0; i < count; ++i) {
    if (d.kind == "csbm") {
      const std::size_t community = std::max<std::size_t>(1, d.csbm.n / d.csbm.communities);
      CsbmSpec s = d.csbm;
      s.n = size;
      s.communities = std::clamp<std::size_t>((size + community / 2) / community, 1, size);
      s.seed = graph_seed(seed, i);
      s.mean_seed = d.seed;
      out.push_back(gen_csbm(s));
    } else if (d.kind == "planar") {
      out.push_back(gen_planar(size, graph_seed(seed, i)));
    } else {
      out.push_back(gen_er(size, d.p, graph_seed(seed, i)));
    }
  }
  return out;
}

/// Erdos-Renyi graphs with the node counts and mean edge density of `like`.
inline std::vector<Graph> er_matched(const std::vector<Graph>& like, std::size_t count, std::uint64_t seed) {
  require(!like.empty(), "er_matched: empty template set");
  double density = 0.0;
  for (const auto& g : like) density += g.density();
  density /= static_cast<double>(like.size());
  std::vector<Graph> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(gen_er(like[i % like.size()].n(), density, graph_seed(seed, i)));
  return out;
}

// ---- evaluation options -----------------------------------------------------

inline nlohmann::json to_json(const eval::EvalConfig& c) {
  return {{"sigma", c.mmd.sigma},
          {"orbit_sigma", c.mmd.orbit_sigma},
          {"fid_seed", c.fid_seed},
          {"orbits", c.orbits},
          {"validity", c.validity ? eval::to_string(*c.validity) : "off"}};
}

inline eval::EvalConfig eval_config_from_json(const nlohmann::json& j, eval::EvalConfig base = {}) {
  require(j.is_object(), "eval section must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "sigma") base.mmd.sigma = v.get<double>();
    else if (k == "orbit_sigma") base.mmd.orbit_sigma = v.get<double>();
    else if (k == "fid_seed") base.fid_seed = v.get<std::uint64_t>();
    else if (k == "orbits") base.orbits = v.get<bool>();
    else if (k == "validity") {
      const auto s = v.get<std::string>();
      if (s == "off") base.validity.reset();
      else base.validity = eval::validity_from(s);
    } else throw ContractViolation("eval: unknown key '" + k + "'");
  }
  require(base.mmd.sigma > 0.0 && base.mmd.orbit_sigma > 0.0, "eval: kernel bandwidths must be positive");
  return base;
}

// ---- CSV output -------------------------------------------------------------

/// Writes a CSV whose first line names the resolved config it came from.
inline void write_csv(const std::filesystem::path& path, const std::string& config_path, const std::string& header,
                      const std::vector<std::string>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# config: " << config_path << '\n' << header << '\n';
  for (const auto& r : rows) out << r << '\n';
}

inline std::string report_cells(const std::optional<eval::MetricsReport>& r) {
  if (r) return r->csv_row();
  const auto header = eval::MetricsReport::csv_header();
  return std::string(static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')), ',');
}

// ---- size generalization ----------------------------------------------------

struct SizeSweepRow {
  std::size_t target = 0;
  std::size_t k = 0;
  std::size_t block_size = 0;
  bool skipped = false;
  bool sizes_exact = false;
  std::string note;
  std::optional<eval::MetricsReport> report;

  static std::string csv_header() {
    return "target_size,k,block_size,status,sizes_exact," + eval::MetricsReport::csv_header();
  }
  std::string csv_row() const {
    return std::to_string(target) + ',' + std::to_string(k) + ',' + std::to_string(block_size) + ',' +
           (skipped ? "skipped: " + note : std::string("ok")) + ',' + (sizes_exact ? "1" : "0") + ',' +
           report_cells(report);
  }
};

/// For each target size S: k = round(S / C) blocks of exactly C nodes,
/// evaluated against held-out reference graphs with S nodes. Sizes below C
/// give a skipped row.
inline std::vector<SizeSweepRow> size_sweep(const Checkpoint& ck, const DataSpec& data,
                                            const std::vector<std::size_t>& sizes, std::size_t block_size,
                                            std::size_t count, SampleConfig sample, const eval::EvalConfig& ecfg,
                                            std::uint64_t reference_seed) {
  require(block_size >= 1, "size_sweep: block size must be positive");
  require(count >= 2, "size_sweep: need at least 2 samples per size");
  std::vector<SizeSweepRow> rows;
  for (std::size_t s : sizes) {
    SizeSweepRow row;
    row.target = s;
    row.block_size = block_size;
    if (s < block_size) {
      row.skipped = true;
      row.note = "target below block size";
      rows.push_back(row);
      continue;
    }
    row.k = static_cast<std::size_t>(std::llround(static_cast<double>(s) / static_cast<double>(block_size)));
    sample.k = row.k;
    sample.size_source = SizeSource::fixed;
    sample.fixed_n = block_size;
    const auto generated = sample_graphs(ck, count, sample);
    row.sizes_exact = std::all_of(generated.begin(), generated.end(),
                                  [&](const Graph& g) { return g.n() == row.k * block_size; });
    const auto reference = reference_at_size(data, s, count, reference_seed ^ s);
    auto cfg = ecfg;
    cfg.orbits = cfg.orbits && s <= eval::kMaxOrbitNodes;
    row.report = eval::evaluate(reference, generated, cfg);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- partition-number sweep -------------------------------------------------

struct PartitionSweepRow {
  std::size_t k = 0;
  bool skipped = false;
  std::string note;
  StepMemory memory;
  std::optional<double> final_loss;
  double train_seconds = 0.0;
  std::optional<eval::MetricsReport> report;

  static std::string csv_header() {
    return "k,status,peak_memory,resident_memory,final_loss,train_seconds," + eval::MetricsReport::csv_header();
  }
  std::string csv_row() const {
    std::ostringstream os;
    os.precision(10);
    os << k << ',' << (skipped ? "skipped: " + note : std::string("ok")) << ',' << memory.peak << ','
       << memory.resident << ',' << (final_loss ? std::to_string(*final_loss) : std::string()) << ','
       << train_seconds << ',' << report_cells(report);
    return os.str();
  }
};

/// Train, sample and evaluate at every k with the same budget. The k = 1
/// row is the full-graph baseline.
inline std::vector<PartitionSweepRow> partition_sweep(const std::vector<Graph>& train, const std::vector<Graph>& test,
                                                      const TrainConfig& base, const std::vector<std::size_t>& ks,
                                                      std::size_t samples, SampleConfig sample,
                                                      const eval::EvalConfig& ecfg) {
  require(!train.empty() && !test.empty(), "partition_sweep: need train and test graphs");
  std::size_t min_n = train.front().n();
  for (const auto& g : train) min_n = std::min(min_n, g.n());
  std::vector<PartitionSweepRow> rows;
  for (std::size_t k : ks) {
    PartitionSweepRow row;
    row.k = k;
    if (k == 0 || k > min_n) {
      row.skipped = true;
      row.note = k == 0 ? "k must be positive" : "k exceeds graph size";
      rows.push_back(row);
      continue;
    }
    TrainConfig cfg = base;
    cfg.blocks = k;
    const auto cache = build_decomposition_cache(train, cfg);
    row.memory = measure_step_memory(cache, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const auto fitted = fit(cache, cfg);
    row.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!fitted.losses.empty()) row.final_loss = fitted.losses.back().loss.total();
    sample.k = k;
    sample.size_source = SizeSource::empirical;
    row.report = eval::evaluate(test, sample_graphs(fitted.checkpoint, samples, sample), ecfg);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- memory benchmark -------------------------------------------------------

struct MembenchResult {
  StepMemory baseline;
  StepMemory sbgd;
  double ratio = 0.0;
  double model_ratio = 0.0;
  std::size_t n = 0, block_size = 0, feature_dim = 0, k = 0;

  nlohmann::json to_json() const {
    return {{"baseline_peak", baseline.peak}, {"sbgd_peak", sbgd.peak},
            {"baseline_resident", baseline.resident}, {"sbgd_resident", sbgd.resident},
            {"baseline_phases", baseline.phases}, {"sbgd_phases", sbgd.phases},
            {"memory_ratio", ratio}, {"model_ratio", model_ratio},
            {"n", n}, {"block_size", block_size}, {"feature_dim", feature_dim}, {"k", k}};
  }
};

/// One instrumented training step of the full-graph baseline (k = 1) and of
/// SBGD with k blocks, under otherwise identical settings.
inline MembenchResult membench(const std::vector<Graph>& data, TrainConfig cfg, std::size_t k) {
  require(!data.empty(), "membench: empty dataset");
  require(k >= 1, "membench: k must be positive");
  MembenchResult r;
  r.k = k;
  r.n = data.front().n();
  r.feature_dim = data.front().feature_dim();
  r.block_size = r.n / k;
  cfg.blocks = 1;
  r.baseline = measure_step_memory(build_decomposition_cache(data, cfg), cfg);
  cfg.blocks = k;
  r.sbgd = measure_step_memory(build_decomposition_cache(data, cfg), cfg);
  r.ratio = eval::memory_ratio(r.baseline, r.sbgd);
  r.model_ratio = eval::memory_model_ratio(r.n, r.block_size, r.feature_dim);
  return r;
}

}  // namespace sbgd
