#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "denoiser.hpp"
#include "diffusion.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "graph.hpp"
#include "json.hpp"
#include "memory.hpp"
#include "optim.hpp"
#include "partition.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace sbgd {

struct TrainConfig {
  double learning_rate = 1e-3;
  int diffusion_steps = 50;  // T
  ScheduleKind schedule = ScheduleKind::cosine;
  std::size_t total_steps = 1000;
  std::size_t pairs_per_batch = 8;
  std::size_t hidden = 64;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t edge_dim = 8;
  std::size_t inter_hidden = 32;
  std::size_t block_size = 16;  // C; k = round(n / C) per graph
  std::size_t blocks = 0;       // fixed k for every graph when nonzero
  double balance_eps = 0.1;
  double analog_scale = 1.0;
  std::uint64_t seed = 0;
  std::size_t log_interval = 10;
  std::size_t checkpoint_interval = 0;  // 0 = only at the end

  void validate() const {
    require(learning_rate >= 0.0, "TrainConfig: learning_rate must be nonnegative");
    require(diffusion_steps >= 1, "TrainConfig: diffusion_steps must be positive");
    require(pairs_per_batch >= 1, "TrainConfig: pairs_per_batch must be positive");
    require(block_size >= 1, "TrainConfig: block_size must be positive");
    require(log_interval >= 1, "TrainConfig: log_interval must be positive");
    require(analog_scale > 0.0, "TrainConfig: analog_scale must be positive");
    require(balance_eps >= 0.0, "TrainConfig: balance_eps must be nonnegative");
  }

  DenoiserConfig denoiser(std::size_t feature_dim) const {
    DenoiserConfig c;
    c.feature_dim = feature_dim;
    c.hidden = hidden;
    c.heads = heads;
    c.layers = layers;
    c.edge_dim = edge_dim;
    c.inter_hidden = inter_hidden;
    c.steps = diffusion_steps;
    return c;
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"diffusion_steps", c.diffusion_steps},
          {"schedule", to_string(c.schedule)}, {"total_steps", c.total_steps},
          {"pairs_per_batch", c.pairs_per_batch}, {"hidden", c.hidden},
          {"layers", c.layers}, {"heads", c.heads},
          {"edge_dim", c.edge_dim}, {"inter_hidden", c.inter_hidden},
          {"block_size", c.block_size}, {"blocks", c.blocks},
          {"balance_eps", c.balance_eps}, {"analog_scale", c.analog_scale},
          {"seed", c.seed}, {"log_interval", c.log_interval},
          {"checkpoint_interval", c.checkpoint_interval}};
}

/// Reads a TrainConfig, starting from `base`; unknown keys are rejected.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  require(j.is_object(), "train config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "learning_rate") base.learning_rate = v.get<double>();
      else if (k == "diffusion_steps") base.diffusion_steps = v.get<int>();
      else if (k == "schedule") base.schedule = schedule_kind_from(v.get<std::string>());
      else if (k == "total_steps") base.total_steps = v.get<std::size_t>();
      else if (k == "pairs_per_batch") base.pairs_per_batch = v.get<std::size_t>();
      else if (k == "hidden") base.hidden = v.get<std::size_t>();
      else if (k == "layers") base.layers = v.get<std::size_t>();
      else if (k == "heads") base.heads = v.get<std::size_t>();
      else if (k == "edge_dim") base.edge_dim = v.get<std::size_t>();
      else if (k == "inter_hidden") base.inter_hidden = v.get<std::size_t>();
      else if (k == "block_size") base.block_size = v.get<std::size_t>();
      else if (k == "blocks") base.blocks = v.get<std::size_t>();
      else if (k == "balance_eps") base.balance_eps = v.get<double>();
      else if (k == "analog_scale") base.analog_scale = v.get<double>();
      else if (k == "seed") base.seed = v.get<std::uint64_t>();
      else if (k == "log_interval") base.log_interval = v.get<std::size_t>();
      else if (k == "checkpoint_interval") base.checkpoint_interval = v.get<std::size_t>();
      else throw ContractViolation("train config: unknown key '" + k + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ContractViolation("train config: bad value for '" + k + "': " + e.what());
    }
  }
  base.validate();
  return base;
}

/// Empirical distribution of block node counts.
struct BlockSizeDistribution {
  std::map<std::size_t, std::size_t> counts;

  void add(std::size_t size) { ++counts[size]; }

  std::size_t total() const {
    std::size_t t = 0;
    for (auto [s, c] : counts) t += c;
    return t;
  }

  double probability(std::size_t size) const {
    const auto it = counts.find(size);
    return it == counts.end() || total() == 0 ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total());
  }

  std::size_t sample(Rng& rng) const {
    require(total() > 0, "BlockSizeDistribution: empty histogram");
    std::size_t r = rng.below(total());
    for (auto [s, c] : counts) {
      if (r < c) return s;
      r -= c;
    }
    return counts.rbegin()->first;
  }

  bool operator==(const BlockSizeDistribution&) const = default;
};

/// Every training graph partitioned and decomposed once.
struct DecompositionCache {
  std::vector<Partition> partitions;
  std::vector<BlockDecomposition> decompositions;
  std::size_t feature_dim = 0;

  std::size_t size() const { return decompositions.size(); }

  BlockSizeDistribution block_sizes() const {
    BlockSizeDistribution d;
    for (const auto& dec : decompositions)
      for (const auto& b : dec.blocks) d.add(b.n());
    return d;
  }
};

inline std::size_t blocks_for(const Graph& g, const TrainConfig& c) {
  return c.blocks > 0 ? std::min(c.blocks, g.n()) : block_count_for(g.n(), c.block_size);
}

inline DecompositionCache build_decomposition_cache(const std::vector<Graph>& dataset, const TrainConfig& config) {
  require(!dataset.empty(), "build_decomposition_cache: empty dataset");
  DecompositionCache cache;
  cache.feature_dim = dataset.front().feature_dim();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& g = dataset[i];
    require(g.feature_dim() == cache.feature_dim, "build_decomposition_cache: graphs disagree on feature width");
    require(g.n() >= 1, "build_decomposition_cache: graph " + std::to_string(i) + " is empty");
    PartitionOptions opt;
    opt.k = blocks_for(g, config);
    opt.balance_eps = config.balance_eps;
    opt.seed = config.seed ^ (0x9e3779b97f4a7c15ULL * (i + 1));
    auto p = partition_graph(g, opt);
    cache.decompositions.push_back(decompose(g, p));
    cache.partitions.push_back(std::move(p));
  }
  return cache;
}

/// Two blocks of one graph and their true inter-block matrix. For a graph with
/// a single block the pair is (0, 0) and `inter` is null.
struct TrainingPair {
  std::size_t graph = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  const Graph* block_i = nullptr;
  const Graph* block_j = nullptr;
  const BinaryMatrix* inter = nullptr;

  bool self_pair() const { return i == j; }
};

/// Draws a graph uniformly, then an unordered block pair uniformly.
inline TrainingPair draw_pair(const DecompositionCache& cache, Rng& rng) {
  require(cache.size() > 0, "draw_pair: empty dataset");
  TrainingPair p;
  p.graph = static_cast<std::size_t>(rng.below(cache.size()));
  const auto& d = cache.decompositions[p.graph];
  const std::size_t k = d.k();
  if (k == 1) {
    p.block_i = p.block_j = &d.blocks[0];
    return p;
  }
  std::size_t r = static_cast<std::size_t>(rng.below(k * (k - 1) / 2));
  for (std::size_t a = 0; a < k; ++a) {
    if (r < k - 1 - a) {
      p.i = a;
      p.j = a + 1 + r;
      break;
    }
    r -= k - 1 - a;
  }
  p.block_i = &d.blocks[p.i];
  p.block_j = &d.blocks[p.j];
  p.inter = &d.between(p.i, p.j);
  return p;
}

inline std::vector<TrainingPair> build_training_pairs(const DecompositionCache& cache, std::size_t count, Rng& rng) {
  std::vector<TrainingPair> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) out.push_back(draw_pair(cache, rng));
  return out;
}

struct LossBreakdown {
  double a_i = 0, a_j = 0, x_i = 0, x_j = 0, inter = 0;

  double total() const { return a_i + a_j + x_i + x_j + inter; }

  LossBreakdown& operator+=(const LossBreakdown& o) {
    a_i += o.a_i;
    a_j += o.a_j;
    x_i += o.x_i;
    x_j += o.x_j;
    inter += o.inter;
    return *this;
  }
  LossBreakdown scaled(double s) const { return {a_i * s, a_j * s, x_i * s, x_j * s, inter * s}; }
};

/// Differentiable loss of one pair: the total (for backward) and its parts.
struct PairLoss {
  Tensor total;
  LossBreakdown parts;
};

namespace trainer_detail {

inline Tensor analog_target(const BinaryMatrix& m, double scale) {
  std::vector<double> v(m.bits.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m.bits[i] ? scale : -scale;
  return Tensor::from({m.rows, m.cols}, std::move(v));
}

struct BlockTerms {
  BlockPrediction pred;
  Tensor loss_a, loss_x;
};

inline BlockTerms block_terms(const Graph& block, int t, const NoiseSchedule& sched, const DenoiserParams& params,
                              double analog_scale, Rng& rng) {
  const auto clean = encode_analog(block, analog_scale);
  const auto noise = StateNoise::sample(block.n(), block.feature_dim(), rng);
  const auto noisy = forward_corrupt(clean, t, noise, sched);
  const auto z = extract_features(noisy, t);
  BlockTerms out;
  out.pred = denoise_block(noisy, z, t, params);
  out.loss_a = mse_loss(out.pred.a, Tensor::from({block.n(), block.n()}, clean.a));
  out.loss_x = mse_loss(out.pred.x, Tensor::from({block.n(), block.feature_dim()}, clean.x));
  return out;
}

}  // namespace trainer_detail

/// Corrupts both blocks at one shared t ~ U{1..T}, predicts the clean blocks
/// and their inter-block matrix, and returns
/// L = L_Ai + L_Aj + L_Xi + L_Xj + L_I. A self pair has only the first block,
/// so L_Aj = L_Xj = L_I = 0.
inline PairLoss pair_loss(const TrainingPair& pair, const DenoiserParams& params, const NoiseSchedule& sched,
                          const TrainConfig& config, Rng& rng) {
  using namespace trainer_detail;
  require(pair.block_i && pair.block_j, "pair_loss: pair has no blocks");
  const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.steps)));
  PairLoss out;
  auto bi = block_terms(*pair.block_i, t, sched, params, config.analog_scale, rng);
  out.parts.a_i = bi.loss_a.item();
  out.parts.x_i = bi.loss_x.item();
  out.total = add(bi.loss_a, bi.loss_x);
  if (pair.self_pair()) return out;

  auto bj = block_terms(*pair.block_j, t, sched, params, config.analog_scale, rng);
  const Tensor hi = encode_block(bi.pred, params);
  const Tensor hj = encode_block(bj.pred, params);
  const Tensor logits = predict_interblock(hi, hj, params);
  require(pair.inter && pair.inter->rows == logits.rows() && pair.inter->cols == logits.cols(),
          "pair_loss: inter-block target shape mismatch");
  const Tensor loss_i = mse_loss(logits, analog_target(*pair.inter, config.analog_scale));
  out.parts.a_j = bj.loss_a.item();
  out.parts.x_j = bj.loss_x.item();
  out.parts.inter = loss_i.item();
  out.total = add(add(out.total, add(bj.loss_a, bj.loss_x)), loss_i);
  return out;
}

/// One optimizer update over a batch of pairs. Each pair is forwarded and
/// back-propagated on its own, so at most one pair's activations are live;
/// gradients are averaged over the batch.
inline LossBreakdown train_step(const std::vector<TrainingPair>& batch, DenoiserParams& params,
                                OptimizerState& opt, const NoiseSchedule& sched, const TrainConfig& config,
                                Rng& rng) {
  require(!batch.empty(), "train_step: empty batch");
  params.zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  LossBreakdown mean;
  for (const auto& pair : batch) {
    std::optional<MemoryScope> forward_scope(std::in_place, "forward");
    PairLoss l = pair_loss(pair, params, sched, config, rng);
    forward_scope.reset();
    if (!std::isfinite(l.parts.total())) {
      throw NumericFault("train_step: non-finite loss at optimizer step " + std::to_string(opt.step + 1) +
                         " (graph " + std::to_string(pair.graph) + ", blocks " + std::to_string(pair.i) + "," +
                         std::to_string(pair.j) + ")");
    }
    {
      MemoryScope backward_scope("backward");
      backward(scale(l.total, inv));
    }
    mean += l.parts.scaled(inv);
  }
  auto list = params.list();
  adam_step(list, opt);
  return mean;
}

/// Everything needed to resume training or to sample.
struct Checkpoint {
  static constexpr int version = 1;

  TrainConfig config;
  DenoiserParams params;
  OptimizerState optimizer;
  BlockSizeDistribution block_sizes;
  std::uint64_t step = 0;
  Rng rng;
};

// Checkpoint layout:
//   line 1: "SBGDCKPT 1"
//   line 2: byte length L of the JSON header
//   next L bytes: JSON with config, parameter names and shapes, optimizer
//     step and constants, block-size histogram, step counter and RNG state
//   then: raw little-endian doubles, each parameter's values followed by its
//     first and then second moments, in header order.

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  nlohmann::json j;
  j["config"] = to_json(ck.config);
  j["feature_dim"] = ck.params.config.feature_dim;
  j["ffn_mult"] = ck.params.config.ffn_mult;
  j["step"] = ck.step;
  j["rng"] = ck.rng.serialize();
  j["optimizer"] = {{"step", ck.optimizer.step},
                    {"learning_rate", ck.optimizer.config.learning_rate},
                    {"beta1", ck.optimizer.config.beta1},
                    {"beta2", ck.optimizer.config.beta2},
                    {"epsilon", ck.optimizer.config.epsilon}};
  j["block_sizes"] = nlohmann::json::array();
  for (auto [s, c] : ck.block_sizes.counts) j["block_sizes"].push_back({s, c});
  j["params"] = nlohmann::json::array();
  for (const auto& [name, t] : ck.params.tensors) j["params"].push_back({name, t.rows(), t.cols()});
  const std::string header = j.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out << "SBGDCKPT " << Checkpoint::version << '\n' << header.size() << '\n' << header;
    for (std::size_t k = 0; k < ck.params.tensors.size(); ++k) {
      const auto v = ck.params.tensors[k].second.data();
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
      const bool has_moments = k < ck.optimizer.first_moment.size();
      const std::vector<double> zeros(v.size(), 0.0);
      const auto& m = has_moments ? ck.optimizer.first_moment[k] : zeros;
      const auto& s = has_moments ? ck.optimizer.second_moment[k] : zeros;
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
      out.write(reinterpret_cast<const char*>(s.data()), static_cast<std::streamsize>(s.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed for checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint not found: " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "SBGDCKPT") throw ParseError(path.string(), 1, "not a checkpoint file");
  if (version != Checkpoint::version)
    throw ParseError(path.string(), 1, "unsupported checkpoint version " + std::to_string(version));
  std::size_t len = 0;
  in >> len;
  in.get();
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 3, std::string("bad checkpoint header: ") + e.what());
  }
  Checkpoint ck;
  ck.config = train_config_from_json(j.at("config"));
  ck.step = j.at("step").get<std::uint64_t>();
  ck.rng = Rng::deserialize(j.at("rng").get<std::string>());
  for (const auto& e : j.at("block_sizes")) ck.block_sizes.counts[e[0].get<std::size_t>()] = e[1].get<std::size_t>();
  ck.params.config = ck.config.denoiser(j.at("feature_dim").get<std::size_t>());
  ck.params.config.ffn_mult = j.at("ffn_mult").get<std::size_t>();
  const auto& o = j.at("optimizer");
  ck.optimizer.step = o.at("step").get<std::uint64_t>();
  ck.optimizer.config = {o.at("learning_rate").get<double>(), o.at("beta1").get<double>(),
                         o.at("beta2").get<double>(), o.at("epsilon").get<double>()};
  const auto expected = parameter_shapes(ck.params.config);
  const auto& plist = j.at("params");
  if (plist.size() != expected.size())
    throw ParseError(path.string(), 3, "parameter list does not match the configured architecture");
  for (std::size_t k = 0; k < plist.size(); ++k) {
    const auto name = plist[k][0].get<std::string>();
    const Shape shape{plist[k][1].get<std::size_t>(), plist[k][2].get<std::size_t>()};
    if (name != expected[k].first || shape != expected[k].second)
      throw ParseError(path.string(), 3, "parameter '" + name + "' does not match the configured architecture");
    std::vector<double> v(shape.numel()), m(shape.numel()), s(shape.numel());
    for (auto* buf : {&v, &m, &s})
      in.read(reinterpret_cast<char*>(buf->data()), static_cast<std::streamsize>(buf->size() * sizeof(double)));
    if (!in) throw ParseError(path.string(), 3, "checkpoint payload truncated at parameter '" + name + "'");
    ck.params.tensors.push_back({name, Tensor::from(shape, std::move(v)).set_requires_grad(true)});
    ck.optimizer.first_moment.push_back(std::move(m));
    ck.optimizer.second_moment.push_back(std::move(s));
  }
  return ck;
}

/// One row of the loss curve: means over the preceding log interval.
struct LossRecord {
  std::size_t step = 0;
  LossBreakdown loss;
};

inline void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& rows,
                           const std::string& config_path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# config: " << config_path << '\n';
  out << "step,L_Ai,L_Aj,L_Xi,L_Xj,L_I,total\n";
  char buf[256];
  for (const auto& r : rows) {
    const auto& l = r.loss;
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.step, l.a_i, l.a_j, l.x_i, l.x_j,
                  l.inter, l.total());
    out << buf;
  }
}

struct FitOptions {
  std::optional<std::filesystem::path> checkpoint_path;  // periodic and final save target
  std::optional<Checkpoint> resume;                      // continue from this state
  std::function<void(const LossRecord&)> on_log;         // progress callback
};

struct FitResult {
  Checkpoint checkpoint;
  std::vector<LossRecord> losses;
};

/// Starting state for a fresh run.
inline Checkpoint initial_checkpoint(const DecompositionCache& cache, const TrainConfig& config) {
  Checkpoint ck;
  ck.config = config;
  ck.params = init_denoiser(config.denoiser(cache.feature_dim), config.seed ^ 0x5bd1e995ULL);
  ck.optimizer = OptimizerState::for_params(ck.params.list(), AdamConfig{config.learning_rate});
  ck.block_sizes = cache.block_sizes();
  ck.rng = Rng(config.seed);
  return ck;
}

/// Trains until `config.total_steps` optimizer steps have been taken.
inline FitResult fit(const DecompositionCache& cache, const TrainConfig& config, FitOptions options = {}) {
  config.validate();
  require(cache.size() > 0, "fit: empty dataset");
  FitResult result;
  result.checkpoint = options.resume ? std::move(*options.resume) : initial_checkpoint(cache, config);
  Checkpoint& ck = result.checkpoint;
  ck.config.total_steps = config.total_steps;
  const auto sched = make_schedule(ck.config.schedule, ck.config.diffusion_steps);

  LossBreakdown acc;
  std::size_t acc_n = 0;
  while (ck.step < config.total_steps) {
    const auto batch = build_training_pairs(cache, ck.config.pairs_per_batch, ck.rng);
    acc += train_step(batch, ck.params, ck.optimizer, sched, ck.config, ck.rng);
    ++acc_n;
    ++ck.step;
    if (ck.step % ck.config.log_interval == 0) {
      LossRecord rec{static_cast<std::size_t>(ck.step), acc.scaled(1.0 / static_cast<double>(acc_n))};
      result.losses.push_back(rec);
      if (options.on_log) options.on_log(rec);
      acc = {};
      acc_n = 0;
    }
    if (options.checkpoint_path && ck.config.checkpoint_interval > 0 &&
        ck.step % ck.config.checkpoint_interval == 0)
      save_checkpoint(*options.checkpoint_path, ck);
  }
  if (options.checkpoint_path) save_checkpoint(*options.checkpoint_path, ck);
  return result;
}

inline FitResult fit(const std::vector<Graph>& dataset, const TrainConfig& config, FitOptions options = {}) {
  return fit(build_decomposition_cache(dataset, config), config, std::move(options));
}

/// Peak live tensor elements attributable to one instrumented training step,
/// measured after a warm-up step so that gradient buffers already exist.
struct StepMemory {
  std::int64_t peak = 0;          // above the live count at scope entry
  std::int64_t resident = 0;      // live count at scope entry (parameters, gradients)
  std::map<std::string, std::int64_t> phases;
};

inline StepMemory measure_step_memory(const DecompositionCache& cache, const TrainConfig& config) {
  auto& meter = MemoryMeter::local();
  const bool was_enabled = meter.enabled();
  meter.set_enabled(true);
  meter.clear_phases();
  Checkpoint ck = initial_checkpoint(cache, config);
  const auto sched = make_schedule(config.schedule, config.diffusion_steps);
  train_step(build_training_pairs(cache, config.pairs_per_batch, ck.rng), ck.params, ck.optimizer, sched, config,
             ck.rng);
  StepMemory out;
  {
    const auto batch = build_training_pairs(cache, config.pairs_per_batch, ck.rng);
    MemoryScope scope("train_step");
    train_step(batch, ck.params, ck.optimizer, sched, config, ck.rng);
    const auto snap = scope.close();
    out.peak = snap.peak - snap.at_entry;
    out.resident = snap.at_entry;
  }
  out.phases = meter.phase_peaks();
  meter.set_enabled(was_enabled);
  return out;
}

}  // namespace sbgd
