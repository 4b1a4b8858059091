#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "denoiser.hpp"
#include "diffusion.hpp"
#include "features.hpp"
#include "json.hpp"
#include "parallel.hpp"
#include "trainer.hpp"

namespace sbgd {

enum class SampleMode { ddpm, ddim };
enum class SizeSource { empirical, fixed };

inline std::string to_string(SampleMode m) { return m == SampleMode::ddpm ? "ddpm" : "ddim"; }
inline std::string to_string(SizeSource s) { return s == SizeSource::empirical ? "empirical" : "fixed"; }

struct SampleConfig {
  std::size_t k = 2;
  SampleMode mode = SampleMode::ddpm;
  int ddim_stride = 1;
  int steps = 0;  // DDIM jumps; 0 derives them from the stride
  double tau = 0.5;
  std::uint64_t seed = 0;
  SizeSource size_source = SizeSource::empirical;
  std::size_t fixed_n = 0;
  std::size_t threads = 1;

  void validate() const {
    require(k >= 1, "SampleConfig: k must be at least 1");
    require(tau > 0.0 && tau < 1.0, "SampleConfig: tau must lie in (0, 1), got " + std::to_string(tau));
    require(ddim_stride >= 1, "SampleConfig: ddim_stride must be positive");
    require(steps >= 0, "SampleConfig: steps must be nonnegative");
    require(size_source == SizeSource::empirical || fixed_n >= 1,
            "SampleConfig: size source 'fixed' needs fixed_n >= 1");
    require(threads >= 1, "SampleConfig: threads must be positive");
  }
};

inline nlohmann::json to_json(const SampleConfig& c) {
  return {{"k", c.k},
          {"mode", to_string(c.mode)},
          {"ddim_stride", c.ddim_stride},
          {"steps", c.steps},
          {"tau", c.tau},
          {"seed", c.seed},
          {"size_source", to_string(c.size_source)},
          {"fixed_n", c.fixed_n}};
}

/// Strict: unknown keys and unknown enum spellings are contract violations.
inline SampleConfig sample_config_from_json(const nlohmann::json& j, SampleConfig base = {}) {
  require(j.is_object(), "sample config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "k") base.k = v.get<std::size_t>();
    else if (key == "mode") {
      const auto s = v.get<std::string>();
      require(s == "ddpm" || s == "ddim", "sample config: mode must be 'ddpm' or 'ddim', got '" + s + "'");
      base.mode = s == "ddpm" ? SampleMode::ddpm : SampleMode::ddim;
    } else if (key == "ddim_stride") base.ddim_stride = v.get<int>();
    else if (key == "steps") base.steps = v.get<int>();
    else if (key == "tau") base.tau = v.get<double>();
    else if (key == "seed") base.seed = v.get<std::uint64_t>();
    else if (key == "size_source") {
      const auto s = v.get<std::string>();
      require(s == "empirical" || s == "fixed",
              "sample config: size_source must be 'empirical' or 'fixed', got '" + s + "'");
      base.size_source = s == "empirical" ? SizeSource::empirical : SizeSource::fixed;
    } else if (key == "fixed_n") base.fixed_n = v.get<std::size_t>();
    else throw ContractViolation("sample config: unknown key '" + key + "'");
  }
  base.validate();
  return base;
}

/// Reverse-time visiting order: T, T - s, ..., down to 0 (always included).
inline std::vector<int> reverse_timesteps(int T, const SampleConfig& c) {
  require(c.steps <= T, "SampleConfig: steps " + std::to_string(c.steps) + " exceed T = " + std::to_string(T));
  std::vector<int> ts;
  if (c.mode == SampleMode::ddpm) {
    for (int t = T; t >= 0; --t) ts.push_back(t);
    return ts;
  }
  const int stride = c.steps > 0 ? (T + c.steps - 1) / c.steps : c.ddim_stride;
  for (int t = T; t > 0; t -= stride) ts.push_back(t);
  ts.push_back(0);
  return ts;
}

struct SampledBlock {
  Graph graph;
  BlockPrediction prediction;  // last clean-state estimate, read by the inter-block predictor
};

/// Reverse diffusion of one block of n nodes from pure noise.
inline SampledBlock sample_block(std::size_t n, const DenoiserParams& params, const NoiseSchedule& sched,
                                 const SampleConfig& config, Rng& rng) {
  NoGradGuard no_grad;
  const std::size_t f = params.config.feature_dim;
  const auto ts = reverse_timesteps(sched.steps, config);
  AnalogGraphState state = gaussian_state(n, f, sched.steps, rng);
  SampledBlock out;
  for (std::size_t s = 0; s + 1 < ts.size(); ++s) {
    const int t = ts[s];
    out.prediction = denoise_block(state, extract_features(state, t), t, params);
    const auto clean = to_state(out.prediction, f);
    if (config.mode == SampleMode::ddpm) {
      state = ddpm_step(state, clean, t, sched, StateNoise::sample(n, f, rng));
    } else {
      state = ddim_step(state, clean, t, ts[s + 1], sched);
    }
  }
  out.graph = decode_analog(state);
  return out;
}

/// Draws k block sizes and runs the reverse process for every block. Each
/// block owns a child random stream, so the result does not depend on the
/// number of worker threads.
inline std::vector<SampledBlock> sample_blocks(const Checkpoint& ck, const SampleConfig& config) {
  config.validate();
  const auto sched = make_schedule(ck.config.schedule, ck.config.diffusion_steps);
  Rng rng(config.seed);
  std::vector<std::size_t> sizes(config.k);
  std::vector<Rng> streams;
  for (std::size_t i = 0; i < config.k; ++i) {
    sizes[i] = config.size_source == SizeSource::fixed ? config.fixed_n : ck.block_sizes.sample(rng);
    streams.push_back(rng.split(i));
  }
  std::vector<SampledBlock> blocks(config.k);
  parallel_for(config.k, config.threads, [&](std::size_t i) {
    try {
      blocks[i] = sample_block(sizes[i], ck.params, sched, config, streams[i]);
    } catch (const NumericFault& e) {
      throw NumericFault("sample_blocks: block " + std::to_string(i) + ": " + e.what());
    }
  });
  return blocks;
}

/// Symmetrized inter-block logits (L_ij + L_ji^T) / 2 for blocks i and j.
inline std::vector<double> interblock_logits(const SampledBlock& bi, const SampledBlock& bj,
                                             const DenoiserParams& params) {
  NoGradGuard no_grad;
  const Tensor hi = encode_block(bi.prediction, params), hj = encode_block(bj.prediction, params);
  const Tensor lij = predict_interblock(hi, hj, params), lji = predict_interblock(hj, hi, params);
  const std::size_t ni = bi.graph.n(), nj = bj.graph.n();
  std::vector<double> out(ni * nj);
  for (std::size_t u = 0; u < ni; ++u)
    for (std::size_t v = 0; v < nj; ++v) out[u * nj + v] = 0.5 * (lij.at(u, v) + lji.at(v, u));
  return out;
}

/// Block-diagonal union of the sampled blocks plus every inter-block edge
/// whose logistic probability exceeds tau.
inline Graph assemble_graph(const std::vector<SampledBlock>& blocks, const DenoiserParams& params,
                            const SampleConfig& config) {
  require(!blocks.empty(), "assemble_graph: no blocks");
  const std::size_t f = blocks.front().graph.feature_dim();
  std::vector<std::size_t> offset{0};
  for (const auto& b : blocks) {
    require(b.graph.feature_dim() == f, "assemble_graph: blocks disagree on feature width");
    offset.push_back(offset.back() + b.graph.n());
  }
  Graph g(offset.back(), f);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i].graph;
    for (auto [u, v] : b.edges()) g.add_edge(offset[i] + u, offset[i] + v);
    for (std::size_t u = 0; u < b.n(); ++u)
      for (std::size_t k = 0; k < f; ++k) g.feature(offset[i] + u, k) = b.feature(u, k);
  }
  const double cut = std::log(config.tau / (1.0 - config.tau));
  for (std::size_t i = 0; i < blocks.size(); ++i)
    for (std::size_t j = i + 1; j < blocks.size(); ++j) {
      const auto logits = interblock_logits(blocks[i], blocks[j], params);
      const std::size_t nj = blocks[j].graph.n();
      for (std::size_t u = 0; u < blocks[i].graph.n(); ++u)
        for (std::size_t v = 0; v < nj; ++v)
          if (logits[u * nj + v] > cut) g.add_edge(offset[i] + u, offset[j] + v);
    }
  return g;
}

inline Graph sample_graph(const Checkpoint& ck, const SampleConfig& config) {
  return assemble_graph(sample_blocks(ck, config), ck.params, config);
}

/// Seed of the i-th sample of a batch drawn with base seed s.
inline std::uint64_t sample_seed(std::uint64_t base, std::size_t index) {
  return Rng(base ^ (0x94d049bb133111ebULL * (index + 1))).next_u64();
}

/// `count` independent samples; sample i is sample_graph with sample_seed(seed, i).
inline std::vector<Graph> sample_graphs(const Checkpoint& ck, std::size_t count, const SampleConfig& config) {
  require(count >= 1, "sample_graphs: count must be at least 1");
  config.validate();
  std::vector<Graph> out(count);
  parallel_for(count, config.threads, [&](std::size_t i) {
    SampleConfig c = config;
    c.seed = sample_seed(config.seed, i);
    c.threads = 1;
    out[i] = sample_graph(ck, c);
  });
  return out;
}

/// Writes `count` samples as a dataset directory whose manifest records the
/// sampling config, the base seed and the checkpoint path.
inline std::vector<Graph> sample_dataset(const Checkpoint& ck, std::size_t count, const SampleConfig& config,
                                         const std::filesystem::path& dir, const std::string& checkpoint_path = "") {
  auto graphs = sample_graphs(ck, count, config);
  nlohmann::json gen = {{"kind", "sbgd-sample"}, {"sample_config", to_json(config)}, {"checkpoint", checkpoint_path},
                        {"train_step", ck.step}};
  write_dataset(dir, graphs, std::vector<std::string>(count, "sample"), gen, config.seed);
  return graphs;
}

/// The full-graph reference model: the same trainer with every graph kept
/// as one block, so no pairs and no inter-block term.
inline TrainConfig baseline_train_config(TrainConfig c) {
  c.blocks = 1;
  return c;
}

inline SampleConfig baseline_sample_config(SampleConfig c) {
  c.k = 1;
  return c;
}

}  // namespace sbgd
