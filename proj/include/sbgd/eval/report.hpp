#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "../trainer.hpp"
#include "descriptors.hpp"
#include "fid.hpp"
#include "mmd.hpp"
#include "vun.hpp"

namespace sbgd::eval {

/// Baseline peak over SBGD peak, both measured around one training step.
inline double memory_ratio(const StepMemory& baseline, const StepMemory& sbgd) {
  require(baseline.peak > 0 && sbgd.peak > 0, "memory_ratio: both runs need a positive peak measurement");
  return static_cast<double>(baseline.peak) / static_cast<double>(sbgd.peak);
}

/// Element-count model of the same ratio: (N^2 + N F) / ((2C)^2 + 2 C F).
inline double memory_model_ratio(std::size_t n, std::size_t c, std::size_t f) {
  const double nn = static_cast<double>(n), cc = static_cast<double>(c), ff = static_cast<double>(f);
  return (nn * nn + nn * ff) / (4.0 * cc * cc + 2.0 * cc * ff);
}

struct EvalConfig {
  MmdConfig mmd;
  std::uint64_t fid_seed = kFidEncoderSeed;
  std::optional<Validity> validity;  // V.U.N is computed only when set and a training set is given
  bool orbits = true;
  std::size_t threads = 1;
};

struct MetricsReport {
  double mmd_degree = 0, mmd_clustering = 0, mmd_orbit = 0, mmd_spectrum = 0;
  double avg_mmd = 0;  // mean of the four MMD columns above
  double fid = 0;
  std::optional<double> vun;
  std::optional<double> memory_ratio;
  std::size_t reference_count = 0, generated_count = 0;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j = {{"mmd_degree", mmd_degree},
                        {"mmd_clustering", mmd_clustering},
                        {"mmd_orbit", std::isnan(mmd_orbit) ? nlohmann::json(nullptr) : nlohmann::json(mmd_orbit)},
                        {"mmd_spectrum", mmd_spectrum},
                        {"avg_mmd_4", avg_mmd},
                        {"fid", fid},
                        {"vun", vun ? nlohmann::json(*vun) : nlohmann::json(nullptr)},
                        {"memory_ratio", memory_ratio ? nlohmann::json(*memory_ratio) : nlohmann::json(nullptr)},
                        {"reference_count", reference_count},
                        {"generated_count", generated_count},
                        {"config", config}};
    return j;
  }

  static std::string csv_header() {
    return "mmd_degree,mmd_clustering,mmd_orbit,mmd_spectrum,avg_mmd_4,fid,vun,memory_ratio,reference_count,"
           "generated_count";
  }

  std::string csv_row() const {
    std::ostringstream os;
    os.precision(10);
    auto opt = [&](const std::optional<double>& v) {
      if (v) os << *v;
    };
    os << mmd_degree << ',' << mmd_clustering << ',';
    if (!std::isnan(mmd_orbit)) os << mmd_orbit;
    os << ',' << mmd_spectrum << ',' << avg_mmd << ',' << fid << ',';
    opt(vun);
    os << ',';
    opt(memory_ratio);
    os << ',' << reference_count << ',' << generated_count;
    return os.str();
  }
};

/// MMDs, FID and (optionally) V.U.N of a generated set against a reference
/// set. With orbits disabled, mmd_orbit is NaN and the average covers the
/// three remaining descriptors.
inline MetricsReport evaluate(const std::vector<Graph>& reference, const std::vector<Graph>& generated,
                              const EvalConfig& cfg = {}, const std::vector<Graph>* train = nullptr) {
  require(!reference.empty() && !generated.empty(), "evaluate: both sets must be nonempty");
  MetricsReport r;
  r.reference_count = reference.size();
  r.generated_count = generated.size();
  const auto dr = descriptors(reference, cfg.orbits, cfg.threads);
  const auto dg = descriptors(generated, cfg.orbits, cfg.threads);
  r.mmd_degree = mmd(dr, dg, Descriptor::degree, cfg.mmd);
  r.mmd_clustering = mmd(dr, dg, Descriptor::clustering, cfg.mmd);
  r.mmd_spectrum = mmd(dr, dg, Descriptor::spectrum, cfg.mmd);
  if (cfg.orbits) {
    r.mmd_orbit = mmd(dr, dg, Descriptor::orbit, cfg.mmd);
    r.avg_mmd = (r.mmd_degree + r.mmd_clustering + r.mmd_orbit + r.mmd_spectrum) / 4.0;
  } else {
    r.mmd_orbit = std::nan("");
    r.avg_mmd = (r.mmd_degree + r.mmd_clustering + r.mmd_spectrum) / 3.0;
  }
  r.fid = fid(reference, generated, cfg.fid_seed);
  if (cfg.validity && train) r.vun = vun(generated, *train, *cfg.validity);
  r.config = {{"sigma", cfg.mmd.sigma},
              {"orbit_sigma", cfg.mmd.orbit_sigma},
              {"fid_seed", cfg.fid_seed},
              {"orbits", cfg.orbits},
              {"validity", cfg.validity ? to_string(*cfg.validity) : "off"}};
  return r;
}

}  // namespace sbgd::eval
