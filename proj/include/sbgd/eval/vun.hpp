#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "../errors.hpp"
#include "../graph.hpp"
#include "planarity.hpp"
#include "wl.hpp"

namespace sbgd::eval {

enum class Validity { planarity, connectivity, none };

inline std::string to_string(Validity v) {
  switch (v) {
    case Validity::planarity: return "planarity";
    case Validity::connectivity: return "connectivity";
    case Validity::none: return "none";
  }
  return "?";
}

inline Validity validity_from(const std::string& s) {
  if (s == "planarity") return Validity::planarity;
  if (s == "connectivity") return Validity::connectivity;
  if (s == "none") return Validity::none;
  throw ContractViolation("unknown validity checker '" + s + "' (expected planarity, connectivity or none)");
}

inline bool is_valid(const Graph& g, Validity v) {
  switch (v) {
    case Validity::planarity: return is_planar(g);
    case Validity::connectivity: return is_connected(g);
    case Validity::none: return true;
  }
  return true;
}

struct VunBreakdown {
  std::size_t total = 0, valid = 0, unique = 0, novel = 0, vun = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(vun) / static_cast<double>(total); }
};

/// Valid, unique (first occurrence of its WL hash among the generated
/// graphs) and novel (hash absent from the training set).
inline VunBreakdown vun_breakdown(const std::vector<Graph>& generated, const std::vector<Graph>& train, Validity v) {
  require(!generated.empty() && !train.empty(), "vun: both sets must be nonempty");
  std::unordered_set<std::uint64_t> train_hashes, seen;
  for (const auto& g : train) train_hashes.insert(wl_hash(g));
  VunBreakdown b;
  b.total = generated.size();
  for (const auto& g : generated) {
    const bool ok = is_valid(g, v);
    const auto h = wl_hash(g);
    const bool first = seen.insert(h).second;
    const bool novel = !train_hashes.count(h);
    b.valid += ok;
    b.unique += first;
    b.novel += novel;
    b.vun += ok && first && novel;
  }
  return b;
}

inline double vun(const std::vector<Graph>& generated, const std::vector<Graph>& train, Validity v) {
  return vun_breakdown(generated, train, v).fraction();
}

}  // namespace sbgd::eval
