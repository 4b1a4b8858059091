#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "graph.hpp"
#include "graph_io.hpp"
#include "json.hpp"

namespace sbgd {

// A dataset is a directory of graph files plus `manifest.json`:
//
//   { "format": "sbgd-dataset", "version": 1,
//     "generator": { ... }, "seed": 7,
//     "graphs": [ { "file": "graph_0000.txt", "split": "train" }, ... ] }

struct DatasetEntry {
  std::string file;
  std::string split;  // "train" or "test"
};

struct DatasetManifest {
  nlohmann::json generator = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<DatasetEntry> entries;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "sbgd-dataset";
    j["version"] = 1;
    j["generator"] = generator;
    j["seed"] = seed;
    j["graphs"] = nlohmann::json::array();
    for (const auto& e : entries) j["graphs"].push_back({{"file", e.file}, {"split", e.split}});
    return j;
  }
};

inline std::string graph_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "graph_%04zu.txt", index);
  return buf;
}

/// Writes every graph and the manifest. `splits` must match `graphs` in length.
inline void write_dataset(const std::filesystem::path& dir, const std::vector<Graph>& graphs,
                          const std::vector<std::string>& splits, const nlohmann::json& generator,
                          std::uint64_t seed) {
  require(graphs.size() == splits.size(), "write_dataset: one split tag per graph required");
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.generator = generator;
  m.seed = seed;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto name = graph_file_name(i);
    write_graph_file(dir / name, graphs[i]);
    m.entries.push_back({name, splits[i]});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << m.to_json().dump(2) << '\n';
}

inline DatasetManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset manifest not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, std::string("invalid JSON: ") + e.what());
  }
  if (!j.contains("graphs") || !j["graphs"].is_array())
    throw ParseError(path.string(), 0, "manifest lacks a 'graphs' array");
  DatasetManifest m;
  m.generator = j.value("generator", nlohmann::json::object());
  m.seed = j.value("seed", std::uint64_t{0});
  for (const auto& e : j["graphs"]) {
    m.entries.push_back({e.at("file").get<std::string>(), e.value("split", std::string("train"))});
  }
  return m;
}

/// Loads the graphs of one split ("train", "test") or all of them ("").
inline std::vector<Graph> load_dataset(const std::filesystem::path& dir, const std::string& split = "") {
  const auto m = read_manifest(dir);
  std::vector<Graph> out;
  for (const auto& e : m.entries)
    if (split.empty() || e.split == split) out.push_back(read_graph_file(dir / e.file));
  return out;
}

}  // namespace sbgd
