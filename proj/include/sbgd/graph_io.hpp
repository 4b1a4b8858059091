#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "graph.hpp"

namespace sbgd {

// Text graph format, one graph per block of lines:
//
//   n F
//   <n rows of F space-separated decimals>   (omitted when F = 0)
//   u v                                       (one line per edge, u < v)
//   <blank line>
//
// Decimals are written with 17 significant digits so the round trip is exact.

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_graph(std::ostream& os, const Graph& g) {
  os << g.n() << ' ' << g.feature_dim() << '\n';
  for (std::size_t v = 0; v < g.n() && g.feature_dim() > 0; ++v) {
    for (std::size_t k = 0; k < g.feature_dim(); ++k) {
      if (k) os << ' ';
      os << format_double(g.feature(v, k));
    }
    os << '\n';
  }
  for (auto [u, v] : g.edges()) os << u << ' ' << v << '\n';
  os << '\n';
}

namespace detail {

inline bool parse_size(const std::string& token, std::size_t& out) {
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos) return false;
  try {
    out = std::stoull(token);
  } catch (...) {
    return false;
  }
  return true;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace detail

/// Reads the next graph from `is`. Returns nullopt at end of stream. Leading
/// blank lines are skipped. `line_no` tracks the current line for messages.
inline std::optional<Graph> read_graph(std::istream& is, const std::string& source, std::size_t& line_no) {
  std::string line;
  do {
    if (!std::getline(is, line)) return std::nullopt;
    ++line_no;
  } while (detail::is_blank(line));

  const auto header = detail::split_ws(line);
  std::size_t n = 0, f = 0;
  if (header.size() != 2 || !detail::parse_size(header[0], n) || !detail::parse_size(header[1], f)) {
    throw ParseError(source, line_no, "malformed header, expected 'n F'");
  }
  Graph g(n, f);
  for (std::size_t v = 0; v < n && f > 0; ++v) {
    if (!std::getline(is, line)) throw ParseError(source, line_no + 1, "feature row count != n (file ended)");
    ++line_no;
    const auto tokens = detail::split_ws(line);
    if (tokens.size() != f) {
      throw ParseError(source, line_no, "feature row has " + std::to_string(tokens.size()) +
                                            " values, expected F=" + std::to_string(f) +
                                            (tokens.size() == 2 ? " (feature row count != n?)" : ""));
    }
    for (std::size_t k = 0; k < f; ++k) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(tokens[k], &used);
      } catch (...) {
        used = 0;
      }
      if (used != tokens[k].size()) throw ParseError(source, line_no, "bad decimal '" + tokens[k] + "'");
      g.feature(v, k) = value;
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::is_blank(line)) break;
    const auto tokens = detail::split_ws(line);
    std::size_t u = 0, v = 0;
    if (tokens.size() != 2 || !detail::parse_size(tokens[0], u) || !detail::parse_size(tokens[1], v)) {
      throw ParseError(source, line_no, "malformed edge line, expected 'u v'" +
                                            std::string(f > 0 ? " (feature row count != n?)" : ""));
    }
    if (u == v) throw ParseError(source, line_no, "self-loop (" + tokens[0] + "," + tokens[1] + ") rejected");
    if (u >= n || v >= n) throw ParseError(source, line_no, "edge endpoint out of range for n=" + std::to_string(n));
    if (u > v) throw ParseError(source, line_no, "asymmetric edge list: edge must be written with u < v");
    if (!seen.insert({u, v}).second) throw ParseError(source, line_no, "duplicate edge");
    g.add_edge(u, v);
  }
  return g;
}

inline Graph read_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file " + path.string());
  std::size_t line_no = 0;
  auto g = read_graph(in, path.string(), line_no);
  if (!g) throw ParseError(path.string(), line_no, "empty file");
  return *g;
}

inline void write_graph_file(const std::filesystem::path& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file " + path.string());
  write_graph(out, g);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Partition as one line of n block ids.
inline void write_partition(std::ostream& os, const Partition& p) {
  for (std::size_t v = 0; v < p.assignment.size(); ++v) os << (v ? " " : "") << p.assignment[v];
  os << '\n';
}

inline Partition read_partition(std::istream& is, double balance_eps = 0.1) {
  std::string line;
  std::getline(is, line);
  Partition p;
  p.balance_eps = balance_eps;
  std::size_t k = 0;
  for (const auto& tok : detail::split_ws(line)) {
    std::size_t b = 0;
    if (!detail::parse_size(tok, b)) throw ParseError("partition", 1, "bad block id '" + tok + "'");
    p.assignment.push_back(b);
    k = std::max(k, b + 1);
  }
  p.k = std::max<std::size_t>(k, 1);
  return p;
}

}  // namespace sbgd
