// Shared datasets and helpers for the CLI and acceptance tests.
#pragma once

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "tkgat/dataset.hpp"

namespace tkgat::fixture {

/// 10 nodes, each with exactly 5 in-neighbors, so the average in-degree is 5.
inline TemporalGraphDataset degree_five_dataset() {
  constexpr std::size_t n = 10;
  std::vector<Edge> edges;
  std::vector<double> weights;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 1; d <= 5; ++d) {
      edges.push_back({(i + d) % n, i});
      weights.push_back(1.0 / static_cast<double>(d));
    }
  Series series(16, std::vector<double>(n));
  for (std::size_t t = 0; t < series.size(); ++t)
    for (std::size_t i = 0; i < n; ++i) series[t][i] = std::sin(0.7 * static_cast<double>(t) + static_cast<double>(i));

  TemporalGraphDataset ds;
  ds.name = "degree-five";
  ds.num_nodes = n;
  ds.lags = 3;
  ds.snapshots = build_lagged_snapshots(series, ds.lags, edges, weights);
  ds.series = series;
  return ds;
}

struct RunResult {
  int status;
  std::string out;
  std::string err;
};

inline RunResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tkgat_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tkgat::fixture
