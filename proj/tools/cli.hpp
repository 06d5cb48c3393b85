// Command-line front end: gen-synthetic, train, eval, sweep-k, gradcheck.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tkgat/autodiff.hpp"
#include "tkgat/training.hpp"

namespace tkgat::cli {

inline constexpr const char* kVersion = "tkgat 0.1.0";
inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kSweepHeader = "k,mae,mse,rmse,seed";

/// Runs one command. args excludes the program name. Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

nlohmann::ordered_json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& doc);

struct ModelFile {
  ModelParams params;
  TrainConfig config;
};

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

/// Seeded 6-node snapshot (F=3, F'=4, k=2, lambda=0.3) and the
/// gradient check of its full MSE loss w.r.t. W, a, W_out, b_out.
struct GradcheckProblem {
  GraphSnapshot snapshot;
  ModelParams params;
};
GradcheckProblem make_gradcheck_problem(std::uint64_t seed);
GradCheckResult run_gradcheck(const GradcheckProblem& problem, double h = 1e-6);

}  // namespace tkgat::cli
