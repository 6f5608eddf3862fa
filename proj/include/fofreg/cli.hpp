#pragma once

#include <cstdint>
#include <string>

#include "fofreg/model.hpp"

namespace fofreg::cli {

// Exit codes shared by every subcommand: 0 success, 2 user/input error,
// 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 2;
inline constexpr int kExitNumericalError = 3;

struct FitOptions {
  std::string x_csv;
  std::string y_csv;
  std::string model_out;
  FitConfig fit;
  bool rescale_auto = true;
  std::uint64_t seed = 0;  // echoed into outputs; fitting itself is deterministic
};

struct PredictOptions {
  std::string model_path;
  std::string x_csv;
  std::string out_csv;
  int t_grid_size = 100;
};

struct GcvOptions {
  std::string x_csv;
  std::string y_csv;
  std::string out_csv;
  FitConfig fit;
  bool rescale_auto = true;
  std::uint64_t seed = 0;
};

struct SimulateOptions {
  int scenario = 3;
  int n = 30;
  double snr = 10.0;
  int sparsity = 0;  // 0 = dense protocol
  int replicates = 1;
  std::uint64_t seed = 0;
  int test_size = 0;  // 0 = protocol default (30 dense, 50 sparse)
  bool presmooth = true;
  bool timing = false;  // embed wall-clock times in the CSV (breaks byte determinism)
  FitConfig fit;
  std::string out_csv;
};

int cmd_fit(const FitOptions& opt);
int cmd_predict(const PredictOptions& opt);
int cmd_gcv(const GcvOptions& opt);
int cmd_simulate(const SimulateOptions& opt);

/// Parses argv and dispatches to a subcommand.
int run(int argc, const char* const* argv);

}  // namespace fofreg::cli
