#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace decoupler::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2, kCheckFailed = 3 };

struct CompileArgs {
  std::filesystem::path config;
  std::optional<int> jobs;
  std::optional<std::filesystem::path> output_dir;
};

struct CostEvalArgs {
  std::filesystem::path circuit;
  std::string partition;
  std::string mode = "exact";
  long shots = 10000;
  std::uint64_t seed = 0;
};

struct GradCheckArgs {
  std::filesystem::path circuit;
  std::string partition;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  int points = 5;
};

struct PlotArgs {
  std::vector<std::filesystem::path> traces;
  std::filesystem::path output;
  std::string title = "training";
};

int cmd_compile(const CompileArgs& args, std::ostream& out);
int cmd_cost_eval(const CostEvalArgs& args, std::ostream& out);
int cmd_grad_check(const GradCheckArgs& args, std::ostream& out);
int cmd_plot(const PlotArgs& args, std::ostream& out);

/// Parses argv, dispatches, and maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace decoupler::cli
