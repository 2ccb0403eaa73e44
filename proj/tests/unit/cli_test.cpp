#include <expat.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "decoupler/circuit_json.hpp"
#include "decoupler/experiment.hpp"
#include "decoupler/svg_plot.hpp"
#include "testkit.hpp"

using namespace decoupler;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "decoupler");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("decoupler_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

fs::path cnot_file(const fs::path& dir) {
  return write_text(dir / "cnot.json", R"({"num_qubits": 2, "num_params": 0,
      "gates": [{"kind": "CNOT", "targets": [0, 1]}]})");
}

bool well_formed_xml(const std::string& text) {
  XML_Parser parser = XML_ParserCreate(nullptr);
  const bool ok = XML_Parse(parser, text.data(), static_cast<int>(text.size()), 1) == XML_STATUS_OK;
  XML_ParserFree(parser);
  return ok;
}

}  // namespace

TEST(CostEval, CnotExactValue) {
  const fs::path dir = scratch("cnot");
  const Result r = invoke({"cost-eval", cnot_file(dir).string(), "--partition", "0;1"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_NEAR(doc["value"].get<double>(), 8.0 / 27.0, 1e-9);
  EXPECT_EQ(doc["mode"], "exact");
  EXPECT_EQ(doc["partition"], "0;1");
}

TEST(CostEval, DensityAgreesAndIdentityIsZero) {
  const fs::path dir = scratch("modes");
  const Result dens = invoke({"cost-eval", cnot_file(dir).string(), "--mode", "density"});
  ASSERT_EQ(dens.code, cli::kOk) << dens.err;
  EXPECT_NEAR(nlohmann::json::parse(dens.out)["value"].get<double>(), 8.0 / 27.0, 1e-9);
  const fs::path id = write_text(dir / "id.json", R"({"num_qubits": 2, "num_params": 0, "gates": []})");
  const Result zero = invoke({"cost-eval", id.string()});
  ASSERT_EQ(zero.code, cli::kOk) << zero.err;
  EXPECT_NEAR(nlohmann::json::parse(zero.out)["value"].get<double>(), 0.0, 1e-12);
}

TEST(CostEval, SampledIsSeedDeterministic) {
  const fs::path file = cnot_file(scratch("sampled"));
  const auto run = [&](const char* seed) {
    return invoke({"cost-eval", file.string(), "--mode", "sampled", "--shots", "2000", "--seed", seed}).out;
  };
  EXPECT_EQ(run("4"), run("4"));
  const auto doc = nlohmann::json::parse(run("4"));
  EXPECT_EQ(doc["shots_used"], 2000);
  EXPECT_NEAR(doc["value"].get<double>(), 8.0 / 27.0, 4 * doc["std_error"].get<double>() + 1e-12);
}

TEST(GradCheck, PassesOnRandomAnsatzAndFailsAtZeroTolerance) {
  const fs::path dir = scratch("grad");
  const fs::path file = dir / "ansatz.json";
  save_circuit(universal_two_qubit_ansatz(), file);
  const Result ok = invoke({"grad-check", file.string(), "--tol", "1e-6", "--points", "3"});
  EXPECT_EQ(ok.code, cli::kOk) << ok.out << ok.err;
  const auto report = nlohmann::json::parse(ok.out);
  EXPECT_TRUE(report["pass"].get<bool>());
  EXPECT_EQ(report["points"].size(), 3U);
  const Result strict = invoke({"grad-check", file.string(), "--tol", "0", "--points", "1"});
  EXPECT_EQ(strict.code, cli::kCheckFailed);
}

TEST(GradCheck, NoParametersPassesVacuously) {
  const Result r = invoke({"grad-check", cnot_file(scratch("vacuous")).string()});
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_TRUE(nlohmann::json::parse(r.out)["points"].empty());
}

TEST(Compile, WritesOutputsAndPlotIsWellFormed) {
  const fs::path dir = scratch("compile");
  const fs::path cfg = write_text(dir / "cfg.json", R"({"experiment": "two_qubit_haar", "seeds": [0, 1],
      "output_dir": "ignored", "write_wall_time": false})");
  const fs::path out = dir / "out";
  const Result r = invoke({"compile", cfg.string(), "--jobs", "2", "--output-dir", out.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("median final fidelity"), std::string::npos);
  std::ifstream svg_in(out / "curves.svg");
  std::stringstream svg;
  svg << svg_in.rdbuf();
  EXPECT_TRUE(well_formed_xml(svg.str()));

  const fs::path plotted = dir / "replot.svg";
  const Result p = invoke({"plot", (out / "trace_seed0.csv").string(), (out / "trace_seed1.csv").string(), "-o",
                           plotted.string(), "--title", "a < b & c"});
  ASSERT_EQ(p.code, cli::kOk) << p.err;
  std::ifstream re_in(plotted);
  std::stringstream re;
  re << re_in.rdbuf();
  EXPECT_TRUE(well_formed_xml(re.str()));
  EXPECT_NE(re.str().find("<svg"), std::string::npos);
}

TEST(SvgPlot, SingleTraceAndEscapedTitleStayWellFormed) {
  TrainingTrace t;
  TraceRow row;
  for (long i = 0; i < 4; ++i) {
    row.iteration = i;
    row.phase = "cd";
    row.objective = 1.0 / static_cast<double>(i + 1);
    row.fidelity = 0.5;
    t.append(row);
  }
  EXPECT_TRUE(well_formed_xml(render_training_svg({{"solo", {t}}}, "\"x\" <y>")));
  EXPECT_TRUE(well_formed_xml(render_training_svg({}, "empty")));
}

TEST(ExitCodes, UsageErrors) {
  const fs::path dir = scratch("usage");
  EXPECT_EQ(invoke({}).code, cli::kUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"cost-eval", cnot_file(dir).string(), "--mode", "bogus"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"cost-eval", (dir / "missing.json").string()}).code, cli::kUsage);
  EXPECT_EQ(invoke({"cost-eval", cnot_file(dir).string(), "--partition", "0;2"}).code, cli::kUsage);
  const fs::path bad = write_text(dir / "bad.json", R"({"experiment": "two_qubit_haar", "seeds": [0], "x": 1})");
  const Result r = invoke({"compile", bad.string()});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("unknown key 'x'"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"--help"}).code, cli::kOk);
}
