#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "polymetric/cli.hpp"
#include "polymetric/io.hpp"
#include "polymetric/synth.hpp"

using namespace polymetric;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int status = run_cli(args, out, err);
  return {status, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("polymetric_cli_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  [[nodiscard]] std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("usage errors") {
  const auto unknown = run({"train", "--data", "a.csv", "--model", "m.json", "--bogus"});
  CHECK(unknown.status != 0);
  CHECK(unknown.err.find("Usage") != std::string::npos);
  CHECK(run({}).status != 0);
  CHECK(run({"frobnicate"}).status != 0);
  const auto help = run({"--help"});
  CHECK(help.status == 0);
  CHECK(help.out.find("crossval") != std::string::npos);
  CHECK(run({"synth", "--help"}).out.find("--density0") != std::string::npos);
}

TEST_CASE("library errors give a non-zero exit and a message") {
  TempDir dir;
  const auto missing = run({"train", "--data", dir.file("absent.csv"), "--model", dir.file("m.json")});
  CHECK(missing.status != 0);
  CHECK(missing.err.find("IoError") != std::string::npos);
  std::ofstream(dir.file("bad.csv")) << "1,2,0\nx,2,1\n";
  const auto bad = run({"train", "--data", dir.file("bad.csv"), "--model", dir.file("m.json")});
  CHECK(bad.status != 0);
  CHECK(bad.err.find("line 2") != std::string::npos);
  const auto sigma = run({"crossval", "--data", dir.file("bad.csv"), "--sigma", "wide"});
  CHECK(sigma.status != 0);
}

TEST_CASE("synth, train, classify reproduces in-process predictions") {
  TempDir dir;
  const std::string data = dir.file("stripes.csv");
  const std::string model = dir.file("model.json");
  const std::string pred = dir.file("pred.csv");
  REQUIRE(run({"synth", "--out", data, "--seed", "3", "--noise", "0.05"}).status == 0);

  StripeParams p;
  p.seed = 3;
  p.noise = 0.05;
  const LabeledDataset direct = synth_stripes(p).data;
  const LabeledDataset loaded = load_dataset(data);
  CHECK(loaded.points() == direct.points());
  CHECK(loaded.labels() == direct.labels());

  const auto trained = run({"train", "--data", data, "--model", model, "--k", "5", "--mu", "0.4", "--seed", "3",
                            "--fusion", "velocity", "--sigma", "auto", "--steps", "16"});
  REQUIRE(trained.status == 0);
  CHECK(trained.out.find("model written") != std::string::npos);
  REQUIRE(run({"classify", "--data", data, "--model", model, "--out", pred}).status == 0);

  ModelConfig c;
  c.k = 5;
  c.lmnn.mu = 0.4;
  c.lmnn.seed = 3;
  c.steps = 16;
  const auto in_process = predict_all(make_predictor(fit_model(c, direct)), direct.points());
  CHECK(load_dataset(pred).labels() == in_process);

  // Saving again from the loaded model reproduces the file byte for byte.
  CHECK(model_to_json(load_model(model)) == slurp(model));
}

TEST_CASE("crossval reports ten folds") {
  TempDir dir;
  const std::string data = dir.file("stripes.csv");
  REQUIRE(run({"synth", "--out", data}).status == 0);
  const std::string csv = dir.file("report.csv");
  const auto r = run({"crossval", "--data", data, "--folds", "10", "--fusion", "none", "--out", csv});
  REQUIRE(r.status == 0);
  CHECK(r.out.find("fold 10:") != std::string::npos);
  CHECK(r.out.find("fold 11:") == std::string::npos);
  CHECK(r.out.find("mean ") != std::string::npos);
  const std::string report = slurp(csv);
  CHECK(report.rfind("fold,accuracy\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : report) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == 1 + 10 + 4);
}

TEST_CASE("fieldviz") {
  TempDir dir;
  const std::string out = dir.file("field.csv");
  const std::string svg = dir.file("grid.svg");
  const auto r = run({"fieldviz", "--atlas", "shear", "--mode", "jacobian", "--nx", "20", "--ny", "10", "--out", out,
                      "--svg", svg});
  REQUIRE(r.status == 0);
  const std::string text = slurp(out);
  CHECK(text.rfind("x,y,u,v,detJ\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == 1 + 200);
  CHECK(slurp(svg).rfind("<svg", 0) == 0);
  CHECK(run({"fieldviz", "--theta", "3.5", "--out", out}).status != 0);
  CHECK(run({"fieldviz", "--mode", "warp", "--out", out}).status != 0);
}
