#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "polymetric/error.hpp"
#include "polymetric/io.hpp"
#include "polymetric/synth.hpp"
#include "test_support.hpp"

using namespace polymetric;
using namespace polymetric::testing;

namespace {

Vector vec2(double x, double y) { return Eigen::Vector2d(x, y); }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidArgument;
}

std::vector<std::vector<double>> read_csv_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

FusionAtlas single(const Matrix& linear) {
  return FusionAtlas({ComponentTransform::anchored(SquareMatrix(linear), vec2(0.5, -0.5), 1.0)});
}

TrainedModel small_model(FusionKind fusion) {
  StripeParams p;
  p.seed = 4;
  ModelConfig c;
  c.fusion = fusion;
  c.lmnn.max_iters = 30;
  return fit_model(c, synth_stripes(p).data);
}

}  // namespace

TEST_CASE("read_dataset") {
  SUBCASE("two rows, two features") {
    std::istringstream in("1.5,2,0\n-3,4e-1,1\n");
    const auto d = read_dataset(in);
    CHECK(d.size() == 2);
    CHECK(d.dim() == 2);
    CHECK(d.points()(1, 1) == 0.4);
    CHECK(d.labels() == std::vector<int>{0, 1});
  }
  SUBCASE("header and blank lines") {
    std::istringstream in("x,y,label\n1,2,1\n\n3, 4 ,0\r\n");
    const auto d = read_dataset(in, true);
    CHECK(d.size() == 2);
    CHECK(d.points()(1, 1) == 4.0);
  }
  SUBCASE("non-numeric feature names the line") {
    std::istringstream in("1,2,0\n1,abc,1\n");
    try {
      (void)read_dataset(in);
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ParseError);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("bad labels and ragged rows") {
    CHECK(kind_of([] {
            std::istringstream in("1,2,0.5\n");
            (void)read_dataset(in);
          }) == ErrorKind::ParseError);
    CHECK(kind_of([] {
            std::istringstream in("1,2,-1\n");
            (void)read_dataset(in);
          }) == ErrorKind::ParseError);
    CHECK(kind_of([] {
            std::istringstream in("1,2,0\n1,0\n");
            (void)read_dataset(in);
          }) == ErrorKind::DimensionMismatch);
    CHECK(kind_of([] { (void)load_dataset("/nonexistent/nowhere.csv"); }) == ErrorKind::IoError);
  }
  SUBCASE("write then read is exact") {
    std::mt19937_64 rng(1);
    const LabeledDataset d(random_gaussian(rng, 20, 3), std::vector<int>(20, 2));
    std::stringstream buf;
    write_dataset(buf, d);
    const auto back = read_dataset(buf);
    CHECK(back.points() == d.points());
    CHECK(back.labels() == d.labels());
  }
}

TEST_CASE("standardization roundtrip") {
  std::mt19937_64 rng(2);
  const Matrix raw = (random_gaussian(rng, 50, 3) * 7.0).rowwise() + Eigen::RowVector3d(100, -3, 0.01);
  const auto s = Standardizer::fit(raw);
  const Matrix z = s.apply(raw);
  CHECK(z.colwise().mean().norm() < 1e-12);
  for (Eigen::Index c = 0; c < z.cols(); ++c) CHECK(z.col(c).squaredNorm() / 50.0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((s.invert(z) - raw).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("model file") {
  SUBCASE("save, load, save is byte-identical") {
    for (auto fusion : {FusionKind::Velocity, FusionKind::None}) {
      const auto m = small_model(fusion);
      const std::string first = model_to_json(m);
      const std::string second = model_to_json(model_from_json(first));
      CHECK(first == second);
    }
  }
  SUBCASE("matrices and standardization survive bit-exactly") {
    const auto m = small_model(FusionKind::Velocity);
    const auto back = model_from_json(model_to_json(m));
    REQUIRE(back.components.size() == m.components.size());
    for (std::size_t c = 0; c < m.components.size(); ++c) {
      CHECK(back.components[c].homogeneous() == m.components[c].homogeneous());
      CHECK(back.components[c].center() == m.components[c].center());
      CHECK(back.components[c].sigma() == m.components[c].sigma());
    }
    REQUIRE(back.standardizer.has_value());
    CHECK(back.standardizer->mean == m.standardizer->mean);
    CHECK(back.standardizer->scale == m.standardizer->scale);
    CHECK(back.train.points() == m.train.points());
    CHECK(back.assignment == m.assignment);
  }
  SUBCASE("loaded model predicts exactly like the in-process one") {
    for (auto fusion : {FusionKind::Velocity, FusionKind::Displacement, FusionKind::Plml, FusionKind::None}) {
      const auto m = small_model(fusion);
      const auto back = model_from_json(model_to_json(m));
      const auto a = make_predictor(m);
      const auto b = make_predictor(back);
      std::mt19937_64 rng(5);
      std::uniform_real_distribution<double> u(0.0, 4.0);
      for (int t = 0; t < 40; ++t) {
        const Vector q = vec2(u(rng), u(rng));
        CHECK(a(q) == b(q));
      }
    }
  }
  SUBCASE("file roundtrip") {
    const auto path = (std::filesystem::temp_directory_path() / "polymetric_io_model.json").string();
    const auto m = small_model(FusionKind::Velocity);
    save_model(path, m);
    CHECK(model_to_json(load_model(path)) == model_to_json(m));
    std::filesystem::remove(path);
  }
  SUBCASE("invalid documents") {
    const std::string good = model_to_json(small_model(FusionKind::Velocity));
    CHECK(kind_of([] { (void)model_from_json("{not json"); }) == ErrorKind::ParseError);
    auto doc = nlohmann::json::parse(good);
    doc.erase("schema_version");
    CHECK(kind_of([&] { (void)model_from_json(doc.dump()); }) == ErrorKind::ParseError);
    doc = nlohmann::json::parse(good);
    doc["schema_version"] = 99;
    CHECK(kind_of([&] { (void)model_from_json(doc.dump()); }) == ErrorKind::ParseError);
    doc = nlohmann::json::parse(good);
    doc["components"][0]["matrix"][0] = -1.0 * doc["components"][0]["matrix"][0].get<double>();
    CHECK(kind_of([&] { (void)model_from_json(doc.dump()); }) == ErrorKind::ParseError);
    doc = nlohmann::json::parse(good);
    doc["components"][0]["center"] = std::vector<double>{1.0};
    CHECK(kind_of([&] { (void)model_from_json(doc.dump()); }) == ErrorKind::ParseError);
  }
}

TEST_CASE("field export") {
  const GridSpec grid{-2, 2, 7, -1, 1, 5};
  SUBCASE("identity atlas, flow mode has zero displacement") {
    std::ostringstream out;
    write_field(out, single(Matrix::Identity(2, 2)), grid, FieldMode::Flow);
    CHECK(out.str().rfind("x,y,u,v\n", 0) == 0);
    const auto rows = read_csv_rows(out.str());
    CHECK(rows.size() == grid.size());
    for (const auto& r : rows) {
      REQUIRE(r.size() == 4);
      CHECK(r[2] == 0.0);
      CHECK(r[3] == 0.0);
    }
  }
  SUBCASE("jacobian of a diag(2,1) atlas is 2 everywhere") {
    Matrix l(2, 2);
    l << 2, 0, 0, 1;
    std::ostringstream out;
    write_field(out, single(l), grid, FieldMode::Jacobian);
    CHECK(out.str().rfind("x,y,u,v,detJ\n", 0) == 0);
    const auto rows = read_csv_rows(out.str());
    CHECK(rows.size() == grid.size());
    for (const auto& r : rows) {
      REQUIRE(r.size() == 5);
      CHECK(r[4] == doctest::Approx(2.0).epsilon(1e-6));
      // Flow displacement of x -> c + L(x - c).
      CHECK(r[2] == doctest::Approx(r[0] - 0.5).epsilon(1e-7));
    }
  }
  SUBCASE("velocity and displacement rows are finite and sized") {
    const auto atlas = synth_shear_atlas(2.0, vec2(-1, 0), vec2(1, 0), 1.0);
    for (auto mode : {FieldMode::Velocity, FieldMode::Displacement}) {
      std::ostringstream out;
      write_field(out, atlas, grid, mode);
      const auto rows = read_csv_rows(out.str());
      CHECK(rows.size() == grid.size());
      for (const auto& r : rows) {
        for (double v : r) CHECK(std::isfinite(v));
      }
    }
    std::ostringstream out;
    write_field(out, atlas, grid, FieldMode::Displacement);
    const auto rows = read_csv_rows(out.str());
    for (const auto& r : rows) {
      const Vector p = vec2(r[0], r[1]);
      CHECK(r[2] == doctest::Approx((displacement_fusion(atlas, p) - p)(0)));
    }
  }
  SUBCASE("svg drawing") {
    std::ostringstream out;
    write_warped_grid_svg(out, synth_rotation_atlas(0.63, vec2(-2, 0), vec2(2, 0), 2.0), grid);
    const std::string svg = out.str();
    CHECK(svg.rfind("<svg", 0) == 0);
    std::size_t lines = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
    CHECK(lines == static_cast<std::size_t>(grid.nx + grid.ny));
  }
  CHECK(parse_field_mode("jacobian") == FieldMode::Jacobian);
  CHECK_THROWS_AS((void)parse_field_mode("warp"), Error);
}
