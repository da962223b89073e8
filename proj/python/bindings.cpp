#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "polymetric/classify.hpp"
#include "polymetric/error.hpp"
#include "polymetric/fusion.hpp"
#include "polymetric/io.hpp"
#include "polymetric/linalg.hpp"
#include "polymetric/lmnn.hpp"
#include "polymetric/model.hpp"
#include "polymetric/synth.hpp"

namespace py = pybind11;
using namespace polymetric;

namespace {

LabeledDataset to_dataset(const Matrix& points, const std::vector<int>& labels) { return {points, labels}; }

Matrix map_rows(const Matrix& points, const std::function<Vector(const Vector&)>& f) {
  Matrix out(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) out.row(i) = f(points.row(i).transpose()).transpose();
  return out;
}

ModelConfig make_config(const std::string& fusion, int k, double mu, const std::string& clusters, int steps,
                        std::optional<double> sigma, std::uint64_t seed, bool standardize, int max_iters) {
  ModelConfig c;
  c.fusion = parse_fusion(fusion);
  c.k = k;
  c.lmnn.mu = mu;
  c.lmnn.clustering = Clustering::parse(clusters);
  c.steps = steps;
  c.sigma = sigma.value_or(0.0);
  c.lmnn.seed = seed;
  c.standardize = standardize;
  c.lmnn.max_iters = max_iters;
  return c;
}

// Model plus its cached predictor.
struct PyModel {
  TrainedModel model;
  Predictor predict;

  explicit PyModel(TrainedModel m) : model(std::move(m)), predict(make_predictor(model)) {}
};

py::dict report_dict(const EvaluationReport& r) {
  py::dict d;
  d["per_fold_accuracy"] = r.per_fold_accuracy;
  d["mean"] = r.mean;
  d["std"] = r.std;
  d["max"] = r.max;
  d["min"] = r.min;
  return d;
}

}  // namespace

PYBIND11_MODULE(_polymetric, m) {
  m.doc() = "Per-cluster LMNN metrics fused into a smooth warp; k-NN in the warped space.";

  py::register_exception<Error>(m, "PolymetricError", PyExc_RuntimeError);

  m.def("mat_exp", [](const Matrix& a) { return mat_exp(SquareMatrix(a)).matrix(); }, py::arg("a"));
  m.def("mat_log", [](const Matrix& a) { return mat_log(SquareMatrix(a)).matrix(); }, py::arg("a"));
  m.def("project_to_glplus", [](const Matrix& a) { return project_to_glplus(SquareMatrix(a)).matrix(); },
        py::arg("a"));
  m.def("geodesic_interp",
        [](const Matrix& a, const Matrix& b, double t) {
          return geodesic_interp(SquareMatrix(a), SquareMatrix(b), t).matrix();
        },
        py::arg("a"), py::arg("b"), py::arg("t"));
  m.def("is_singular", [](const Matrix& a) { return is_singular(SquareMatrix(a)); }, py::arg("a"));

  py::class_<FusionAtlas>(m, "Atlas")
      .def_static(
          "from_components",
          [](const std::vector<Matrix>& linear, const std::vector<Vector>& centers, const std::vector<double>& sigmas,
             int steps) {
            if (linear.size() != centers.size() || linear.size() != sigmas.size()) {
              throw Error(ErrorKind::DimensionMismatch, "need one center and sigma per linear map");
            }
            std::vector<ComponentTransform> comps;
            for (std::size_t k = 0; k < linear.size(); ++k) {
              comps.push_back(ComponentTransform::anchored(SquareMatrix(linear[k]), centers[k], sigmas[k]));
            }
            return FusionAtlas(std::move(comps), steps);
          },
          py::arg("linear"), py::arg("centers"), py::arg("sigmas"), py::arg("steps") = FusionAtlas::kDefaultSteps)
      .def_static("rotation", &synth_rotation_atlas, py::arg("theta"), py::arg("first"), py::arg("second"),
                  py::arg("sigma"), py::arg("steps") = FusionAtlas::kDefaultSteps)
      .def_static("shear", &synth_shear_atlas, py::arg("shear"), py::arg("first"), py::arg("second"),
                  py::arg("sigma"), py::arg("steps") = FusionAtlas::kDefaultSteps)
      .def_property_readonly("dim", &FusionAtlas::dim)
      .def_property_readonly("steps", &FusionAtlas::steps)
      .def("with_steps", &FusionAtlas::with_steps, py::arg("steps"))
      .def("weights", [](const FusionAtlas& a, const Vector& x) { return normalized_weights(a, x); }, py::arg("x"))
      .def("velocity",
           [](const FusionAtlas& a, const Matrix& pts) {
             return map_rows(pts, [&a](const Vector& x) { return fused_velocity(a, x); });
           },
           py::arg("points"))
      .def("forward",
           [](const FusionAtlas& a, const Matrix& pts) {
             return map_rows(pts, [&a](const Vector& x) { return integrate_flow(a, x); });
           },
           py::arg("points"))
      .def("backward",
           [](const FusionAtlas& a, const Matrix& pts) {
             return map_rows(pts, [&a](const Vector& x) { return integrate_flow(a, x, FlowDirection::Backward); });
           },
           py::arg("points"))
      .def("displacement",
           [](const FusionAtlas& a, const Matrix& pts) {
             return map_rows(pts, [&a](const Vector& x) { return displacement_fusion(a, x); });
           },
           py::arg("points"))
      .def("jacobian",
           [](const FusionAtlas& a, const Matrix& pts, double h, bool displacement) {
             std::vector<Vector> grid;
             for (Eigen::Index i = 0; i < pts.rows(); ++i) grid.push_back(pts.row(i).transpose());
             return displacement ? displacement_jacobian_grid(a, grid, h) : jacobian_grid(a, grid, h);
           },
           py::arg("points"), py::arg("h") = 1e-4, py::arg("displacement") = false);

  m.def(
      "synth_stripes",
      [](int stripes, double stripe_width, double height, double density0, double density1, double noise,
         std::uint64_t seed) {
        StripeParams p{stripes, stripe_width, height, density0, density1, noise, seed};
        const StripeDataset s = synth_stripes(p);
        return py::make_tuple(s.data.points(), s.data.labels(), s.boundaries);
      },
      py::arg("stripes") = 4, py::arg("stripe_width") = 1.0, py::arg("height") = 4.0, py::arg("density0") = 10.0,
      py::arg("density1") = 20.0, py::arg("noise") = 0.0, py::arg("seed") = 0);

  m.def(
      "train_lmnn",
      [](const Matrix& points, const std::vector<int>& labels, double mu, int target_neighbors, int max_iters) {
        LmnnConfig c;
        c.mu = mu;
        c.target_neighbors = target_neighbors;
        c.max_iters = max_iters;
        const auto r = train_lmnn(c, to_dataset(points, labels));
        return py::make_tuple(r.transform.matrix(), r.trace.objective);
      },
      py::arg("points"), py::arg("labels"), py::arg("mu") = 0.5, py::arg("target_neighbors") = 3,
      py::arg("max_iters") = 200);

  m.def(
      "knn_classify",
      [](const Matrix& points, const std::vector<int>& labels, const Vector& query, int k) {
        return knn_classify(to_dataset(points, labels), query, k,
                            [](const Vector& a, const Vector& b) { return (a - b).norm(); });
      },
      py::arg("points"), py::arg("labels"), py::arg("query"), py::arg("k") = 3);

  py::class_<PyModel>(m, "Model")
      .def_static(
          "fit",
          [](const Matrix& points, const std::vector<int>& labels, const std::string& fusion, int k, double mu,
             const std::string& clusters, int steps, std::optional<double> sigma, std::uint64_t seed,
             bool standardize, int max_iters) {
            const auto c = make_config(fusion, k, mu, clusters, steps, sigma, seed, standardize, max_iters);
            return PyModel(fit_model(c, to_dataset(points, labels)));
          },
          py::arg("points"), py::arg("labels"), py::arg("fusion") = "velocity", py::arg("k") = 3,
          py::arg("mu") = 0.5, py::arg("clusters") = "class", py::arg("steps") = FusionAtlas::kDefaultSteps,
          py::arg("sigma") = py::none(), py::arg("seed") = 0, py::arg("standardize") = true,
          py::arg("max_iters") = 200)
      .def_static("from_json", [](const std::string& text) { return PyModel(model_from_json(text)); },
                  py::arg("text"))
      .def_static("load", [](const std::string& path) { return PyModel(load_model(path)); }, py::arg("path"))
      .def("to_json", [](const PyModel& self) { return model_to_json(self.model); })
      .def("save", [](const PyModel& self, const std::string& path) { save_model(path, self.model); },
           py::arg("path"))
      .def("predict",
           [](const PyModel& self, const Matrix& points) { return predict_all(self.predict, points); },
           py::arg("points"))
      .def_property_readonly("atlas", [](const PyModel& self) { return self.model.atlas(); })
      .def_property_readonly("fusion", [](const PyModel& self) { return to_string(self.model.config.fusion); })
      .def_property_readonly("objective", [](const PyModel& self) { return self.model.trace.objective; })
      .def_property_readonly("transforms", [](const PyModel& self) {
        std::vector<Matrix> out;
        for (const auto& c : self.model.components) out.push_back(c.linear_block());
        return out;
      });

  m.def(
      "cross_validate",
      [](const Matrix& points, const std::vector<int>& labels, int folds, const std::string& fusion, int k, double mu,
         const std::string& clusters, int steps, std::optional<double> sigma, std::uint64_t seed, bool standardize,
         int max_iters) {
        const auto c = make_config(fusion, k, mu, clusters, steps, sigma, seed, standardize, max_iters);
        EvaluationReport r;
        {
          py::gil_scoped_release release;
          r = cross_validate(to_dataset(points, labels), folds, model_pipeline(c), seed);
        }
        return report_dict(r);
      },
      py::arg("points"), py::arg("labels"), py::arg("folds") = 10, py::arg("fusion") = "velocity",
      py::arg("k") = 3, py::arg("mu") = 0.5, py::arg("clusters") = "class",
      py::arg("steps") = FusionAtlas::kDefaultSteps, py::arg("sigma") = py::none(), py::arg("seed") = 0,
      py::arg("standardize") = true, py::arg("max_iters") = 200);
}
