#include "polymetric/cli.hpp"

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "polymetric/error.hpp"
#include "polymetric/io.hpp"
#include "polymetric/model.hpp"
#include "polymetric/synth.hpp"

namespace polymetric {

namespace {

struct TrainFlags {
  std::string data;
  std::string model;
  bool header = false;
  int k = 3;
  double mu = 0.5;
  std::string clusters = "class";
  int steps = FusionAtlas::kDefaultSteps;
  std::string sigma = "auto";
  std::uint64_t seed = 0;
  std::string fusion = "velocity";
  int max_iters = 200;
  int target_neighbors = 3;
  bool no_standardize = false;
};

double parse_sigma(const std::string& text) {
  if (text == "auto") return 0.0;
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "--sigma expects a positive number or 'auto', got '" + text + "'");
  }
  if (!(v > 0.0)) throw Error(ErrorKind::InvalidArgument, "--sigma must be positive");
  return v;
}

ModelConfig model_config(const TrainFlags& f) {
  ModelConfig c;
  c.fusion = parse_fusion(f.fusion);
  c.k = f.k;
  c.steps = f.steps;
  c.sigma = parse_sigma(f.sigma);
  c.standardize = !f.no_standardize;
  c.lmnn.mu = f.mu;
  c.lmnn.clustering = Clustering::parse(f.clusters);
  c.lmnn.seed = f.seed;
  c.lmnn.max_iters = f.max_iters;
  c.lmnn.target_neighbors = f.target_neighbors;
  c.validate();
  return c;
}

void add_model_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--k", f.k, "neighbors used by the k-NN vote")->capture_default_str();
  cmd->add_option("--mu", f.mu, "push/pull trade-off of the LMNN objective")->capture_default_str();
  cmd->add_option("--clusters", f.clusters, "metric partition: class or kmeans:N")->capture_default_str();
  cmd->add_option("--steps", f.steps, "RK4 steps of the fused flow")->capture_default_str();
  cmd->add_option("--sigma", f.sigma, "weight attenuation: a number, or auto for each cluster's RMS radius")
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "seed for k-means and fold assignment")->capture_default_str();
  cmd->add_option("--fusion", f.fusion, "velocity, displacement, plml, or none (piecewise per-cluster metrics)")
      ->capture_default_str();
  cmd->add_option("--max-iters", f.max_iters, "LMNN iteration cap")->capture_default_str();
  cmd->add_option("--target-neighbors", f.target_neighbors, "same-class neighbors pulled by LMNN")->capture_default_str();
  cmd->add_flag("--no-standardize", f.no_standardize, "train on raw features instead of z-scores");
  cmd->add_flag("--header", f.header, "the data file starts with a header line");
}

void print_report(std::ostream& out, const EvaluationReport& r) {
  out << std::fixed << std::setprecision(4);
  for (std::size_t f = 0; f < r.per_fold_accuracy.size(); ++f) out << "fold " << f + 1 << ": " << r.per_fold_accuracy[f] << '\n';
  out << "mean " << r.mean << "  std " << r.std << "  max " << r.max << "  min " << r.min << '\n';
  out << std::defaultfloat << std::setprecision(6);
}

void write_report_csv(std::ostream& out, const EvaluationReport& r) {
  out << std::setprecision(17) << "fold,accuracy\n";
  for (std::size_t f = 0; f < r.per_fold_accuracy.size(); ++f) out << f + 1 << ',' << r.per_fold_accuracy[f] << '\n';
  out << "mean," << r.mean << "\nstd," << r.std << "\nmax," << r.max << "\nmin," << r.min << '\n';
  out << std::setprecision(6);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  return f;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonlinear metric learning: per-cluster LMNN metrics fused into one smooth warp, k-NN in the warped space.",
               "polymetric"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "learn per-cluster metrics and save a model file");
  train->add_option("--data", train_flags.data, "training CSV (label in the last column)")->required();
  train->add_option("--model", train_flags.model, "model file to write")->required();
  add_model_flags(train, train_flags);

  std::string classify_data;
  std::string classify_model;
  std::string classify_out;
  bool classify_header = false;
  auto* classify = app.add_subcommand("classify", "label points with a saved model");
  classify->add_option("--data", classify_data, "CSV of points to label (label column required, used for accuracy)")
      ->required();
  classify->add_option("--model", classify_model, "model file from train")->required();
  classify->add_option("--out", classify_out, "write predictions as CSV (features, predicted label)");
  classify->add_flag("--header", classify_header, "the data file starts with a header line");

  TrainFlags cv_flags;
  int folds = 10;
  std::string cv_out;
  bool serial = false;
  auto* crossval = app.add_subcommand("crossval", "stratified k-fold cross-validation of a training recipe");
  crossval->add_option("--data", cv_flags.data, "dataset CSV")->required();
  crossval->add_option("--folds", folds, "number of folds")->capture_default_str();
  crossval->add_option("--out", cv_out, "write the report as CSV");
  crossval->add_flag("--serial", serial, "run folds one after another");
  add_model_flags(crossval, cv_flags);

  StripeParams stripes;
  std::string synth_out;
  auto* synth = app.add_subcommand(
      "synth", "write a two-class stripes dataset (the defaults are conventions, not measured settings)");
  synth->add_option("--out", synth_out, "dataset CSV to write")->required();
  synth->add_option("--stripes", stripes.stripes, "number of vertical stripes, class 0 first")->capture_default_str();
  synth->add_option("--stripe-width", stripes.stripe_width, "width of every stripe")->capture_default_str();
  synth->add_option("--height", stripes.height, "stripe height")->capture_default_str();
  synth->add_option("--density0", stripes.density0, "class 0 points per unit area")->capture_default_str();
  synth->add_option("--density1", stripes.density1, "class 1 points per unit area")->capture_default_str();
  synth->add_option("--noise", stripes.noise, "std of Gaussian jitter on both coordinates")->capture_default_str();
  synth->add_option("--seed", stripes.seed, "random seed")->capture_default_str();

  std::string fv_model;
  std::string fv_atlas = "rotation";
  double theta = 0.63;
  double shear = 2.0;
  std::string fv_mode = "flow";
  std::string fv_out;
  std::string fv_svg;
  std::string fv_sigma = "2";
  int fv_steps = FusionAtlas::kDefaultSteps;
  GridSpec grid{-5.0, 5.0, 50, -5.0, 5.0, 50};
  auto* fieldviz = app.add_subcommand("fieldviz", "export a deformation field on a grid as CSV (optionally SVG)");
  fieldviz->add_option("--model", fv_model, "take the atlas from a model file (2-D, model coordinates)");
  fieldviz->add_option("--atlas", fv_atlas, "synthetic atlas when no model is given: rotation or shear")
      ->capture_default_str();
  fieldviz->add_option("--theta", theta, "rotation angle of the rotation atlas")->capture_default_str();
  fieldviz->add_option("--shear", shear, "shear factor of the shear atlas")->capture_default_str();
  fieldviz->add_option("--sigma", fv_sigma, "attenuation of the synthetic atlas")->capture_default_str();
  fieldviz->add_option("--steps", fv_steps, "RK4 steps")->capture_default_str();
  fieldviz->add_option("--mode", fv_mode, "velocity, displacement, flow or jacobian")->capture_default_str();
  fieldviz->add_option("--out", fv_out, "field CSV to write")->required();
  fieldviz->add_option("--svg", fv_svg, "also draw the warped grid as SVG");
  fieldviz->add_option("--xmin", grid.xmin)->capture_default_str();
  fieldviz->add_option("--xmax", grid.xmax)->capture_default_str();
  fieldviz->add_option("--nx", grid.nx)->capture_default_str();
  fieldviz->add_option("--ymin", grid.ymin)->capture_default_str();
  fieldviz->add_option("--ymax", grid.ymax)->capture_default_str();
  fieldviz->add_option("--ny", grid.ny)->capture_default_str();

  std::vector<std::string> argv_store{"polymetric"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const auto* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* target = &app;
    for (const auto* sub : app.get_subcommands()) target = sub;
    err << target->help();
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (train->parsed()) {
      const ModelConfig config = model_config(train_flags);
      const LabeledDataset data = load_dataset(train_flags.data, train_flags.header);
      const TrainedModel model = fit_model(config, data);
      save_model(train_flags.model, model);
      const auto& t = model.trace;
      out << "trained " << model.components.size() << " component(s) on " << data.size() << " points, "
          << t.iterations << " iterations, objective " << t.objective.front() << " -> " << t.objective.back()
          << (t.converged ? " (converged)" : "") << (t.no_descent ? " (stalled)" : "") << '\n';
      for (std::size_t c = 0; c < model.components.size(); ++c) {
        out << "  cluster " << model.component_cluster[c] << ": det L = " << model.components[c].linear_block().determinant()
            << ", sigma = " << model.components[c].sigma() << '\n';
      }
      out << "model written to " << train_flags.model << '\n';
    } else if (classify->parsed()) {
      const TrainedModel model = load_model(classify_model);
      const LabeledDataset data = load_dataset(classify_data, classify_header);
      const auto predicted = predict_all(make_predictor(model), data.points());
      out << "accuracy " << accuracy(predicted, data.labels()) << " on " << data.size() << " points\n";
      if (!classify_out.empty()) {
        save_dataset(classify_out, LabeledDataset(data.points(), predicted));
      }
    } else if (crossval->parsed()) {
      const ModelConfig config = model_config(cv_flags);
      const LabeledDataset data = load_dataset(cv_flags.data, cv_flags.header);
      const EvaluationReport report = cross_validate(data, folds, model_pipeline(config), cv_flags.seed, !serial);
      out << folds << "-fold cross-validation, fusion " << to_string(config.fusion) << ", k " << config.k << '\n';
      print_report(out, report);
      out << '\n';
      write_report_csv(out, report);
      if (!cv_out.empty()) {
        auto f = open_out(cv_out);
        write_report_csv(f, report);
      }
    } else if (synth->parsed()) {
      const StripeDataset s = synth_stripes(stripes);
      save_dataset(synth_out, s.data);
      const auto counts = s.data.class_counts();
      out << "wrote " << s.data.size() << " points (" << counts[0] << " class 0, " << (counts.size() > 1 ? counts[1] : 0)
          << " class 1) to " << synth_out << '\n';
    } else if (fieldviz->parsed()) {
      std::optional<FusionAtlas> atlas;
      if (!fv_model.empty()) {
        atlas = load_model(fv_model).atlas().with_steps(fv_steps);
      } else {
        const double sigma = parse_sigma(fv_sigma);
        if (sigma == 0.0) throw Error(ErrorKind::InvalidArgument, "synthetic atlases need an explicit --sigma");
        if (fv_atlas == "rotation") {
          atlas = synth_rotation_atlas(theta, Eigen::Vector2d(-2, 0), Eigen::Vector2d(2, 0), sigma, fv_steps);
        } else if (fv_atlas == "shear") {
          atlas = synth_shear_atlas(shear, Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 0), sigma, fv_steps);
        } else {
          throw Error(ErrorKind::InvalidArgument, "unknown --atlas '" + fv_atlas + "', expected rotation or shear");
        }
      }
      const FieldMode mode = parse_field_mode(fv_mode);
      {
        auto f = open_out(fv_out);
        write_field(f, *atlas, grid, mode);
      }
      if (!fv_svg.empty()) {
        auto f = open_out(fv_svg);
        write_warped_grid_svg(f, *atlas, grid, mode == FieldMode::Displacement);
      }
      out << "wrote " << grid.size() << " rows to " << fv_out << '\n';
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace polymetric
