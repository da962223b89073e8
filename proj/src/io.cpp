#include "polymetric/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "polymetric/error.hpp"

namespace polymetric {

namespace {

using Index = Eigen::Index;
using json = nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what);
}

double parse_number(std::string_view cell, std::size_t line, std::size_t column) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size()) {
    parse_fail(line, "column " + std::to_string(column) + " is not a number: '" + std::string(cell) + "'");
  }
  if (!std::isfinite(v)) parse_fail(line, "column " + std::to_string(column) + " is not finite");
  return v;
}

int parse_label(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  int v = 0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size()) {
    parse_fail(line, "label '" + std::string(cell) + "' is not an integer");
  }
  if (v < 0) parse_fail(line, "label must be non-negative");
  return v;
}

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  return f;
}

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j, Index expected, const char* what) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Index>(values.size()) != expected) {
    throw Error(ErrorKind::ParseError, std::string(what) + " has " + std::to_string(values.size()) +
                                           " entries, expected " + std::to_string(expected));
  }
  return Eigen::Map<const Vector>(values.data(), expected);
}

json config_to_json(const ModelConfig& c) {
  const auto& l = c.lmnn;
  return {{"fusion", to_string(c.fusion)},
          {"k", c.k},
          {"steps", c.steps},
          {"sigma", c.sigma},
          {"standardize", c.standardize},
          {"lmnn",
           {{"target_neighbors", l.target_neighbors},
            {"mu", l.mu},
            {"learning_rate", l.learning_rate},
            {"max_iters", l.max_iters},
            {"tolerance", l.tolerance},
            {"enforce_glplus", l.enforce_glplus},
            {"clustering", l.clustering.to_string()},
            {"active_set_refresh", l.active_set_refresh},
            {"armijo_c", l.armijo_c},
            {"backtrack", l.backtrack},
            {"min_step", l.min_step},
            {"singular_epsilon", l.singular_epsilon},
            {"kmeans_restarts", l.kmeans_restarts},
            {"seed", l.seed}}}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  c.k = j.at("k").get<int>();
  c.steps = j.at("steps").get<int>();
  c.sigma = j.at("sigma").get<double>();
  c.standardize = j.at("standardize").get<bool>();
  const json& l = j.at("lmnn");
  c.lmnn.target_neighbors = l.at("target_neighbors").get<int>();
  c.lmnn.mu = l.at("mu").get<double>();
  c.lmnn.learning_rate = l.at("learning_rate").get<double>();
  c.lmnn.max_iters = l.at("max_iters").get<int>();
  c.lmnn.tolerance = l.at("tolerance").get<double>();
  c.lmnn.enforce_glplus = l.at("enforce_glplus").get<bool>();
  c.lmnn.clustering = Clustering::parse(l.at("clustering").get<std::string>());
  c.lmnn.active_set_refresh = l.at("active_set_refresh").get<int>();
  c.lmnn.armijo_c = l.at("armijo_c").get<double>();
  c.lmnn.backtrack = l.at("backtrack").get<double>();
  c.lmnn.min_step = l.at("min_step").get<double>();
  c.lmnn.singular_epsilon = l.at("singular_epsilon").get<double>();
  c.lmnn.kmeans_restarts = l.at("kmeans_restarts").get<int>();
  c.lmnn.seed = l.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

}  // namespace

LabeledDataset read_dataset(std::istream& in, bool has_header) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string text;
  std::size_t line = 0;
  std::size_t width = 0;
  while (std::getline(in, text)) {
    ++line;
    if (has_header && line == 1) continue;
    if (trim(text).empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest(text);
    for (auto comma = rest.find(','); comma != std::string_view::npos; comma = rest.find(',')) {
      cells.push_back(rest.substr(0, comma));
      rest.remove_prefix(comma + 1);
    }
    cells.push_back(rest);
    if (cells.size() < 2) parse_fail(line, "need at least one feature and a label");
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw Error(ErrorKind::DimensionMismatch, "line " + std::to_string(line) + ": " + std::to_string(cells.size()) +
                                                    " columns, expected " + std::to_string(width));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c + 1 < cells.size(); ++c) row.push_back(parse_number(cells[c], line, c + 1));
    labels.push_back(parse_label(cells.back(), line));
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw Error(ErrorKind::IoError, "read failed");
  if (rows.empty()) return {};
  Matrix points(static_cast<Index>(rows.size()), static_cast<Index>(width - 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) points(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
  }
  return {std::move(points), std::move(labels)};
}

LabeledDataset load_dataset(const std::string& path, bool has_header) {
  auto f = open_in(path);
  try {
    return read_dataset(f, has_header);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.detail());
  }
}

void write_dataset(std::ostream& out, const LabeledDataset& data) {
  for (Index i = 0; i < data.size(); ++i) {
    for (Index c = 0; c < data.dim(); ++c) out << shortest(data.points()(i, c)) << ',';
    out << data.label(i) << '\n';
  }
}

void save_dataset(const std::string& path, const LabeledDataset& data) {
  auto f = open_out(path);
  write_dataset(f, data);
  if (!f) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

std::string model_to_json(const TrainedModel& model) {
  const Index d = model.train.dim();
  json comps = json::array();
  for (std::size_t c = 0; c < model.components.size(); ++c) {
    const auto& comp = model.components[c];
    comps.push_back({{"cluster", model.component_cluster.at(c)},
                     {"matrix", comp.homogeneous().row_major()},
                     {"center", to_json(comp.center())},
                     {"sigma", comp.sigma()}});
  }
  json points = json::array();
  for (Index i = 0; i < model.train.size(); ++i) points.push_back(to_json(model.train.point(i)));
  json standardization = nullptr;
  if (model.standardizer) {
    standardization = {{"mean", to_json(model.standardizer->mean)}, {"scale", to_json(model.standardizer->scale)}};
  }
  const json doc = {{"schema_version", kModelSchemaVersion},
                    {"dimension", d},
                    {"config", config_to_json(model.config)},
                    {"standardization", standardization},
                    {"components", comps},
                    {"training_set",
                     {{"points", points}, {"labels", model.train.labels()}, {"assignment", model.assignment}}}};
  return doc.dump(2) + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.contains("schema_version")) throw Error(ErrorKind::ParseError, "model file lacks schema_version");
    const int version = doc.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw Error(ErrorKind::ParseError, "unsupported schema_version " + std::to_string(version));
    }
    const auto d = doc.at("dimension").get<Index>();
    if (d < 1) throw Error(ErrorKind::ParseError, "dimension must be positive");

    TrainedModel m;
    m.config = config_from_json(doc.at("config"));
    if (const json& s = doc.at("standardization"); !s.is_null()) {
      m.standardizer = Standardizer{vector_from(s.at("mean"), d, "standardization mean"),
                                    vector_from(s.at("scale"), d, "standardization scale")};
    }

    const json& ts = doc.at("training_set");
    const json& pts = ts.at("points");
    Matrix points(static_cast<Index>(pts.size()), d);
    for (std::size_t i = 0; i < pts.size(); ++i) points.row(static_cast<Index>(i)) = vector_from(pts[i], d, "training point").transpose();
    auto labels = ts.at("labels").get<std::vector<int>>();
    if (labels.size() != pts.size()) throw Error(ErrorKind::ParseError, "training labels and points differ in count");
    m.train = LabeledDataset(std::move(points), std::move(labels));
    m.assignment = ts.at("assignment").get<std::vector<int>>();
    if (static_cast<Index>(m.assignment.size()) != m.train.size()) {
      throw Error(ErrorKind::ParseError, "cluster assignment and training points differ in count");
    }

    std::size_t index = 0;
    for (const json& c : doc.at("components")) {
      const auto entries = c.at("matrix").get<std::vector<double>>();
      if (static_cast<Index>(entries.size()) != (d + 1) * (d + 1)) {
        throw Error(ErrorKind::ParseError, "component " + std::to_string(index) + " matrix has wrong size");
      }
      SquareMatrix h = SquareMatrix::from_row_major(d + 1, entries);
      if (!(h.matrix().topLeftCorner(d, d).determinant() > 0.0)) {
        throw Error(ErrorKind::ParseError, "component " + std::to_string(index) + " has non-positive determinant");
      }
      m.components.emplace_back(std::move(h), vector_from(c.at("center"), d, "component center"),
                                c.at("sigma").get<double>());
      m.component_cluster.push_back(c.at("cluster").get<int>());
      ++index;
    }
    if (m.components.empty()) throw Error(ErrorKind::ParseError, "model file has no components");
    for (int a : m.assignment) {
      if (std::find(m.component_cluster.begin(), m.component_cluster.end(), a) == m.component_cluster.end()) {
        throw Error(ErrorKind::ParseError, "training point assigned to cluster " + std::to_string(a) + " with no component");
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const TrainedModel& model) {
  auto f = open_out(path);
  f << model_to_json(model);
  if (!f) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

TrainedModel load_model(const std::string& path) {
  auto f = open_in(path);
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    return model_from_json(buf.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.detail());
  }
}

FieldMode parse_field_mode(const std::string& text) {
  if (text == "velocity") return FieldMode::Velocity;
  if (text == "displacement") return FieldMode::Displacement;
  if (text == "flow") return FieldMode::Flow;
  if (text == "jacobian") return FieldMode::Jacobian;
  throw Error(ErrorKind::InvalidArgument,
              "unknown field mode '" + text + "', expected velocity, displacement, flow or jacobian");
}

void write_field(std::ostream& out, const FusionAtlas& atlas, const GridSpec& grid, FieldMode mode, double fd_step) {
  if (atlas.dim() != 2) throw Error(ErrorKind::DimensionMismatch, "field export needs a 2-D atlas");
  const auto pts = grid_points(grid);
  const PointMap flow = [&atlas](const Vector& p) { return integrate_flow(atlas, p); };
  out << (mode == FieldMode::Jacobian ? "x,y,u,v,detJ\n" : "x,y,u,v\n");
  for (const auto& p : pts) {
    Vector uv;
    switch (mode) {
      case FieldMode::Velocity: uv = fused_velocity(atlas, p); break;
      case FieldMode::Displacement: uv = displacement_fusion(atlas, p) - p; break;
      case FieldMode::Flow:
      case FieldMode::Jacobian: uv = flow(p) - p; break;
    }
    out << shortest(p(0)) << ',' << shortest(p(1)) << ',' << shortest(uv(0)) << ',' << shortest(uv(1));
    if (mode == FieldMode::Jacobian) out << ',' << shortest(jacobian_determinant(flow, p, fd_step));
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "field export write failed");
}

void write_warped_grid_svg(std::ostream& out, const FusionAtlas& atlas, const GridSpec& grid, bool displacement,
                           int samples_per_cell) {
  grid.validate();
  if (atlas.dim() != 2) throw Error(ErrorKind::DimensionMismatch, "grid rendering needs a 2-D atlas");
  if (samples_per_cell < 1) throw Error(ErrorKind::InvalidArgument, "samples per cell must be positive");
  const auto warp = [&](double x, double y) -> Vector {
    const Vector p = Eigen::Vector2d(x, y);
    return displacement ? displacement_fusion(atlas, p) : integrate_flow(atlas, p);
  };

  std::vector<std::vector<Vector>> lines;
  const int nxs = std::max(grid.nx - 1, 1) * samples_per_cell;
  const int nys = std::max(grid.ny - 1, 1) * samples_per_cell;
  for (int iy = 0; iy < grid.ny; ++iy) {
    auto& line = lines.emplace_back();
    for (int s = 0; s <= nxs; ++s) line.push_back(warp(grid.xmin + (grid.xmax - grid.xmin) * s / nxs, grid.ymin + iy * grid.dy()));
  }
  for (int ix = 0; ix < grid.nx; ++ix) {
    auto& line = lines.emplace_back();
    for (int s = 0; s <= nys; ++s) line.push_back(warp(grid.xmin + ix * grid.dx(), grid.ymin + (grid.ymax - grid.ymin) * s / nys));
  }

  Eigen::Vector2d lo = lines.front().front();
  Eigen::Vector2d hi = lo;
  for (const auto& line : lines) {
    for (const auto& p : line) {
      lo = lo.cwiseMin(Eigen::Vector2d(p));
      hi = hi.cwiseMax(Eigen::Vector2d(p));
    }
  }
  const double size = 600.0;
  const double margin = 10.0;
  const double span = std::max({hi(0) - lo(0), hi(1) - lo(1), 1e-12});
  const double scale = (size - 2 * margin) / span;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  for (const auto& line : lines) {
    out << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.7\" points=\"";
    for (const auto& p : line) {
      // SVG y grows downward.
      out << margin + (p(0) - lo(0)) * scale << ',' << size - margin - (p(1) - lo(1)) * scale << ' ';
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
  if (!out) throw Error(ErrorKind::IoError, "svg write failed");
}

}  // namespace polymetric
