#pragma once

#include <iosfwd>
#include <string>

#include "polymetric/dataset.hpp"
#include "polymetric/fusion.hpp"
#include "polymetric/model.hpp"

namespace polymetric {

// Comma-separated, one sample per line, integer label in the last column.
// Blank lines are skipped. Errors name the 1-based line.
[[nodiscard]] LabeledDataset read_dataset(std::istream& in, bool has_header = false);
[[nodiscard]] LabeledDataset load_dataset(const std::string& path, bool has_header = false);

void write_dataset(std::ostream& out, const LabeledDataset& data);
void save_dataset(const std::string& path, const LabeledDataset& data);

inline constexpr int kModelSchemaVersion = 1;

/// Canonical JSON text (sorted keys, shortest round-trip doubles).
[[nodiscard]] std::string model_to_json(const TrainedModel& model);
[[nodiscard]] TrainedModel model_from_json(const std::string& text);

void save_model(const std::string& path, const TrainedModel& model);
[[nodiscard]] TrainedModel load_model(const std::string& path);

enum class FieldMode { Velocity, Displacement, Flow, Jacobian };

[[nodiscard]] FieldMode parse_field_mode(const std::string& text);

/// Rows x,y,u,v[,detJ] over the grid (x fastest). (u, v) is the fused
/// velocity in Velocity mode and the displacement map(p) - p otherwise;
/// Jacobian mode uses the flow and appends its determinant.
void write_field(std::ostream& out, const FusionAtlas& atlas, const GridSpec& grid, FieldMode mode,
                 double fd_step = 1e-4);

/// Gridlines of `grid` pushed through the forward flow (or the displacement
/// map), as a minimal SVG polyline drawing.
void write_warped_grid_svg(std::ostream& out, const FusionAtlas& atlas, const GridSpec& grid,
                           bool displacement = false, int samples_per_cell = 4);

}  // namespace polymetric
