#pragma once

#include <string>
#include <vector>

#include "freqshort/io.hpp"
#include "freqshort/metrics.hpp"
#include "freqshort/spectrum.hpp"

namespace freqshort {

/// Selected frequencies white, the rest black; each bin becomes a
/// scale x scale block, DC at the center.
Raster render_mask(const FrequencyMask& mask, int scale = 8);

/// Diverging map over [-limit, limit]: 0 is mid-gray (128,128,128),
/// negative values fade to blue, positive to red.
Raster render_diverging(const std::vector<double>& values, int side, double limit, int scale = 8);

/// Delta matrix heatmap (rows true class, columns predicted) with the value
/// of each cell printed to one decimal.
Raster render_relative_confusion(const RelativeConfusionMatrix& rc, int cell = 48);

/// Simple line chart, one colored polyline per series, y fixed to [y_min, y_max].
Raster render_line_chart(const std::vector<std::vector<double>>& series, double y_min, double y_max,
                         int width = 640, int height = 360);

/// Grayscale min-max scaled map, used for score maps.
Raster render_scaled(const std::vector<double>& values, int side, int scale = 8);

}  // namespace freqshort
