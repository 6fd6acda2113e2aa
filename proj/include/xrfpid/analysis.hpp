#ifndef XRFPID_ANALYSIS_HPP
#define XRFPID_ANALYSIS_HPP

#include <string>
#include <vector>

#include "xrfpid/metrics.hpp"
#include "xrfpid/nn.hpp"
#include "xrfpid/physics.hpp"
#include "xrfpid/preprocess.hpp"
#include "xrfpid/spectrum.hpp"

namespace xrfpid {

// One W x H raster per class, probabilities in [0, 1], row-major.
struct PigmentMaps {
    int width = 0;
    int height = 0;
    int classes = 0;
    std::vector<float> values;  // [class][y][x]

    const float* map(int cls) const {
        return values.data() +
               static_cast<std::size_t>(cls) * width * height;
    }
    float at(int cls, int x, int y) const {
        return map(cls)[static_cast<std::size_t>(y) * width + x];
    }
};

// Per-pixel preprocess + inference over a cube; parallel over pixels with
// results identical to the serial order.
PigmentMaps classify_cube(const Network<float>& model, const SpectralCube& cube,
                          const PreprocessConfig& config = {});

// Background-subtracted window sum around one emission line per pixel.
struct ElementMap {
    int width = 0;
    int height = 0;
    std::string label;  // e.g. "Hg-La"
    bool window_truncated = false;
    std::vector<float> values;  // [y][x], >= 0

    float at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * width + x];
    }
};

ElementMap element_map(const SpectralCube& cube, const PhysicsTable& table,
                       ElementId element, LineSeries series,
                       double window_halfwidth_kev = 0.2,
                       const SnipParams& snip = {});

// RGB composite: channel 1 = pigment probability, channels 2..3 = element
// maps scaled to [0, 1] after clipping at the given percentile.
struct OverlayImage {
    int width = 0;
    int height = 0;
    std::vector<float> r, g, b;  // each [y][x] in [0, 1]
};

OverlayImage overlay(const std::vector<float>& pigment_map, int width,
                     int height, const std::vector<const ElementMap*>& elements,
                     double clip_percentile = 99.0);

// Nearest-rank percentile of the positive-map scaling rule used by overlay.
double percentile_value(const std::vector<float>& values, double percentile);

struct ScatterRow {
    double concentration = 0.0;
    double probability = 0.0;
};

enum class ScatterReduction { Single, Min };

// One row per pixel: x = element intensity (or the minimum over maps),
// y = class probability.
std::vector<ScatterRow> scatter_data(const std::vector<float>& pigment_map,
                                     int width, int height,
                                     const std::vector<const ElementMap*>& elements,
                                     ScatterReduction reduction);

void write_scatter_csv(const std::vector<ScatterRow>& rows,
                       const std::string& path);

// metrics.csv with one row per class (accuracy, sensitivity, precision, F1).
void write_metrics_csv(const std::vector<ClassMetrics>& metrics,
                       const std::vector<std::string>& class_names,
                       const std::string& path);

}  // namespace xrfpid

#endif
