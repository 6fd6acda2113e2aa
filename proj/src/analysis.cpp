#include "xrfpid/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "xrfpid/errors.hpp"
#include "xrfpid/kernels.hpp"

namespace xrfpid {

PigmentMaps classify_cube(const Network<float>& model, const SpectralCube& cube,
                          const PreprocessConfig& config) {
    PigmentMaps maps;
    maps.width = cube.width;
    maps.height = cube.height;
    maps.classes = model.arch().num_classes;
    if (maps.classes != kClassCount)
        throw ShapeError("model predicts " + std::to_string(maps.classes) +
                         " classes, pipeline expects " +
                         std::to_string(kClassCount));
    maps.values.assign(static_cast<std::size_t>(maps.classes) * cube.width *
                           cube.height,
                       0.0f);
    if (cube.pixel_count() == 0) return maps;

    // fail on calibration mismatch before touching the model
    PreprocessConfig probe_config = config;
    probe_config.expected_length = model.arch().input_length;
    {
        Spectrum probe = cube.spectrum_at(0, 0);
        crop(probe, probe_config);
    }

    const std::int64_t pixels = static_cast<std::int64_t>(cube.pixel_count());
    const int threads = kernels::jobs();
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads) \
    if (threads > 1)
    for (std::int64_t p = 0; p < pixels; ++p) {
        try {
            const int x = static_cast<int>(p % cube.width);
            const int y = static_cast<int>(p / cube.width);
            FeatureVector f =
                preprocess_spectrum(cube.spectrum_at(x, y), probe_config);
            auto probs = model.predict(f.values.data(), 1);
            for (int cls = 0; cls < maps.classes; ++cls)
                maps.values[static_cast<std::size_t>(cls) * pixels + p] =
                    probs[cls];
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return maps;
}

ElementMap element_map(const SpectralCube& cube, const PhysicsTable& table,
                       ElementId element, LineSeries series,
                       double window_halfwidth_kev, const SnipParams& snip) {
    const EmissionLine* line = table.find_line(element, series);
    if (!line) {
        std::string available;
        for (const auto& ln : table.lines_of(element)) {
            if (!available.empty()) available += ", ";
            available += line_series_name(ln.series);
        }
        throw RangeError("no " + line_series_name(series) + " line for " +
                         element_symbol(element) +
                         (available.empty() ? " (element has no lines)"
                                            : " (available: " + available + ")"));
    }

    const EnergyCalibration& cal = cube.calibration;
    if (line->energy_kev < cal.energy(0) ||
        line->energy_kev > cal.energy(cal.channel_count - 1))
        throw RangeError("line energy " + std::to_string(line->energy_kev) +
                         " keV outside the cube's energy range");

    int lo = cal.channel(line->energy_kev - window_halfwidth_kev);
    int hi = cal.channel(line->energy_kev + window_halfwidth_kev);
    ElementMap map;
    map.label = element_symbol(element) + "-" + line_series_name(series);
    if (lo < 0 || hi > cal.channel_count - 1) map.window_truncated = true;
    lo = std::max(lo, 0);
    hi = std::min(hi, cal.channel_count - 1);

    map.width = cube.width;
    map.height = cube.height;
    map.values.assign(cube.pixel_count(), 0.0f);
    const std::int64_t pixels = static_cast<std::int64_t>(cube.pixel_count());
    const int threads = kernels::jobs();
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads) \
    if (threads > 1)
    for (std::int64_t p = 0; p < pixels; ++p) {
        try {
            const int x = static_cast<int>(p % cube.width);
            const int y = static_cast<int>(p / cube.width);
            Spectrum s = cube.spectrum_at(x, y);
            Spectrum bg = snip_background(s, snip);
            double sum = 0.0;
            for (int ch = lo; ch <= hi; ++ch)
                sum += s.counts[ch] - bg.counts[ch];
            map.values[p] = static_cast<float>(std::max(0.0, sum));
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return map;
}

double percentile_value(const std::vector<float>& values, double percentile) {
    if (values.empty()) return 0.0;
    std::vector<float> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    const double rank = percentile / 100.0 * static_cast<double>(sorted.size());
    std::size_t idx = rank <= 1.0 ? 0
                                  : static_cast<std::size_t>(std::ceil(rank)) - 1;
    idx = std::min(idx, sorted.size() - 1);
    return sorted[idx];
}

OverlayImage overlay(const std::vector<float>& pigment_map, int width,
                     int height,
                     const std::vector<const ElementMap*>& elements,
                     double clip_percentile) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (pigment_map.size() != n)
        throw DimensionError("pigment map size does not match dimensions");
    if (elements.size() > 2)
        throw ValidationError("overlay takes at most two element maps");
    for (const ElementMap* e : elements)
        if (e->width != width || e->height != height)
            throw DimensionError("element map dimensions do not match");

    OverlayImage img;
    img.width = width;
    img.height = height;
    img.r = pigment_map;
    img.g.assign(n, 0.0f);
    img.b.assign(n, 0.0f);

    for (std::size_t ei = 0; ei < elements.size(); ++ei) {
        const auto& values = elements[ei]->values;
        const double clip = percentile_value(values, clip_percentile);
        auto& channel = ei == 0 ? img.g : img.b;
        if (clip <= 0.0) continue;  // all-zero map stays zero
        for (std::size_t i = 0; i < n; ++i)
            channel[i] = static_cast<float>(
                std::min(1.0, static_cast<double>(values[i]) / clip));
    }
    return img;
}

std::vector<ScatterRow> scatter_data(
    const std::vector<float>& pigment_map, int width, int height,
    const std::vector<const ElementMap*>& elements,
    ScatterReduction reduction) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (pigment_map.size() != n)
        throw DimensionError("pigment map size does not match dimensions");
    if (elements.empty())
        throw ValidationError("scatter needs at least one element map");
    for (const ElementMap* e : elements)
        if (e->width != width || e->height != height)
            throw DimensionError("element map dimensions do not match");

    std::vector<ScatterRow> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = elements[0]->values[i];
        if (reduction == ScatterReduction::Min)
            for (std::size_t ei = 1; ei < elements.size(); ++ei)
                x = std::min(x, static_cast<double>(elements[ei]->values[i]));
        rows[i] = {x, static_cast<double>(pigment_map[i])};
    }
    return rows;
}

void write_scatter_csv(const std::vector<ScatterRow>& rows,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write \"" + path + "\"");
    out << "roi_intensity,probability\n";  // ROI sums stand in for fitted
                                           // concentrations
    out.precision(9);
    for (const auto& row : rows)
        out << row.concentration << "," << row.probability << "\n";
    if (!out) throw IoError("short write to \"" + path + "\"");
}

void write_metrics_csv(const std::vector<ClassMetrics>& metrics,
                       const std::vector<std::string>& class_names,
                       const std::string& path) {
    if (metrics.size() != class_names.size())
        throw DimensionError("metrics and class names differ in length");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write \"" + path + "\"");
    out << "class,accuracy,sensitivity,precision,f1\n";
    out.precision(6);
    out << std::fixed;
    for (std::size_t i = 0; i < metrics.size(); ++i)
        out << class_names[i] << "," << metrics[i].accuracy << ","
            << metrics[i].sensitivity << "," << metrics[i].precision << ","
            << metrics[i].f1 << "\n";
    if (!out) throw IoError("short write to \"" + path + "\"");
}

}  // namespace xrfpid
