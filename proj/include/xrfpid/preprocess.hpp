#ifndef XRFPID_PREPROCESS_HPP
#define XRFPID_PREPROCESS_HPP

#include <vector>

#include "xrfpid/spectrum.hpp"

namespace xrfpid {

inline constexpr double kCropEnergyKev = 2.80;
inline constexpr int kFeatureLength = 3815;

// Classifier input: transformed, max-normalized counts in [0, 1].
struct FeatureVector {
    std::vector<float> values;

    int size() const { return static_cast<int>(values.size()); }
};

struct SnipParams {
    int iterations = 24;      // window half-widths m, m-1, ..., 1
    int presmooth_width = 3;  // boxcar width in channels, 1 = off
};

enum class Normalization { Max, None };

struct PreprocessConfig {
    double crop_energy_kev = kCropEnergyKev;
    int expected_length = kFeatureLength;  // 0 disables the check
    Normalization normalization = Normalization::Max;
};

// Keep channels with E(ch) > crop energy. With the default calibration this
// is channels 281..4095, length 3815. Throws DimensionError when an expected
// length is configured and missed.
Spectrum crop(const Spectrum& s, const PreprocessConfig& config = {});

// SNIP background estimate: boxcar pre-smooth, LLS transform, iterative
// min-clipping with decreasing windows, inverse transform.
Spectrum snip_background(const Spectrum& s, const SnipParams& params = {});

// Channel-wise sum; calibrations must match.
Spectrum inject_background(const Spectrum& simulated, const Spectrum& background);

// ln(1 + ln(1 + sqrt(x))) per channel, then normalization. All-zero input
// maps to all zeros.
FeatureVector transform(const Spectrum& s, const PreprocessConfig& config = {});

// Pre-normalization scalar transform, exposed for tests.
double loglog_sqrt(double x);

// crop + transform.
FeatureVector preprocess_spectrum(const Spectrum& s,
                                  const PreprocessConfig& config = {});

}  // namespace xrfpid

#endif
