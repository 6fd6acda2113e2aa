#include "xrfpid/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "xrfpid/errors.hpp"

namespace xrfpid {

Spectrum crop(const Spectrum& s, const PreprocessConfig& config) {
    const EnergyCalibration& cal = s.calibration;
    if (cal.energy(cal.channel_count - 1) <= config.crop_energy_kev)
        throw DimensionError("calibration does not reach the crop energy");
    // strict E(ch) > crop; the epsilon keeps channels that land exactly on
    // the boundary out despite rounding in offset + gain*ch
    const double eps = cal.gain_kev_per_ch * 1e-6;
    int first = cal.channel_count;
    for (int ch = 0; ch < cal.channel_count; ++ch) {
        if (cal.energy(ch) > config.crop_energy_kev + eps) {
            first = ch;
            break;
        }
    }
    Spectrum out;
    out.live_time_s = s.live_time_s;
    out.calibration.offset_kev = cal.energy(first);
    out.calibration.gain_kev_per_ch = cal.gain_kev_per_ch;
    out.calibration.channel_count = cal.channel_count - first;
    out.counts.assign(s.counts.begin() + first, s.counts.end());
    if (config.expected_length > 0 &&
        out.channels() != config.expected_length)
        throw DimensionError("cropped spectrum has " +
                             std::to_string(out.channels()) +
                             " channels, pipeline expects " +
                             std::to_string(config.expected_length));
    return out;
}

namespace {

// log-log-sqrt compression used by SNIP
double lls(double c) {
    return std::log(std::log(std::sqrt(c + 1.0) + 1.0) + 1.0);
}

double lls_inverse(double v) {
    const double r = std::exp(std::exp(v) - 1.0) - 1.0;
    return r * r - 1.0;
}

}  // namespace

Spectrum snip_background(const Spectrum& s, const SnipParams& params) {
    if (params.iterations < 1)
        throw ValidationError("SNIP needs at least one iteration");
    const int n = s.channels();
    Spectrum out;
    out.calibration = s.calibration;
    out.live_time_s = s.live_time_s;
    out.counts = s.counts;
    if (n == 0) return out;

    if (params.presmooth_width > 1) {
        const int half = params.presmooth_width / 2;
        std::vector<double> smooth(n);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            int cnt = 0;
            for (int j = std::max(0, i - half);
                 j <= std::min(n - 1, i + half); ++j) {
                acc += s.counts[j];
                ++cnt;
            }
            smooth[i] = acc / cnt;
        }
        out.counts = std::move(smooth);
    }

    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        if (out.counts[i] < 0.0)
            throw ValidationError("SNIP input counts must be non-negative");
        v[i] = lls(out.counts[i]);
    }

    std::vector<double> w(n);
    for (int p = params.iterations; p >= 1; --p) {
        if (p >= n) continue;
        w = v;
        for (int i = p; i < n - p; ++i)
            w[i] = std::min(v[i], 0.5 * (v[i - p] + v[i + p]));
        v.swap(w);
    }

    for (int i = 0; i < n; ++i)
        out.counts[i] = std::max(0.0, lls_inverse(v[i]));
    return out;
}

Spectrum inject_background(const Spectrum& simulated,
                           const Spectrum& background) {
    if (!(simulated.calibration == background.calibration))
        throw ValidationError(
            "background calibration does not match the spectrum");
    Spectrum out = simulated;
    for (int i = 0; i < out.channels(); ++i)
        out.counts[i] += background.counts[i];
    return out;
}

double loglog_sqrt(double x) {
    return std::log(1.0 + std::log(1.0 + std::sqrt(x)));
}

FeatureVector transform(const Spectrum& s, const PreprocessConfig& config) {
    if (config.expected_length > 0 && s.channels() != config.expected_length)
        throw DimensionError("transform input has " +
                             std::to_string(s.channels()) +
                             " channels, pipeline expects " +
                             std::to_string(config.expected_length));
    std::vector<double> t(s.counts.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
        const double c = s.counts[i];
        if (!(c >= 0.0) || !std::isfinite(c))
            throw ValidationError("transform input must be finite and >= 0");
        t[i] = loglog_sqrt(c);
        peak = std::max(peak, t[i]);
    }
    const bool scale = config.normalization == Normalization::Max && peak > 0.0;
    FeatureVector f;
    f.values.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        f.values[i] = static_cast<float>(scale ? t[i] / peak : t[i]);
    return f;
}

FeatureVector preprocess_spectrum(const Spectrum& s,
                                  const PreprocessConfig& config) {
    return transform(crop(s, config), config);
}

}  // namespace xrfpid
