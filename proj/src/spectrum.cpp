#include "xrfpid/spectrum.hpp"

#include <cmath>

#include "xrfpid/errors.hpp"

namespace xrfpid {

EnergyCalibration default_calibration() {
    // 0.010 keV/channel over 4096 channels: cropping above 2.80 keV keeps
    // channels 281..4095, the 3815-sample classifier input.
    return EnergyCalibration{0.0, 0.010, 4096};
}

void validate_spectrum(const Spectrum& s) {
    if (s.calibration.gain_kev_per_ch <= 0.0)
        throw ValidationError("calibration gain must be positive");
    if (s.calibration.channel_count <= 0)
        throw ValidationError("calibration channel count must be positive");
    if (s.channels() != s.calibration.channel_count)
        throw ValidationError("spectrum has " + std::to_string(s.channels()) +
                              " counts but calibration expects " +
                              std::to_string(s.calibration.channel_count));
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
        double c = s.counts[i];
        if (!std::isfinite(c) || c < 0.0)
            throw ValidationError("invalid count " + std::to_string(c) +
                                  " at channel " + std::to_string(i));
    }
}

Spectrum SpectralCube::spectrum_at(int x, int y) const {
    Spectrum s;
    s.calibration = calibration;
    const float* p = pixel(x, y);
    s.counts.assign(p, p + calibration.channel_count);
    return s;
}

SpectralCube make_cube(int width, int height, const EnergyCalibration& cal,
                       double step_mm) {
    if (width < 0 || height < 0)
        throw ValidationError("cube dimensions must be non-negative");
    SpectralCube cube;
    cube.width = width;
    cube.height = height;
    cube.step_mm = step_mm;
    cube.calibration = cal;
    cube.counts.assign(static_cast<std::size_t>(width) * height *
                           cal.channel_count,
                       0.0f);
    return cube;
}

}  // namespace xrfpid
