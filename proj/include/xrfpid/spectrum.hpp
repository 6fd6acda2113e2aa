#ifndef XRFPID_SPECTRUM_HPP
#define XRFPID_SPECTRUM_HPP

#include <cstddef>
#include <vector>

namespace xrfpid {

// Linear energy calibration: E(ch) = offset + gain * ch.
struct EnergyCalibration {
    double offset_kev = 0.0;
    double gain_kev_per_ch = 0.010;
    int channel_count = 4096;

    double energy(int channel) const {
        return offset_kev + gain_kev_per_ch * channel;
    }
    // Channel whose energy is closest to E (may fall outside [0, count)).
    int channel(double energy_kev) const {
        return static_cast<int>((energy_kev - offset_kev) / gain_kev_per_ch + 0.5);
    }
    bool operator==(const EnergyCalibration&) const = default;
};

EnergyCalibration default_calibration();

// Counts per channel with a calibration; live_time is optional metadata
// (seconds, 0 = unset).
struct Spectrum {
    std::vector<double> counts;
    EnergyCalibration calibration;
    double live_time_s = 0.0;

    int channels() const { return static_cast<int>(counts.size()); }
};

// Throws ValidationError on NaN/negative counts or a length mismatch with
// the calibration.
void validate_spectrum(const Spectrum& s);

// W x H raster of spectra sharing one calibration, row-major, channel-minor.
struct SpectralCube {
    int width = 0;
    int height = 0;
    double step_mm = 1.0;
    EnergyCalibration calibration;
    std::vector<float> counts;  // width*height*channel_count

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    const float* pixel(int x, int y) const {
        return counts.data() +
               (static_cast<std::size_t>(y) * width + x) * calibration.channel_count;
    }
    float* pixel(int x, int y) {
        return counts.data() +
               (static_cast<std::size_t>(y) * width + x) * calibration.channel_count;
    }
    Spectrum spectrum_at(int x, int y) const;
};

SpectralCube make_cube(int width, int height, const EnergyCalibration& cal,
                       double step_mm = 1.0);

}  // namespace xrfpid

#endif
