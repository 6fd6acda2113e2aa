#ifndef XRFPID_SPECTRUM_IO_HPP
#define XRFPID_SPECTRUM_IO_HPP

#include <string>

#include "xrfpid/spectrum.hpp"

namespace xrfpid {

// .xsp text format (docs/formats.md): header lines "xsp 1", "offset", "gain",
// "channels", optional "live_time", then "data" and one count per line.
// Round-trips bit-exactly for finite inputs.
Spectrum read_spectrum(const std::string& path);
void write_spectrum(const Spectrum& s, const std::string& path);

// .xcube little-endian binary container: magic "XCUB", u32 version, u32
// width/height/channels, f64 offset/gain/step/live_time, then
// width*height*channels f32 counts, row-major pixels, channel-minor.
SpectralCube read_cube(const std::string& path);
void write_cube(const SpectralCube& cube, const std::string& path);

}  // namespace xrfpid

#endif
