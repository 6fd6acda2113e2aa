#ifndef XRFPID_IMAGE_IO_HPP
#define XRFPID_IMAGE_IO_HPP

#include <string>
#include <vector>

#include "xrfpid/analysis.hpp"

namespace xrfpid {

// 16-bit binary PGM; values in [0, 1] scale to 0..65535.
void write_pgm16(const std::vector<float>& values, int width, int height,
                 const std::string& path);

// 8-bit RGB PNG from an overlay composite.
void write_png_rgb(const OverlayImage& image, const std::string& path);

}  // namespace xrfpid

#endif
