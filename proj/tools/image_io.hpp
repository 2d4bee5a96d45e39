#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "snn/image.hpp"

namespace snn::io {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Reads an 8/16-bit PNG or a binary PGM/PPM (P5/P6), detected from the file
/// signature. Samples are scaled to [0, 1]; alpha is dropped, palettes expanded.
Image<double> read_image(const std::filesystem::path &path);

/// Writes 8-bit samples, clipped to [0, 1] and rounded. `.png` selects PNG,
/// anything else binary PNM (P5 for one channel, P6 for three). The file is
/// written to a temporary sibling and renamed, so failures leave no partial output.
void write_image(const std::filesystem::path &path, const Image<double> &img);

/// The 8-bit code an exported sample maps to.
unsigned char to_byte(double v) noexcept;

bool is_image_file(const std::filesystem::path &path);

} // namespace snn::io
