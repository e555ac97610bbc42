#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include "mosaic/pam/pam.hpp"

namespace mosaic::evalcli {

// Binary PGM (P5, maxval 255) of a [0, 1] grayscale image, with a
// "# mosaic-image 1" comment line after the magic.
void write_pgm(std::ostream& os, const Tensor& image);
void write_pgm(const std::filesystem::path& path, const Tensor& image);
void write_colormap(const std::filesystem::path& path, const pam::SelectionTrace& trace,
                    std::size_t cell_px = 4);

// Parses the records written by pam::write_trace_records back into one
// trace per timestep. Throws std::runtime_error on malformed input.
std::map<std::size_t, pam::SelectionTrace> read_trace_records(std::istream& is);

}  // namespace mosaic::evalcli
