/*
 * render.hpp
 *
 * Cell-grid figure emitters: SVG heatmaps (white = verified / in set,
 * black = undetermined) and portable PGM grayscale for diffing.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cag/partition.hpp"

namespace cag {

/* grid: one value per cell in linear order, nonzero = white cell. */
void write_grid_svg(const Partition& part, const std::vector<uint8_t>& grid,
                    const std::string& title, const std::string& path);

void write_grid_pgm(const Partition& part, const std::vector<uint8_t>& grid,
                    const std::string& path);

}  // namespace cag
