#include "cag/render.hpp"

#include <fstream>

#include "cag/graph.hpp"

namespace cag {

namespace {
constexpr int kCellPx = 6;
constexpr int kMargin = 46;
}  // namespace

void write_grid_svg(const Partition& part, const std::vector<uint8_t>& grid,
                    const std::string& title, const std::string& path) {
  if (grid.size() != static_cast<std::size_t>(part.num_cells())) {
    throw IoError("grid size does not match the partition");
  }
  const int bp = part.bins(0), bt = part.bins(1);
  const int w = kMargin * 2 + kCellPx * bp;
  const int h = kMargin * 2 + kCellPx * bt;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write svg " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\" "
      << "font-family=\"sans-serif\">" << title << "</text>\n";
  // plot area frame; p horizontal, theta vertical (theta increases upward)
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kCellPx * bp
      << "\" height=\"" << kCellPx * bt
      << "\" fill=\"#ffffff\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
  for (int i = 0; i < bp; ++i) {
    for (int j = 0; j < bt; ++j) {
      const int64_t idx = int64_t{i} * bt + j;
      if (grid[static_cast<std::size_t>(idx)]) continue;  // white = in result
      const int x = kMargin + i * kCellPx;
      const int y = kMargin + (bt - 1 - j) * kCellPx;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCellPx
          << "\" height=\"" << kCellPx << "\" fill=\"#000000\"/>\n";
    }
  }
  const Box& dom = part.domain();
  out.precision(4);
  out << "<text x=\"" << kMargin << "\" y=\"" << h - 14
      << "\" font-size=\"11\" font-family=\"sans-serif\">p: [" << dom[0].lo() << ", "
      << dom[0].hi() << "] m</text>\n";
  out << "<text x=\"" << w - kMargin << "\" y=\"" << h - 14
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">theta: ["
      << dom[1].lo() << ", " << dom[1].hi() << "] rad</text>\n";
  out << "</svg>\n";
}

void write_grid_pgm(const Partition& part, const std::vector<uint8_t>& grid,
                    const std::string& path) {
  if (grid.size() != static_cast<std::size_t>(part.num_cells())) {
    throw IoError("grid size does not match the partition");
  }
  const int bp = part.bins(0), bt = part.bins(1);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write pgm " + path);
  out << "P2\n" << bp << ' ' << bt << "\n255\n";
  for (int j = bt - 1; j >= 0; --j) {
    for (int i = 0; i < bp; ++i) {
      const int64_t idx = int64_t{i} * bt + j;
      out << (grid[static_cast<std::size_t>(idx)] ? 255 : 0);
      out << (i + 1 == bp ? '\n' : ' ');
    }
  }
}

}  // namespace cag
