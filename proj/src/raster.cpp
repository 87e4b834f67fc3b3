#include "socs/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "socs/error.hpp"

namespace socs {

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

Image::Image(int w, int h, std::array<double, 3> fill) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) set(x, y, fill);
  }
}

void Image::set(int x, int y, std::array<double, 3> color) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  std::uint8_t* p = rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  for (int c = 0; c < 3; ++c) p[c] = to_byte(color[static_cast<std::size_t>(c)]);
}

void Image::disc(double cx, double cy, double radius, std::array<double, 3> color) {
  for (int y = static_cast<int>(std::floor(cy - radius)); y <= static_cast<int>(std::ceil(cy + radius)); ++y) {
    for (int x = static_cast<int>(std::floor(cx - radius)); x <= static_cast<int>(std::ceil(cx + radius)); ++x) {
      if (std::hypot(x + 0.5 - cx, y + 0.5 - cy) <= radius) set(x, y, color);
    }
  }
}

void Image::line(double x0, double y0, double x1, double y1, std::array<double, 3> color) {
  const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    set(static_cast<int>(std::floor(x0 + t * (x1 - x0))), static_cast<int>(std::floor(y0 + t * (y1 - y0))), color);
  }
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw FormatError(path.string() + ": not an 8-bit P6 image");
  in.get();
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!in) throw FormatError(path.string() + ": truncated pixel data");
  return img;
}

std::array<double, 3> slot_color(int slot) {
  // Golden-angle hue walk, full saturation and value.
  const double hue = std::fmod(slot * 0.618033988749895, 1.0) * 6.0;
  const int sector = static_cast<int>(hue);
  const double f = hue - sector;
  switch (sector % 6) {
    case 0: return {1.0, f, 0.0};
    case 1: return {1.0 - f, 1.0, 0.0};
    case 2: return {0.0, 1.0, f};
    case 3: return {0.0, 1.0 - f, 1.0};
    case 4: return {f, 0.0, 1.0};
    default: return {1.0, 0.0, 1.0 - f};
  }
}

}  // namespace socs
