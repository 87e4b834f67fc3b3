#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace socs {

/// 8-bit RGB image with a few drawing helpers.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // [height, width, 3]

  Image(int w, int h, std::array<double, 3> fill = {1, 1, 1});
  void set(int x, int y, std::array<double, 3> color);
  void disc(double cx, double cy, double radius, std::array<double, 3> color);
  void line(double x0, double y0, double x1, double y1, std::array<double, 3> color);
};

/// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// Stable, well-separated color for a slot index.
std::array<double, 3> slot_color(int slot);

}  // namespace socs
