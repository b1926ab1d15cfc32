#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ttnet {

/// 8-bit interleaved image, row-major.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    bool empty() const { return data.empty(); }
    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    std::uint8_t& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    std::uint8_t at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

/// Sub-image; the rectangle must lie inside the image.
Image crop(const Image& img, const Rect& r);

/// Bilinear resampling on a top-left aligned grid: output pixel (x, y) samples
/// the source at (x * W/w, y * H/h). This matches the global/full coordinate
/// mapping used by the ball detector.
Image resize_bilinear(const Image& img, int width, int height);

/// Nearest-neighbour resampling on the same grid as resize_bilinear.
Image resize_nearest(const Image& img, int width, int height);

/// Reads .ppm/.pgm (binary netpbm) or .png.
Image read_image(const std::filesystem::path& path);
/// Writes .ppm/.pgm (binary netpbm) or .png, selected by extension.
void write_image(const std::filesystem::path& path, const Image& img);

}  // namespace ttnet
