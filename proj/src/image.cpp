#include "ttnet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "ttnet/error.hpp"

namespace ttnet {
namespace {

std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

// Skips whitespace and '#' comments in a netpbm header.
int read_header_int(std::istream& in) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw IoError("malformed netpbm header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;  // consumes exactly one trailing whitespace byte
}

Image read_netpbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[2] = {};
    in.read(magic, 2);
    if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
        throw IoError("unsupported netpbm variant in " + path.string());
    }
    const int channels = magic[1] == '6' ? 3 : 1;
    const int w = read_header_int(in);
    const int h = read_header_int(in);
    const int maxval = read_header_int(in);
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw IoError("unsupported netpbm geometry in " + path.string());
    }
    Image img(w, h, channels);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
        throw IoError("truncated image data in " + path.string());
    }
    return img;
}

void write_netpbm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << (img.channels == 3 ? "P6" : "P5") << '\n'
        << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Image read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        throw IoError("cannot read " + path.string() + ": " + png.message);
    }
    const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
    png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    Image img(static_cast<int>(png.width), static_cast<int>(png.height), gray ? 1 : 3);
    if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr)) {
        png_image_free(&png);
        throw IoError("cannot decode " + path.string() + ": " + png.message);
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, img.data.data(), 0,
                                 nullptr)) {
        throw IoError("cannot write " + path.string() + ": " + png.message);
    }
}

}  // namespace

Image crop(const Image& img, const Rect& r) {
    if (r.x < 0 || r.y < 0 || r.width <= 0 || r.height <= 0 || r.x + r.width > img.width ||
        r.y + r.height > img.height) {
        throw std::out_of_range("crop rectangle outside the image");
    }
    Image out(r.width, r.height, img.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(r.width) * img.channels;
    for (int y = 0; y < r.height; ++y) {
        std::memcpy(&out.data[out.index(0, y)], &img.data[img.index(r.x, r.y + y)], row_bytes);
    }
    return out;
}

Image resize_bilinear(const Image& img, int width, int height) {
    if (width <= 0 || height <= 0 || img.empty()) {
        throw std::invalid_argument("resize_bilinear: empty source or target");
    }
    if (width == img.width && height == img.height) return img;
    Image out(width, height, img.channels);
    const double sx = static_cast<double>(img.width) / width;
    const double sy = static_cast<double>(img.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = y * sy;
        const int y0 = std::min(static_cast<int>(fy), img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = x * sx;
            const int x0 = std::min(static_cast<int>(fx), img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const double top = img.at(x0, y0, c) * (1.0 - wx) + img.at(x1, y0, c) * wx;
                const double bottom = img.at(x0, y1, c) * (1.0 - wx) + img.at(x1, y1, c) * wx;
                const double v = top * (1.0 - wy) + bottom * wy;
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

Image resize_nearest(const Image& img, int width, int height) {
    if (width <= 0 || height <= 0 || img.empty()) {
        throw std::invalid_argument("resize_nearest: empty source or target");
    }
    if (width == img.width && height == img.height) return img;
    Image out(width, height, img.channels);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(static_cast<int>(std::lround(static_cast<double>(y) * img.height / height)),
                                img.height - 1);
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(
                static_cast<int>(std::lround(static_cast<double>(x) * img.width / width)),
                img.width - 1);
            for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
        }
    }
    return out;
}

Image read_image(const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".ppm" || ext == ".pgm") return read_netpbm(path);
    if (ext == ".png") return read_png(path);
    throw IoError("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw std::invalid_argument("write_image: only 1- or 3-channel images");
    }
    const std::string ext = lower_extension(path);
    if (ext == ".ppm" || ext == ".pgm") {
        if ((ext == ".ppm") != (img.channels == 3)) {
            throw std::invalid_argument("write_image: channel count does not match " + ext);
        }
        write_netpbm(path, img);
    } else if (ext == ".png") {
        write_png(path, img);
    } else {
        throw IoError("unsupported image format: " + path.string());
    }
}

}  // namespace ttnet
