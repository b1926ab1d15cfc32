#pragma once

// Coordinate frames of the two-stage ball detector.
//
//   full   : original video frame, w0 x h0 pixels
//   global : whole frame downscaled to w1 x h1
//   local  : w2 x h2 crop of the full frame around the global detection
//
// All functions here are pure and thread-safe.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace ttnet {

struct ResolutionConfig {
    int w0 = 1920;
    int h0 = 1080;
    int w1 = 320;
    int h1 = 128;
    int w2 = 320;
    int h2 = 128;

    void validate() const {
        if (w0 <= 0 || h0 <= 0 || w1 <= 0 || h1 <= 0 || w2 <= 0 || h2 <= 0) {
            throw std::invalid_argument("resolution: all sizes must be positive");
        }
        if (w2 > w0 || h2 > h0) {
            throw std::invalid_argument("resolution: crop larger than the full frame");
        }
    }

    double scale_x() const { return static_cast<double>(w0) / w1; }
    double scale_y() const { return static_cast<double>(h0) / h1; }

    std::string describe() const {
        return "full=" + std::to_string(w0) + "x" + std::to_string(h0) +
               " global=" + std::to_string(w1) + "x" + std::to_string(h1) +
               " local=" + std::to_string(w2) + "x" + std::to_string(h2);
    }

    friend bool operator==(const ResolutionConfig&, const ResolutionConfig&) = default;
};

/// Integer pixel position; the frame it lives in is given by context.
struct PixelCoord {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct PointF {
    double x = 0.0;
    double y = 0.0;
};

struct GlobalCoord {
    int x1 = 0;
    int y1 = 0;
};

struct LocalCoord {
    int x2 = 0;
    int y2 = 0;
};

struct FullCoord {
    int x = 0;
    int y = 0;
    friend bool operator==(const FullCoord&, const FullCoord&) = default;
};

/// Top-left corner plus size, always fully inside the full frame.
struct CropWindow {
    int x_origin = 0;
    int y_origin = 0;
    int width = 0;
    int height = 0;

    bool contains(FullCoord p) const {
        return p.x >= x_origin && p.x < x_origin + width && p.y >= y_origin &&
               p.y < y_origin + height;
    }

    friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

/// Round to nearest, ties away from zero.
inline long round_half_away(double v) { return std::lround(v); }

inline bool in_global_bounds(GlobalCoord c, const ResolutionConfig& cfg) {
    return c.x1 >= 0 && c.x1 < cfg.w1 && c.y1 >= 0 && c.y1 < cfg.h1;
}

inline bool in_full_bounds(FullCoord c, const ResolutionConfig& cfg) {
    return c.x >= 0 && c.x < cfg.w0 && c.y >= 0 && c.y < cfg.h0;
}

/// (x1 * w0/w1, y1 * h0/h1), unrounded.
inline PointF scale_global_to_full(GlobalCoord c, const ResolutionConfig& cfg) {
    if (!in_global_bounds(c, cfg)) {
        throw std::out_of_range("global coordinate outside the downscaled frame");
    }
    return {static_cast<double>(c.x1) * cfg.w0 / cfg.w1,
            static_cast<double>(c.y1) * cfg.h0 / cfg.h1};
}

/// Nearest global pixel of a full-frame position, clamped into the global frame.
inline GlobalCoord full_to_global(FullCoord p, const ResolutionConfig& cfg) {
    const long gx = round_half_away(static_cast<double>(p.x) * cfg.w1 / cfg.w0);
    const long gy = round_half_away(static_cast<double>(p.y) * cfg.h1 / cfg.h0);
    return {static_cast<int>(std::clamp<long>(gx, 0, cfg.w1 - 1)),
            static_cast<int>(std::clamp<long>(gy, 0, cfg.h1 - 1))};
}

/// Crop of size w2 x h2 centred on the rounded point, shifted back inside the frame.
inline CropWindow make_crop_window(PointF center_full, const ResolutionConfig& cfg) {
    const long ox = round_half_away(center_full.x) - cfg.w2 / 2;
    const long oy = round_half_away(center_full.y) - cfg.h2 / 2;
    return {static_cast<int>(std::clamp<long>(ox, 0, cfg.w0 - cfg.w2)),
            static_cast<int>(std::clamp<long>(oy, 0, cfg.h0 - cfg.h2)), cfg.w2, cfg.h2};
}

/// origin + local offset. Reduces to x1*w0/w1 - w2/2 + x2 for unclamped windows.
inline FullCoord compose_coordinates(const CropWindow& crop, LocalCoord c2) {
    if (c2.x2 < 0 || c2.x2 >= crop.width || c2.y2 < 0 || c2.y2 >= crop.height) {
        throw std::out_of_range("local coordinate outside the crop window");
    }
    return {crop.x_origin + c2.x2, crop.y_origin + c2.y2};
}

/// Inverse of compose_coordinates; empty when p lies outside the window.
inline std::optional<LocalCoord> full_to_local(const CropWindow& crop, FullCoord p) {
    if (!crop.contains(p)) return std::nullopt;
    return LocalCoord{p.x - crop.x_origin, p.y - crop.y_origin};
}

}  // namespace ttnet
