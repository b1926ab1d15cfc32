#include "ttnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ttnet {
namespace {

// Geometric transform of a w x h frame and its inverse.
class Affine {
public:
    Affine(const AugmentationParams& p, int w, int h) : w_(w), h_(h), flip_(p.hflip) {
        const double cw = w * (1.0 - p.crop_x);
        const double ch = h * (1.0 - p.crop_y);
        ox_ = (w - cw) * p.crop_left;
        oy_ = (h - ch) * p.crop_top;
        sx_ = w / cw;
        sy_ = h / ch;
        const double a = p.rotation_deg * std::numbers::pi / 180.0;
        cos_ = std::cos(a);
        sin_ = std::sin(a);
        cx_ = (w - 1) / 2.0;
        cy_ = (h - 1) / 2.0;
    }

    PointF forward(PointF s) const {
        const double qx = (s.x - ox_) * sx_ - cx_;
        const double qy = (s.y - oy_) * sy_ - cy_;
        PointF r{cos_ * qx - sin_ * qy + cx_, sin_ * qx + cos_ * qy + cy_};
        if (flip_) r.x = w_ - 1 - r.x;
        return r;
    }

    PointF inverse(PointF o) const {
        if (flip_) o.x = w_ - 1 - o.x;
        const double rx = o.x - cx_, ry = o.y - cy_;
        const double qx = cos_ * rx + sin_ * ry + cx_;
        const double qy = -sin_ * rx + cos_ * ry + cy_;
        return {qx / sx_ + ox_, qy / sy_ + oy_};
    }

private:
    int w_, h_;
    bool flip_;
    double ox_, oy_, sx_, sy_, cos_, sin_, cx_, cy_;
};

bool inside(PointF p, double w, double h) {
    return p.x >= -0.5 && p.y >= -0.5 && p.x <= w - 0.5 && p.y <= h - 0.5;
}

Image warp_bilinear(const Image& src, const Affine& t) {
    Image out(src.width, src.height, src.channels);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            const PointF s = t.inverse({static_cast<double>(x), static_cast<double>(y)});
            if (!inside(s, src.width, src.height)) continue;
            const double fx = std::clamp(s.x, 0.0, src.width - 1.0);
            const double fy = std::clamp(s.y, 0.0, src.height - 1.0);
            const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
            const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
            const double wx = fx - x0, wy = fy - y0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = src.at(x0, y0, c) * (1 - wx) + src.at(x1, y0, c) * wx;
                const double bottom = src.at(x0, y1, c) * (1 - wx) + src.at(x1, y1, c) * wx;
                out.at(x, y, c) = static_cast<std::uint8_t>(
                    std::clamp(std::lround(top * (1 - wy) + bottom * wy), 0L, 255L));
            }
        }
    }
    return out;
}

// Masks live on the top-left aligned grid of a smaller image: mask pixel m sits
// at full-frame position m * W / w.
Image warp_mask(const Image& mask, const Affine& t, int full_w, int full_h) {
    Image out(mask.width, mask.height, 1);
    const double kx = static_cast<double>(full_w) / mask.width;
    const double ky = static_cast<double>(full_h) / mask.height;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const PointF s = t.inverse({x * kx, y * ky});
            if (!inside(s, full_w, full_h)) continue;
            const int mx = std::clamp(static_cast<int>(std::lround(s.x / kx)), 0, mask.width - 1);
            const int my = std::clamp(static_cast<int>(std::lround(s.y / ky)), 0, mask.height - 1);
            out.at(x, y) = mask.at(mx, my);
        }
    }
    return out;
}

void adjust_colors(Image& img, const AugmentationParams& p) {
    if (img.channels != 3) return;
    const double ch = std::cos(p.hue), sh = std::sin(p.hue);
    const double gain = 1.0 + p.contrast;
    const double shift = p.brightness * 255.0;
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
        const double r = img.data[i], g = img.data[i + 1], b = img.data[i + 2];
        const double Y = 0.299 * r + 0.587 * g + 0.114 * b;
        const double I0 = 0.596 * r - 0.274 * g - 0.322 * b;
        const double Q0 = 0.211 * r - 0.523 * g + 0.312 * b;
        const double I = ch * I0 - sh * Q0;
        const double Q = sh * I0 + ch * Q0;
        double out[3] = {r, g, b};
        if (p.hue != 0) {
            out[0] = Y + 0.956 * I + 0.621 * Q;
            out[1] = Y - 0.272 * I - 0.647 * Q;
            out[2] = Y - 1.106 * I + 1.703 * Q;
        }
        for (int k = 0; k < 3; ++k) {
            const double v = (out[k] + shift - 127.5) * gain + 127.5;
            img.data[i + static_cast<std::size_t>(k)] =
                static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
}

}  // namespace

void AugmentationParams::validate() const {
    if (crop_x < 0 || crop_x > 0.15 || crop_y < 0 || crop_y > 0.15) {
        throw std::invalid_argument("augmentation: crop fraction must be in [0, 0.15]");
    }
    if (crop_left < 0 || crop_left > 1 || crop_top < 0 || crop_top > 1) {
        throw std::invalid_argument("augmentation: crop position must be in [0, 1]");
    }
    if (!(std::abs(rotation_deg) <= 15.0)) {
        throw std::invalid_argument("augmentation: rotation must be within +-15 degrees");
    }
    if (!(contrast > -1.0) || !std::isfinite(brightness) || !std::isfinite(hue)) {
        throw std::invalid_argument("augmentation: bad photometric parameters");
    }
}

bool AugmentationParams::is_geometric_identity() const {
    return crop_x == 0 && crop_y == 0 && rotation_deg == 0 && !hflip;
}

bool AugmentationParams::is_identity() const {
    return is_geometric_identity() && brightness == 0 && contrast == 0 && hue == 0;
}

AugmentationParams sample_augmentation(const AugmentationRanges& r, std::mt19937_64& rng) {
    auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    AugmentationParams p;
    p.crop_x = u(0, r.max_crop);
    p.crop_y = u(0, r.max_crop);
    p.crop_left = u(0, 1);
    p.crop_top = u(0, 1);
    p.rotation_deg = u(-r.max_rotation_deg, r.max_rotation_deg);
    p.hflip = std::bernoulli_distribution(r.hflip_probability)(rng);
    p.brightness = u(-r.brightness, r.brightness);
    p.contrast = u(-r.contrast, r.contrast);
    p.hue = u(-r.hue, r.hue);
    return p;
}

PointF augment_point(const AugmentationParams& p, PointF src, int width, int height) {
    return Affine(p, width, height).forward(src);
}

TrainingSample augment(const TrainingSample& sample, const AugmentationParams& params) {
    params.validate();
    if (params.is_identity() || sample.frames.empty()) return sample;
    const int w = sample.frames.front().width;
    const int h = sample.frames.front().height;
    const Affine t(params, w, h);
    const bool geometric = !params.is_geometric_identity();

    TrainingSample out;
    out.event = sample.event;
    out.frames.reserve(sample.frames.size());
    for (const auto& f : sample.frames) {
        Image g = geometric ? warp_bilinear(f, t) : f;
        adjust_colors(g, params);
        out.frames.push_back(std::move(g));
    }
    if (sample.ball) {
        const PointF q = t.forward({static_cast<double>(sample.ball->x), static_cast<double>(sample.ball->y)});
        const FullCoord b{static_cast<int>(std::lround(q.x)), static_cast<int>(std::lround(q.y))};
        if (b.x >= 0 && b.y >= 0 && b.x < w && b.y < h) out.ball = b;
    }
    if (sample.seg) {
        SegTarget seg = *sample.seg;
        if (geometric) {
            for (auto& m : seg.masks) m = warp_mask(m, t, w, h);
        }
        out.seg = std::move(seg);
    }
    return out;
}

}  // namespace ttnet
