#include "ttnet/targets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ttnet {

BallTarget build_ball_target(std::optional<PixelCoord> center, int width, int height,
                             double sigma) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("ball target: empty vector size");
    if (!(sigma > 0.0)) throw std::invalid_argument("ball target: sigma must be positive");
    BallTarget t;
    t.vx.assign(static_cast<std::size_t>(width), 0.0f);
    t.vy.assign(static_cast<std::size_t>(height), 0.0f);
    if (!center) return t;
    if (center->x < 0 || center->x >= width || center->y < 0 || center->y >= height) {
        throw std::out_of_range("ball target: centre (" + std::to_string(center->x) + ", " +
                                std::to_string(center->y) + ") outside " +
                                std::to_string(width) + "x" + std::to_string(height));
    }
    const double denom = 2.0 * sigma * sigma;
    for (int i = 0; i < width; ++i) {
        const double d = i - center->x;
        t.vx[static_cast<std::size_t>(i)] = static_cast<float>(std::exp(-d * d / denom));
    }
    for (int j = 0; j < height; ++j) {
        const double d = j - center->y;
        t.vy[static_cast<std::size_t>(j)] = static_cast<float>(std::exp(-d * d / denom));
    }
    t.present = true;
    return t;
}

double event_profile(int n) {
    const int k = std::abs(n);
    if (k >= kEventSupport) return 0.0;
    return std::sin((kEventSupport - k) * std::numbers::pi / 8.0);
}

EventTarget build_event_target(int n, EventType type) {
    EventTarget t;
    t[type] = event_profile(n);
    return t;
}

torch::Tensor assemble_input(std::span<const Image> frames) {
    if (frames.size() != kStackFrames) {
        throw std::invalid_argument("assemble_input: expected 9 frames, got " +
                                    std::to_string(frames.size()));
    }
    const int w = frames[0].width;
    const int h = frames[0].height;
    for (const Image& f : frames) {
        if (f.channels != 3) throw std::invalid_argument("assemble_input: frames must be RGB");
        if (f.width != w || f.height != h) {
            throw std::invalid_argument("assemble_input: frames differ in size");
        }
    }
    auto out = torch::empty({kInputChannels, h, w}, torch::kFloat32);
    float* dst = out.data_ptr<float>();
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const std::uint8_t* src = frames[f].data.data();
        for (int c = 0; c < 3; ++c) {
            float* p = dst + (f * 3 + static_cast<std::size_t>(c)) * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] = src[i * 3 + c] / 255.0f;
        }
    }
    return out;
}

TrainingSample subsample_event_sequence(const LabeledClip& clip, int window_start) {
    if (clip.frames.size() != kEventClipLength) {
        throw std::invalid_argument("labelled clip must hold 25 frames");
    }
    if (window_start < 0 || window_start > kEventClipLength - kStackFrames) {
        throw std::out_of_range("window start " + std::to_string(window_start) +
                                " outside [0, 16]");
    }
    TrainingSample s;
    s.frames.assign(clip.frames.begin() + window_start,
                    clip.frames.begin() + window_start + kStackFrames);
    const int n = (window_start + kMiddleFrame) - kEventClipAnchor;
    s.event = build_event_target(n, clip.event);
    const auto last = static_cast<std::size_t>(window_start + kStackFrames - 1);
    if (last < clip.ball.size()) s.ball = clip.ball[last];
    if (last < clip.seg.size()) s.seg = clip.seg[last];
    return s;
}

}  // namespace ttnet
