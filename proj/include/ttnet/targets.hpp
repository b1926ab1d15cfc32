#pragma once

#include <torch/torch.h>

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "ttnet/geometry.hpp"
#include "ttnet/image.hpp"

namespace ttnet {

inline constexpr int kStackFrames = 9;
/// 0-based position of the frame that carries the event target.
inline constexpr int kMiddleFrame = 4;
inline constexpr int kInputChannels = 3 * kStackFrames;
inline constexpr int kEventClipLength = 25;
inline constexpr int kEventClipAnchor = 12;
/// Event targets are non-zero only for |n| < kEventSupport.
inline constexpr int kEventSupport = 4;

/// Two 1-D Gaussian profiles (peak 1) around the ball centre; all zeros when absent.
struct BallTarget {
    std::vector<float> vx;
    std::vector<float> vy;
    bool present = false;
};

BallTarget build_ball_target(std::optional<PixelCoord> center, int width, int height,
                             double sigma);

enum class EventType { bounce, net };

struct EventTarget {
    double bounce = 0.0;
    double net = 0.0;

    double& operator[](EventType t) { return t == EventType::bounce ? bounce : net; }
    double operator[](EventType t) const { return t == EventType::bounce ? bounce : net; }
};

/// sin((4 - |n|) * pi / 8) for |n| < 4, else 0. Peaks at 1 on the event frame.
double event_profile(int n);

/// Target for a stack whose middle frame is n frames after a labelled event.
EventTarget build_event_target(int n, EventType type);

enum class SegClass { human = 0, table = 1, scoreboard = 2 };
inline constexpr int kSegClasses = 3;

/// One binary (0/1) single-channel mask per class; classes may overlap.
struct SegTarget {
    std::array<Image, kSegClasses> masks;

    const Image& operator[](SegClass c) const { return masks[static_cast<int>(c)]; }
    Image& operator[](SegClass c) { return masks[static_cast<int>(c)]; }
};

/// Nine consecutive full-resolution frames plus the targets attached to them:
/// ball and masks belong to the last frame, the event to the middle one.
struct TrainingSample {
    std::vector<Image> frames;
    std::optional<FullCoord> ball;
    EventTarget event;
    std::optional<SegTarget> seg;
};

/// Stacks nine RGB frames channel-wise into a float tensor [27, H, W] in [0, 1],
/// frame-major (frame 0 RGB, frame 1 RGB, ...).
torch::Tensor assemble_input(std::span<const Image> frames);

/// A 25-frame clip with its labelled event on the centre frame (index 12).
struct LabeledClip {
    std::vector<Image> frames;
    EventType event = EventType::bounce;
    std::vector<std::optional<FullCoord>> ball;
    std::vector<std::optional<SegTarget>> seg;
};

/// 9-frame window starting at window_start (0..16) of a 25-frame labelled clip.
TrainingSample subsample_event_sequence(const LabeledClip& clip, int window_start);

}  // namespace ttnet
