#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "ttnet/annotations.hpp"
#include "ttnet/frame_source.hpp"
#include "ttnet/geometry.hpp"

namespace ttnet {

struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

struct Ellipse {
    double cx = 0, cy = 0, rx = 1, ry = 1;
    bool contains(double x, double y) const {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
};

using Rgb = std::array<std::uint8_t, 3>;

/// A static side-view scene plus one ball. Lengths are full-frame pixels,
/// velocities px/frame, gravity px/frame^2 (positive y is down).
struct SyntheticSceneConfig {
    int width = 1920;
    int height = 1080;
    /// Size of the downscaled detector input; only used to check the ball stays visible.
    int global_width = 320;
    int global_height = 128;
    int clip_length = 60;

    Box table{360, 600, 1560, 780};  ///< y0 is the playing surface
    double net_x = 960;
    double net_height = 90;
    double net_half_width = 3;
    Box scoreboard{80, 60, 480, 170};
    std::array<Ellipse, 2> humans{Ellipse{200, 560, 90, 280}, Ellipse{1720, 560, 90, 280}};
    double human_sway = 6;  ///< horizontal sway amplitude of the human blobs

    bool ball_visible = true;
    double ball_radius = 18;
    PointF ball_position{700, 300};
    PointF ball_velocity{10, 0};
    double gravity = 0.9;
    double restitution = 0.8;      ///< vertical speed kept by a table bounce
    double net_restitution = 0.3;  ///< horizontal speed kept by a net hit

    double noise = 6;  ///< uniform per-pixel noise amplitude in grey levels
    Rgb background{50, 90, 60};
    Rgb table_color{30, 80, 160};
    Rgb net_color{190, 190, 190};
    Rgb scoreboard_color{12, 12, 12};
    Rgb human_color{200, 120, 90};
    Rgb ball_color{255, 255, 255};

    /// Throws std::invalid_argument for degenerate or out-of-frame geometry.
    void validate() const;
    double net_top() const { return table.y0 - net_height; }
};

/// Continuous ball centres per frame (empty when not rendered) and the event
/// frames produced by the simulation.
struct BallTrack {
    std::vector<std::optional<PointF>> centers;
    std::map<int, EventLabel> events;
};

/// Ballistic motion with snap-to-contact reflections: the frame where the
/// disc's lower edge reaches the table surface (moving down, above the table)
/// is a bounce; the frame where its leading edge reaches the net face within
/// the net's height is a net hit.
BallTrack simulate_ball(const SyntheticSceneConfig& cfg);

enum class ClipKind { bounce, net, no_event, no_ball };

struct SceneOptions {
    int width = 1920;
    int height = 1080;
    int global_width = 320;
    int global_height = 128;
    int clip_length = 60;
    /// 0 picks 18 px scaled with the frame width, at least 2.5 px at global scale.
    double ball_radius = 0;
    /// Fixed kind, or a random mix when empty.
    std::optional<ClipKind> kind;
    int event_frame_min = 16;
    int event_frame_max = 42;
};

/// Draws a random scene; for bounce/net kinds the first event lands exactly on
/// a frame drawn from [event_frame_min, event_frame_max], the upper end clipped so
/// that the event window fits the clip.
SyntheticSceneConfig random_scene(const SceneOptions& options, std::mt19937_64& rng);

/// Procedurally rendered clip. Pixels are computed on demand, so region() and
/// downscaled() only touch the pixels they need; both agree bit-exactly with
/// crop()/resize_bilinear() of frame().
class SyntheticClip final : public FrameSource, public MaskSource {
public:
    SyntheticClip(SyntheticSceneConfig cfg, std::uint64_t texture_seed);

    int frame_count() const override { return cfg_.clip_length; }
    int width() const override { return cfg_.width; }
    int height() const override { return cfg_.height; }
    Image frame(int index) const override;
    Image region(int index, const Rect& r) const override;
    Image downscaled(int index, int width, int height) const override;
    std::optional<SegTarget> masks(int index, int width, int height) const override;

    Rgb pixel(int index, int x, int y) const;
    bool in_class(SegClass cls, int index, double x, double y) const;

    const SyntheticSceneConfig& config() const { return cfg_; }
    const BallTrack& track() const { return track_; }
    /// Rounded ball centre, if the ball is rendered with its centre inside the frame.
    std::optional<FullCoord> ball_label(int index) const;
    /// Labels keyed by frame number (first frame 0); masks are not listed.
    ClipAnnotation annotation(const std::string& name) const;

private:
    void check_index(int index) const;
    Ellipse human_at(int k, int index) const;

    SyntheticSceneConfig cfg_;
    std::uint64_t seed_;
    BallTrack track_;
};

SyntheticClip synthesize_clip(const SyntheticSceneConfig& cfg, std::uint64_t seed);

/// Writes frames/NNNNNN.ppm, masks/NNNNNN.pgm (bitmask at mask size) and the manifest.
void write_clip(const SyntheticClip& clip, const std::filesystem::path& dir, int mask_width,
                int mask_height);

}  // namespace ttnet
