#include "ttnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ttnet/error.hpp"

namespace ttnet {
namespace {

constexpr double kContactEps = 1e-6;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform in [-1, 1), a pure function of (seed, frame, x, y).
double hash_noise(std::uint64_t seed, int frame, int x, int y) {
    std::uint64_t h = splitmix64(seed ^ (static_cast<std::uint64_t>(frame) * 0x100000001b3ULL));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32 |
                        static_cast<std::uint32_t>(y)));
    return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

bool boxes_overlap(const Box& a, const Box& b) {
    return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

Box bounding_box(const Ellipse& e, double sway) {
    return {e.cx - e.rx - sway, e.cy - e.ry, e.cx + e.rx + sway, e.cy + e.ry};
}

bool inside_frame(const Box& b, int w, int h) {
    return b.x0 >= 0 && b.y0 >= 0 && b.x1 <= w && b.y1 <= h;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

class Draw {
public:
    explicit Draw(std::mt19937_64& rng) : rng_(rng) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
    double sign() { return integer(0, 1) ? 1.0 : -1.0; }
    Rgb color(std::array<int, 6> ranges) {
        return {static_cast<std::uint8_t>(integer(ranges[0], ranges[1])),
                static_cast<std::uint8_t>(integer(ranges[2], ranges[3])),
                static_cast<std::uint8_t>(integer(ranges[4], ranges[5]))};
    }

private:
    std::mt19937_64& rng_;
};

bool visible_around(const BallTrack& tr, int w, int h, int from, int to) {
    for (int t = std::max(0, from); t <= std::min<int>(to, static_cast<int>(tr.centers.size()) - 1); ++t) {
        const auto& c = tr.centers[static_cast<std::size_t>(t)];
        if (!c || c->x < 0 || c->y < 0 || c->x >= w || c->y >= h) return false;
    }
    return true;
}

// Places the ball so that it reaches contact state (p_e, v_in) exactly at frame t_e.
void back_solve(SyntheticSceneConfig& cfg, int t_e, PointF p_e, PointF v_in) {
    const double t = t_e;
    cfg.ball_position = {p_e.x - v_in.x * t, p_e.y - v_in.y * t + 0.5 * cfg.gravity * t * t};
    cfg.ball_velocity = {v_in.x, v_in.y - cfg.gravity * t};
}

bool draw_ball(SyntheticSceneConfig& cfg, ClipKind kind, const SceneOptions& o, Draw& d) {
    const double sx = cfg.width / 1920.0;
    const double sy = cfg.height / 1080.0;
    const double r = cfg.ball_radius;
    const int first = std::clamp(o.event_frame_min, 0, cfg.clip_length - 1);
    // Keep the whole 25-frame event window inside the clip when the clip allows it.
    const int tail = kEventClipLength - 1 - kEventClipAnchor;
    const int last = std::clamp(o.event_frame_max, first, std::max(first, cfg.clip_length - 1 - tail));
    if (kind == ClipKind::no_ball) {
        cfg.ball_visible = false;
        return true;
    }
    cfg.ball_visible = true;
    if (kind == ClipKind::no_event) {
        cfg.ball_position = {d.uniform(0.1, 0.9) * cfg.width, d.uniform(0.05, 0.45) * cfg.height};
        cfg.ball_velocity = {d.uniform(-20, 20) * sx, d.uniform(-15, 5) * sy};
        const BallTrack tr = simulate_ball(cfg);
        int shown = 0;
        for (const auto& c : tr.centers) {
            shown += c && c->x >= 0 && c->y >= 0 && c->x < cfg.width && c->y < cfg.height;
        }
        return tr.events.empty() && shown >= 20;
    }
    const int t_e = d.integer(first, last);
    PointF p_e, v_in;
    EventLabel want;
    if (kind == ClipKind::bounce) {
        const double x = d.uniform(cfg.table.x0 + 2 * r, cfg.table.x1 - 2 * r);
        if (std::abs(x - cfg.net_x) < 3 * r) return false;
        p_e = {x, cfg.table.y0 - r};
        v_in = {d.sign() * d.uniform(6, 20) * sx, d.uniform(10, 24) * sy};
        want = EventLabel::bounce;
    } else {
        const double s = d.sign();
        const double face = cfg.net_x - s * cfg.net_half_width;
        p_e = {face - s * r, d.uniform(cfg.net_top(), cfg.table.y0 - r)};
        v_in = {s * d.uniform(8, 20) * sx, d.uniform(-8, 10) * sy};
        want = EventLabel::net;
    }
    back_solve(cfg, t_e, p_e, v_in);
    const BallTrack tr = simulate_ball(cfg);
    return !tr.events.empty() && tr.events.begin()->first == t_e &&
           tr.events.begin()->second == want &&
           visible_around(tr, cfg.width, cfg.height, t_e - 8, t_e + 4);
}

}  // namespace

void SyntheticSceneConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("synthetic scene: " + m); };
    if (width <= 0 || height <= 0 || global_width <= 0 || global_height <= 0) fail("frame sizes must be positive");
    if (clip_length < 1) fail("clip_length must be positive");
    if (table.width() <= 0 || table.height() <= 0) fail("table rectangle has zero size");
    if (!inside_frame(table, width, height)) fail("table outside the frame");
    if (net_x < table.x0 || net_x > table.x1) fail("net not over the table");
    if (net_height <= 0 || net_top() < 0 || net_half_width <= 0) fail("bad net geometry");
    if (scoreboard.width() <= 0 || scoreboard.height() <= 0) fail("scoreboard has zero size");
    if (!inside_frame(scoreboard, width, height)) fail("scoreboard outside the frame");
    for (const auto& h : humans) {
        if (h.rx <= 0 || h.ry <= 0) fail("human ellipse has zero size");
    }
    const double global_radius = ball_radius * std::min(static_cast<double>(global_width) / width,
                                                        static_cast<double>(global_height) / height);
    if (global_radius < 2.0) fail("ball radius below 2 px at global scale");
    if (gravity < 0 || restitution < 0 || restitution > 1 || net_restitution < 0 ||
        net_restitution > 1) {
        fail("gravity and restitution out of range");
    }
    if (noise < 0 || human_sway < 0) fail("negative noise or sway");
}

BallTrack simulate_ball(const SyntheticSceneConfig& cfg) {
    BallTrack tr;
    tr.centers.resize(static_cast<std::size_t>(cfg.clip_length));
    if (!cfg.ball_visible) return tr;
    const double r = cfg.ball_radius;
    const double g = cfg.gravity;
    int ts = 0;
    PointF ps = cfg.ball_position, vs = cfg.ball_velocity, prev = ps;
    tr.centers[0] = ps;
    for (int t = 1; t < cfg.clip_length; ++t) {
        const double dt = t - ts;
        PointF p{ps.x + vs.x * dt, ps.y + vs.y * dt + 0.5 * g * dt * dt};
        const PointF v{vs.x, vs.y + g * dt};
        const double s = v.x > 0 ? 1.0 : -1.0;
        const double face = cfg.net_x - s * cfg.net_half_width;
        const bool reaches_net = v.x != 0 && (prev.x + s * r - face) * s < -kContactEps &&
                                 (p.x + s * r - face) * s >= -kContactEps &&
                                 p.y + r >= cfg.net_top() && p.y <= cfg.table.y0;
        const bool reaches_table = v.y > 0 && prev.y + r < cfg.table.y0 - kContactEps &&
                                   p.y + r >= cfg.table.y0 - kContactEps &&
                                   p.x >= cfg.table.x0 && p.x <= cfg.table.x1;
        if (reaches_net) {
            p.x = face - s * r;
            tr.events[t] = EventLabel::net;
            ts = t;
            ps = p;
            vs = {-cfg.net_restitution * v.x, v.y};
        } else if (reaches_table) {
            p.y = cfg.table.y0 - r;
            tr.events[t] = EventLabel::bounce;
            ts = t;
            ps = p;
            vs = {v.x, -cfg.restitution * v.y};
        }
        tr.centers[static_cast<std::size_t>(t)] = p;
        prev = p;
    }
    return tr;
}

SyntheticSceneConfig random_scene(const SceneOptions& o, std::mt19937_64& rng) {
    Draw d(rng);
    const ClipKind kinds[] = {ClipKind::bounce, ClipKind::net, ClipKind::no_event, ClipKind::no_ball};
    const ClipKind kind =
        o.kind ? *o.kind : kinds[std::discrete_distribution<int>({40, 20, 25, 15})(rng)];
    const double W = o.width, H = o.height;
    const double sx = W / 1920.0;
    for (int scene = 0; scene < 50; ++scene) {
        SyntheticSceneConfig c;
        c.width = o.width;
        c.height = o.height;
        c.global_width = o.global_width;
        c.global_height = o.global_height;
        c.clip_length = o.clip_length;
        c.ball_radius = o.ball_radius > 0 ? o.ball_radius
                                          : std::max(18.0 * sx, 2.5 / std::min(o.global_width / W,
                                                                               o.global_height / H));
        c.gravity = 0.9 * H / 1080.0;

        const double tw = d.uniform(0.55, 0.66) * W;
        const double tx0 = (W - tw) / 2 + d.uniform(-0.03, 0.03) * W;
        const double ty0 = d.uniform(0.5, 0.6) * H;
        c.table = {tx0, ty0, tx0 + tw, ty0 + d.uniform(0.14, 0.2) * H};
        c.net_x = (c.table.x0 + c.table.x1) / 2;
        c.net_height = d.uniform(0.07, 0.1) * H;
        c.net_half_width = std::max(1.0, 3.0 * sx);

        const double bw = d.uniform(0.16, 0.24) * W, bh = d.uniform(0.08, 0.12) * H;
        const double bx = d.uniform(0.02 * W, W - bw - 0.02 * W), by = d.uniform(0.03, 0.12) * H;
        c.scoreboard = {bx, by, bx + bw, by + bh};

        c.human_sway = 6.0 * sx;
        bool ok = true;
        for (int k = 0; k < 2; ++k) {
            Ellipse e;
            e.rx = d.uniform(0.035, 0.05) * W;
            e.ry = d.uniform(0.2, 0.28) * H;
            e.cy = d.uniform(0.42, 0.58) * H;
            const double room = 4.0 * sx + c.human_sway + e.rx;
            const double lo = k == 0 ? 0.02 * W : c.table.x1 + room;
            const double hi = k == 0 ? c.table.x0 - room : 0.98 * W;
            if (hi <= lo) {
                ok = false;
                break;
            }
            e.cx = d.uniform(lo, hi);
            if (boxes_overlap(bounding_box(e, c.human_sway), c.scoreboard)) ok = false;
            c.humans[static_cast<std::size_t>(k)] = e;
        }
        if (!ok || boxes_overlap(c.scoreboard, c.table)) continue;

        c.background = d.color({35, 75, 70, 110, 45, 80});
        c.table_color = d.color({20, 45, 60, 100, 140, 190});
        c.human_color = d.color({180, 230, 100, 140, 70, 110});
        c.scoreboard_color = d.color({5, 20, 5, 20, 5, 20});
        const auto grey = static_cast<std::uint8_t>(d.integer(170, 200));
        c.net_color = {grey, grey, grey};
        c.noise = d.uniform(3, 8);
        c.validate();

        for (int attempt = 0; attempt < 400; ++attempt) {
            if (draw_ball(c, kind, o, d)) return c;
        }
    }
    throw std::runtime_error("random_scene: could not place a trajectory for the requested clip kind");
}

SyntheticClip::SyntheticClip(SyntheticSceneConfig cfg, std::uint64_t texture_seed)
    : cfg_(std::move(cfg)), seed_(texture_seed) {
    cfg_.validate();
    track_ = simulate_ball(cfg_);
}

void SyntheticClip::check_index(int index) const {
    if (index < 0 || index >= cfg_.clip_length) {
        throw std::out_of_range("synthetic frame " + std::to_string(index) + " out of range");
    }
}

Ellipse SyntheticClip::human_at(int k, int index) const {
    Ellipse e = cfg_.humans[static_cast<std::size_t>(k)];
    e.cx += cfg_.human_sway * std::sin(2.0 * std::numbers::pi * index / 40.0 + 1.7 * k);
    return e;
}

bool SyntheticClip::in_class(SegClass cls, int index, double x, double y) const {
    switch (cls) {
        case SegClass::human: return human_at(0, index).contains(x, y) || human_at(1, index).contains(x, y);
        case SegClass::table: return cfg_.table.contains(x, y);
        case SegClass::scoreboard: return cfg_.scoreboard.contains(x, y);
    }
    return false;
}

Rgb SyntheticClip::pixel(int index, int x, int y) const {
    const Rgb* base = &cfg_.background;
    if (in_class(SegClass::scoreboard, index, x, y)) base = &cfg_.scoreboard_color;
    if (in_class(SegClass::human, index, x, y)) base = &cfg_.human_color;
    if (in_class(SegClass::table, index, x, y)) base = &cfg_.table_color;
    if (std::abs(x - cfg_.net_x) <= cfg_.net_half_width && y >= cfg_.net_top() && y < cfg_.table.y0) {
        base = &cfg_.net_color;
    }
    const double shade = 20.0 * (static_cast<double>(y) / cfg_.height - 0.5);
    double v[3] = {(*base)[0] + shade, (*base)[1] + shade, (*base)[2] + shade};
    if (const auto& c = track_.centers[static_cast<std::size_t>(index)]) {
        const double dist = std::hypot(x - c->x, y - c->y);
        const double a = std::clamp(cfg_.ball_radius + 0.5 - dist, 0.0, 1.0);
        if (a > 0) {
            for (int k = 0; k < 3; ++k) v[k] = v[k] * (1 - a) + cfg_.ball_color[static_cast<std::size_t>(k)] * a;
        }
    }
    const double n = cfg_.noise * hash_noise(seed_, index, x, y);
    return {to_byte(v[0] + n), to_byte(v[1] + n), to_byte(v[2] + n)};
}

Image SyntheticClip::frame(int index) const {
    return region(index, {0, 0, cfg_.width, cfg_.height});
}

Image SyntheticClip::region(int index, const Rect& r) const {
    check_index(index);
    if (r.x < 0 || r.y < 0 || r.width <= 0 || r.height <= 0 || r.x + r.width > cfg_.width ||
        r.y + r.height > cfg_.height) {
        throw std::out_of_range("crop rectangle outside the image");
    }
    Image out(r.width, r.height, 3);
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            const Rgb p = pixel(index, r.x + x, r.y + y);
            std::copy(p.begin(), p.end(), &out.data[out.index(x, y)]);
        }
    }
    return out;
}

Image SyntheticClip::downscaled(int index, int width, int height) const {
    check_index(index);
    if (width <= 0 || height <= 0) throw std::invalid_argument("downscaled: empty target");
    if (width == cfg_.width && height == cfg_.height) return frame(index);
    // Same arithmetic as resize_bilinear, evaluated on the four taps only.
    Image out(width, height, 3);
    const double sx = static_cast<double>(cfg_.width) / width;
    const double sy = static_cast<double>(cfg_.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = y * sy;
        const int y0 = std::min(static_cast<int>(fy), cfg_.height - 1);
        const int y1 = std::min(y0 + 1, cfg_.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = x * sx;
            const int x0 = std::min(static_cast<int>(fx), cfg_.width - 1);
            const int x1 = std::min(x0 + 1, cfg_.width - 1);
            const double wx = fx - x0;
            const Rgb a = pixel(index, x0, y0), b = pixel(index, x1, y0);
            const Rgb c = pixel(index, x0, y1), e = pixel(index, x1, y1);
            for (int k = 0; k < 3; ++k) {
                const double top = a[k] * (1.0 - wx) + b[k] * wx;
                const double bottom = c[k] * (1.0 - wx) + e[k] * wx;
                out.at(x, y, k) = to_byte(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    return out;
}

std::optional<SegTarget> SyntheticClip::masks(int index, int width, int height) const {
    check_index(index);
    SegTarget seg;
    for (auto& m : seg.masks) m = Image(width, height, 1);
    // Sample points match resize_nearest of a full-resolution mask.
    for (int y = 0; y < height; ++y) {
        const int Y = std::min(static_cast<int>(std::lround(static_cast<double>(y) * cfg_.height / height)),
                               cfg_.height - 1);
        for (int x = 0; x < width; ++x) {
            const int X = std::min(
                static_cast<int>(std::lround(static_cast<double>(x) * cfg_.width / width)),
                cfg_.width - 1);
            for (int k = 0; k < kSegClasses; ++k) {
                seg.masks[static_cast<std::size_t>(k)].at(x, y) =
                    in_class(static_cast<SegClass>(k), index, X, Y) ? 1 : 0;
            }
        }
    }
    return seg;
}

std::optional<FullCoord> SyntheticClip::ball_label(int index) const {
    check_index(index);
    const auto& c = track_.centers[static_cast<std::size_t>(index)];
    if (!c) return std::nullopt;
    const FullCoord p{static_cast<int>(std::lround(c->x)), static_cast<int>(std::lround(c->y))};
    if (p.x < 0 || p.y < 0 || p.x >= cfg_.width || p.y >= cfg_.height) return std::nullopt;
    return p;
}

ClipAnnotation SyntheticClip::annotation(const std::string& name) const {
    ClipAnnotation a;
    a.name = name;
    a.first_frame = 0;
    a.frame_count = cfg_.clip_length;
    a.width = cfg_.width;
    a.height = cfg_.height;
    a.events = track_.events;
    for (int t = 0; t < cfg_.clip_length; ++t) {
        if (auto p = ball_label(t)) a.ball[t] = *p;
    }
    return a;
}

SyntheticClip synthesize_clip(const SyntheticSceneConfig& cfg, std::uint64_t seed) {
    return SyntheticClip(cfg, seed);
}

void write_clip(const SyntheticClip& clip, const std::filesystem::path& dir, int mask_width,
                int mask_height) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / kFramesDir, ec);
    fs::create_directories(dir / kMasksDir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    ClipAnnotation a = clip.annotation(dir.filename().string());
    a.dir = dir;
    for (int t = 0; t < clip.frame_count(); ++t) {
        write_image(dir / frame_file_name(t), clip.frame(t));
        const fs::path mask = fs::path(kMasksDir) / frame_file_name(t, ".pgm").filename();
        write_image(dir / mask, encode_mask_image(*clip.masks(t, mask_width, mask_height)));
        a.masks[t] = mask;
    }
    write_manifest(dir, a);
}

}  // namespace ttnet
