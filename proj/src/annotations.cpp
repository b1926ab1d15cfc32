#include "ttnet/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ttnet/error.hpp"
#include "ttnet/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ttnet {
namespace {

bool is_image_extension(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext == ".ppm" || ext == ".png" || ext == ".pgm";
}

std::optional<int> parse_frame_number(const std::string& s) {
    if (s.empty() || s.size() > 9) return std::nullopt;
    if (!std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
        return std::nullopt;
    }
    return std::stoi(s);
}

class Reporter {
public:
    Reporter(const LoadOptions& options, std::vector<Diagnostic>& out)
        : options_(options), out_(out) {}

    void operator()(const fs::path& file, const std::string& message) {
        if (options_.fail_fast) throw AnnotationError(file.string() + ": " + message);
        out_.push_back({file, message});
    }

private:
    const LoadOptions& options_;
    std::vector<Diagnostic>& out_;
};

std::optional<ClipAnnotation> load_clip(const fs::path& dir, const LoadOptions& options,
                                        Reporter& report) {
    ClipAnnotation clip;
    clip.dir = dir;
    clip.name = dir.filename().string();
    const fs::path manifest = dir / kManifestName;

    const auto numbered = numbered_frames(dir / kFramesDir);
    if (numbered.empty()) {
        report(dir / kFramesDir, "no numbered frame images");
        return std::nullopt;
    }
    clip.first_frame = numbered.front().first;
    for (std::size_t i = 0; i < numbered.size(); ++i) {
        if (numbered[i].first != clip.first_frame + static_cast<int>(i)) {
            report(numbered[i].second, "missing frame " +
                                           std::to_string(clip.first_frame + static_cast<int>(i)) +
                                           "; clip truncated before the gap");
            break;
        }
        clip.frame_files.push_back(numbered[i].second);
    }
    clip.frame_count = static_cast<int>(clip.frame_files.size());
    const Image first = read_image(clip.frame_files.front());
    clip.width = first.width;
    clip.height = first.height;

    json body;
    try {
        std::ifstream in(manifest);
        if (!in) throw IoError("cannot open");
        body = json::parse(in);
    } catch (const std::exception& e) {
        report(manifest, std::string("malformed manifest: ") + e.what());
        return std::nullopt;
    }
    if (!body.is_object()) {
        report(manifest, "manifest must be a JSON object");
        return std::nullopt;
    }

    auto frame_key = [&](const std::string& section, const std::string& key) -> std::optional<int> {
        const auto n = parse_frame_number(key);
        if (!n) {
            report(manifest, section + ": '" + key + "' is not a frame number");
            return std::nullopt;
        }
        if (!clip.has_frame(*n)) {
            report(manifest, section + ": frame " + key + " has no image");
            return std::nullopt;
        }
        return n;
    };

    if (body.contains("events")) {
        for (const auto& [key, value] : body["events"].items()) {
            const auto f = frame_key("events", key);
            if (!f) continue;
            const auto label = value.is_string() ? parse_event_label(value.get<std::string>())
                                                 : std::nullopt;
            if (!label) {
                report(manifest, "events: frame " + key + " has an unknown label " + value.dump());
                continue;
            }
            clip.events[*f] = *label;
        }
    }
    if (body.contains("ball")) {
        for (const auto& [key, value] : body["ball"].items()) {
            const auto f = frame_key("ball", key);
            if (!f) continue;
            if (!value.is_array() || value.size() != 2 || !value[0].is_number() ||
                !value[1].is_number()) {
                report(manifest, "ball: frame " + key + " must map to [x, y]");
                continue;
            }
            const FullCoord p{static_cast<int>(std::lround(value[0].get<double>())),
                              static_cast<int>(std::lround(value[1].get<double>()))};
            if (p.x < 0 || p.x >= clip.width || p.y < 0 || p.y >= clip.height) {
                report(manifest, "ball: frame " + key + " coordinate (" + std::to_string(p.x) +
                                     ", " + std::to_string(p.y) + ") outside " +
                                     std::to_string(clip.width) + "x" +
                                     std::to_string(clip.height));
                continue;
            }
            clip.ball[*f] = p;
        }
    }
    if (body.contains("masks")) {
        for (const auto& [key, value] : body["masks"].items()) {
            const auto f = frame_key("masks", key);
            if (!f) continue;
            if (!value.is_string()) {
                report(manifest, "masks: frame " + key + " must map to a path");
                continue;
            }
            const fs::path path = dir / value.get<std::string>();
            if (!fs::is_regular_file(path)) {
                report(path, "mask file for frame " + key + " does not exist");
                continue;
            }
            if (options.mask_size) {
                const Image m = read_image(path);
                if (m.width != options.mask_size->first || m.height != options.mask_size->second) {
                    report(path, "mask is " + std::to_string(m.width) + "x" +
                                     std::to_string(m.height) + ", expected " +
                                     std::to_string(options.mask_size->first) + "x" +
                                     std::to_string(options.mask_size->second));
                    continue;
                }
            }
            clip.masks[*f] = path;
        }
    }
    return clip;
}

}  // namespace

std::optional<EventLabel> parse_event_label(const std::string& s) {
    if (s == "bounce") return EventLabel::bounce;
    if (s == "net") return EventLabel::net;
    if (s == "empty" || s == "empty_event") return EventLabel::empty;
    return std::nullopt;
}

std::string to_string(EventLabel label) {
    switch (label) {
        case EventLabel::bounce: return "bounce";
        case EventLabel::net: return "net";
        case EventLabel::empty: return "empty";
    }
    return "?";
}

std::optional<EventType> event_type_of(EventLabel label) {
    switch (label) {
        case EventLabel::bounce: return EventType::bounce;
        case EventLabel::net: return EventType::net;
        case EventLabel::empty: return std::nullopt;
    }
    return std::nullopt;
}

std::size_t ClipAnnotation::labelled_events() const {
    return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](const auto& e) {
        return e.second != EventLabel::empty;
    }));
}

std::size_t AnnotationSet::positive_anchors() const {
    std::size_t n = 0;
    for (const auto& c : clips) n += c.labelled_events();
    return n;
}

AnnotationSet load_annotations(const fs::path& root, const LoadOptions& options) {
    if (!fs::is_directory(root)) throw AnnotationError("dataset directory " + root.string() + " does not exist");
    AnnotationSet set;
    Reporter report(options, set.diagnostics);
    std::vector<fs::path> dirs;
    if (fs::is_regular_file(root / kManifestName)) {
        dirs.push_back(root);
    } else {
        for (const auto& e : fs::directory_iterator(root)) {
            if (e.is_directory() && fs::is_regular_file(e.path() / kManifestName)) {
                dirs.push_back(e.path());
            }
        }
        std::sort(dirs.begin(), dirs.end());
    }
    for (const auto& d : dirs) {
        if (auto clip = load_clip(d, options, report)) set.clips.push_back(std::move(*clip));
    }
    return set;
}

json manifest_json(const ClipAnnotation& clip) {
    json body = {{"events", json::object()}, {"ball", json::object()}, {"masks", json::object()}};
    for (const auto& [f, label] : clip.events) body["events"][std::to_string(f)] = to_string(label);
    for (const auto& [f, p] : clip.ball) body["ball"][std::to_string(f)] = {p.x, p.y};
    for (const auto& [f, path] : clip.masks) {
        const fs::path rel = path.is_absolute() ? path.lexically_relative(clip.dir) : path;
        body["masks"][std::to_string(f)] = rel.generic_string();
    }
    return body;
}

void write_manifest(const fs::path& clip_dir, const ClipAnnotation& clip) {
    fs::create_directories(clip_dir);
    std::ofstream out(clip_dir / kManifestName);
    if (!out) throw IoError("cannot write manifest in " + clip_dir.string());
    out << manifest_json(clip).dump(1) << '\n';
}

std::vector<std::pair<int, fs::path>> numbered_frames(const fs::path& dir) {
    std::vector<std::pair<int, fs::path>> numbered;
    if (!fs::is_directory(dir)) return numbered;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file() || !is_image_extension(e.path())) continue;
        if (auto n = parse_frame_number(e.path().stem().string())) numbered.emplace_back(*n, e.path());
    }
    std::sort(numbered.begin(), numbered.end());
    return numbered;
}

fs::path frame_file_name(int frame, const std::string& extension) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d", frame);
    return fs::path(kFramesDir) / (std::string(buf) + extension);
}

void convert_markup(const fs::path& markup_dir, const fs::path& frames_dir,
                    const std::optional<fs::path>& mask_dir, const fs::path& out_clip_dir) {
    auto read_json = [](const fs::path& p) -> json {
        std::ifstream in(p);
        if (!in) return json::object();
        try {
            return json::parse(in);
        } catch (const std::exception& e) {
            throw AnnotationError(p.string() + ": " + e.what());
        }
    };
    if (!fs::is_directory(frames_dir)) throw IoError("frames directory " + frames_dir.string() + " does not exist");
    fs::create_directories(out_clip_dir);
    ClipAnnotation clip;
    clip.dir = out_clip_dir;

    const fs::path frames_link = out_clip_dir / kFramesDir;
    if (!fs::exists(frames_link)) fs::create_directory_symlink(fs::absolute(frames_dir), frames_link);

    const json events = read_json(markup_dir / "events_markup.json");
    const json ball = read_json(markup_dir / "ball_markup.json");
    for (const auto& [key, value] : events.items()) {
        const auto f = parse_frame_number(key);
        const auto label = value.is_string() ? parse_event_label(value.get<std::string>()) : std::nullopt;
        if (f && label) clip.events[*f] = *label;
    }
    for (const auto& [key, value] : ball.items()) {
        const auto f = parse_frame_number(key);
        if (!f || !value.is_object() || !value.contains("x") || !value.contains("y")) continue;
        const int x = value["x"].get<int>();
        const int y = value["y"].get<int>();
        if (x < 0 || y < 0) continue;  // the published markup uses -1 for "no ball"
        clip.ball[*f] = {x, y};
    }
    if (mask_dir) {
        const fs::path masks_link = out_clip_dir / kMasksDir;
        if (!fs::exists(masks_link)) fs::create_directory_symlink(fs::absolute(*mask_dir), masks_link);
        for (const auto& e : fs::directory_iterator(*mask_dir)) {
            if (!e.is_regular_file() || !is_image_extension(e.path())) continue;
            if (auto f = parse_frame_number(e.path().stem().string())) {
                clip.masks[*f] = fs::path(kMasksDir) / e.path().filename();
            }
        }
    }
    write_manifest(out_clip_dir, clip);
}

}  // namespace ttnet
