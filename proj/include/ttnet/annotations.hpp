#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ttnet/geometry.hpp"
#include "ttnet/targets.hpp"

namespace ttnet {

inline constexpr const char* kManifestName = "annotations.json";
inline constexpr const char* kFramesDir = "frames";
inline constexpr const char* kMasksDir = "masks";

enum class EventLabel { bounce, net, empty };

std::optional<EventLabel> parse_event_label(const std::string& s);
std::string to_string(EventLabel label);
/// bounce/net map to an event type; empty has none.
std::optional<EventType> event_type_of(EventLabel label);

/// Labels of one clip keyed by frame number. Frame numbers are contiguous,
/// starting at first_frame; frame number f lives at source index f - first_frame.
struct ClipAnnotation {
    std::string name;
    std::filesystem::path dir;
    int first_frame = 0;
    int frame_count = 0;
    int width = 0;
    int height = 0;
    std::vector<std::filesystem::path> frame_files;
    std::map<int, EventLabel> events;
    std::map<int, FullCoord> ball;
    std::map<int, std::filesystem::path> masks;

    int last_frame() const { return first_frame + frame_count - 1; }
    bool has_frame(int f) const { return f >= first_frame && f <= last_frame(); }
    std::size_t labelled_events() const;
};

struct Diagnostic {
    std::filesystem::path file;
    std::string message;
};

struct AnnotationSet {
    std::vector<ClipAnnotation> clips;
    std::vector<Diagnostic> diagnostics;

    std::size_t positive_anchors() const;
};

struct LoadOptions {
    /// Throw AnnotationError on the first problem instead of skipping the entry.
    bool fail_fast = true;
    /// Expected mask size; masks of another size are reported.
    std::optional<std::pair<int, int>> mask_size;
};

/// Loads one clip directory (containing annotations.json) or every clip
/// directory directly below root, in lexicographic order.
AnnotationSet load_annotations(const std::filesystem::path& root, const LoadOptions& options = {});

/// Manifest body: {"events": {frame: label}, "ball": {frame: [x, y]}, "masks": {frame: path}}
/// with mask paths relative to the clip directory.
nlohmann::json manifest_json(const ClipAnnotation& clip);
void write_manifest(const std::filesystem::path& clip_dir, const ClipAnnotation& clip);

/// Zero-padded frame file name, e.g. frames/000042.ppm.
/// Image files of dir whose stem is a frame number, sorted by number.
std::vector<std::pair<int, std::filesystem::path>> numbered_frames(const std::filesystem::path& dir);

std::filesystem::path frame_file_name(int frame, const std::string& extension = ".ppm");

/// Builds a clip directory from published-dataset style markup files
/// (ball_markup.json with {"frame": {"x", "y"}}, events_markup.json with
/// {"frame": "bounce" | "net" | "empty_event"}) and a directory of
/// already-extracted frames. Masks are taken from mask_dir when given.
void convert_markup(const std::filesystem::path& markup_dir,
                    const std::filesystem::path& frames_dir,
                    const std::optional<std::filesystem::path>& mask_dir,
                    const std::filesystem::path& out_clip_dir);

}  // namespace ttnet
