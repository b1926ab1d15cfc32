#include "ttnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "ttnet/error.hpp"

namespace ttnet {

std::vector<Clip> open_clips(const AnnotationSet& set) {
    std::vector<Clip> clips;
    for (const auto& a : set.clips) {
        Clip c;
        c.annotation = a;
        c.frames = std::make_shared<ImageDirectorySource>(a.frame_files, a.width, a.height);
        if (!a.masks.empty()) {
            std::map<int, std::filesystem::path> by_index;
            for (const auto& [f, path] : a.masks) by_index[f - a.first_frame] = path;
            c.masks = std::make_shared<ImageMaskSource>(std::move(by_index));
        }
        clips.push_back(std::move(c));
    }
    return clips;
}

std::vector<Clip> synthetic_clips(const SceneOptions& options, int count, std::uint64_t seed) {
    std::vector<Clip> clips;
    for (int k = 0; k < count; ++k) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(k));
        const SyntheticSceneConfig cfg = random_scene(options, rng);
        auto clip = std::make_shared<SyntheticClip>(cfg, rng());
        Clip c;
        c.annotation = clip->annotation("synthetic_" + std::to_string(seed + static_cast<std::uint64_t>(k)));
        c.frames = std::make_shared<CachedFrameSource>(clip);
        c.masks = clip;
        clips.push_back(std::move(c));
    }
    return clips;
}

EventTarget event_target_at(const ClipAnnotation& clip, int middle_frame) {
    EventTarget out;
    for (const auto& [frame, label] : clip.events) {
        const auto type = event_type_of(label);
        if (!type) continue;
        const EventTarget t = build_event_target(middle_frame - frame, *type);
        out[*type] = std::max(out[*type], t[*type]);
    }
    return out;
}

SampleIndex build_sample_index(const std::vector<ClipAnnotation>& clips, double negatives_ratio,
                               std::uint64_t seed) {
    if (!(negatives_ratio >= 0)) throw std::invalid_argument("negatives ratio must be >= 0");
    SampleIndex index;
    std::vector<SampleEntry> explicit_negatives, candidates;
    for (std::size_t ci = 0; ci < clips.size(); ++ci) {
        const auto& a = clips[ci];
        const int clip = static_cast<int>(ci);
        std::vector<int> labelled;
        for (const auto& [frame, label] : a.events) {
            if (label == EventLabel::empty) continue;
            labelled.push_back(frame);
            const int start = frame - kEventClipAnchor;
            if (!a.has_frame(start) || !a.has_frame(start + kEventClipLength - 1)) {
                index.warnings.push_back(a.name + ": event at frame " + std::to_string(frame) +
                                         " has no complete 25-frame clip; skipped");
                continue;
            }
            for (int k = 0; k + kStackFrames <= kEventClipLength; ++k) {
                index.entries.push_back({clip, start + k, false, frame, k});
            }
        }
        auto far_from_events = [&](int middle) {
            return std::all_of(labelled.begin(), labelled.end(),
                               [&](int e) { return std::abs(middle - e) >= kNegativeMargin; });
        };
        std::set<int> explicit_starts;
        for (const auto& [frame, label] : a.events) {
            const int first = frame - kMiddleFrame;
            if (label == EventLabel::empty && a.has_frame(first) &&
                a.has_frame(first + kStackFrames - 1) && far_from_events(frame)) {
                explicit_negatives.push_back({clip, first, true});
                explicit_starts.insert(first);
            }
        }
        for (int first = a.first_frame; first + kStackFrames - 1 <= a.last_frame(); ++first) {
            if (far_from_events(first + kMiddleFrame) && !explicit_starts.count(first)) {
                candidates.push_back({clip, first, true});
            }
        }
    }
    index.positives = index.entries.size();

    const auto wanted = static_cast<std::size_t>(std::llround(negatives_ratio * index.positives));
    std::mt19937_64 rng(seed);
    std::shuffle(explicit_negatives.begin(), explicit_negatives.end(), rng);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::vector<SampleEntry> negatives;
    for (auto* pool : {&explicit_negatives, &candidates}) {
        for (const auto& e : *pool) {
            if (negatives.size() == wanted) break;
            negatives.push_back(e);
        }
    }
    if (negatives.size() < wanted) {
        index.warnings.push_back("only " + std::to_string(negatives.size()) +
                                 " negative windows available, " + std::to_string(wanted) + " requested");
    }
    std::sort(negatives.begin(), negatives.end(), [](const SampleEntry& x, const SampleEntry& y) {
        return std::tie(x.clip, x.first_frame) < std::tie(y.clip, y.first_frame);
    });
    index.negatives = negatives.size();
    index.entries.insert(index.entries.end(), negatives.begin(), negatives.end());
    return index;
}

SampleIndex build_sample_index(const AnnotationSet& set, double negatives_ratio, std::uint64_t seed) {
    return build_sample_index(set.clips, negatives_ratio, seed);
}

ClipWindow::ClipWindow(std::shared_ptr<const FrameSource> source, int first_index)
    : source_(std::move(source)), first_(first_index) {
    if (first_ < 0 || first_ + kStackFrames > source_->frame_count()) {
        throw std::out_of_range("frame window outside the clip");
    }
}

Image ClipWindow::downscaled(int k, int width, int height) const {
    return source_->downscaled(first_ + k, width, height);
}

Image ClipWindow::region(int k, const Rect& r) const { return source_->region(first_ + k, r); }

MaterializedStack::MaterializedStack(std::vector<Image> frames) : frames_(std::move(frames)) {
    if (frames_.size() != kStackFrames) throw std::invalid_argument("a frame stack holds 9 frames");
}

Image MaterializedStack::downscaled(int k, int width, int height) const {
    return resize_bilinear(frames_.at(static_cast<std::size_t>(k)), width, height);
}

Image MaterializedStack::region(int k, const Rect& r) const {
    return crop(frames_.at(static_cast<std::size_t>(k)), r);
}

torch::Tensor global_input(const FrameStack& stack, const ResolutionConfig& res) {
    std::vector<Image> frames;
    frames.reserve(kStackFrames);
    for (int k = 0; k < kStackFrames; ++k) frames.push_back(stack.downscaled(k, res.w1, res.h1));
    return assemble_input(frames);
}

torch::Tensor local_input(const FrameStack& stack, const CropWindow& crop) {
    std::vector<Image> frames;
    frames.reserve(kStackFrames);
    const Rect r{crop.x_origin, crop.y_origin, crop.width, crop.height};
    for (int k = 0; k < kStackFrames; ++k) frames.push_back(stack.region(k, r));
    return assemble_input(frames);
}

SampleDataset::SampleDataset(std::vector<Clip> clips, SampleIndex index, DatasetOptions options)
    : clips_(std::move(clips)), index_(std::move(index)), options_(std::move(options)) {
    options_.resolution.validate();
    const auto& r = options_.resolution;
    for (const auto& c : clips_) {
        if (c.frames->width() != r.w0 || c.frames->height() != r.h0) {
            throw ResolutionMismatchError(
                "clip " + c.annotation.name + " has " + std::to_string(c.frames->width()) + "x" +
                std::to_string(c.frames->height()) + " frames but the model expects " + r.describe());
        }
    }
    for (const auto& e : index_.entries) {
        if (e.clip < 0 || static_cast<std::size_t>(e.clip) >= clips_.size()) {
            throw std::invalid_argument("sample index refers to a missing clip");
        }
    }
}

TrainingSample SampleDataset::materialize(std::size_t i) const {
    const SampleEntry& e = index_.entries.at(i);
    const Clip& c = clips_[static_cast<std::size_t>(e.clip)];
    const int first = e.first_frame - c.annotation.first_frame;
    TrainingSample s;
    for (int k = 0; k < kStackFrames; ++k) s.frames.push_back(c.frames->frame(first + k));
    if (auto it = c.annotation.ball.find(e.last_frame()); it != c.annotation.ball.end()) s.ball = it->second;
    s.event = event_target_at(c.annotation, e.middle_frame());
    if (c.masks) s.seg = c.masks->masks(first + kStackFrames - 1, options_.resolution.w1, options_.resolution.h1);
    return s;
}

TrainingItem SampleDataset::item(std::size_t i, std::mt19937_64* rng) const {
    const SampleEntry& e = index_.entries.at(i);
    const Clip& c = clips_[static_cast<std::size_t>(e.clip)];
    TrainingItem item;
    item.id = describe(i);
    if (options_.augment && rng) {
        const AugmentationParams params = sample_augmentation(options_.ranges, *rng);
        TrainingSample s = augment(materialize(i), params);
        item.frames = std::make_shared<MaterializedStack>(std::move(s.frames));
        item.ball = s.ball;
        item.event = s.event;
        item.seg = std::move(s.seg);
        return item;
    }
    const int first = e.first_frame - c.annotation.first_frame;
    item.frames = std::make_shared<ClipWindow>(c.frames, first);
    if (auto it = c.annotation.ball.find(e.last_frame()); it != c.annotation.ball.end()) item.ball = it->second;
    item.event = event_target_at(c.annotation, e.middle_frame());
    if (c.masks) {
        item.seg = c.masks->masks(first + kStackFrames - 1, options_.resolution.w1, options_.resolution.h1);
    }
    return item;
}

std::string SampleDataset::describe(std::size_t i) const {
    const SampleEntry& e = index_.entries.at(i);
    return clips_[static_cast<std::size_t>(e.clip)].annotation.name + "@" +
           std::to_string(e.first_frame) + (e.negative ? "-neg" : "");
}

void SampleDataset::truncate(std::size_t n, std::uint64_t seed) {
    if (size() <= n) return;
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(n);
    std::sort(order.begin(), order.end());
    std::vector<SampleEntry> kept;
    kept.reserve(n);
    for (auto k : order) kept.push_back(index_.entries[k]);
    index_.entries = std::move(kept);
    index_.positives = static_cast<std::size_t>(std::count_if(
        index_.entries.begin(), index_.entries.end(), [](const SampleEntry& e) { return !e.negative; }));
    index_.negatives = index_.entries.size() - index_.positives;
}

SampleDataset make_synthetic_dataset(const SceneOptions& scene, std::size_t samples,
                                     std::uint64_t seed, const DatasetOptions& options,
                                     double negatives_ratio) {
    constexpr int kChunk = 8;
    std::vector<Clip> clips;
    std::vector<ClipAnnotation> annotations;
    SampleIndex index;
    while (index.entries.size() < samples) {
        for (auto& c : synthetic_clips(scene, kChunk, seed + clips.size())) {
            annotations.push_back(c.annotation);
            clips.push_back(std::move(c));
        }
        index = build_sample_index(annotations, negatives_ratio, seed);
        if (clips.size() > 100000) throw std::runtime_error("synthetic data yields no samples");
    }
    SampleDataset data(std::move(clips), std::move(index), options);
    data.truncate(samples, seed);
    return data;
}

}  // namespace ttnet
