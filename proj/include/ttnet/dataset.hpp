#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ttnet/annotations.hpp"
#include "ttnet/augment.hpp"
#include "ttnet/frame_source.hpp"
#include "ttnet/geometry.hpp"
#include "ttnet/synthetic.hpp"
#include "ttnet/targets.hpp"

namespace ttnet {

/// Labels plus pixel access for one clip. Source index i holds frame number
/// annotation.first_frame + i.
struct Clip {
    ClipAnnotation annotation;
    std::shared_ptr<const FrameSource> frames;
    std::shared_ptr<const MaskSource> masks;  ///< may be null
};

std::vector<Clip> open_clips(const AnnotationSet& set);

/// In-memory synthetic clips; clip k is drawn from seed + k.
std::vector<Clip> synthetic_clips(const SceneOptions& options, int count, std::uint64_t seed);

/// One 9-frame training window. Positive windows come from the 25-frame clip
/// around a labelled event (offset 0..16); negatives sit away from every event.
struct SampleEntry {
    int clip = 0;
    int first_frame = 0;  ///< frame number of the first stacked frame
    bool negative = false;
    int anchor = -1;  ///< labelled event frame for positives
    int offset = 0;   ///< window start inside the 25-frame clip for positives

    int middle_frame() const { return first_frame + kMiddleFrame; }
    int last_frame() const { return first_frame + kStackFrames - 1; }
};

struct SampleIndex {
    std::vector<SampleEntry> entries;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::vector<std::string> warnings;
};

/// Negatives keep their middle frame at least this far from any bounce/net label.
inline constexpr int kNegativeMargin = 13;

/// Positives: all 17 windows of every labelled event whose 25-frame clip fits.
/// Negatives: round(ratio * positives) windows drawn without replacement, windows
/// centred on "empty" labels first, then uniformly from the remaining candidates.
SampleIndex build_sample_index(const std::vector<ClipAnnotation>& clips, double negatives_ratio,
                               std::uint64_t seed);
SampleIndex build_sample_index(const AnnotationSet& set, double negatives_ratio, std::uint64_t seed);

/// Per-type maximum of the smooth target over every labelled event of the clip.
EventTarget event_target_at(const ClipAnnotation& clip, int middle_frame);

/// Nine frames addressed by stack position 0..8.
class FrameStack {
public:
    virtual ~FrameStack() = default;
    virtual int width() const = 0;
    virtual int height() const = 0;
    virtual Image downscaled(int k, int width, int height) const = 0;
    virtual Image region(int k, const Rect& r) const = 0;
};

/// Lazy view of consecutive source frames.
class ClipWindow final : public FrameStack {
public:
    ClipWindow(std::shared_ptr<const FrameSource> source, int first_index);
    int width() const override { return source_->width(); }
    int height() const override { return source_->height(); }
    Image downscaled(int k, int width, int height) const override;
    Image region(int k, const Rect& r) const override;

private:
    std::shared_ptr<const FrameSource> source_;
    int first_;
};

/// Stack of decoded full frames, e.g. after augmentation.
class MaterializedStack final : public FrameStack {
public:
    explicit MaterializedStack(std::vector<Image> frames);
    int width() const override { return frames_.front().width; }
    int height() const override { return frames_.front().height; }
    Image downscaled(int k, int width, int height) const override;
    Image region(int k, const Rect& r) const override;

private:
    std::vector<Image> frames_;
};

/// Network-ready sample: ball and masks refer to the last stacked frame,
/// the event target to the middle one.
struct TrainingItem {
    std::shared_ptr<const FrameStack> frames;
    std::optional<FullCoord> ball;
    EventTarget event;
    std::optional<SegTarget> seg;  ///< masks at the global resolution
    std::string id;
};

/// [27, h, w] global-stage input.
torch::Tensor global_input(const FrameStack& stack, const ResolutionConfig& res);
/// [27, crop.height, crop.width] local-stage input cut from the full frames.
torch::Tensor local_input(const FrameStack& stack, const CropWindow& crop);

struct DatasetOptions {
    ResolutionConfig resolution;
    bool augment = false;
    AugmentationRanges ranges;
};

class SampleDataset {
public:
    SampleDataset(std::vector<Clip> clips, SampleIndex index, DatasetOptions options);

    std::size_t size() const { return index_.entries.size(); }
    const SampleIndex& index() const { return index_; }
    const std::vector<Clip>& clips() const { return clips_; }
    const DatasetOptions& options() const { return options_; }

    /// Builds item i. With augmentation enabled one parameter draw is taken from rng.
    TrainingItem item(std::size_t i, std::mt19937_64* rng = nullptr) const;
    /// Full-resolution sample for item i (frames decoded), before augmentation.
    TrainingSample materialize(std::size_t i) const;
    std::string describe(std::size_t i) const;

    /// Keeps a seeded random subset of at most n entries (in index order).
    void truncate(std::size_t n, std::uint64_t seed);

private:
    std::vector<Clip> clips_;
    SampleIndex index_;
    DatasetOptions options_;
};

/// Draws synthetic clips (seeds seed, seed + 1, ...) until the sample index
/// holds at least `samples` windows, then keeps a seeded subset of that size.
SampleDataset make_synthetic_dataset(const SceneOptions& scene, std::size_t samples,
                                     std::uint64_t seed, const DatasetOptions& options,
                                     double negatives_ratio = 1.0);

}  // namespace ttnet
