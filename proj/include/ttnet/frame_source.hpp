#pragma once

#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <tuple>
#include <vector>

#include "ttnet/image.hpp"
#include "ttnet/targets.hpp"

namespace ttnet {

/// Random access to the frames of one clip. Implementations may render or load
/// lazily; region() and downscaled() must agree with crop()/resize_bilinear()
/// applied to frame().
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual int frame_count() const = 0;
    virtual int width() const = 0;
    virtual int height() const = 0;
    virtual Image frame(int index) const = 0;
    virtual Image region(int index, const Rect& r) const { return crop(frame(index), r); }
    virtual Image downscaled(int index, int width, int height) const {
        return resize_bilinear(frame(index), width, height);
    }
};

/// Per-frame class masks, resampled to the requested size.
class MaskSource {
public:
    virtual ~MaskSource() = default;
    virtual std::optional<SegTarget> masks(int index, int width, int height) const = 0;
};

/// Frames stored as numbered image files. Keeps a small LRU cache of decoded
/// full frames and of downscaled frames.
class ImageDirectorySource final : public FrameSource {
public:
    ImageDirectorySource(std::vector<std::filesystem::path> files, int width, int height,
                         std::size_t cache_frames = 12);

    int frame_count() const override { return static_cast<int>(files_.size()); }
    int width() const override { return width_; }
    int height() const override { return height_; }
    Image frame(int index) const override;
    Image region(int index, const Rect& r) const override;
    Image downscaled(int index, int width, int height) const override;

private:
    std::shared_ptr<const Image> load(int index) const;

    std::vector<std::filesystem::path> files_;
    int width_;
    int height_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    mutable std::list<std::pair<int, std::shared_ptr<const Image>>> lru_;
    mutable std::map<std::tuple<int, int, int>, std::shared_ptr<const Image>> small_;
};

/// Keeps every downscaled frame it has produced; for small in-memory datasets
/// whose frames are expensive to resample.
class CachedFrameSource final : public FrameSource {
public:
    explicit CachedFrameSource(std::shared_ptr<const FrameSource> inner);

    int frame_count() const override { return inner_->frame_count(); }
    int width() const override { return inner_->width(); }
    int height() const override { return inner_->height(); }
    Image frame(int index) const override { return inner_->frame(index); }
    Image region(int index, const Rect& r) const override { return inner_->region(index, r); }
    Image downscaled(int index, int width, int height) const override;

private:
    std::shared_ptr<const FrameSource> inner_;
    mutable std::mutex mutex_;
    mutable std::map<std::tuple<int, int, int>, std::shared_ptr<const Image>> cache_;
};

/// Masks stored as image files: single channel with bit k set for class k, or
/// RGB with one channel per class (value > 127 means set).
class ImageMaskSource final : public MaskSource {
public:
    explicit ImageMaskSource(std::map<int, std::filesystem::path> files_by_index);
    std::optional<SegTarget> masks(int index, int width, int height) const override;

private:
    std::map<int, std::filesystem::path> files_;
};

/// Decodes a bitmask or per-channel mask image into binary class masks.
SegTarget decode_mask_image(const Image& img);
/// Packs class masks into a single-channel bitmask image.
Image encode_mask_image(const SegTarget& seg);

}  // namespace ttnet
