#include "ttnet/frame_source.hpp"

#include <stdexcept>
#include <string>

#include "ttnet/error.hpp"

namespace ttnet {

ImageDirectorySource::ImageDirectorySource(std::vector<std::filesystem::path> files, int width,
                                           int height, std::size_t cache_frames)
    : files_(std::move(files)), width_(width), height_(height),
      capacity_(std::max<std::size_t>(1, cache_frames)) {}

std::shared_ptr<const Image> ImageDirectorySource::load(int index) const {
    if (index < 0 || index >= frame_count()) {
        throw std::out_of_range("frame index " + std::to_string(index) + " out of range");
    }
    {
        std::lock_guard lock(mutex_);
        for (auto it = lru_.begin(); it != lru_.end(); ++it) {
            if (it->first == index) {
                lru_.splice(lru_.begin(), lru_, it);
                return it->second;
            }
        }
    }
    auto img = std::make_shared<const Image>(read_image(files_[static_cast<std::size_t>(index)]));
    if (img->width != width_ || img->height != height_ || img->channels != 3) {
        throw IoError("frame " + files_[static_cast<std::size_t>(index)].string() +
                      " is not a " + std::to_string(width_) + "x" + std::to_string(height_) +
                      " RGB image");
    }
    std::lock_guard lock(mutex_);
    lru_.emplace_front(index, img);
    if (lru_.size() > capacity_) lru_.pop_back();
    return img;
}

Image ImageDirectorySource::frame(int index) const { return *load(index); }

Image ImageDirectorySource::region(int index, const Rect& r) const { return crop(*load(index), r); }

Image ImageDirectorySource::downscaled(int index, int width, int height) const {
    const auto key = std::make_tuple(index, width, height);
    {
        std::lock_guard lock(mutex_);
        if (auto it = small_.find(key); it != small_.end()) return *it->second;
    }
    auto img = std::make_shared<const Image>(resize_bilinear(*load(index), width, height));
    std::lock_guard lock(mutex_);
    small_[key] = img;
    return *img;
}

CachedFrameSource::CachedFrameSource(std::shared_ptr<const FrameSource> inner)
    : inner_(std::move(inner)) {}

Image CachedFrameSource::downscaled(int index, int width, int height) const {
    const auto key = std::make_tuple(index, width, height);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return *it->second;
    }
    auto img = std::make_shared<const Image>(inner_->downscaled(index, width, height));
    std::lock_guard lock(mutex_);
    cache_[key] = img;
    return *img;
}

ImageMaskSource::ImageMaskSource(std::map<int, std::filesystem::path> files_by_index)
    : files_(std::move(files_by_index)) {}

std::optional<SegTarget> ImageMaskSource::masks(int index, int width, int height) const {
    const auto it = files_.find(index);
    if (it == files_.end()) return std::nullopt;
    SegTarget seg = decode_mask_image(read_image(it->second));
    for (auto& m : seg.masks) m = resize_nearest(m, width, height);
    return seg;
}

SegTarget decode_mask_image(const Image& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw IoError("mask images must have 1 or 3 channels");
    }
    SegTarget seg;
    for (auto& m : seg.masks) m = Image(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int k = 0; k < kSegClasses; ++k) {
                const bool on = img.channels == 1 ? ((img.at(x, y) >> k) & 1) != 0
                                                  : img.at(x, y, k) > 127;
                seg.masks[static_cast<std::size_t>(k)].at(x, y) = on ? 1 : 0;
            }
        }
    }
    return seg;
}

Image encode_mask_image(const SegTarget& seg) {
    const Image& ref = seg.masks[0];
    Image out(ref.width, ref.height, 1);
    for (int k = 0; k < kSegClasses; ++k) {
        const Image& m = seg.masks[static_cast<std::size_t>(k)];
        if (m.width != ref.width || m.height != ref.height) {
            throw std::invalid_argument("encode_mask_image: class masks differ in size");
        }
        for (std::size_t i = 0; i < m.data.size(); ++i) {
            if (m.data[i]) out.data[i] = static_cast<std::uint8_t>(out.data[i] | (1u << k));
        }
    }
    return out;
}

}  // namespace ttnet
