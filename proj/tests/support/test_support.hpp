#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ttnet/geometry.hpp"
#include "ttnet/synthetic.hpp"
#include "ttnet/training.hpp"

namespace ttnet::testing {

/// Unique directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "ttnet") {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Small frames that keep every network stage valid.
inline ResolutionConfig tiny_resolution() { return {256, 128, 128, 64, 128, 64}; }

inline SceneOptions tiny_scene(int clip_length = 40) {
    const auto r = tiny_resolution();
    SceneOptions s;
    s.width = r.w0;
    s.height = r.h0;
    s.global_width = r.w1;
    s.global_height = r.h1;
    s.clip_length = clip_length;
    return s;
}

inline TrainConfig tiny_config() {
    TrainConfig c;
    c.resolution = tiny_resolution();
    c.multiplier = 0.25;
    c.batch_size = 4;
    c.max_epochs = 2;
    c.synthetic_train_samples = 12;
    c.synthetic_val_samples = 8;
    c.out_dir = "";
    return c;
}

}  // namespace ttnet::testing
