#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "ttnet/dataset.hpp"
#include "ttnet/model.hpp"

namespace ttnet {

/// Per-stack latency on the reference hardware; printed for context only.
inline constexpr double kReferenceLatencyMs = 6.0;

/// Result for one 9-frame stack. frame is the stack's last frame; the event
/// probabilities belong to its middle frame, event_frame = frame - 4.
struct InferenceRecord {
    int frame = 0;
    int event_frame = 0;
    bool ball_present = false;
    std::optional<FullCoord> ball;
    double bounce = 0.0;
    double net = 0.0;
    bool bounce_flag = false;
    bool net_flag = false;
    std::optional<std::array<std::int64_t, kSegClasses>> mask_pixels;

    nlohmann::json to_json() const;
};

struct LatencyStats {
    std::size_t count = 0;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;

    /// Nearest-rank percentile; rejects an empty sample.
    static LatencyStats from(std::vector<double> samples_ms);
    nlohmann::json to_json() const;
};

struct InferenceOptions {
    bool masks = true;
    bool channels_last = true;
};

/// Runs the network on one stack at a time with the inference crop policy.
class InferenceEngine {
public:
    InferenceEngine(TTNet model, InferenceOptions options = {});

    InferenceRecord process(const FrameStack& stack, int last_frame);
    const ModelConfig& config() const { return model_->config(); }

private:
    TTNet model_;
    InferenceOptions options_;
};

/// Slides a stride-1 window over every frame of source: N - 8 records, in order.
/// first_frame is the frame number of source index 0. Latency covers input
/// assembly and the forward pass of each stack.
LatencyStats run_inference(InferenceEngine& engine, const FrameSource& source, int first_frame,
                           const std::function<void(const InferenceRecord&)>& sink);

/// Numbered frames of dir, or of dir/frames when present. Requires at least 9
/// contiguous frames; returns the source and the first frame number.
std::pair<std::shared_ptr<FrameSource>, int> open_frame_directory(const std::filesystem::path& dir);

}  // namespace ttnet
