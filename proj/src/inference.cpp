#include "ttnet/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ttnet/annotations.hpp"
#include "ttnet/error.hpp"
#include "ttnet/metrics.hpp"

namespace ttnet {

nlohmann::json InferenceRecord::to_json() const {
    nlohmann::json j;
    j["frame"] = frame;
    j["event_frame"] = event_frame;
    j["ball_present"] = ball_present;
    j["ball"] = ball ? nlohmann::json::array({ball->x, ball->y}) : nlohmann::json(nullptr);
    j["bounce"] = bounce;
    j["net"] = net;
    j["bounce_flag"] = bounce_flag;
    j["net_flag"] = net_flag;
    if (mask_pixels) {
        j["mask_pixels"] = {{"human", (*mask_pixels)[0]},
                            {"table", (*mask_pixels)[1]},
                            {"scoreboard", (*mask_pixels)[2]}};
    }
    return j;
}

LatencyStats LatencyStats::from(std::vector<double> samples) {
    if (samples.empty()) throw std::invalid_argument("latency statistics need at least one sample");
    std::sort(samples.begin(), samples.end());
    LatencyStats s;
    s.count = samples.size();
    s.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(s.count);
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(s.count)));
    s.p95_ms = samples[std::max<std::size_t>(rank, 1) - 1];
    s.min_ms = samples.front();
    s.max_ms = samples.back();
    return s;
}

nlohmann::json LatencyStats::to_json() const {
    return {{"stacks", count},
            {"mean_ms", mean_ms},
            {"p95_ms", p95_ms},
            {"min_ms", min_ms},
            {"max_ms", max_ms},
            {"reference_ms", kReferenceLatencyMs}};
}

InferenceEngine::InferenceEngine(TTNet model, InferenceOptions options)
    : model_(std::move(model)), options_(options) {
    if (options_.channels_last) model_->use_channels_last();
    model_->eval();
}

InferenceRecord InferenceEngine::process(const FrameStack& stack, int last_frame) {
    const ResolutionConfig& res = model_->config().resolution;
    if (stack.width() != res.w0 || stack.height() != res.h0) {
        throw ResolutionMismatchError("frames are " + std::to_string(stack.width()) + "x" +
                                      std::to_string(stack.height()) + " but the model expects " +
                                      res.describe());
    }
    torch::NoGradGuard no_grad;
    auto layout = [&](torch::Tensor t) {
        return options_.channels_last ? t.contiguous(at::MemoryFormat::ChannelsLast) : t;
    };
    const LocalInputFn make_local = [&](const BallPrediction& g, std::vector<CropWindow>& crops) {
        crops = {predicted_crop(g, 0, res)};
        return layout(local_input(stack, crops[0]).unsqueeze(0));
    };
    const TTNetOutput out = model_->forward(layout(global_input(stack, res).unsqueeze(0)), make_local);

    InferenceRecord r;
    r.frame = last_frame;
    r.event_frame = last_frame - (kStackFrames - 1 - kMiddleFrame);
    const auto lx = out.local_ball.x[0].contiguous(), ly = out.local_ball.y[0].contiguous();
    const std::span<const float> vx(lx.data_ptr<float>(), static_cast<std::size_t>(lx.numel()));
    const std::span<const float> vy(ly.data_ptr<float>(), static_cast<std::size_t>(ly.numel()));
    r.ball_present = decide_presence(vx, vy);
    if (r.ball_present) {
        const PixelCoord c = predicted_center(vx, vy);
        r.ball = compose_coordinates(out.crops[0], LocalCoord{c.x, c.y});
    }
    const auto ev = out.events[0].to(torch::kFloat64);
    r.bounce = ev[0].item<double>();
    r.net = ev[1].item<double>();
    r.bounce_flag = r.bounce > kEventThreshold;
    r.net_flag = r.net > kEventThreshold;
    if (options_.masks) {
        const auto on = (out.segmentation[0] > 0.5).flatten(1).sum(1).to(torch::kInt64);
        std::array<std::int64_t, kSegClasses> counts{};
        for (int k = 0; k < kSegClasses; ++k) counts[static_cast<std::size_t>(k)] = on[k].item<std::int64_t>();
        r.mask_pixels = counts;
    }
    return r;
}

LatencyStats run_inference(InferenceEngine& engine, const FrameSource& source, int first_frame,
                           const std::function<void(const InferenceRecord&)>& sink) {
    const int n = source.frame_count();
    if (n < kStackFrames) {
        throw InputError("inference needs at least " + std::to_string(kStackFrames) + " frames, got " +
                         std::to_string(n));
    }
    auto shared = std::shared_ptr<const FrameSource>(&source, [](const FrameSource*) {});
    std::vector<double> latencies;
    latencies.reserve(static_cast<std::size_t>(n - kStackFrames + 1));
    for (int first = 0; first + kStackFrames <= n; ++first) {
        const ClipWindow stack(shared, first);
        const auto t0 = std::chrono::steady_clock::now();
        const InferenceRecord r = engine.process(stack, first_frame + first + kStackFrames - 1);
        latencies.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        sink(r);
    }
    return LatencyStats::from(std::move(latencies));
}

std::pair<std::shared_ptr<FrameSource>, int> open_frame_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("frames directory " + dir.string() + " does not exist");
    const auto root = std::filesystem::is_directory(dir / kFramesDir) ? dir / kFramesDir : dir;
    const auto numbered = numbered_frames(root);
    std::vector<std::filesystem::path> files;
    for (std::size_t i = 0; i < numbered.size(); ++i) {
        if (numbered[i].first != numbered.front().first + static_cast<int>(i)) {
            throw InputError("frame " + std::to_string(numbered.front().first + static_cast<int>(i)) +
                             " is missing in " + root.string());
        }
        files.push_back(numbered[i].second);
    }
    if (files.size() < static_cast<std::size_t>(kStackFrames)) {
        throw InputError("inference needs at least " + std::to_string(kStackFrames) + " frames, " +
                         root.string() + " holds " + std::to_string(files.size()));
    }
    const Image first = read_image(files.front());
    const int first_number = numbered.front().first;
    return {std::make_shared<ImageDirectorySource>(std::move(files), first.width, first.height), first_number};
}

}  // namespace ttnet
