#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ttnet/geometry.hpp"

namespace ttnet {

/// Architecture hyper-parameters. multiplier scales every internal channel and
/// fully-connected width (rounded up to a multiple of 4); 1.0 is the reference
/// network. Input channels (27) and output sizes are fixed.
struct ModelConfig {
    ResolutionConfig resolution;
    double multiplier = 1.0;
    double conv_dropout = 0.25;
    double fc_dropout = 0.5;

    std::int64_t width(std::int64_t base) const;
    void validate() const;
};

/// Encoder results. skips[k] is the output of ConvBlock k+1 (spatial size /2^(k+1));
/// features is the output of the last block (size /64).
struct EncoderOutput {
    torch::Tensor features;
    std::array<torch::Tensor, 5> skips;
};

/// Sigmoid outputs, x: [B, width], y: [B, height].
struct BallPrediction {
    torch::Tensor x;
    torch::Tensor y;
};

/// One convolution as seen by the FLOP counter.
struct ConvLayerInfo {
    std::string name;
    std::int64_t kernel = 0;
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t out_height = 0;
    std::int64_t out_width = 0;

    std::int64_t macs() const {
        return kernel * kernel * in_channels * out_channels * out_height * out_width;
    }
};

/// conv 3x3 (stride 1, pad 1) -> BN -> ReLU -> optional 2x2 max-pool.
class ConvBlockImpl : public torch::nn::Module {
public:
    ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels, bool pool = true);
    torch::Tensor forward(const torch::Tensor& x);

    const torch::nn::Conv2d& conv() const { return conv_; }
    bool pools() const { return pool_; }

private:
    torch::nn::Conv2d conv_{nullptr};
    torch::nn::BatchNorm2d bn_{nullptr};
    bool pool_;
};
TORCH_MODULE(ConvBlock);

/// 1x1 conv a->a/4, 3x3 transposed conv (stride 2, output padding 1), 1x1 conv a/4->b;
/// each followed by BN and ReLU. Doubles the spatial size.
class DeconvBlockImpl : public torch::nn::Module {
public:
    DeconvBlockImpl(std::int64_t in_channels, std::int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d reduce_{nullptr};
    torch::nn::BatchNorm2d bn1_{nullptr};
    torch::nn::ConvTranspose2d up_{nullptr};
    torch::nn::BatchNorm2d bn2_{nullptr};
    torch::nn::Conv2d expand_{nullptr};
    torch::nn::BatchNorm2d bn3_{nullptr};
};
TORCH_MODULE(DeconvBlock);

/// VGG-style feature extractor shared by the global and local detectors.
class EncoderImpl : public torch::nn::Module {
public:
    explicit EncoderImpl(const ModelConfig& cfg);
    EncoderOutput forward(const torch::Tensor& stack);

    /// Convolutions applied to a height x width input, in order.
    std::vector<ConvLayerInfo> conv_layers(std::int64_t height, std::int64_t width) const;
    std::int64_t out_channels() const { return c256_; }

private:
    std::int64_t c64_, c128_, c256_;
    torch::nn::Conv2d stem_{nullptr};
    torch::nn::BatchNorm2d stem_bn_{nullptr};
    std::array<ConvBlock, 6> blocks_{ConvBlock{nullptr}, ConvBlock{nullptr}, ConvBlock{nullptr},
                                     ConvBlock{nullptr}, ConvBlock{nullptr}, ConvBlock{nullptr}};
    torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(Encoder);

/// Fully connected "swallow-tail": shared trunk, then separate x and y branches.
class BallHeadImpl : public torch::nn::Module {
public:
    BallHeadImpl(const ModelConfig& cfg, std::int64_t feature_size, std::int64_t out_width,
                 std::int64_t out_height);
    BallPrediction forward(const torch::Tensor& features);

private:
    std::int64_t feature_size_;
    torch::nn::Linear trunk_{nullptr};
    torch::nn::Linear x_hidden_{nullptr};
    torch::nn::Linear x_out_{nullptr};
    torch::nn::Linear y_hidden_{nullptr};
    torch::nn::Linear y_out_{nullptr};
    torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(BallHead);

/// Bounce / net-hit probabilities from concatenated global and local features.
class EventHeadImpl : public torch::nn::Module {
public:
    EventHeadImpl(const ModelConfig& cfg, std::int64_t feature_channels, std::int64_t cells);
    torch::Tensor forward(const torch::Tensor& global_features, const torch::Tensor& local_features);

private:
    std::int64_t feature_channels_;
    std::int64_t cells_;
    torch::nn::Conv2d reduce_{nullptr};
    torch::nn::BatchNorm2d bn_{nullptr};
    ConvBlock block1_{nullptr};
    ConvBlock block2_{nullptr};
    torch::nn::Linear fc1_{nullptr};
    torch::nn::Linear fc2_{nullptr};
    torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(EventHead);

/// LinkNet-style decoder producing three independent sigmoid class maps.
class DecoderImpl : public torch::nn::Module {
public:
    explicit DecoderImpl(const ModelConfig& cfg);
    /// Consumes skips[4] and adds skips[3], skips[2], skips[1] on the way up.
    /// When trace is given, every intermediate activation is appended to it.
    torch::Tensor forward(const EncoderOutput& enc, std::vector<torch::Tensor>* trace = nullptr);

private:
    std::array<DeconvBlock, 4> blocks_{DeconvBlock{nullptr}, DeconvBlock{nullptr},
                                       DeconvBlock{nullptr}, DeconvBlock{nullptr}};
    torch::nn::ConvTranspose2d up_{nullptr};
    torch::nn::Conv2d refine_{nullptr};
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Decoder);

struct GlobalStage {
    EncoderOutput encoder;
    BallPrediction ball;
};

struct LocalStage {
    torch::Tensor features;
    BallPrediction ball;
};

struct TTNetOutput {
    BallPrediction global_ball;
    BallPrediction local_ball;
    torch::Tensor events;        ///< [B, 2] bounce, net
    torch::Tensor segmentation;  ///< [B, 3, h1, w1] human, table, scoreboard
    std::vector<CropWindow> crops;
};

/// Builds the local-stage input [B, 27, h2, w2] from the global predictions and
/// records the crop window used for each batch item.
using LocalInputFn =
    std::function<torch::Tensor(const BallPrediction& global, std::vector<CropWindow>& crops)>;

class TTNetImpl : public torch::nn::Module {
public:
    explicit TTNetImpl(const ModelConfig& cfg);

    GlobalStage run_global(const torch::Tensor& global_input);
    LocalStage run_local(const torch::Tensor& local_input);
    torch::Tensor spot_events(const torch::Tensor& global_features,
                              const torch::Tensor& local_features);
    torch::Tensor segment(const EncoderOutput& enc, std::vector<torch::Tensor>* trace = nullptr);

    /// Full pipeline: global stage, crop selection (no gradient), local stage,
    /// event spotting on both feature maps, segmentation from the global encoder.
    TTNetOutput forward(const torch::Tensor& global_input, const LocalInputFn& make_local);

    const ModelConfig& config() const { return cfg_; }
    Encoder& global_encoder() { return global_encoder_; }
    Encoder& local_encoder() { return local_encoder_; }
    const Encoder& global_encoder() const { return global_encoder_; }

    /// Moves 4-D weights to channels-last layout (faster CPU convolutions).
    void use_channels_last();

private:
    ModelConfig cfg_;
    Encoder global_encoder_{nullptr};
    Encoder local_encoder_{nullptr};
    BallHead global_ball_{nullptr};
    BallHead local_ball_{nullptr};
    EventHead events_{nullptr};
    Decoder decoder_{nullptr};
};
TORCH_MODULE(TTNet);

enum class ParamScope { encoder, full };

/// Number of trainable scalars.
std::int64_t count_parameters(TTNetImpl& net, ParamScope scope);

struct FlopEstimate {
    std::int64_t macs = 0;
    std::int64_t flops() const { return 2 * macs; }
};

/// Convolution multiply-accumulates of one encoder pass over a height x width input.
FlopEstimate count_encoder_flops(const ModelConfig& cfg, std::int64_t height, std::int64_t width);

/// Index of the largest element, ties towards the lower index.
std::int64_t argmax_low(const float* values, std::int64_t n);

/// Inference crop policy: window centred on the upscaled global argmax of item i.
CropWindow predicted_crop(const BallPrediction& global, std::int64_t i, const ResolutionConfig& res);

}  // namespace ttnet
