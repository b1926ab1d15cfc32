#include "ttnet/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ttnet/targets.hpp"

namespace ttnet {
namespace nn = torch::nn;

namespace {

std::string shape_str(const torch::Tensor& t) {
    std::string s = "[";
    for (std::int64_t i = 0; i < t.dim(); ++i) {
        if (i) s += ", ";
        s += std::to_string(t.size(i));
    }
    return s + "]";
}

nn::Conv2d make_conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride,
                std::int64_t pad) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(pad));
}

}  // namespace

std::int64_t ModelConfig::width(std::int64_t base) const {
    const auto scaled = static_cast<std::int64_t>(std::ceil(base * multiplier / 4.0 - 1e-9)) * 4;
    return std::max<std::int64_t>(4, scaled);
}

void ModelConfig::validate() const {
    resolution.validate();
    if (!(multiplier > 0.0 && multiplier <= 1.0)) {
        throw std::invalid_argument("model: width multiplier must be in (0, 1]");
    }
    if (conv_dropout < 0.0 || conv_dropout >= 1.0 || fc_dropout < 0.0 || fc_dropout >= 1.0) {
        throw std::invalid_argument("model: dropout probabilities must be in [0, 1)");
    }
    const auto& r = resolution;
    if (r.w1 % 64 || r.h1 % 64 || r.w2 % 64 || r.h2 % 64) {
        throw std::invalid_argument("model: global and local sizes must be divisible by 64");
    }
    if (r.w1 / 64 != r.w2 / 64 || r.h1 / 64 != r.h2 / 64) {
        throw std::invalid_argument(
            "model: global and local encoders must produce equal feature grids");
    }
}

// ---------------------------------------------------------------------------

ConvBlockImpl::ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels, bool pool)
    : conv_(make_conv(in_channels, out_channels, 3, 1, 1)),
      bn_(nn::BatchNorm2dOptions(out_channels)),
      pool_(pool) {
    register_module("conv", conv_);
    register_module("bn", bn_);
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) {
    auto y = torch::relu(bn_->forward(conv_->forward(x)));
    return pool_ ? torch::max_pool2d(y, 2, 2) : y;
}

DeconvBlockImpl::DeconvBlockImpl(std::int64_t in_channels, std::int64_t out_channels) {
    if (in_channels % 4) throw std::invalid_argument("DeconvBlock: input channels not divisible by 4");
    const std::int64_t mid = in_channels / 4;
    reduce_ = register_module("reduce", make_conv(in_channels, mid, 1, 1, 0));
    bn1_ = register_module("bn1", nn::BatchNorm2d(mid));
    up_ = register_module("up", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(mid, mid, 3)
                                                        .stride(2)
                                                        .padding(1)
                                                        .output_padding(1)));
    bn2_ = register_module("bn2", nn::BatchNorm2d(mid));
    expand_ = register_module("expand", make_conv(mid, out_channels, 1, 1, 0));
    bn3_ = register_module("bn3", nn::BatchNorm2d(out_channels));
}

torch::Tensor DeconvBlockImpl::forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1_->forward(reduce_->forward(x)));
    y = torch::relu(bn2_->forward(up_->forward(y)));
    return torch::relu(bn3_->forward(expand_->forward(y)));
}

// ---------------------------------------------------------------------------

EncoderImpl::EncoderImpl(const ModelConfig& cfg)
    : c64_(cfg.width(64)), c128_(cfg.width(128)), c256_(cfg.width(256)) {
    stem_ = register_module("stem", make_conv(kInputChannels, c64_, 1, 1, 0));
    stem_bn_ = register_module("stem_bn", nn::BatchNorm2d(c64_));
    const std::array<std::pair<std::int64_t, std::int64_t>, 6> io = {
        {{c64_, c64_}, {c64_, c64_}, {c64_, c128_}, {c128_, c128_}, {c128_, c256_}, {c256_, c256_}}};
    for (std::size_t i = 0; i < io.size(); ++i) {
        blocks_[i] = register_module("block" + std::to_string(i + 1),
                                     ConvBlock(io[i].first, io[i].second));
    }
    drop_ = register_module("drop", nn::Dropout(cfg.conv_dropout));
}

EncoderOutput EncoderImpl::forward(const torch::Tensor& stack) {
    if (stack.dim() != 4 || stack.size(1) != kInputChannels) {
        throw std::invalid_argument("encoder: expected [B, 27, H, W], got " + shape_str(stack));
    }
    if (stack.size(2) % 64 || stack.size(3) % 64) {
        throw std::invalid_argument("encoder: spatial size " + shape_str(stack) +
                                    " not divisible by 64");
    }
    EncoderOutput out;
    auto x = torch::relu(stem_bn_->forward(stem_->forward(stack)));
    x = blocks_[0]->forward(x);
    out.skips[0] = x;
    x = drop_->forward(blocks_[1]->forward(x));
    out.skips[1] = x;
    x = blocks_[2]->forward(x);
    out.skips[2] = x;
    x = drop_->forward(blocks_[3]->forward(x));
    out.skips[3] = x;
    x = blocks_[4]->forward(x);
    out.skips[4] = x;
    out.features = drop_->forward(blocks_[5]->forward(x));
    return out;
}

std::vector<ConvLayerInfo> EncoderImpl::conv_layers(std::int64_t height, std::int64_t width) const {
    std::vector<ConvLayerInfo> layers;
    const auto& so = stem_->options;
    layers.push_back({"stem", so.kernel_size()->at(0), so.in_channels(), so.out_channels(), height,
                      width});
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& o = blocks_[i]->conv()->options;
        layers.push_back({"block" + std::to_string(i + 1), o.kernel_size()->at(0), o.in_channels(),
                          o.out_channels(), height, width});
        if (blocks_[i]->pools()) {
            height /= 2;
            width /= 2;
        }
    }
    return layers;
}

// ---------------------------------------------------------------------------

BallHeadImpl::BallHeadImpl(const ModelConfig& cfg, std::int64_t feature_size,
                           std::int64_t out_width, std::int64_t out_height)
    : feature_size_(feature_size) {
    const std::int64_t trunk = cfg.width(1792);
    trunk_ = register_module("trunk", nn::Linear(feature_size, trunk));
    x_hidden_ = register_module("x_hidden", nn::Linear(trunk, cfg.width(640)));
    x_out_ = register_module("x_out", nn::Linear(cfg.width(640), out_width));
    y_hidden_ = register_module("y_hidden", nn::Linear(trunk, cfg.width(256)));
    y_out_ = register_module("y_out", nn::Linear(cfg.width(256), out_height));
    drop_ = register_module("drop", nn::Dropout(cfg.fc_dropout));
}

BallPrediction BallHeadImpl::forward(const torch::Tensor& features) {
    auto flat = features.flatten(1);
    if (flat.size(1) != feature_size_) {
        throw std::invalid_argument("ball head: expected " + std::to_string(feature_size_) +
                                    " features, got " + shape_str(features));
    }
    auto t = drop_->forward(torch::relu(trunk_->forward(flat)));
    auto x = drop_->forward(torch::relu(x_hidden_->forward(t)));
    auto y = drop_->forward(torch::relu(y_hidden_->forward(t)));
    return {torch::sigmoid(x_out_->forward(x)), torch::sigmoid(y_out_->forward(y))};
}

// ---------------------------------------------------------------------------

EventHeadImpl::EventHeadImpl(const ModelConfig& cfg, std::int64_t feature_channels,
                             std::int64_t cells)
    : feature_channels_(feature_channels), cells_(cells) {
    const std::int64_t c64 = cfg.width(64);
    reduce_ = register_module("reduce", make_conv(2 * feature_channels, c64, 1, 1, 0));
    bn_ = register_module("bn", nn::BatchNorm2d(c64));
    block1_ = register_module("block1", ConvBlock(c64, c64, false));
    block2_ = register_module("block2", ConvBlock(c64, c64, false));
    fc1_ = register_module("fc1", nn::Linear(c64 * cells, cfg.width(512)));
    fc2_ = register_module("fc2", nn::Linear(cfg.width(512), 2));
    drop_ = register_module("drop", nn::Dropout(cfg.conv_dropout));
}

torch::Tensor EventHeadImpl::forward(const torch::Tensor& global_features,
                                     const torch::Tensor& local_features) {
    if (global_features.sizes() != local_features.sizes() || global_features.dim() != 4 ||
        global_features.size(1) != feature_channels_ ||
        global_features.size(2) * global_features.size(3) != cells_) {
        throw std::invalid_argument("event head: feature maps " + shape_str(global_features) +
                                    " and " + shape_str(local_features) + " do not match");
    }
    auto x = torch::cat({global_features, local_features}, 1);
    x = drop_->forward(torch::relu(bn_->forward(reduce_->forward(x))));
    x = drop_->forward(block1_->forward(x));
    x = drop_->forward(block2_->forward(x));
    x = torch::relu(fc1_->forward(x.flatten(1)));
    return torch::sigmoid(fc2_->forward(x));
}

// ---------------------------------------------------------------------------

DecoderImpl::DecoderImpl(const ModelConfig& cfg) {
    const std::int64_t c32 = cfg.width(32), c64 = cfg.width(64), c128 = cfg.width(128),
                       c256 = cfg.width(256);
    const std::array<std::pair<std::int64_t, std::int64_t>, 4> io = {
        {{c256, c128}, {c128, c128}, {c128, c64}, {c64, c64}}};
    for (std::size_t i = 0; i < io.size(); ++i) {
        blocks_[i] = register_module("block" + std::to_string(i + 1),
                                     DeconvBlock(io[i].first, io[i].second));
    }
    up_ = register_module("up", nn::ConvTranspose2d(
                                    nn::ConvTranspose2dOptions(c64, c32, 3).stride(2).padding(0)));
    // Stride 1 in the last two convolutions: only that reproduces 319x127 and 320x128.
    refine_ = register_module("refine", make_conv(c32, c32, 3, 1, 0));
    head_ = register_module("head", make_conv(c32, kSegClasses, 2, 1, 1));
}

torch::Tensor DecoderImpl::forward(const EncoderOutput& enc, std::vector<torch::Tensor>* trace) {
    auto record = [trace](const torch::Tensor& t) {
        if (trace) trace->push_back(t);
    };
    auto x = blocks_[0]->forward(enc.skips[4]);
    if (x.sizes() != enc.skips[3].sizes()) {
        throw std::invalid_argument("decoder: " + shape_str(x) + " cannot be added to skip " +
                                    shape_str(enc.skips[3]));
    }
    x = x + enc.skips[3];
    record(x);
    x = blocks_[1]->forward(x) + enc.skips[2];
    record(x);
    x = blocks_[2]->forward(x) + enc.skips[1];
    record(x);
    x = blocks_[3]->forward(x);
    record(x);
    x = torch::relu(up_->forward(x));
    record(x);
    x = torch::relu(refine_->forward(x));
    record(x);
    x = torch::sigmoid(head_->forward(x));
    record(x);
    return x;
}

// ---------------------------------------------------------------------------

TTNetImpl::TTNetImpl(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto& r = cfg_.resolution;
    const std::int64_t cells = (r.w1 / 64) * (r.h1 / 64);
    global_encoder_ = register_module("global_encoder", Encoder(cfg_));
    local_encoder_ = register_module("local_encoder", Encoder(cfg_));
    const std::int64_t c256 = global_encoder_->out_channels();
    global_ball_ = register_module("global_ball", BallHead(cfg_, c256 * cells, r.w1, r.h1));
    local_ball_ = register_module("local_ball", BallHead(cfg_, c256 * cells, r.w2, r.h2));
    events_ = register_module("events", EventHead(cfg_, c256, cells));
    decoder_ = register_module("decoder", Decoder(cfg_));
}

GlobalStage TTNetImpl::run_global(const torch::Tensor& global_input) {
    GlobalStage g;
    g.encoder = global_encoder_->forward(global_input);
    g.ball = global_ball_->forward(g.encoder.features);
    return g;
}

LocalStage TTNetImpl::run_local(const torch::Tensor& local_input) {
    LocalStage l;
    l.features = local_encoder_->forward(local_input).features;
    l.ball = local_ball_->forward(l.features);
    return l;
}

torch::Tensor TTNetImpl::spot_events(const torch::Tensor& global_features,
                                     const torch::Tensor& local_features) {
    return events_->forward(global_features, local_features);
}

torch::Tensor TTNetImpl::segment(const EncoderOutput& enc, std::vector<torch::Tensor>* trace) {
    return decoder_->forward(enc, trace);
}

TTNetOutput TTNetImpl::forward(const torch::Tensor& global_input, const LocalInputFn& make_local) {
    TTNetOutput out;
    auto g = run_global(global_input);
    torch::Tensor local_input;
    {
        // The crop position is a discrete choice; nothing flows back through it.
        torch::NoGradGuard no_grad;
        BallPrediction detached{g.ball.x.detach(), g.ball.y.detach()};
        local_input = make_local(detached, out.crops);
    }
    auto l = run_local(local_input);
    out.global_ball = g.ball;
    out.local_ball = l.ball;
    out.events = spot_events(g.encoder.features, l.features);
    out.segmentation = segment(g.encoder);
    return out;
}

void TTNetImpl::use_channels_last() {
    torch::NoGradGuard no_grad;
    for (auto& p : parameters()) {
        if (p.dim() == 4) p.set_data(p.data().contiguous(at::MemoryFormat::ChannelsLast));
    }
}

// ---------------------------------------------------------------------------

std::int64_t count_parameters(TTNetImpl& net, ParamScope scope) {
    const auto params = scope == ParamScope::encoder ? net.global_encoder()->parameters()
                                                     : net.parameters();
    std::int64_t n = 0;
    for (const auto& p : params) {
        if (p.requires_grad()) n += p.numel();
    }
    return n;
}

FlopEstimate count_encoder_flops(const ModelConfig& cfg, std::int64_t height, std::int64_t width) {
    Encoder enc(cfg);
    FlopEstimate est;
    for (const auto& layer : enc->conv_layers(height, width)) est.macs += layer.macs();
    return est;
}

std::int64_t argmax_low(const float* values, std::int64_t n) {
    std::int64_t best = 0;
    for (std::int64_t i = 1; i < n; ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

CropWindow predicted_crop(const BallPrediction& global, std::int64_t i, const ResolutionConfig& res) {
    const auto x = global.x[i].contiguous().to(torch::kFloat32);
    const auto y = global.y[i].contiguous().to(torch::kFloat32);
    const GlobalCoord g{static_cast<int>(argmax_low(x.data_ptr<float>(), x.numel())),
                        static_cast<int>(argmax_low(y.data_ptr<float>(), y.numel()))};
    return make_crop_window(scale_global_to_full(g, res), res);
}

}  // namespace ttnet
