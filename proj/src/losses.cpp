#include "ttnet/losses.hpp"

#include <stdexcept>

#include "ttnet/error.hpp"

namespace ttnet {

torch::Tensor TaskLosses::stacked() const {
    return torch::stack({ball_global, ball_local, event, segmentation});
}

std::array<double, 4> TaskLosses::values() const {
    return {ball_global.item<double>(), ball_local.item<double>(), event.item<double>(),
            segmentation.item<double>()};
}

torch::Tensor binary_cross_entropy(const torch::Tensor& pred, const torch::Tensor& target) {
    if (pred.sizes() != target.sizes()) {
        throw std::invalid_argument("binary_cross_entropy: shape mismatch");
    }
    const auto log_p = torch::log(torch::clamp_min(pred, kLogClamp));
    const auto log_q = torch::log(torch::clamp_min(1.0 - pred, kLogClamp));
    return -(target * log_p + (1.0 - target) * log_q);
}

torch::Tensor ball_loss(const torch::Tensor& pred_x, const torch::Tensor& pred_y,
                        const torch::Tensor& target_x, const torch::Tensor& target_y) {
    if (pred_x.sizes() != target_x.sizes() || pred_y.sizes() != target_y.sizes()) {
        throw std::invalid_argument("ball_loss: prediction and target lengths differ");
    }
    const auto lx = ttnet::binary_cross_entropy(pred_x, target_x).mean(-1);
    const auto ly = ttnet::binary_cross_entropy(pred_y, target_y).mean(-1);
    return (lx + ly).mean();
}

torch::Tensor event_loss(const torch::Tensor& pred, const torch::Tensor& target,
                         const EventClassWeights& w) {
    if (pred.sizes() != target.sizes() || pred.size(-1) != 2) {
        throw std::invalid_argument("event_loss: expected matching [..., 2] tensors");
    }
    const auto beta = torch::tensor({w.bounce, w.net}, pred.options());
    return (ttnet::binary_cross_entropy(pred, target) * beta).sum(-1).mean() / 2.0;
}

torch::Tensor dice_smooth(const torch::Tensor& pred, const torch::Tensor& target) {
    if (pred.sizes() != target.sizes() || pred.dim() < 2) {
        throw std::invalid_argument("dice_smooth: shape mismatch");
    }
    const auto inter = (pred * target).sum({-2, -1});
    const auto total = pred.sum({-2, -1}) + target.sum({-2, -1});
    return (2.0 * inter + kDiceEpsilon) / (total + kDiceEpsilon);
}

torch::Tensor segmentation_loss(const torch::Tensor& pred, const torch::Tensor& target,
                                const torch::Tensor& valid) {
    if (pred.sizes() != target.sizes() || pred.dim() != 4) {
        throw std::invalid_argument("segmentation_loss: expected matching [B, C, H, W] tensors");
    }
    const auto dice_term = 1.0 - dice_smooth(pred, target);                // [B, C]
    const auto bce_term = ttnet::binary_cross_entropy(pred, target).mean({-2, -1});  // [B, C]
    const auto per_sample = (dice_term + bce_term).mean(-1);                // [B]
    if (!valid.defined()) return per_sample.mean();
    const auto mask = valid.to(per_sample.dtype());
    const auto count = mask.sum();
    return (per_sample * mask).sum() / torch::clamp_min(count, 1.0);
}

torch::Tensor multitask_loss(const torch::Tensor& losses, const torch::Tensor& log_vars) {
    if (losses.sizes() != log_vars.sizes()) {
        throw std::invalid_argument("multitask_loss: losses and log-variances differ in size");
    }
    return (losses * torch::exp(-log_vars) + 0.5 * log_vars).sum();
}

LossStrategy LossStrategy::parse(const std::string& name) {
    LossStrategy s;
    if (name == "unbalanced") {
        s.kind = LossStrategyKind::unbalanced;
    } else if (name == "manual") {
        s.kind = LossStrategyKind::manual;
    } else if (name == "adaptive") {
        s.kind = LossStrategyKind::adaptive;
    } else {
        throw ConfigError("unknown loss strategy '" + name +
                          "' (expected unbalanced, manual or adaptive)");
    }
    return s;
}

std::string LossStrategy::name() const {
    switch (kind) {
        case LossStrategyKind::unbalanced: return "unbalanced";
        case LossStrategyKind::manual: return "manual";
        case LossStrategyKind::adaptive: return "adaptive";
    }
    return "?";
}

torch::Tensor aggregate_losses(const TaskLosses& losses, const LossStrategy& strategy,
                               const torch::Tensor& log_vars) {
    const auto l = losses.stacked();
    switch (strategy.kind) {
        case LossStrategyKind::unbalanced:
            return l.sum();
        case LossStrategyKind::manual: {
            for (double w : strategy.manual_weights) {
                if (!(w > 0.0)) throw std::invalid_argument("manual loss weights must be positive");
            }
            const std::vector<double> w(strategy.manual_weights.begin(),
                                        strategy.manual_weights.end());
            return (l * torch::tensor(w, l.options())).sum();
        }
        case LossStrategyKind::adaptive:
            return multitask_loss(l, log_vars.to(l.dtype()));
    }
    throw std::logic_error("unreachable loss strategy");
}

std::array<double, 4> component_weights(const LossStrategy& strategy,
                                        const torch::Tensor& log_vars) {
    switch (strategy.kind) {
        case LossStrategyKind::unbalanced: return {1.0, 1.0, 1.0, 1.0};
        case LossStrategyKind::manual: return strategy.manual_weights;
        case LossStrategyKind::adaptive: {
            const auto w = torch::exp(-log_vars.detach()).to(torch::kDouble).contiguous();
            const double* p = w.data_ptr<double>();
            return {p[0], p[1], p[2], p[3]};
        }
    }
    return {};
}

}  // namespace ttnet
