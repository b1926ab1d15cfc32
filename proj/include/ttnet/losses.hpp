#pragma once

#include <torch/torch.h>

#include <array>
#include <string>

namespace ttnet {

/// Lower bound applied to every log argument.
inline constexpr double kLogClamp = 1e-12;
/// Dice smoothing term.
inline constexpr double kDiceEpsilon = 1e-4;

/// Scalar tensors, in the fixed order ball_global, ball_local, event, segmentation.
struct TaskLosses {
    torch::Tensor ball_global;
    torch::Tensor ball_local;
    torch::Tensor event;
    torch::Tensor segmentation;

    torch::Tensor stacked() const;
    std::array<double, 4> values() const;
};

inline constexpr std::array<const char*, 4> kTaskNames = {"ball_global", "ball_local", "event",
                                                          "segmentation"};

struct EventClassWeights {
    double bounce = 1.0;
    double net = 3.0;
};

/// Elementwise binary cross-entropy with both terms, logs clamped at kLogClamp.
torch::Tensor binary_cross_entropy(const torch::Tensor& pred, const torch::Tensor& target);

/// Mean BCE over the x vector plus mean BCE over the y vector, averaged over the batch.
/// Inputs are [B, W] / [B, H] (or unbatched [W] / [H]).
torch::Tensor ball_loss(const torch::Tensor& pred_x, const torch::Tensor& pred_y,
                        const torch::Tensor& target_x, const torch::Tensor& target_y);

/// (1/2) * sum over {bounce, net} of beta_i * BCE_i, averaged over the batch. [B, 2].
torch::Tensor event_loss(const torch::Tensor& pred, const torch::Tensor& target,
                         const EventClassWeights& w = {});

/// (2 * sum(P * T) + eps) / (sum(P) + sum(T) + eps), reduced over the last two dims.
torch::Tensor dice_smooth(const torch::Tensor& pred, const torch::Tensor& target);

/// Mean over classes of (1 - dice) + mean BCE; [B, C, H, W]. Samples whose
/// entry in `valid` ([B], 0/1) is zero are ignored; an all-invalid batch yields 0.
torch::Tensor segmentation_loss(const torch::Tensor& pred, const torch::Tensor& target,
                                const torch::Tensor& valid = {});

/// sum_i L_i * exp(-s_i) + s_i / 2 with s_i = log(sigma_i^2).
torch::Tensor multitask_loss(const torch::Tensor& losses, const torch::Tensor& log_vars);

enum class LossStrategyKind { unbalanced, manual, adaptive };

struct LossStrategy {
    LossStrategyKind kind = LossStrategyKind::adaptive;
    std::array<double, 4> manual_weights = {1.0, 1.0, 1.0, 1.0};

    static LossStrategy parse(const std::string& name);
    std::string name() const;
};

/// unbalanced: sum L_i; manual: sum w_i L_i; adaptive: multitask_loss(L, log_vars).
torch::Tensor aggregate_losses(const TaskLosses& losses, const LossStrategy& strategy,
                               const torch::Tensor& log_vars);

/// Effective weight applied to each task loss (1, w_i or exp(-s_i)).
std::array<double, 4> component_weights(const LossStrategy& strategy,
                                        const torch::Tensor& log_vars);

}  // namespace ttnet
