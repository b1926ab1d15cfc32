#include <gtest/gtest.h>

#include <cmath>

#include "ttnet/error.hpp"
#include "ttnet/losses.hpp"

using namespace ttnet;

namespace {

const double kLn2 = std::log(2.0);

torch::Tensor vec(std::initializer_list<double> v) {
    return torch::tensor(std::vector<double>(v), torch::kFloat64);
}

double value(const torch::Tensor& t) { return t.item<double>(); }

}  // namespace

TEST(BinaryCrossEntropy, ZeroAtExactMatch) {
    const auto p = vec({0.0, 1.0, 1.0, 0.0});
    EXPECT_NEAR(value(ttnet::binary_cross_entropy(p, p).sum()), 0.0, 1e-9);
}

TEST(BinaryCrossEntropy, ClampedLogStaysFinite) {
    const auto loss = ttnet::binary_cross_entropy(vec({0.0, 1.0}), vec({1.0, 0.0}));
    EXPECT_TRUE((torch::isfinite(loss).all().item<bool>()));
    EXPECT_NEAR(value(loss[0]), -std::log(kLogClamp), 1e-6);
}

TEST(BallLoss, SingleHalfEntry) {
    auto px = torch::zeros({320}, torch::kFloat64), tx = torch::zeros({320}, torch::kFloat64);
    px[17] = 0.5;
    tx[17] = 1.0;
    const auto py = torch::zeros({128}, torch::kFloat64), ty = torch::zeros({128}, torch::kFloat64);
    EXPECT_NEAR(value(ball_loss(px, py, tx, ty)), kLn2 / 320.0, 1e-9);
}

TEST(BallLoss, UniformHalfAgainstZeroTarget) {
    const auto px = torch::full({2, 320}, 0.5, torch::kFloat64);
    const auto py = torch::full({2, 128}, 0.5, torch::kFloat64);
    EXPECT_NEAR(value(ball_loss(px, py, torch::zeros_like(px), torch::zeros_like(py))), 2 * kLn2, 1e-9);
}

TEST(EventLoss, ClosedFormAndClassWeights) {
    const auto half = torch::full({1, 2}, 0.5, torch::kFloat64);
    const auto zero = torch::zeros({1, 2}, torch::kFloat64);
    EXPECT_NEAR(value(event_loss(half, zero)), 2 * kLn2, 1e-9);

    const auto bounce_wrong = torch::tensor({{0.7, 0.0}}, torch::kFloat64);
    const auto net_wrong = torch::tensor({{0.0, 0.7}}, torch::kFloat64);
    EXPECT_NEAR(value(event_loss(net_wrong, zero)), 3.0 * value(event_loss(bounce_wrong, zero)), 1e-9);

    const auto a = event_loss(half, zero, {2.0, 3.0});
    const auto b = event_loss(half, zero, {4.0, 3.0});
    EXPECT_NEAR(value(b) - value(a), 0.5 * 2.0 * kLn2, 1e-9);
}

TEST(EventLoss, VanishesAsPredictionApproachesTarget) {
    const auto target = torch::tensor({{1.0, 0.0}}, torch::kFloat64);
    double prev = 1e9;
    for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
        const double l = value(event_loss(torch::tensor({{1.0 - eps, eps}}, torch::kFloat64), target));
        EXPECT_LT(l, prev);
        prev = l;
    }
    EXPECT_LT(prev, 1e-7);
}

TEST(DiceSmooth, ClosedForms) {
    auto p = torch::zeros({8, 8}, torch::kFloat64), q = torch::zeros({8, 8}, torch::kFloat64);
    EXPECT_NEAR(value(dice_smooth(p, q)), 1.0, 1e-12);
    p.slice(0, 0, 2).slice(1, 0, 5).fill_(1.0);
    EXPECT_NEAR(value(dice_smooth(p, p)), 1.0, 1e-12);
    q.slice(0, 4, 6).slice(1, 0, 5).fill_(1.0);
    EXPECT_NEAR(value(dice_smooth(p, q)), kDiceEpsilon / (20.0 + kDiceEpsilon), 1e-15);
    EXPECT_NEAR(value(dice_smooth(p, q)), 5e-6, 1e-7);
}

TEST(DiceSmooth, SymmetricForBinaryMaps) {
    torch::manual_seed(5);
    const auto a = (torch::rand({16, 16}, torch::kFloat64) > 0.5).to(torch::kFloat64);
    const auto b = (torch::rand({16, 16}, torch::kFloat64) > 0.3).to(torch::kFloat64);
    EXPECT_DOUBLE_EQ(value(dice_smooth(a, b)), value(dice_smooth(b, a)));
}

TEST(SegmentationLoss, ExactMatchAndUniformPrediction) {
    auto t = torch::zeros({1, 3, 8, 16}, torch::kFloat64);
    t.slice(2, 2, 5).fill_(1.0);
    EXPECT_NEAR(value(segmentation_loss(t, t)), 0.0, 1e-6);

    const double n = 8 * 16;
    const auto half = torch::full({1, 3, 8, 16}, 0.5, torch::kFloat64);
    const double dice_term = 1.0 - kDiceEpsilon / (n / 2 + kDiceEpsilon);
    EXPECT_NEAR(value(segmentation_loss(half, torch::zeros_like(half))), dice_term + kLn2, 1e-9);
}

TEST(SegmentationLoss, PositiveInsideOpenIntervalAndMasked) {
    torch::manual_seed(2);
    const auto pred = torch::rand({2, 3, 4, 4}, torch::kFloat64) * 0.98 + 0.01;
    const auto target = (torch::rand({2, 3, 4, 4}, torch::kFloat64) > 0.5).to(torch::kFloat64);
    EXPECT_GT(value(segmentation_loss(pred, target)), 0.0);

    const auto only_first = segmentation_loss(pred, target, torch::tensor({1.0, 0.0}, torch::kFloat64));
    EXPECT_NEAR(value(only_first), value(segmentation_loss(pred.slice(0, 0, 1), target.slice(0, 0, 1))), 1e-12);
    EXPECT_EQ(value(segmentation_loss(pred, target, torch::zeros({2}, torch::kFloat64))), 0.0);
}

TEST(MultitaskLoss, ReducesToSumAtZero) {
    const auto l = vec({0.5, 1.0, 2.0, 0.25});
    EXPECT_NEAR(value(multitask_loss(l, torch::zeros({4}, torch::kFloat64))), 3.75, 1e-12);
    EXPECT_NEAR(value(multitask_loss(vec({0.5}), vec({0.0}))), 0.5, 1e-12);
}

TEST(MultitaskLoss, StationaryPointByFiniteDifferences) {
    const std::vector<double> ls = {0.3, 1.7, 0.05, 4.0};
    const double h = 1e-5;
    for (double li : ls) {
        const double s_star = std::log(2.0 * li);
        auto f = [&](double s) { return value(multitask_loss(vec({li}), vec({s}))); };
        const double slope = (f(s_star + h) - f(s_star - h)) / (2 * h);
        EXPECT_NEAR(slope, 0.0, 1e-8);
        EXPECT_LT(f(s_star), f(s_star + 0.1));
        EXPECT_LT(f(s_star), f(s_star - 0.1));
    }
}

TEST(MultitaskLoss, PermutationInvariant) {
    const auto l = vec({0.5, 1.0, 2.0, 0.25});
    const auto s = vec({0.1, -0.3, 0.7, 0.0});
    const auto perm = torch::tensor({2, 0, 3, 1}, torch::kLong);
    EXPECT_NEAR(value(multitask_loss(l, s)), value(multitask_loss(l.index_select(0, perm), s.index_select(0, perm))), 1e-12);
}

TEST(MultitaskLoss, GradientMatchesFiniteDifferences) {
    auto l = vec({0.5, 1.0, 2.0, 0.25}).requires_grad_(true);
    auto s = vec({0.1, -0.3, 0.7, 0.0}).requires_grad_(true);
    multitask_loss(l, s).backward();
    const double h = 1e-6;
    for (int i = 0; i < 4; ++i) {
        auto sp = s.detach().clone(), sm = s.detach().clone();
        sp[i] += h;
        sm[i] -= h;
        const double fd = (value(multitask_loss(l.detach(), sp)) - value(multitask_loss(l.detach(), sm))) / (2 * h);
        EXPECT_NEAR(s.grad()[i].item<double>(), fd, 1e-6);
        EXPECT_NEAR(l.grad()[i].item<double>(), std::exp(-s[i].item<double>()), 1e-12);
    }
}

TEST(Aggregation, Strategies) {
    const auto one = torch::ones({}, torch::kFloat64);
    const TaskLosses all_one{one, one, one, one};
    const auto zeros = torch::zeros({4}, torch::kFloat64);
    EXPECT_NEAR(value(aggregate_losses(all_one, LossStrategy::parse("unbalanced"), zeros)), 4.0, 1e-12);

    const TaskLosses mixed{vec({0.5})[0], vec({1.5})[0], vec({0.2})[0], vec({3.0})[0]};
    const double unbalanced = value(aggregate_losses(mixed, LossStrategy::parse("unbalanced"), zeros));
    LossStrategy manual = LossStrategy::parse("manual");
    manual.manual_weights = {1, 1, 1, 1};
    EXPECT_DOUBLE_EQ(value(aggregate_losses(mixed, manual, zeros)), unbalanced);
    EXPECT_NEAR(value(aggregate_losses(mixed, LossStrategy::parse("adaptive"), zeros)), unbalanced, 1e-12);

    manual.manual_weights = {2, 1, 1, 0.5};
    EXPECT_NEAR(value(aggregate_losses(mixed, manual, zeros)), 1.0 + 1.5 + 0.2 + 1.5, 1e-12);
    const auto w = component_weights(LossStrategy::parse("adaptive"), vec({0.0, std::log(2.0), 0.0, 0.0}));
    EXPECT_NEAR(w[1], 0.5, 1e-12);
}

TEST(Aggregation, ParseRejectsUnknownName) {
    EXPECT_THROW(LossStrategy::parse("balanced"), ConfigError);
    EXPECT_EQ(LossStrategy::parse("adaptive").name(), "adaptive");
}
