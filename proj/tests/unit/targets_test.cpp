#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ttnet/targets.hpp"

using namespace ttnet;

namespace {

Image solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = r;
            img.at(x, y, 1) = g;
            img.at(x, y, 2) = b;
        }
    }
    return img;
}

LabeledClip clip_with_event(EventType type) {
    LabeledClip c;
    c.event = type;
    for (int i = 0; i < kEventClipLength; ++i) {
        c.frames.push_back(solid(8, 4, static_cast<std::uint8_t>(i), 0, 0));
        c.ball.push_back(FullCoord{i % 8, i % 4});
        c.seg.push_back(std::nullopt);
    }
    return c;
}

}  // namespace

TEST(BallTarget, GaussianPeakAndNeighbour) {
    const auto t = build_ball_target(PixelCoord{50, 20}, 320, 128, 1.25);
    ASSERT_TRUE(t.present);
    ASSERT_EQ(t.vx.size(), 320u);
    ASSERT_EQ(t.vy.size(), 128u);
    EXPECT_FLOAT_EQ(t.vx[50], 1.0f);
    EXPECT_NEAR(t.vx[51], std::exp(-1.0 / (2 * 1.25 * 1.25)), 1e-6);
    EXPECT_NEAR(t.vx[51], 0.7261, 1e-4);
    EXPECT_FLOAT_EQ(t.vy[20], 1.0f);
}

TEST(BallTarget, AbsentIsAllZero) {
    const auto t = build_ball_target(std::nullopt, 320, 128, 1.25);
    EXPECT_FALSE(t.present);
    for (float v : t.vx) EXPECT_EQ(v, 0.0f);
    for (float v : t.vy) EXPECT_EQ(v, 0.0f);
}

TEST(BallTarget, SymmetricUpToTruncation) {
    const auto t = build_ball_target(PixelCoord{3, 60}, 320, 128, 7.5);
    for (int d = 1; d <= 3; ++d) EXPECT_FLOAT_EQ(t.vx[3 - d], t.vx[3 + d]);
    for (int d = 1; d <= 60; ++d) EXPECT_FLOAT_EQ(t.vy[60 - d], t.vy[60 + d]);
}

TEST(BallTarget, RejectsOutOfRangeCentre) {
    EXPECT_THROW(build_ball_target(PixelCoord{320, 0}, 320, 128, 1.25), std::out_of_range);
    EXPECT_THROW(build_ball_target(PixelCoord{0, 0}, 320, 128, 0.0), std::invalid_argument);
}

TEST(EventTarget, ProfileValues) {
    EXPECT_DOUBLE_EQ(build_event_target(0, EventType::bounce).bounce, 1.0);
    EXPECT_DOUBLE_EQ(build_event_target(0, EventType::bounce).net, 0.0);
    EXPECT_NEAR(build_event_target(2, EventType::net).net, std::sqrt(2.0) / 2.0, 1e-12);
    EXPECT_NEAR(build_event_target(-2, EventType::net).net, 0.7071, 1e-4);
    EXPECT_DOUBLE_EQ(build_event_target(4, EventType::bounce).bounce, 0.0);
    EXPECT_DOUBLE_EQ(build_event_target(-9, EventType::bounce).bounce, 0.0);
}

TEST(EventTarget, SymmetricMonotoneAndThresholdBand) {
    for (int n = -10; n <= 10; ++n) EXPECT_DOUBLE_EQ(event_profile(n), event_profile(-n));
    for (int n = 0; n < 4; ++n) EXPECT_GE(event_profile(n), event_profile(n + 1));
    for (int n = -6; n <= 6; ++n) EXPECT_EQ(event_profile(n) > 0.5, std::abs(n) <= 2) << n;
    EXPECT_NEAR(event_profile(3), std::sin(std::numbers::pi / 8), 1e-12);
}

TEST(AssembleInput, ShapeAndFrameMajorLayout) {
    std::vector<Image> frames;
    for (int k = 0; k < kStackFrames; ++k) frames.push_back(solid(320, 128, static_cast<std::uint8_t>(10 * k), 1, 2));
    const auto t = assemble_input(frames);
    ASSERT_EQ(t.sizes(), (std::vector<std::int64_t>{27, 128, 320}));
    for (int k = 0; k < kStackFrames; ++k) {
        EXPECT_FLOAT_EQ(t[3 * k][5][7].item<float>(), 10.0f * k / 255.0f);
        EXPECT_FLOAT_EQ(t[3 * k + 1][5][7].item<float>(), 1.0f / 255.0f);
        EXPECT_FLOAT_EQ(t[3 * k + 2][5][7].item<float>(), 2.0f / 255.0f);
    }
}

TEST(AssembleInput, LosslessForDistinctPixels) {
    std::vector<Image> frames;
    for (int k = 0; k < kStackFrames; ++k) {
        Image img(6, 5, 3);
        for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>((i * 7 + k * 13) % 256);
        frames.push_back(img);
    }
    const auto t = assemble_input(frames);
    for (int k = 0; k < kStackFrames; ++k)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 6; ++x)
                for (int c = 0; c < 3; ++c)
                    ASSERT_FLOAT_EQ(t[3 * k + c][y][x].item<float>() * 255.0f, frames[k].at(x, y, c));
}

TEST(AssembleInput, IdenticalFramesGiveEqualTriples) {
    const std::vector<Image> frames(kStackFrames, solid(16, 8, 9, 99, 199));
    const auto t = assemble_input(frames);
    for (int k = 1; k < kStackFrames; ++k) EXPECT_TRUE(torch::equal(t.slice(0, 3 * k, 3 * k + 3), t.slice(0, 0, 3)));
}

TEST(AssembleInput, RejectsWrongFrameCount) {
    const std::vector<Image> frames(8, solid(16, 8, 0, 0, 0));
    EXPECT_THROW(assemble_input(frames), std::invalid_argument);
}

TEST(SubsampleEventSequence, WindowOffsets) {
    const auto clip = clip_with_event(EventType::bounce);
    const auto centred = subsample_event_sequence(clip, 8);
    EXPECT_DOUBLE_EQ(centred.event.bounce, 1.0);
    EXPECT_DOUBLE_EQ(centred.event.net, 0.0);
    ASSERT_EQ(centred.frames.size(), 9u);
    EXPECT_EQ(centred.frames[kMiddleFrame].at(0, 0, 0), 12);
    ASSERT_TRUE(centred.ball.has_value());
    EXPECT_EQ(*centred.ball, clip.ball[16].value());

    EXPECT_NEAR(subsample_event_sequence(clip, 10).event.bounce, 0.7071, 1e-4);
    EXPECT_DOUBLE_EQ(subsample_event_sequence(clip, 0).event.bounce, 0.0);
    EXPECT_THROW(subsample_event_sequence(clip, 17), std::out_of_range);

    const auto net = subsample_event_sequence(clip_with_event(EventType::net), 7);
    EXPECT_NEAR(net.event.net, std::sin(3 * std::numbers::pi / 8), 1e-12);
    EXPECT_DOUBLE_EQ(net.event.bounce, 0.0);
}
