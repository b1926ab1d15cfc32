#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "support/test_support.hpp"
#include "ttnet/annotations.hpp"
#include "ttnet/augment.hpp"
#include "ttnet/dataset.hpp"
#include "ttnet/error.hpp"
#include "ttnet/frame_source.hpp"
#include "ttnet/image.hpp"
#include "ttnet/synthetic.hpp"

using namespace ttnet;
using ttnet::testing::TempDir;
namespace fs = std::filesystem;

namespace {

Image gradient(int w, int h, int c) {
    Image img(w, h, c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) img.at(x, y, k) = static_cast<std::uint8_t>((x * 7 + y * 13 + k * 50) % 256);
    return img;
}

void write_frames(const fs::path& clip_dir, int count, int w, int h, int first = 0) {
    fs::create_directories(clip_dir / kFramesDir);
    for (int f = first; f < first + count; ++f) write_image(clip_dir / frame_file_name(f), gradient(w, h, 3));
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

ClipAnnotation annotation_with_events(int frames, std::map<int, EventLabel> events) {
    ClipAnnotation a;
    a.name = "clip";
    a.frame_count = frames;
    a.width = 64;
    a.height = 32;
    a.events = std::move(events);
    return a;
}

}  // namespace

TEST(Image, NetpbmAndPngRoundTrip) {
    TempDir dir("img");
    for (const char* name : {"a.ppm", "a.png"}) {
        const auto img = gradient(17, 9, 3);
        write_image(dir / name, img);
        EXPECT_EQ(read_image(dir / name), img) << name;
    }
    for (const char* name : {"m.pgm", "m.png"}) {
        const auto img = gradient(5, 6, 1);
        write_image(dir / name, img);
        EXPECT_EQ(read_image(dir / name), img) << name;
    }
    EXPECT_THROW(read_image(dir / "missing.ppm"), IoError);
    write_text(dir / "bad.ppm", "P6\n4 4\n255\nxx");
    EXPECT_THROW(read_image(dir / "bad.ppm"), IoError);
}

TEST(Image, CropAndResampleGrid) {
    const auto img = gradient(16, 8, 3);
    const auto c = crop(img, {3, 2, 5, 4});
    EXPECT_EQ(c.width, 5);
    EXPECT_EQ(c.at(0, 0, 1), img.at(3, 2, 1));
    EXPECT_EQ(c.at(4, 3, 2), img.at(7, 5, 2));
    EXPECT_THROW(crop(img, {12, 0, 5, 4}), std::out_of_range);

    EXPECT_EQ(resize_bilinear(img, 16, 8), img);
    const auto half = resize_bilinear(img, 8, 4);
    const auto near = resize_nearest(img, 8, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x) {
            EXPECT_EQ(half.at(x, y, 0), img.at(2 * x, 2 * y, 0));
            EXPECT_EQ(near.at(x, y, 2), img.at(2 * x, 2 * y, 2));
        }
}

TEST(FrameSource, DirectorySourceAgreesWithFullFrames) {
    TempDir dir("src");
    write_frames(dir.path(), 3, 32, 16);
    std::vector<fs::path> files;
    for (int f = 0; f < 3; ++f) files.push_back(dir / frame_file_name(f).string());
    ImageDirectorySource src(files, 32, 16, 1);
    const Rect r{4, 2, 10, 6};
    EXPECT_EQ(src.region(1, r), crop(src.frame(1), r));
    EXPECT_EQ(src.downscaled(2, 16, 8), resize_bilinear(src.frame(2), 16, 8));
    EXPECT_EQ(src.downscaled(2, 16, 8), src.downscaled(2, 16, 8));
}

TEST(FrameSource, MaskBitmaskRoundTrip) {
    SegTarget seg;
    for (auto& m : seg.masks) m = Image(6, 4, 1);
    seg[SegClass::human].at(1, 1) = 1;
    seg[SegClass::table].at(1, 1) = 1;
    seg[SegClass::scoreboard].at(5, 3) = 1;
    const auto decoded = decode_mask_image(encode_mask_image(seg));
    for (int k = 0; k < kSegClasses; ++k) EXPECT_EQ(decoded.masks[k], seg.masks[k]) << k;
}

TEST(Annotations, WellFormedFixture) {
    TempDir dir("ann");
    write_frames(dir.path(), 30, 16, 8, 100);
    write_text(dir / kManifestName, R"({"events": {"112": "bounce", "120": "empty"}, "ball": {"112": [5, 3]}})");
    const auto set = load_annotations(dir.path());
    ASSERT_EQ(set.clips.size(), 1u);
    const auto& c = set.clips[0];
    EXPECT_EQ(set.positive_anchors(), 1u);
    EXPECT_EQ(c.first_frame, 100);
    EXPECT_EQ(c.frame_count, 30);
    EXPECT_EQ(c.width, 16);
    EXPECT_EQ(c.ball.at(112), (FullCoord{5, 3}));
    EXPECT_EQ(c.events.at(120), EventLabel::empty);
}

TEST(Annotations, OutOfRangeBallIsReported) {
    TempDir dir("ann");
    write_frames(dir.path(), 10, 16, 8);
    write_text(dir / kManifestName, R"({"ball": {"3": [2000, 5], "4": [2, 2]}})");
    EXPECT_THROW(load_annotations(dir.path()), AnnotationError);
    const auto set = load_annotations(dir.path(), {.fail_fast = false});
    ASSERT_EQ(set.clips.size(), 1u);
    EXPECT_EQ(set.diagnostics.size(), 1u);
    EXPECT_EQ(set.clips[0].ball.size(), 1u);
}

TEST(Annotations, EmptyEventsStillLoad) {
    TempDir dir("ann");
    write_frames(dir.path(), 10, 16, 8);
    write_text(dir / kManifestName, R"({"events": {}})");
    const auto set = load_annotations(dir.path());
    ASSERT_EQ(set.clips.size(), 1u);
    EXPECT_EQ(set.positive_anchors(), 0u);
}

TEST(Annotations, MalformedEntriesAndMissingFrames) {
    TempDir dir("ann");
    write_frames(dir.path(), 10, 16, 8);
    write_text(dir / kManifestName, R"({"events": {"2": "smash", "x": "net", "50": "net"}})");
    const auto set = load_annotations(dir.path(), {.fail_fast = false});
    EXPECT_EQ(set.diagnostics.size(), 3u);
    write_text(dir / kManifestName, "{not json");
    EXPECT_THROW(load_annotations(dir.path()), AnnotationError);
    EXPECT_THROW(load_annotations(dir / "nowhere"), AnnotationError);
}

TEST(Annotations, ConvertPublishedMarkup) {
    TempDir dir("conv");
    write_frames(dir / "video", 12, 16, 8);
    fs::create_directories(dir / "markup");
    write_text(dir / "markup" / "events_markup.json", R"({"5": "bounce", "9": "empty_event"})");
    write_text(dir / "markup" / "ball_markup.json", R"({"5": {"x": 3, "y": 4}, "6": {"x": -1, "y": -1}})");
    convert_markup(dir / "markup", dir / "video" / kFramesDir, std::nullopt, dir / "clip");
    const auto set = load_annotations(dir / "clip");
    ASSERT_EQ(set.clips.size(), 1u);
    EXPECT_EQ(set.clips[0].events.at(5), EventLabel::bounce);
    EXPECT_EQ(set.clips[0].events.at(9), EventLabel::empty);
    EXPECT_EQ(set.clips[0].ball.size(), 1u);
}

TEST(SampleIndex, PositivesAndNegatives) {
    const std::vector<ClipAnnotation> clips = {annotation_with_events(200, {{60, EventLabel::bounce}})};
    const auto idx = build_sample_index(clips, 1.0, 7);
    EXPECT_EQ(idx.positives, 17u);
    EXPECT_EQ(idx.negatives, 17u);
    std::set<int> offsets;
    for (const auto& e : idx.entries) {
        if (e.negative) {
            EXPECT_GE(std::abs(e.middle_frame() - 60), kNegativeMargin);
            EXPECT_DOUBLE_EQ(event_target_at(clips[0], e.middle_frame()).bounce, 0.0);
        } else {
            offsets.insert(e.offset);
            EXPECT_EQ(e.middle_frame() - 60, e.offset - 8);
        }
    }
    EXPECT_EQ(offsets.size(), 17u);
    EXPECT_EQ(build_sample_index(clips, 0.0, 7).entries.size(), 17u);

    const auto again = build_sample_index(clips, 1.0, 7);
    ASSERT_EQ(again.entries.size(), idx.entries.size());
    for (std::size_t i = 0; i < idx.entries.size(); ++i) EXPECT_EQ(again.entries[i].first_frame, idx.entries[i].first_frame);
}

TEST(SampleIndex, ShortClipIsSkippedWithWarning) {
    const std::vector<ClipAnnotation> clips = {annotation_with_events(30, {{3, EventLabel::net}})};
    const auto idx = build_sample_index(clips, 0.0, 1);
    EXPECT_EQ(idx.positives, 0u);
    EXPECT_FALSE(idx.warnings.empty());
}

TEST(SampleIndex, EventTargetAtTakesMaximumPerType) {
    const auto a = annotation_with_events(100, {{40, EventLabel::bounce}, {42, EventLabel::net}});
    const auto t = event_target_at(a, 41);
    EXPECT_NEAR(t.bounce, event_profile(1), 1e-12);
    EXPECT_NEAR(t.net, event_profile(1), 1e-12);
    EXPECT_DOUBLE_EQ(event_target_at(a, 80).bounce, 0.0);
}

TEST(Augment, ReflectionIdentityAndValidation) {
    AugmentationParams flip;
    flip.hflip = true;
    EXPECT_DOUBLE_EQ(augment_point(flip, {100, 50}, 1920, 1080).x, 1819.0);
    EXPECT_DOUBLE_EQ(augment_point(flip, {100, 50}, 1920, 1080).y, 50.0);

    TrainingSample s;
    for (int k = 0; k < kStackFrames; ++k) s.frames.push_back(gradient(32, 16, 3));
    s.ball = FullCoord{10, 5};
    s.event = {0.5, 0.0};
    const auto same = augment(s, AugmentationParams{});
    EXPECT_EQ(same.frames, s.frames);
    EXPECT_EQ(same.ball, s.ball);

    AugmentationParams bad;
    bad.rotation_deg = 90;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    EXPECT_THROW(augment(s, bad), std::invalid_argument);

    const auto flipped = augment(s, flip);
    EXPECT_EQ(flipped.ball, (FullCoord{21, 5}));
    EXPECT_DOUBLE_EQ(flipped.event.bounce, 0.5);
}

TEST(Augment, SampledParametersStayInRange) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 500; ++i) EXPECT_NO_THROW(sample_augmentation({}, rng).validate());
}

TEST(Augment, RenderedBallFollowsTransformedCoordinate) {
    const auto scene = ttnet::testing::tiny_scene(40);
    AugmentationParams p;
    p.crop_x = 0.1;
    p.crop_y = 0.12;
    p.crop_left = 0.3;
    p.crop_top = 0.7;
    p.rotation_deg = 9;
    p.hflip = true;
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 40 && checked < 5; ++seed) {
        std::mt19937_64 rng(seed);
        auto cfg = random_scene(scene, rng);
        cfg.noise = 0;
        const auto clip = synthesize_clip(cfg, seed);
        for (int last = kStackFrames - 1; last < cfg.clip_length; ++last) {
            const auto c = clip.track().centers[static_cast<std::size_t>(last)];
            if (!c || c->x < 40 || c->x > cfg.width - 40 || c->y < 30 || c->y > cfg.height - 30) continue;
            TrainingSample s;
            for (int k = last - 8; k <= last; ++k) s.frames.push_back(clip.frame(k));
            s.ball = clip.ball_label(last);
            const auto out = augment(s, p);
            const PointF expect = augment_point(p, *c, cfg.width, cfg.height);
            const Image& f = out.frames.back();
            double sx = 0, sy = 0, n = 0;
            for (int y = 0; y < f.height; ++y)
                for (int x = 0; x < f.width; ++x) {
                    if (std::abs(x - expect.x) > 12 || std::abs(y - expect.y) > 12) continue;
                    const double w = std::max(0, std::min({f.at(x, y, 0), f.at(x, y, 1), f.at(x, y, 2)}) - 200);
                    sx += w * x;
                    sy += w * y;
                    n += w;
                }
            ASSERT_GT(n, 0.0);
            EXPECT_NEAR(sx / n, expect.x, 1.0) << "seed " << seed;
            EXPECT_NEAR(sy / n, expect.y, 1.0) << "seed " << seed;
            ASSERT_TRUE(out.ball.has_value());
            EXPECT_LE(std::abs(out.ball->x - expect.x), 1.5);
            EXPECT_LE(std::abs(out.ball->y - expect.y), 1.5);
            ++checked;
            break;
        }
    }
    EXPECT_EQ(checked, 5);
}

TEST(Synthetic, DroppedBallBouncesOnce) {
    SyntheticSceneConfig cfg;
    cfg.ball_position = {700, 300};
    cfg.ball_velocity = {0, 0};
    const auto track = simulate_ball(cfg);
    ASSERT_EQ(track.events.size(), 1u);
    const auto [frame, label] = *track.events.begin();
    EXPECT_EQ(label, EventLabel::bounce);
    const auto c = track.centers[static_cast<std::size_t>(frame)];
    ASSERT_TRUE(c.has_value());
    EXPECT_NEAR(c->y + cfg.ball_radius, cfg.table.y0, 1e-6);
}

TEST(Synthetic, BallAvoidingTableAndNetHasNoEvents) {
    SyntheticSceneConfig cfg;
    cfg.ball_position = {300, 200};
    cfg.ball_velocity = {-6, -8};
    EXPECT_TRUE(simulate_ball(cfg).events.empty());
}

TEST(Synthetic, NetHitIsLabelled) {
    SyntheticSceneConfig cfg;
    cfg.ball_position = {700, 560};
    cfg.ball_velocity = {20, 0};
    cfg.gravity = 0;
    const auto track = simulate_ball(cfg);
    ASSERT_FALSE(track.events.empty());
    EXPECT_EQ(track.events.begin()->second, EventLabel::net);
}

TEST(Synthetic, TableMaskMatchesGeometry) {
    SyntheticSceneConfig cfg;
    cfg.clip_length = 2;
    const auto clip = synthesize_clip(cfg, 3);
    const auto seg = clip.masks(1, cfg.width, cfg.height);
    ASSERT_TRUE(seg.has_value());
    const Image& m = (*seg)[SegClass::table];
    std::int64_t inter = 0, uni = 0;
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            const bool geom = x >= 360 && x < 1560 && y >= 600 && y < 780;
            inter += geom && m.at(x, y);
            uni += geom || m.at(x, y);
        }
    EXPECT_EQ(inter, uni);
    EXPECT_EQ(uni, 1200 * 180);
}

TEST(Synthetic, DeterministicAndLazyAccessAgrees) {
    std::mt19937_64 a(9), b(9);
    const auto scene = ttnet::testing::tiny_scene();
    const auto ca = synthesize_clip(random_scene(scene, a), 9);
    const auto cb = synthesize_clip(random_scene(scene, b), 9);
    EXPECT_EQ(ca.frame(17), cb.frame(17));
    const Rect r{10, 20, 64, 32};
    EXPECT_EQ(ca.region(17, r), crop(ca.frame(17), r));
    EXPECT_EQ(ca.downscaled(17, 128, 64), resize_bilinear(ca.frame(17), 128, 64));

    SyntheticSceneConfig bad;
    bad.table = {500, 600, 500, 780};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Synthetic, WrittenClipLoadsBack) {
    TempDir dir("synth");
    std::mt19937_64 rng(5);
    auto opts = ttnet::testing::tiny_scene();
    opts.kind = ClipKind::bounce;
    const auto clip = synthesize_clip(random_scene(opts, rng), 5);
    write_clip(clip, dir / "clip_0000", 128, 64);
    const auto set = load_annotations(dir.path(), {.fail_fast = true, .mask_size = std::pair{128, 64}});
    ASSERT_EQ(set.clips.size(), 1u);
    const auto expected = clip.annotation("clip_0000");
    EXPECT_EQ(set.clips[0].events, expected.events);
    EXPECT_EQ(set.clips[0].ball, expected.ball);
    EXPECT_EQ(set.clips[0].masks.size(), static_cast<std::size_t>(clip.frame_count()));
    EXPECT_GE(expected.labelled_events(), 1u);
}

TEST(Dataset, ItemsMatchTheirTargets) {
    const auto res = ttnet::testing::tiny_resolution();
    auto clips = synthetic_clips(ttnet::testing::tiny_scene(), 3, 21);
    std::vector<ClipAnnotation> anns;
    for (const auto& c : clips) anns.push_back(c.annotation);
    auto index = build_sample_index(anns, 1.0, 3);
    ASSERT_GT(index.positives, 0u);
    SampleDataset data(std::move(clips), std::move(index), {.resolution = res});
    for (std::size_t i = 0; i < data.size(); i += 5) {
        const auto& e = data.index().entries[i];
        const auto item = data.item(i);
        const auto& ann = data.clips()[static_cast<std::size_t>(e.clip)].annotation;
        const auto truth = ann.ball.find(e.last_frame());
        EXPECT_EQ(item.ball.has_value(), truth != ann.ball.end());
        if (item.ball) EXPECT_EQ(*item.ball, truth->second);
        const auto ev = event_target_at(ann, e.middle_frame());
        EXPECT_DOUBLE_EQ(item.event.bounce, ev.bounce);
        EXPECT_DOUBLE_EQ(item.event.net, ev.net);
        ASSERT_TRUE(item.seg.has_value());
        EXPECT_EQ(item.seg->masks[0].width, res.w1);

        const auto sample = data.materialize(i);
        std::vector<Image> small;
        for (const auto& f : sample.frames) small.push_back(resize_bilinear(f, res.w1, res.h1));
        EXPECT_TRUE(torch::equal(global_input(*item.frames, res), assemble_input(small)));
        const CropWindow w{16, 8, res.w2, res.h2};
        std::vector<Image> cut;
        for (const auto& f : sample.frames) cut.push_back(crop(f, {w.x_origin, w.y_origin, w.width, w.height}));
        EXPECT_TRUE(torch::equal(local_input(*item.frames, w), assemble_input(cut)));
    }
}

TEST(Dataset, SyntheticDatasetIsDeterministic) {
    const auto res = ttnet::testing::tiny_resolution();
    const auto a = make_synthetic_dataset(ttnet::testing::tiny_scene(), 30, 4, {.resolution = res});
    const auto b = make_synthetic_dataset(ttnet::testing::tiny_scene(), 30, 4, {.resolution = res});
    ASSERT_EQ(a.size(), 30u);
    ASSERT_EQ(b.size(), 30u);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.describe(i), b.describe(i));
}
