#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support/test_support.hpp"
#include "ttnet/cli.hpp"
#include "ttnet/error.hpp"

using namespace ttnet;
using ttnet::testing::TempDir;
using ttnet::testing::tiny_config;
using ttnet::testing::tiny_scene;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return files;
}

SynthOptions tiny_synth(const fs::path& out, int clips, std::uint64_t seed, int length = 40) {
    SynthOptions o;
    o.out_dir = out;
    o.clips = clips;
    o.seed = seed;
    o.scene = tiny_scene(length);
    o.mask_width = 128;
    o.mask_height = 64;
    return o;
}

fs::path fresh_checkpoint(const fs::path& dir) {
    Trainer t(tiny_config());
    t.save_checkpoint(dir / "fresh.pt");
    return dir / "fresh.pt";
}

int run(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
    args.insert(args.begin(), "ttnet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

}  // namespace

TEST(Synth, SameSeedGivesIdenticalTrees) {
    TempDir dir("synth");
    std::ostringstream log;
    cmd_synth(tiny_synth(dir / "a", 10, 7), log);
    cmd_synth(tiny_synth(dir / "b", 10, 7), log);
    const auto a = tree(dir / "a"), b = tree(dir / "b");
    EXPECT_GT(a.size(), 10u);
    EXPECT_TRUE(a == b);
}

TEST(Synth, ZeroClipsIsAValidEmptyDataset) {
    TempDir dir("synth");
    std::ostringstream log;
    EXPECT_TRUE(cmd_synth(tiny_synth(dir / "empty", 0, 1), log).empty());
    const auto set = load_annotations(dir / "empty");
    EXPECT_TRUE(set.clips.empty());
    EXPECT_EQ(set.positive_anchors(), 0u);
}

TEST(Synth, BounceSceneLabelsEveryClip) {
    TempDir dir("synth");
    auto o = tiny_synth(dir / "bounce", 6, 3);
    o.scene.kind = ClipKind::bounce;
    std::ostringstream log;
    for (const auto& s : cmd_synth(o, log)) EXPECT_GE(s.bounces, 1) << s.name;
    EXPECT_NE(log.str().find("bounce="), std::string::npos);
}

TEST(Arch, ReferenceAndScaledFigures) {
    const auto full = cmd_arch(1.0);
    EXPECT_NEAR(full.encoder_params / 1e6, kReferenceEncoderParamsM, 0.01 * kReferenceEncoderParamsM);
    EXPECT_NEAR(full.encoder_macs / 1e9, kReferenceEncoderGflops, 0.15 * kReferenceEncoderGflops);
    const auto small = cmd_arch(0.25);
    EXPECT_LT(small.encoder_params, full.encoder_params);
    EXPECT_LT(small.total_params, full.total_params);
    EXPECT_LT(small.encoder_macs, full.encoder_macs);
    EXPECT_NE(full.to_text().find("reference_encoder_gflops="), std::string::npos);
}

TEST(Infer, HundredFramesGiveNinetyTwoRecords) {
    TempDir dir("infer");
    std::ostringstream log;
    cmd_synth(tiny_synth(dir / "data", 1, 5, 100), log);
    const auto ckpt = fresh_checkpoint(dir.path());
    const auto stats = cmd_infer(ckpt, dir / "data" / "clip_0000", dir / "out.jsonl");
    EXPECT_EQ(stats.count, 92u);
    EXPECT_GT(stats.mean_ms, 0.0);
    EXPECT_GE(stats.p95_ms, stats.min_ms);
    EXPECT_LE(stats.p95_ms, stats.max_ms);
    std::ifstream in(dir / "out.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.at("frame").get<int>(), n + 8);
        EXPECT_EQ(j.at("event_frame").get<int>(), j.at("frame").get<int>() - 4);
        EXPECT_TRUE(j.contains("bounce") && j.contains("net") && j.contains("mask_pixels"));
        EXPECT_EQ(j.at("ball").is_null(), !j.at("ball_present").get<bool>());
        ++n;
    }
    EXPECT_EQ(n, 92);
    const auto js = stats.to_json();
    EXPECT_TRUE(js.contains("mean_ms") && js.contains("p95_ms"));
}

TEST(Infer, RejectsShortAndMismatchedInput) {
    TempDir dir("infer");
    std::ostringstream log;
    auto short_clip = tiny_synth(dir / "data", 1, 5, 20);
    short_clip.scene.kind = ClipKind::no_ball;
    cmd_synth(short_clip, log);
    const auto ckpt = fresh_checkpoint(dir.path());
    const auto frames = dir / "data" / "clip_0000" / kFramesDir;
    for (int f = 8; f < 20; ++f) fs::remove(frames / frame_file_name(f).filename());
    EXPECT_THROW(cmd_infer(ckpt, dir / "data" / "clip_0000", dir / "out.jsonl"), InputError);

    auto wide = tiny_synth(dir / "wide", 1, 5, 12);
    wide.scene.width = 512;
    wide.scene.height = 256;
    wide.scene.kind = ClipKind::no_ball;
    cmd_synth(wide, log);
    EXPECT_THROW(cmd_infer(ckpt, dir / "wide" / "clip_0000", dir / "out.jsonl"), ResolutionMismatchError);
}

TEST(LatencyStats, NearestRankPercentile) {
    std::vector<double> v;
    for (int i = 1; i <= 20; ++i) v.push_back(i);
    const auto s = LatencyStats::from(v);
    EXPECT_DOUBLE_EQ(s.mean_ms, 10.5);
    EXPECT_DOUBLE_EQ(s.p95_ms, 19.0);
    EXPECT_THROW(LatencyStats::from({}), std::invalid_argument);
}

TEST(TrainEval, StrategyIsVisibleAndReportsAreStable) {
    TempDir dir("train");
    auto cfg = tiny_config();
    cfg.out_dir = (dir / "unbalanced").string();
    cfg.strategy = LossStrategy::parse("unbalanced");
    std::ostringstream log;
    const auto u = cmd_train(cfg, std::nullopt, log);
    ASSERT_FALSE(u.empty());
    for (double w : u.back().weights) EXPECT_DOUBLE_EQ(w, 1.0);

    auto acfg = cfg;
    acfg.out_dir = (dir / "adaptive").string();
    acfg.strategy = LossStrategy::parse("adaptive");
    const auto a = cmd_train(acfg, std::nullopt, log);
    bool moved = false;
    for (double w : a.back().weights) moved = moved || w != 1.0;
    EXPECT_TRUE(moved);
    EXPECT_TRUE(fs::exists(dir / "adaptive" / "best.pt"));

    const auto r1 = cmd_eval(acfg, dir / "adaptive" / "best.pt", false, false);
    const auto r2 = cmd_eval(acfg, dir / "adaptive" / "best.pt", false, false);
    EXPECT_EQ(r1.to_text(), r2.to_text());
    EXPECT_EQ(r1.entries().size(), 11u);

    const auto oracle = cmd_eval(acfg, std::nullopt, true, false);
    EXPECT_DOUBLE_EQ(oracle.local_accuracy, 1.0);
    EXPECT_DOUBLE_EQ(oracle.local_rmse_px, 0.0);
    EXPECT_DOUBLE_EQ(oracle.pce, 1.0);
    EXPECT_DOUBLE_EQ(oracle.mean_iou(), 1.0);

    auto resumed = acfg;
    resumed.max_epochs = 3;
    const auto more = cmd_train(resumed, dir / "adaptive" / "last.pt", log);
    ASSERT_EQ(more.size(), 1u);
    EXPECT_EQ(more.front().epoch, 3);

    auto wide = acfg;
    wide.resolution = {512, 256, 128, 64, 128, 64};
    EXPECT_THROW(cmd_eval(wide, dir / "adaptive" / "best.pt", false, false), ResolutionMismatchError);
}

TEST(CommandLine, ExitCodesAndErrorLines) {
    std::string out, err;
    EXPECT_EQ(run({"--help"}, &out, &err), 0);
    EXPECT_NE(out.find("synth"), std::string::npos);
    EXPECT_EQ(run({"frobnicate"}, &out, &err), 2);
    EXPECT_EQ(run({"train", "--config", "/nonexistent.cfg"}, &out, &err), 2);

    TempDir dir("cli");
    {
        std::ofstream cfg(dir / "bad.cfg");
        cfg << "learning_rate = 0.1\n";
    }
    EXPECT_EQ(run({"train", "--config", (dir / "bad.cfg").string()}, &out, &err), 1);
    EXPECT_NE(err.find("error=ConfigError"), std::string::npos);
    EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
    EXPECT_EQ(run({"infer", "--checkpoint", "/nonexistent.pt", "--frames-dir", "/tmp", "--out", "/tmp/x.jsonl"}, &out,
                  &err),
              1);
    EXPECT_NE(err.find("error=CheckpointError"), std::string::npos);

    EXPECT_EQ(run({"synth", "--out", (dir / "d").string(), "--clips", "1", "--seed", "2", "--width", "256", "--height",
                   "128", "--global-width", "128", "--global-height", "64", "--clip-length", "30"},
                  &out, &err),
              0)
        << err;
    EXPECT_NE(out.find("clip=clip_0000"), std::string::npos);
    EXPECT_EQ(run({"arch", "--multiplier", "0.25"}, &out, &err), 0);
    EXPECT_NE(out.find("encoder_params="), std::string::npos);
}
