#include "ttnet/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ttnet/config.hpp"
#include "ttnet/error.hpp"

namespace ttnet {
namespace fs = std::filesystem;

namespace {

std::string one_line(std::string s) {
    std::string out;
    for (char c : s) {
        if (c == '\n' || c == '\r') {
            out += ' ';
        } else if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else {
            out += c;
        }
    }
    return out;
}

std::optional<ClipKind> parse_kind(const std::string& s) {
    if (s == "bounce") return ClipKind::bounce;
    if (s == "net") return ClipKind::net;
    if (s == "no_event") return ClipKind::no_event;
    if (s == "no_ball") return ClipKind::no_ball;
    return std::nullopt;
}

TrainConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides) {
    auto values = path.empty() ? std::map<std::string, std::string>{} : read_key_values(path);
    for (const auto& [k, v] : overrides) values[k] = v;
    return TrainConfig::from_map(values, path.empty() ? "flags" : path);
}

}  // namespace

std::vector<ClipSummary> cmd_synth(const SynthOptions& options, std::ostream& log) {
    if (options.clips < 0) throw std::invalid_argument("synth: clip count must be non-negative");
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec || !fs::is_directory(options.out_dir)) {
        throw IoError("cannot create output directory " + options.out_dir.string());
    }
    std::vector<ClipSummary> summaries;
    for (int k = 0; k < options.clips; ++k) {
        std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(k));
        const SyntheticSceneConfig cfg = random_scene(options.scene, rng);
        const SyntheticClip clip(cfg, rng());
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%04d", k);
        write_clip(clip, options.out_dir / name, options.mask_width, options.mask_height);
        const ClipAnnotation a = clip.annotation(name);
        ClipSummary s{name, a.frame_count, 0, 0, static_cast<int>(a.ball.size())};
        for (const auto& [frame, label] : a.events) {
            s.bounces += label == EventLabel::bounce;
            s.nets += label == EventLabel::net;
        }
        log << "clip=" << s.name << " frames=" << s.frames << " bounce=" << s.bounces << " net=" << s.nets
            << " ball_frames=" << s.ball_frames << '\n';
        summaries.push_back(s);
    }
    return summaries;
}

std::vector<EpochRecord> cmd_train(const TrainConfig& cfg, const std::optional<fs::path>& resume,
                                   std::ostream& log) {
    cfg.validate();
    const SampleDataset train = make_dataset(cfg, false);
    const SampleDataset val = make_dataset(cfg, true);
    log << "train_samples=" << train.size() << " val_samples=" << val.size()
        << " strategy=" << cfg.strategy.name() << " multiplier=" << cfg.multiplier << std::endl;
    Trainer trainer(cfg);
    if (resume) trainer.load_checkpoint(*resume);
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        std::ofstream(fs::path(cfg.out_dir) / "config.txt") << cfg.to_text();
    }
    return trainer.fit(train, val, [&](const EpochRecord& r) { log << r.log_line() << std::endl; });
}

EvaluationReport cmd_eval(TrainConfig cfg, const std::optional<fs::path>& checkpoint, bool oracle,
                          bool training_split) {
    if (!oracle && !checkpoint) throw ConfigError("eval: --checkpoint is required unless --oracle is set");
    if (checkpoint) {
        const LoadedModel m = load_model(*checkpoint, cfg.resolution);
        cfg.multiplier = m.config.multiplier;
        cfg.conv_dropout = m.config.conv_dropout;
        cfg.fc_dropout = m.config.fc_dropout;
    }
    const SampleDataset data = make_dataset(cfg, !training_split);
    Trainer trainer(cfg);
    if (checkpoint) trainer.load_checkpoint(*checkpoint);
    if (oracle) {
        OraclePredictor predictor(cfg);
        return trainer.evaluate(data, &predictor).report;
    }
    return trainer.evaluate(data).report;
}

LatencyStats cmd_infer(const fs::path& checkpoint, const fs::path& frames_dir, const fs::path& out, bool masks) {
    LoadedModel m = load_model(checkpoint);
    auto [source, first] = open_frame_directory(frames_dir);
    const auto& res = m.config.resolution;
    if (source->width() != res.w0 || source->height() != res.h0) {
        throw ResolutionMismatchError("frames in " + frames_dir.string() + " are " + std::to_string(source->width()) +
                                      "x" + std::to_string(source->height()) + ", checkpoint uses " +
                                      res.describe());
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream file(out);
    if (!file) throw IoError("cannot write " + out.string());
    InferenceOptions options;
    options.masks = masks;
    InferenceEngine engine(m.model, options);
    const LatencyStats stats =
        run_inference(engine, *source, first, [&](const InferenceRecord& r) { file << r.to_json().dump() << '\n'; });
    file.flush();
    if (!file) throw IoError("failed writing " + out.string());
    return stats;
}

std::string ArchReport::to_text() const {
    std::ostringstream o;
    o << std::setprecision(6);
    o << "multiplier=" << multiplier << '\n'
      << "encoder_params=" << encoder_params << '\n'
      << "encoder_params_m=" << encoder_params / 1e6 << '\n'
      << "total_params=" << total_params << '\n'
      << "encoder_macs=" << encoder_macs << '\n'
      << "encoder_gflops_mac=" << encoder_macs / 1e9 << '\n'
      << "encoder_gflops_2mac=" << 2.0 * encoder_macs / 1e9 << '\n'
      << "reference_encoder_params_m=" << kReferenceEncoderParamsM << '\n'
      << "reference_encoder_gflops=" << kReferenceEncoderGflops << '\n';
    return o.str();
}

ArchReport cmd_arch(double multiplier, const ResolutionConfig& resolution) {
    ModelConfig cfg;
    cfg.resolution = resolution;
    cfg.multiplier = multiplier;
    cfg.validate();
    TTNet net(cfg);
    ArchReport r;
    r.multiplier = multiplier;
    r.encoder_params = count_parameters(*net, ParamScope::encoder);
    r.total_params = count_parameters(*net, ParamScope::full);
    r.encoder_macs = count_encoder_flops(cfg, resolution.h1, resolution.w1).macs;
    return r;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Table tennis ball detection, event spotting and segmentation"};
    app.require_subcommand(1);

    std::string config_path, out_path, checkpoint, frames_dir, strategy, resume, split = "val";
    std::uint64_t seed = 0;
    double multiplier = 1.0;

    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
    SynthOptions so;
    std::string kind = "mixed";
    synth->add_option("--out", out_path, "Output directory")->required();
    synth->add_option("--clips", so.clips, "Number of clips")->capture_default_str();
    synth->add_option("--seed", seed, "Random seed")->capture_default_str();
    synth->add_option("--width", so.scene.width, "Frame width")->capture_default_str();
    synth->add_option("--height", so.scene.height, "Frame height")->capture_default_str();
    synth->add_option("--global-width", so.scene.global_width, "Global stage width")->capture_default_str();
    synth->add_option("--global-height", so.scene.global_height, "Global stage height")->capture_default_str();
    synth->add_option("--clip-length", so.scene.clip_length, "Frames per clip")->capture_default_str();
    synth->add_option("--kind", kind, "bounce, net, no_event, no_ball or mixed")
        ->check(CLI::IsMember({"mixed", "bounce", "net", "no_event", "no_ball"}))
        ->capture_default_str();
    synth->add_option("--mask-width", so.mask_width, "Mask width")->capture_default_str();
    synth->add_option("--mask-height", so.mask_height, "Mask height")->capture_default_str();

    auto* train = app.add_subcommand("train", "Train a model");
    train->add_option("--config", config_path, "Key-value config file")->required()->check(CLI::ExistingFile);
    train->add_option("--seed", seed, "Override the seed");
    train->add_option("--out", out_path, "Override the output directory");
    train->add_option("--strategy", strategy, "Loss aggregation")
        ->check(CLI::IsMember({"unbalanced", "manual", "adaptive"}));
    train->add_option("--multiplier", multiplier, "Override the width multiplier");
    train->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    bool oracle = false;
    eval->add_option("--config", config_path, "Key-value config file")->required()->check(CLI::ExistingFile);
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file");
    eval->add_option("--split", split, "train or val")->check(CLI::IsMember({"train", "val"}))->capture_default_str();
    eval->add_option("--out", out_path, "Report file");
    eval->add_flag("--oracle", oracle, "Evaluate the targets themselves");

    auto* infer = app.add_subcommand("infer", "Run on a directory of frames");
    bool no_masks = false;
    infer->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    infer->add_option("--frames-dir", frames_dir, "Directory of numbered frames")->required();
    infer->add_option("--out", out_path, "Record file (one JSON object per line)")->required();
    infer->add_flag("--no-masks", no_masks, "Skip mask pixel counts");

    auto* arch = app.add_subcommand("arch", "Parameter and FLOP report");
    arch->add_option("--multiplier", multiplier, "Width multiplier")->capture_default_str();

    auto* convert = app.add_subcommand("convert", "Convert dataset markup into a clip directory");
    std::string markup, mask_dir;
    convert->add_option("--markup", markup, "Directory with ball/events markup")->required();
    convert->add_option("--frames-dir", frames_dir, "Extracted frames")->required();
    convert->add_option("--masks", mask_dir, "Segmentation masks");
    convert->add_option("--out", out_path, "Clip directory to create")->required();

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) return app.exit(e, out, err);
            err << "error=UsageError message=\"" << one_line(e.what()) << "\"\n";
            return 2;
        }

        if (synth->parsed()) {
            so.out_dir = out_path;
            so.seed = seed;
            so.scene.kind = kind == "mixed" ? std::nullopt : parse_kind(kind);
            const auto clips = cmd_synth(so, out);
            out << "clips=" << clips.size() << " out=" << so.out_dir.string() << '\n';
        } else if (train->parsed()) {
            std::map<std::string, std::string> overrides;
            if (train->count("--seed")) overrides["seed"] = std::to_string(seed);
            if (train->count("--out")) overrides["out_dir"] = out_path;
            if (train->count("--strategy")) overrides["strategy"] = strategy;
            if (train->count("--multiplier")) {
                std::ostringstream m;
                m << std::setprecision(17) << multiplier;
                overrides["multiplier"] = m.str();
            }
            const TrainConfig cfg = load_config(config_path, overrides);
            const auto records = cmd_train(cfg, resume.empty() ? std::nullopt : std::optional<fs::path>(resume), out);
            out << "epochs=" << records.size() << " out=" << cfg.out_dir << '\n';
        } else if (eval->parsed()) {
            const TrainConfig cfg = load_config(config_path, {});
            const EvaluationReport report =
                cmd_eval(cfg, checkpoint.empty() ? std::nullopt : std::optional<fs::path>(checkpoint), oracle,
                         split == "train");
            if (!out_path.empty()) report.write(out_path);
            out << report.to_text();
        } else if (infer->parsed()) {
            const LatencyStats stats = cmd_infer(checkpoint, frames_dir, out_path, !no_masks);
            out << "records=" << stats.count << " out=" << out_path << '\n';
            out << "latency " << stats.to_json().dump() << '\n';
            out << "reference: below " << kReferenceLatencyMs
                << " ms per stack on the original GPU setup (context only, not comparable)\n";
        } else if (arch->parsed()) {
            out << cmd_arch(multiplier).to_text();
        } else if (convert->parsed()) {
            convert_markup(markup, frames_dir, mask_dir.empty() ? std::nullopt : std::optional<fs::path>(mask_dir),
                           out_path);
            out << "out=" << out_path << '\n';
        }
        return 0;
    } catch (const Error& e) {
        err << "error=" << e.kind() << " message=\"" << one_line(e.what()) << "\"\n";
    } catch (const std::invalid_argument& e) {
        err << "error=InvalidArgument message=\"" << one_line(e.what()) << "\"\n";
    } catch (const std::out_of_range& e) {
        err << "error=OutOfRange message=\"" << one_line(e.what()) << "\"\n";
    } catch (const fs::filesystem_error& e) {
        err << "error=IoError message=\"" << one_line(e.what()) << "\"\n";
    } catch (const c10::Error& e) {
        err << "error=TorchError message=\"" << one_line(e.what_without_backtrace()) << "\"\n";
    } catch (const std::exception& e) {
        err << "error=Error message=\"" << one_line(e.what()) << "\"\n";
    }
    return 1;
}

}  // namespace ttnet
