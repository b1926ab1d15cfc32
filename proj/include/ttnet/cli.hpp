#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ttnet/inference.hpp"
#include "ttnet/metrics.hpp"
#include "ttnet/synthetic.hpp"
#include "ttnet/training.hpp"

namespace ttnet {

struct SynthOptions {
    std::filesystem::path out_dir;
    int clips = 10;
    std::uint64_t seed = 0;
    SceneOptions scene;
    int mask_width = 320;
    int mask_height = 128;
};

struct ClipSummary {
    std::string name;
    int frames = 0;
    int bounces = 0;
    int nets = 0;
    int ball_frames = 0;
};

/// Writes clip_0000, clip_0001, ... under out_dir; clip k is drawn from seed + k.
std::vector<ClipSummary> cmd_synth(const SynthOptions& options, std::ostream& log);

/// Trains until early stop or max_epochs, printing one log line per epoch.
std::vector<EpochRecord> cmd_train(const TrainConfig& cfg, const std::optional<std::filesystem::path>& resume,
                                   std::ostream& log);

/// Report over the validation split (or the training split). With oracle set the
/// checkpoint is optional and the targets replace the network.
EvaluationReport cmd_eval(TrainConfig cfg, const std::optional<std::filesystem::path>& checkpoint, bool oracle,
                          bool training_split);

/// Writes one JSON record per line to out and returns the latency statistics.
LatencyStats cmd_infer(const std::filesystem::path& checkpoint, const std::filesystem::path& frames_dir,
                       const std::filesystem::path& out, bool masks = true);

struct ArchReport {
    double multiplier = 1.0;
    std::int64_t encoder_params = 0;
    std::int64_t total_params = 0;
    std::int64_t encoder_macs = 0;

    std::string to_text() const;
};

inline constexpr double kReferenceEncoderParamsM = 1.180;
inline constexpr double kReferenceEncoderGflops = 2.340;

ArchReport cmd_arch(double multiplier, const ResolutionConfig& resolution = {});

/// Parses argv and dispatches. Failures print `error=<Kind> message="..."` to err
/// and return nonzero.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ttnet
