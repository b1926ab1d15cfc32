#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ttnet/dataset.hpp"
#include "ttnet/losses.hpp"
#include "ttnet/metrics.hpp"
#include "ttnet/model.hpp"

namespace ttnet {

enum class CropPolicy { ground_truth_jitter, predicted };

struct TrainConfig {
    ResolutionConfig resolution;
    double multiplier = 1.0;
    double conv_dropout = 0.25;
    double fc_dropout = 0.5;

    double lr0 = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int plateau_patience = 3;
    int stop_patience = 12;
    int max_epochs = 100;
    int batch_size = 8;
    std::uint64_t seed = 0;
    LossStrategy strategy;
    EventClassWeights event_weights;
    double grad_clip = 0.0;  ///< global-norm clip, 0 disables

    CropPolicy crop_policy = CropPolicy::ground_truth_jitter;
    int jitter_x = 32;
    int jitter_y = 12;
    double sigma_global = 1.25;
    double sigma_local = 7.5;

    // Data: on-disk clips when train_dir is set, otherwise in-memory synthetic clips.
    std::string train_dir;
    std::string val_dir;
    std::size_t synthetic_train_samples = 0;
    std::size_t synthetic_val_samples = 0;
    std::uint64_t synthetic_seed = 1;
    std::size_t max_train_samples = 0;  ///< 0 keeps every indexed window
    std::size_t max_val_samples = 0;
    double negatives_ratio = 1.0;
    bool augment = false;

    std::string out_dir = "run";
    int threads = 1;
    bool channels_last = true;

    ModelConfig model_config() const;
    void validate() const;

    static TrainConfig from_map(const std::map<std::string, std::string>& values,
                                const std::string& origin = "config");
    static TrainConfig load(const std::filesystem::path& path);
    /// Round-trips through from_map.
    std::string to_text() const;
};

std::string to_string(CropPolicy p);

/// Validation-loss driven plateau logic: the LR halves after plateau_patience
/// consecutive epochs without strict improvement of the best loss (that counter
/// then restarts); training stops after stop_patience consecutive such epochs
/// (that counter only restarts on improvement).
struct ScheduleDecision {
    bool improved = false;
    bool halve = false;
    bool stop = false;
};

class PlateauSchedule {
public:
    PlateauSchedule(int plateau_patience, int stop_patience);
    ScheduleDecision update(double val_loss);

    double best = std::numeric_limits<double>::infinity();
    int since_improvement = 0;
    int plateau_counter = 0;

private:
    int plateau_patience_;
    int stop_patience_;
};

struct ScheduleTrace {
    std::vector<double> lr_after;  ///< learning rate in force after each epoch
    std::vector<int> halved_at;    ///< 1-based epochs that halved the LR
    int stopped_at = 0;            ///< 1-based epoch that triggered the stop, 0 if none
};

ScheduleTrace run_schedule(double lr0, const std::vector<double>& val_loss_history,
                           int plateau_patience = 3, int stop_patience = 12);

struct TrainState {
    int epoch = 0;  ///< completed epochs
    double lr = 1e-3;
    int halvings = 0;
    double best_val = std::numeric_limits<double>::infinity();
    int since_improvement = 0;
    int plateau_counter = 0;
    bool stopped = false;
    std::uint64_t steps = 0;
    std::string rng_state;  ///< serialized std::mt19937_64
};

/// Per-batch network predictions, all float32 on the CPU.
struct Predictions {
    BallPrediction global_ball;
    BallPrediction local_ball;
    torch::Tensor events;
    torch::Tensor segmentation;
    std::vector<CropWindow> crops;
};

/// Targets of one batch. Local targets depend on the crop and are filled in later.
struct Batch {
    std::vector<const TrainingItem*> items;
    torch::Tensor global_input;
    torch::Tensor global_x, global_y;
    torch::Tensor events;
    torch::Tensor seg, seg_valid;
    torch::Tensor local_x, local_y;
};

Batch make_batch(const std::vector<TrainingItem>& items, const TrainConfig& cfg);
/// Local inputs and targets for the given crop windows.
torch::Tensor fill_local(Batch& batch, const std::vector<CropWindow>& crops, const TrainConfig& cfg);

/// Something that maps a batch to predictions: the network or an oracle.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Predictions predict(Batch& batch) = 0;
};

/// Returns the targets themselves, with crops centred on the true ball.
class OraclePredictor final : public Predictor {
public:
    explicit OraclePredictor(const TrainConfig& cfg) : cfg_(cfg) {}
    Predictions predict(Batch& batch) override;

private:
    TrainConfig cfg_;
};

struct StepResult {
    std::array<double, 4> losses{};
    double aggregate = 0.0;
};

struct EpochStats {
    std::array<double, 4> losses{};
    double aggregate = 0.0;
    std::size_t samples = 0;
};

struct Evaluation {
    EvaluationReport report;
    MetricAccumulator metrics;
    std::array<double, 4> losses{};
    double loss = 0.0;  ///< aggregate with the current (frozen) loss weights
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;  ///< learning rate used during the epoch
    EpochStats train;
    Evaluation val;
    std::array<double, 4> weights{};
    ScheduleDecision decision;
    double seconds = 0.0;

    std::string log_line() const;
};

class Trainer {
public:
    explicit Trainer(TrainConfig cfg);

    const TrainConfig& config() const { return cfg_; }
    TTNet& model() { return model_; }
    torch::Tensor& log_vars() { return log_vars_; }
    TrainState& state() { return state_; }
    const TrainState& state() const { return state_; }
    std::mt19937_64& rng() { return rng_; }

    /// Forward with the training crop policy, four losses, aggregation, Adam update.
    StepResult train_step(const std::vector<TrainingItem>& items);
    EpochStats train_epoch(const SampleDataset& data);
    /// Dropout off, inference crop policy; oracle replaces the network when given.
    Evaluation evaluate(const SampleDataset& data, Predictor* oracle = nullptr);
    /// One epoch of training, validation and schedule bookkeeping.
    EpochRecord run_epoch(const SampleDataset& train, const SampleDataset& val);
    /// Epochs until early stop or max_epochs. Writes last.pt / best.pt and
    /// train.log under out_dir when it is non-empty.
    std::vector<EpochRecord> fit(const SampleDataset& train, const SampleDataset& val,
                                 const std::function<void(const EpochRecord&)>& on_epoch = {});

    void set_lr(double lr);
    void save_checkpoint(const std::filesystem::path& path);
    void load_checkpoint(const std::filesystem::path& path);

private:
    TaskLosses compute_losses(const Predictions& p, const Batch& b) const;
    Predictions run_network(Batch& batch, bool training);

    TrainConfig cfg_;
    TTNet model_{nullptr};
    torch::Tensor log_vars_;
    std::unique_ptr<torch::optim::Adam> optimizer_;
    TrainState state_;
    std::mt19937_64 rng_;
};

inline constexpr std::int64_t kCheckpointVersion = 1;

/// Network and its configuration read from a checkpoint, in eval mode.
struct LoadedModel {
    TTNet model{nullptr};
    ModelConfig config;
    torch::Tensor log_vars;
};

/// Throws CheckpointError for unreadable or incompatible files and
/// ResolutionMismatchError when expected is given and differs.
LoadedModel load_model(const std::filesystem::path& path,
                       const std::optional<ResolutionConfig>& expected = std::nullopt);

/// Network predictions for one batch with the inference crop policy.
Predictions predict_batch(TTNetImpl& model, Batch& batch, const TrainConfig& cfg);

/// Builds train/val datasets from the data keys of the config.
SampleDataset make_dataset(const TrainConfig& cfg, bool validation);

}  // namespace ttnet
