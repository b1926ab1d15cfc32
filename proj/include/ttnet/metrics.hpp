#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "ttnet/geometry.hpp"
#include "ttnet/targets.hpp"

namespace ttnet {

inline constexpr double kPresenceThreshold = 0.5;
inline constexpr double kEventThreshold = 0.5;
inline constexpr double kSpceTolerance = 0.25;

/// Ball present iff both vectors have at least one entry above the threshold.
bool decide_presence(std::span<const float> vx, std::span<const float> vy,
                     double threshold = kPresenceThreshold);

/// (argmax vx, argmax vy), ties to the lower index. Rejects absent predictions.
PixelCoord predicted_center(std::span<const float> vx, std::span<const float> vy,
                            double threshold = kPresenceThreshold);

/// Same side of 0.5 after thresholding both values.
bool pce_correct(double pred, double target);
/// |pred - target| < tolerance.
bool spce_correct(double pred, double target, double tolerance = kSpceTolerance);

/// |P & T| / |P | T| of a map thresholded at 0.5 against a binary map;
/// 1.0 when both are empty.
double iou(std::span<const float> pred, std::span<const std::uint8_t> target);

enum class BallScale { global, local };

struct BallCounts {
    std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::int64_t matched = 0;  ///< true positives that contributed a distance
    double sum_sq_dist = 0.0;
    double sum_dist = 0.0;

    std::int64_t total() const { return tp + tn + fp + fn; }
};

/// (tp + tn) / total; rejects an empty stream.
double ball_accuracy(const BallCounts& c);
/// sqrt(mean squared Euclidean distance) over true positives; rejects zero matches.
double ball_rmse(const BallCounts& c);
/// Mean Euclidean distance over true positives.
double ball_mean_distance(const BallCounts& c);

/// Running sums for every evaluation metric. Single writer; merge shards explicitly.
class MetricAccumulator {
public:
    void add_ball(BallScale scale, std::span<const float> vx, std::span<const float> vy,
                  std::optional<PixelCoord> truth);
    void add_events(const EventTarget& pred, const EventTarget& target);
    void add_segmentation(SegClass cls, std::span<const float> pred,
                          std::span<const std::uint8_t> target);
    void merge(const MetricAccumulator& other);

    const BallCounts& ball(BallScale scale) const {
        return scale == BallScale::global ? global_ : local_;
    }
    std::int64_t event_total() const { return event_total_; }
    std::int64_t pce_hits() const { return pce_hits_; }
    std::int64_t spce_hits() const { return spce_hits_; }
    std::int64_t intersection(SegClass c) const { return inter_[static_cast<int>(c)]; }
    std::int64_t union_count(SegClass c) const { return union_[static_cast<int>(c)]; }

    double pce() const;
    double spce() const;
    /// Dataset-level IoU (summed intersections over summed unions); 1.0 if never seen.
    double iou(SegClass c) const;

private:
    BallCounts global_;
    BallCounts local_;
    std::int64_t event_total_ = 0;
    std::int64_t pce_hits_ = 0;
    std::int64_t spce_hits_ = 0;
    std::array<std::int64_t, kSegClasses> inter_{};
    std::array<std::int64_t, kSegClasses> union_{};
};

/// Flat key=value evaluation report. Undefined metrics are NaN.
struct EvaluationReport {
    double global_rmse_px = 0.0;
    double local_rmse_px = 0.0;
    double global_accuracy = 0.0;
    double local_accuracy = 0.0;
    double pce = 0.0;
    double spce = 0.0;
    double iou_human = 0.0;
    double iou_table = 0.0;
    double iou_scoreboard = 0.0;
    double global_mean_dist_px = 0.0;
    double local_mean_dist_px = 0.0;

    static EvaluationReport from(const MetricAccumulator& acc);
    double mean_iou() const { return (iou_human + iou_table + iou_scoreboard) / 3.0; }

    /// Ordered key/value pairs; the first nine are the required report keys.
    std::vector<std::pair<std::string, double>> entries() const;
    std::string to_text() const;
    static std::map<std::string, double> parse_text(const std::string& text);
    void write(const std::filesystem::path& path) const;
};

}  // namespace ttnet
