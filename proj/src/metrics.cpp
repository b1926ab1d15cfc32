#include "ttnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ttnet/error.hpp"

namespace ttnet {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

float max_of(std::span<const float> v) {
    return v.empty() ? 0.0f : *std::max_element(v.begin(), v.end());
}

std::size_t argmax_low(std::span<const float> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

void add_ball_to(BallCounts& c, std::span<const float> vx, std::span<const float> vy,
                 std::optional<PixelCoord> truth) {
    const bool predicted = decide_presence(vx, vy);
    if (predicted && truth) {
        ++c.tp;
        const PixelCoord p = predicted_center(vx, vy);
        const double dx = p.x - truth->x;
        const double dy = p.y - truth->y;
        const double d2 = dx * dx + dy * dy;
        ++c.matched;
        c.sum_sq_dist += d2;
        c.sum_dist += std::sqrt(d2);
    } else if (predicted) {
        ++c.fp;
    } else if (truth) {
        ++c.fn;
    } else {
        ++c.tn;
    }
}

void merge_counts(BallCounts& a, const BallCounts& b) {
    a.tp += b.tp;
    a.tn += b.tn;
    a.fp += b.fp;
    a.fn += b.fn;
    a.matched += b.matched;
    a.sum_sq_dist += b.sum_sq_dist;
    a.sum_dist += b.sum_dist;
}

}  // namespace

bool decide_presence(std::span<const float> vx, std::span<const float> vy, double threshold) {
    return max_of(vx) > threshold && max_of(vy) > threshold;
}

PixelCoord predicted_center(std::span<const float> vx, std::span<const float> vy,
                            double threshold) {
    if (!decide_presence(vx, vy, threshold)) {
        throw std::invalid_argument("predicted_center: no ball detected");
    }
    return {static_cast<int>(argmax_low(vx)), static_cast<int>(argmax_low(vy))};
}

bool pce_correct(double pred, double target) {
    return (pred > kEventThreshold) == (target > kEventThreshold);
}

bool spce_correct(double pred, double target, double tolerance) {
    return std::abs(pred - target) < tolerance;
}

double iou(std::span<const float> pred, std::span<const std::uint8_t> target) {
    if (pred.size() != target.size()) throw std::invalid_argument("iou: size mismatch");
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] > 0.5f;
        const bool t = target[i] != 0;
        inter += p && t;
        uni += p || t;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double ball_accuracy(const BallCounts& c) {
    if (c.total() == 0) throw std::invalid_argument("ball_accuracy: empty stream");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double ball_rmse(const BallCounts& c) {
    if (c.matched == 0) throw std::invalid_argument("ball_rmse: no true positives");
    return std::sqrt(c.sum_sq_dist / static_cast<double>(c.matched));
}

double ball_mean_distance(const BallCounts& c) {
    if (c.matched == 0) throw std::invalid_argument("ball_mean_distance: no true positives");
    return c.sum_dist / static_cast<double>(c.matched);
}

void MetricAccumulator::add_ball(BallScale scale, std::span<const float> vx,
                                 std::span<const float> vy, std::optional<PixelCoord> truth) {
    add_ball_to(scale == BallScale::global ? global_ : local_, vx, vy, truth);
}

void MetricAccumulator::add_events(const EventTarget& pred, const EventTarget& target) {
    for (EventType t : {EventType::bounce, EventType::net}) {
        ++event_total_;
        pce_hits_ += pce_correct(pred[t], target[t]);
        spce_hits_ += spce_correct(pred[t], target[t]);
    }
}

void MetricAccumulator::add_segmentation(SegClass cls, std::span<const float> pred,
                                         std::span<const std::uint8_t> target) {
    if (pred.size() != target.size()) {
        throw std::invalid_argument("add_segmentation: size mismatch");
    }
    const int k = static_cast<int>(cls);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] > 0.5f;
        const bool t = target[i] != 0;
        inter_[k] += p && t;
        union_[k] += p || t;
    }
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
    merge_counts(global_, other.global_);
    merge_counts(local_, other.local_);
    event_total_ += other.event_total_;
    pce_hits_ += other.pce_hits_;
    spce_hits_ += other.spce_hits_;
    for (int k = 0; k < kSegClasses; ++k) {
        inter_[k] += other.inter_[k];
        union_[k] += other.union_[k];
    }
}

double MetricAccumulator::pce() const {
    return event_total_ ? static_cast<double>(pce_hits_) / event_total_ : kNaN;
}

double MetricAccumulator::spce() const {
    return event_total_ ? static_cast<double>(spce_hits_) / event_total_ : kNaN;
}

double MetricAccumulator::iou(SegClass c) const {
    const int k = static_cast<int>(c);
    return union_[k] == 0 ? 1.0 : static_cast<double>(inter_[k]) / union_[k];
}

EvaluationReport EvaluationReport::from(const MetricAccumulator& acc) {
    auto safe = [](auto fn, const BallCounts& c) {
        try {
            return fn(c);
        } catch (const std::invalid_argument&) {
            return kNaN;
        }
    };
    const auto& g = acc.ball(BallScale::global);
    const auto& l = acc.ball(BallScale::local);
    EvaluationReport r;
    r.global_rmse_px = safe(ball_rmse, g);
    r.local_rmse_px = safe(ball_rmse, l);
    r.global_accuracy = safe(ball_accuracy, g);
    r.local_accuracy = safe(ball_accuracy, l);
    r.pce = acc.pce();
    r.spce = acc.spce();
    r.iou_human = acc.iou(SegClass::human);
    r.iou_table = acc.iou(SegClass::table);
    r.iou_scoreboard = acc.iou(SegClass::scoreboard);
    r.global_mean_dist_px = safe(ball_mean_distance, g);
    r.local_mean_dist_px = safe(ball_mean_distance, l);
    return r;
}

std::vector<std::pair<std::string, double>> EvaluationReport::entries() const {
    return {{"global_rmse_px", global_rmse_px},
            {"local_rmse_px", local_rmse_px},
            {"global_accuracy", global_accuracy},
            {"local_accuracy", local_accuracy},
            {"pce", pce},
            {"spce", spce},
            {"iou_human", iou_human},
            {"iou_table", iou_table},
            {"iou_scoreboard", iou_scoreboard},
            {"global_mean_dist_px", global_mean_dist_px},
            {"local_mean_dist_px", local_mean_dist_px}};
}

std::string EvaluationReport::to_text() const {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& [key, value] : entries()) out << key << '=' << value << '\n';
    return out.str();
}

std::map<std::string, double> EvaluationReport::parse_text(const std::string& text) {
    std::map<std::string, double> values;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string v = line.substr(eq + 1);
        values[line.substr(0, eq)] = v == "nan" ? kNaN : std::stod(v);
    }
    return values;
}

void EvaluationReport::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report " + path.string());
    out << to_text();
}

}  // namespace ttnet
