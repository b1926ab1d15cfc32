#include "ttnet/training.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ttnet/config.hpp"
#include "ttnet/error.hpp"

namespace ttnet {
namespace {

torch::Tensor vector_tensor(const std::vector<float>& v) {
    return torch::from_blob(const_cast<float*>(v.data()), {static_cast<std::int64_t>(v.size())},
                            torch::kFloat32)
        .clone();
}

torch::Tensor mask_tensor(const SegTarget& seg) {
    std::vector<torch::Tensor> maps;
    for (const auto& m : seg.masks) {
        maps.push_back(torch::from_blob(const_cast<std::uint8_t*>(m.data.data()), {m.height, m.width},
                                        torch::kUInt8)
                           .to(torch::kFloat32));
    }
    return torch::stack(maps);
}

std::vector<float> row(const torch::Tensor& t, std::int64_t i) {
    const auto r = t[i].contiguous().to(torch::kFloat32);
    return {r.data_ptr<float>(), r.data_ptr<float>() + r.numel()};
}

torch::Tensor to_memory_format(const torch::Tensor& t, bool channels_last) {
    return channels_last ? t.contiguous(at::MemoryFormat::ChannelsLast) : t;
}

Predictions forward(TTNetImpl& model, Batch& batch, const TrainConfig& cfg, std::mt19937_64* rng,
                    CropPolicy policy) {
    const auto& res = cfg.resolution;
    LocalInputFn make_local = [&](const BallPrediction& g, std::vector<CropWindow>& crops) {
        crops.clear();
        for (std::size_t i = 0; i < batch.items.size(); ++i) {
            const auto& ball = batch.items[i]->ball;
            if (policy == CropPolicy::ground_truth_jitter && ball && rng) {
                const double jx = std::uniform_int_distribution<int>(-cfg.jitter_x, cfg.jitter_x)(*rng);
                const double jy = std::uniform_int_distribution<int>(-cfg.jitter_y, cfg.jitter_y)(*rng);
                crops.push_back(make_crop_window({ball->x + jx, ball->y + jy}, res));
            } else {
                crops.push_back(predicted_crop(g, static_cast<std::int64_t>(i), res));
            }
        }
        return to_memory_format(fill_local(batch, crops, cfg), cfg.channels_last);
    };
    auto out = model.forward(to_memory_format(batch.global_input, cfg.channels_last), make_local);
    return {out.global_ball, out.local_ball, out.events, out.segmentation, out.crops};
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(9) << v;
    return s.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

c10::IValue read_value(torch::serialize::InputArchive& ar, const std::string& key) {
    c10::IValue v;
    if (!ar.try_read(key, v)) throw CheckpointError("checkpoint lacks '" + key + "'");
    return v;
}

struct CheckpointHeader {
    ModelConfig model;
};

void load_archive(torch::serialize::InputArchive& ar, const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) {
        throw CheckpointError("checkpoint " + path.string() + " does not exist");
    }
    try {
        ar.load_from(path.string());
    } catch (const c10::Error& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + first_line(e.what()));
    }
}

CheckpointHeader read_header(torch::serialize::InputArchive& ar, const std::filesystem::path& path) {
    try {
        const auto format = read_value(ar, "format");
        if (!format.isString() || format.toStringRef() != "ttnet-checkpoint") {
            throw CheckpointError(path.string() + " is not a ttnet checkpoint");
        }
        const auto version = read_value(ar, "version").toInt();
        if (version != kCheckpointVersion) {
            throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
        }
        torch::Tensor res;
        ar.read("resolution", res);
        if (res.numel() != 6) throw CheckpointError("checkpoint resolution entry is malformed");
        const auto r = res.to(torch::kInt64);
        CheckpointHeader h;
        h.model.resolution = {static_cast<int>(r[0].item<std::int64_t>()), static_cast<int>(r[1].item<std::int64_t>()),
                              static_cast<int>(r[2].item<std::int64_t>()), static_cast<int>(r[3].item<std::int64_t>()),
                              static_cast<int>(r[4].item<std::int64_t>()), static_cast<int>(r[5].item<std::int64_t>())};
        h.model.multiplier = read_value(ar, "multiplier").toDouble();
        h.model.conv_dropout = read_value(ar, "conv_dropout").toDouble();
        h.model.fc_dropout = read_value(ar, "fc_dropout").toDouble();
        return h;
    } catch (const c10::Error& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + first_line(e.what()));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// TrainConfig

std::string to_string(CropPolicy p) {
    return p == CropPolicy::ground_truth_jitter ? "ground_truth_jitter" : "predicted";
}

ModelConfig TrainConfig::model_config() const {
    ModelConfig m;
    m.resolution = resolution;
    m.multiplier = multiplier;
    m.conv_dropout = conv_dropout;
    m.fc_dropout = fc_dropout;
    return m;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (!(lr0 > 0)) fail("lr0 must be positive");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) fail("adam betas must be in [0, 1)");
    if (!(eps > 0)) fail("eps must be positive");
    if (plateau_patience <= 0 || stop_patience <= 0) fail("patiences must be positive");
    if (max_epochs <= 0) fail("max_epochs must be positive");
    if (batch_size <= 0) fail("batch_size must be positive");
    if (jitter_x < 0 || jitter_y < 0) fail("crop jitter must be non-negative");
    if (!(sigma_global > 0 && sigma_local > 0)) fail("target sigmas must be positive");
    if (!(negatives_ratio >= 0)) fail("negatives_ratio must be non-negative");
    if (!(grad_clip >= 0)) fail("grad_clip must be non-negative");
    if (threads < 1) fail("threads must be at least 1");
    try {
        model_config().validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& values, const std::string& origin) {
    TrainConfig c;
    ConfigReader r(values, origin);
    r.read("w0", c.resolution.w0);
    r.read("h0", c.resolution.h0);
    r.read("w1", c.resolution.w1);
    r.read("h1", c.resolution.h1);
    r.read("w2", c.resolution.w2);
    r.read("h2", c.resolution.h2);
    r.read("multiplier", c.multiplier);
    r.read("conv_dropout", c.conv_dropout);
    r.read("fc_dropout", c.fc_dropout);
    r.read("lr0", c.lr0);
    r.read("beta1", c.beta1);
    r.read("beta2", c.beta2);
    r.read("eps", c.eps);
    r.read("plateau_patience", c.plateau_patience);
    r.read("stop_patience", c.stop_patience);
    r.read("max_epochs", c.max_epochs);
    r.read("batch_size", c.batch_size);
    r.read("seed", c.seed);
    std::string strategy = c.strategy.name();
    r.read("strategy", strategy);
    c.strategy = LossStrategy::parse(strategy);
    std::string weights;
    r.read("manual_weights", weights);
    if (!weights.empty()) {
        std::istringstream in(weights);
        std::string item;
        std::size_t k = 0;
        while (std::getline(in, item, ',')) {
            if (k >= 4) throw ConfigError(origin + ": manual_weights takes four values");
            try {
                c.strategy.manual_weights[k++] = std::stod(item);
            } catch (const std::logic_error&) {
                throw ConfigError(origin + ": manual_weights entry '" + item + "' is not a number");
            }
        }
        if (k != 4) throw ConfigError(origin + ": manual_weights takes four values");
    }
    r.read("event_weight_bounce", c.event_weights.bounce);
    r.read("event_weight_net", c.event_weights.net);
    r.read("grad_clip", c.grad_clip);
    std::string policy = to_string(c.crop_policy);
    r.read("crop_policy", policy);
    if (policy == "ground_truth_jitter") {
        c.crop_policy = CropPolicy::ground_truth_jitter;
    } else if (policy == "predicted") {
        c.crop_policy = CropPolicy::predicted;
    } else {
        throw ConfigError(origin + ": crop_policy must be ground_truth_jitter or predicted");
    }
    r.read("jitter_x", c.jitter_x);
    r.read("jitter_y", c.jitter_y);
    r.read("sigma_global", c.sigma_global);
    r.read("sigma_local", c.sigma_local);
    r.read("train_dir", c.train_dir);
    r.read("val_dir", c.val_dir);
    r.read("synthetic_train_samples", c.synthetic_train_samples);
    r.read("synthetic_val_samples", c.synthetic_val_samples);
    r.read("synthetic_seed", c.synthetic_seed);
    r.read("max_train_samples", c.max_train_samples);
    r.read("max_val_samples", c.max_val_samples);
    r.read("negatives_ratio", c.negatives_ratio);
    r.read("augment", c.augment);
    r.read("out_dir", c.out_dir);
    r.read("threads", c.threads);
    r.read("channels_last", c.channels_last);
    r.reject_unknown();
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    return from_map(read_key_values(path), path.string());
}

std::string TrainConfig::to_text() const {
    std::ostringstream o;
    o << std::setprecision(17) << std::boolalpha;
    o << "w0 = " << resolution.w0 << "\nh0 = " << resolution.h0 << "\nw1 = " << resolution.w1
      << "\nh1 = " << resolution.h1 << "\nw2 = " << resolution.w2 << "\nh2 = " << resolution.h2 << '\n';
    o << "multiplier = " << multiplier << "\nconv_dropout = " << conv_dropout
      << "\nfc_dropout = " << fc_dropout << '\n';
    o << "lr0 = " << lr0 << "\nbeta1 = " << beta1 << "\nbeta2 = " << beta2 << "\neps = " << eps << '\n';
    o << "plateau_patience = " << plateau_patience << "\nstop_patience = " << stop_patience
      << "\nmax_epochs = " << max_epochs << "\nbatch_size = " << batch_size << "\nseed = " << seed << '\n';
    o << "strategy = " << strategy.name() << "\nmanual_weights = ";
    for (std::size_t k = 0; k < 4; ++k) o << (k ? "," : "") << strategy.manual_weights[k];
    o << "\nevent_weight_bounce = " << event_weights.bounce << "\nevent_weight_net = " << event_weights.net
      << "\ngrad_clip = " << grad_clip << '\n';
    o << "crop_policy = " << to_string(crop_policy) << "\njitter_x = " << jitter_x << "\njitter_y = " << jitter_y
      << "\nsigma_global = " << sigma_global << "\nsigma_local = " << sigma_local << '\n';
    if (!train_dir.empty()) o << "train_dir = " << train_dir << '\n';
    if (!val_dir.empty()) o << "val_dir = " << val_dir << '\n';
    o << "synthetic_train_samples = " << synthetic_train_samples
      << "\nsynthetic_val_samples = " << synthetic_val_samples << "\nsynthetic_seed = " << synthetic_seed
      << "\nmax_train_samples = " << max_train_samples << "\nmax_val_samples = " << max_val_samples
      << "\nnegatives_ratio = " << negatives_ratio << "\naugment = " << augment << '\n';
    o << "out_dir = " << out_dir << "\nthreads = " << threads << "\nchannels_last = " << channels_last << '\n';
    return o.str();
}

// ---------------------------------------------------------------------------
// Schedule

PlateauSchedule::PlateauSchedule(int plateau_patience, int stop_patience)
    : plateau_patience_(plateau_patience), stop_patience_(stop_patience) {
    if (plateau_patience <= 0 || stop_patience <= 0) {
        throw std::invalid_argument("schedule patiences must be positive");
    }
}

ScheduleDecision PlateauSchedule::update(double val_loss) {
    ScheduleDecision d;
    if (val_loss < best) {  // NaN never improves
        best = val_loss;
        since_improvement = 0;
        plateau_counter = 0;
        d.improved = true;
        return d;
    }
    ++since_improvement;
    if (++plateau_counter >= plateau_patience_) {
        d.halve = true;
        plateau_counter = 0;
    }
    d.stop = since_improvement >= stop_patience_;
    return d;
}

ScheduleTrace run_schedule(double lr0, const std::vector<double>& history, int plateau_patience,
                           int stop_patience) {
    if (history.empty()) throw std::invalid_argument("run_schedule: empty loss history");
    PlateauSchedule s(plateau_patience, stop_patience);
    ScheduleTrace trace;
    double lr = lr0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto d = s.update(history[i]);
        const int epoch = static_cast<int>(i) + 1;
        if (d.halve) {
            lr /= 2;
            trace.halved_at.push_back(epoch);
        }
        trace.lr_after.push_back(lr);
        if (d.stop) {
            trace.stopped_at = epoch;
            break;
        }
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Batches

Batch make_batch(const std::vector<TrainingItem>& items, const TrainConfig& cfg) {
    if (items.empty()) throw std::invalid_argument("make_batch: empty batch");
    const auto& r = cfg.resolution;
    Batch b;
    std::vector<torch::Tensor> inputs, gx, gy, events, seg, valid;
    for (const auto& item : items) {
        b.items.push_back(&item);
        inputs.push_back(global_input(*item.frames, r));
        std::optional<PixelCoord> center;
        if (item.ball) {
            const GlobalCoord g = full_to_global(*item.ball, r);
            center = PixelCoord{g.x1, g.y1};
        }
        const BallTarget t = build_ball_target(center, r.w1, r.h1, cfg.sigma_global);
        gx.push_back(vector_tensor(t.vx));
        gy.push_back(vector_tensor(t.vy));
        events.push_back(torch::tensor({static_cast<float>(item.event.bounce), static_cast<float>(item.event.net)}));
        if (item.seg) {
            seg.push_back(mask_tensor(*item.seg));
            valid.push_back(torch::ones({}, torch::kFloat32));
        } else {
            seg.push_back(torch::zeros({kSegClasses, r.h1, r.w1}));
            valid.push_back(torch::zeros({}, torch::kFloat32));
        }
    }
    b.global_input = torch::stack(inputs);
    b.global_x = torch::stack(gx);
    b.global_y = torch::stack(gy);
    b.events = torch::stack(events);
    b.seg = torch::stack(seg);
    b.seg_valid = torch::stack(valid);
    return b;
}

torch::Tensor fill_local(Batch& batch, const std::vector<CropWindow>& crops, const TrainConfig& cfg) {
    if (crops.size() != batch.items.size()) throw std::invalid_argument("fill_local: one crop per item");
    const auto& r = cfg.resolution;
    std::vector<torch::Tensor> inputs, lx, ly;
    for (std::size_t i = 0; i < crops.size(); ++i) {
        const TrainingItem& item = *batch.items[i];
        inputs.push_back(local_input(*item.frames, crops[i]));
        std::optional<PixelCoord> center;
        if (item.ball) {
            if (auto l = full_to_local(crops[i], *item.ball)) center = PixelCoord{l->x2, l->y2};
        }
        const BallTarget t = build_ball_target(center, r.w2, r.h2, cfg.sigma_local);
        lx.push_back(vector_tensor(t.vx));
        ly.push_back(vector_tensor(t.vy));
    }
    batch.local_x = torch::stack(lx);
    batch.local_y = torch::stack(ly);
    return torch::stack(inputs);
}

Predictions OraclePredictor::predict(Batch& batch) {
    std::vector<CropWindow> crops;
    const auto& r = cfg_.resolution;
    for (const auto* item : batch.items) {
        const PointF c = item->ball ? PointF{static_cast<double>(item->ball->x), static_cast<double>(item->ball->y)}
                                    : PointF{r.w0 / 2.0, r.h0 / 2.0};
        crops.push_back(make_crop_window(c, r));
    }
    fill_local(batch, crops, cfg_);
    return {{batch.global_x, batch.global_y}, {batch.local_x, batch.local_y}, batch.events, batch.seg, crops};
}

Predictions predict_batch(TTNetImpl& model, Batch& batch, const TrainConfig& cfg) {
    torch::NoGradGuard no_grad;
    return forward(model, batch, cfg, nullptr, CropPolicy::predicted);
}

// ---------------------------------------------------------------------------
// Trainer

std::string EpochRecord::log_line() const {
    std::ostringstream o;
    o << "epoch=" << epoch << " lr=" << fmt(lr);
    for (std::size_t k = 0; k < 4; ++k) o << ' ' << kTaskNames[k] << '=' << fmt(train.losses[k]);
    o << " aggregate=" << fmt(train.aggregate) << " val_loss=" << fmt(val.loss);
    for (std::size_t k = 0; k < 4; ++k) o << " weight_" << kTaskNames[k] << '=' << fmt(weights[k]);
    for (const auto& [key, value] : val.report.entries()) o << " val_" << key << '=' << fmt(value);
    o << " improved=" << decision.improved << " halved=" << decision.halve << " stop=" << decision.stop
      << " seconds=" << fmt(seconds);
    return o.str();
}

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    at::set_num_threads(cfg_.threads);
    torch::manual_seed(cfg_.seed);
    rng_.seed(cfg_.seed);
    model_ = TTNet(cfg_.model_config());
    if (cfg_.channels_last) model_->use_channels_last();
    log_vars_ = torch::zeros({4}, torch::TensorOptions().dtype(torch::kFloat32).requires_grad(true));
    auto params = model_->parameters();
    params.push_back(log_vars_);
    optimizer_ = std::make_unique<torch::optim::Adam>(
        params, torch::optim::AdamOptions(cfg_.lr0).betas({cfg_.beta1, cfg_.beta2}).eps(cfg_.eps));
    state_.lr = cfg_.lr0;
}

void Trainer::set_lr(double lr) {
    state_.lr = lr;
    for (auto& group : optimizer_->param_groups()) {
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
}

TaskLosses Trainer::compute_losses(const Predictions& p, const Batch& b) const {
    TaskLosses l;
    l.ball_global = ball_loss(p.global_ball.x, p.global_ball.y, b.global_x, b.global_y);
    l.ball_local = ball_loss(p.local_ball.x, p.local_ball.y, b.local_x, b.local_y);
    l.event = event_loss(p.events, b.events, cfg_.event_weights);
    l.segmentation = segmentation_loss(p.segmentation, b.seg, b.seg_valid);
    return l;
}

Predictions Trainer::run_network(Batch& batch, bool training) {
    return forward(*model_, batch, cfg_, training ? &rng_ : nullptr,
                   training ? cfg_.crop_policy : CropPolicy::predicted);
}

StepResult Trainer::train_step(const std::vector<TrainingItem>& items) {
    model_->train();
    Batch batch = make_batch(items, cfg_);
    const Predictions p = run_network(batch, true);
    const TaskLosses losses = compute_losses(p, batch);
    const torch::Tensor total = aggregate_losses(losses, cfg_.strategy, log_vars_);
    StepResult r;
    r.losses = losses.values();
    r.aggregate = total.item<double>();
    const bool finite = std::isfinite(r.aggregate) &&
                        std::all_of(r.losses.begin(), r.losses.end(), [](double v) { return std::isfinite(v); });
    if (!finite) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << state_.steps << ":";
        for (std::size_t k = 0; k < 4; ++k) msg << ' ' << kTaskNames[k] << '=' << r.losses[k];
        msg << " aggregate=" << r.aggregate << " batch=[";
        for (std::size_t i = 0; i < items.size(); ++i) msg << (i ? " " : "") << items[i].id;
        msg << ']';
        throw NonFiniteLossError(msg.str());
    }
    optimizer_->zero_grad();
    total.backward();
    if (cfg_.grad_clip > 0) {
        auto params = model_->parameters();
        params.push_back(log_vars_);
        torch::nn::utils::clip_grad_norm_(params, cfg_.grad_clip);
    }
    optimizer_->step();
    ++state_.steps;
    return r;
}

EpochStats Trainer::train_epoch(const SampleDataset& data) {
    if (data.size() == 0) throw std::invalid_argument("training split is empty");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    EpochStats stats;
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
        std::vector<TrainingItem> items;
        for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
            items.push_back(data.item(order[i], &rng_));
        }
        const StepResult r = train_step(items);
        const auto n = static_cast<double>(items.size());
        for (std::size_t k = 0; k < 4; ++k) stats.losses[k] += r.losses[k] * n;
        stats.aggregate += r.aggregate * n;
        stats.samples += items.size();
    }
    for (auto& v : stats.losses) v /= static_cast<double>(stats.samples);
    stats.aggregate /= static_cast<double>(stats.samples);
    return stats;
}

Evaluation Trainer::evaluate(const SampleDataset& data, Predictor* oracle) {
    if (data.size() == 0) throw std::invalid_argument("evaluation split is empty");
    model_->eval();
    torch::NoGradGuard no_grad;
    Evaluation ev;
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    const auto& r = cfg_.resolution;
    const torch::Tensor frozen = log_vars_.detach();
    for (std::size_t start = 0; start < data.size(); start += bs) {
        std::vector<TrainingItem> items;
        for (std::size_t i = start; i < std::min(data.size(), start + bs); ++i) items.push_back(data.item(i));
        Batch batch = make_batch(items, cfg_);
        const Predictions p = oracle ? oracle->predict(batch) : run_network(batch, false);
        const TaskLosses losses = compute_losses(p, batch);
        const auto values = losses.values();
        const auto n = static_cast<double>(items.size());
        for (std::size_t k = 0; k < 4; ++k) ev.losses[k] += values[k] * n;
        ev.loss += aggregate_losses(losses, cfg_.strategy, frozen).item<double>() * n;

        const auto seg = p.segmentation.contiguous().to(torch::kFloat32);
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto b = static_cast<std::int64_t>(i);
            const TrainingItem& item = items[i];
            std::optional<PixelCoord> global_truth, local_truth;
            if (item.ball) {
                const GlobalCoord g = full_to_global(*item.ball, r);
                global_truth = PixelCoord{g.x1, g.y1};
                if (auto l = full_to_local(p.crops[i], *item.ball)) local_truth = PixelCoord{l->x2, l->y2};
            }
            ev.metrics.add_ball(BallScale::global, row(p.global_ball.x, b), row(p.global_ball.y, b), global_truth);
            ev.metrics.add_ball(BallScale::local, row(p.local_ball.x, b), row(p.local_ball.y, b), local_truth);
            const auto e = p.events[b].to(torch::kFloat64);
            ev.metrics.add_events({e[0].item<double>(), e[1].item<double>()}, item.event);
            if (item.seg) {
                for (int k = 0; k < kSegClasses; ++k) {
                    const auto map = seg[b][k].contiguous();
                    const std::span<const float> pred(map.data_ptr<float>(), static_cast<std::size_t>(map.numel()));
                    ev.metrics.add_segmentation(static_cast<SegClass>(k), pred, item.seg->masks[static_cast<std::size_t>(k)].data);
                }
            }
        }
    }
    for (auto& v : ev.losses) v /= static_cast<double>(data.size());
    ev.loss /= static_cast<double>(data.size());
    ev.report = EvaluationReport::from(ev.metrics);
    return ev;
}

EpochRecord Trainer::run_epoch(const SampleDataset& train, const SampleDataset& val) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = state_.epoch + 1;
    rec.lr = state_.lr;
    rec.train = train_epoch(train);
    rec.val = evaluate(val);
    rec.weights = component_weights(cfg_.strategy, log_vars_.detach());

    PlateauSchedule s(cfg_.plateau_patience, cfg_.stop_patience);
    s.best = state_.best_val;
    s.since_improvement = state_.since_improvement;
    s.plateau_counter = state_.plateau_counter;
    rec.decision = s.update(rec.val.loss);
    state_.best_val = s.best;
    state_.since_improvement = s.since_improvement;
    state_.plateau_counter = s.plateau_counter;
    if (rec.decision.halve) {
        set_lr(state_.lr / 2);
        ++state_.halvings;
    }
    state_.stopped = rec.decision.stop;
    state_.epoch = rec.epoch;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

std::vector<EpochRecord> Trainer::fit(const SampleDataset& train, const SampleDataset& val,
                                      const std::function<void(const EpochRecord&)>& on_epoch) {
    namespace fs = std::filesystem;
    std::vector<EpochRecord> records;
    std::ofstream log;
    if (!cfg_.out_dir.empty()) {
        fs::create_directories(cfg_.out_dir);
        log.open(fs::path(cfg_.out_dir) / "train.log", std::ios::app);
        if (!log) throw IoError("cannot write " + (fs::path(cfg_.out_dir) / "train.log").string());
    }
    while (!state_.stopped && state_.epoch < cfg_.max_epochs) {
        EpochRecord rec = run_epoch(train, val);
        if (!cfg_.out_dir.empty()) {
            save_checkpoint(fs::path(cfg_.out_dir) / "last.pt");
            if (rec.decision.improved) save_checkpoint(fs::path(cfg_.out_dir) / "best.pt");
            log << rec.log_line() << std::endl;
        }
        if (on_epoch) on_epoch(rec);
        records.push_back(std::move(rec));
    }
    return records;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) {
    torch::serialize::OutputArchive ar;
    ar.write("format", c10::IValue(std::string("ttnet-checkpoint")));
    ar.write("version", c10::IValue(kCheckpointVersion));
    const auto& r = cfg_.resolution;
    ar.write("resolution", torch::tensor({r.w0, r.h0, r.w1, r.h1, r.w2, r.h2}, torch::kInt64));
    ar.write("multiplier", c10::IValue(cfg_.multiplier));
    ar.write("conv_dropout", c10::IValue(cfg_.conv_dropout));
    ar.write("fc_dropout", c10::IValue(cfg_.fc_dropout));

    torch::serialize::OutputArchive model_ar;
    model_->save(model_ar);
    ar.write("model", model_ar);
    ar.write("log_vars", log_vars_.detach());
    torch::serialize::OutputArchive opt_ar;
    optimizer_->save(opt_ar);
    ar.write("optimizer", opt_ar);

    ar.write("epoch", c10::IValue(static_cast<std::int64_t>(state_.epoch)));
    ar.write("lr", c10::IValue(state_.lr));
    ar.write("halvings", c10::IValue(static_cast<std::int64_t>(state_.halvings)));
    ar.write("best_val", c10::IValue(state_.best_val));
    ar.write("since_improvement", c10::IValue(static_cast<std::int64_t>(state_.since_improvement)));
    ar.write("plateau_counter", c10::IValue(static_cast<std::int64_t>(state_.plateau_counter)));
    ar.write("stopped", c10::IValue(state_.stopped));
    ar.write("steps", c10::IValue(static_cast<std::int64_t>(state_.steps)));
    std::ostringstream rng;
    rng << rng_;
    ar.write("rng", c10::IValue(rng.str()));
    ar.write("torch_rng", at::detail::getDefaultCPUGenerator().get_state());

    const auto tmp = path.string() + ".tmp";
    try {
        ar.save_to(tmp);
    } catch (const c10::Error& e) {
        throw IoError("cannot write checkpoint " + path.string() + ": " + first_line(e.what()));
    }
    std::filesystem::rename(tmp, path);
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
    torch::serialize::InputArchive ar;
    load_archive(ar, path);
    const CheckpointHeader h = read_header(ar, path);
    if (!(h.model.resolution == cfg_.resolution)) {
        throw ResolutionMismatchError("checkpoint " + path.string() + " uses " + h.model.resolution.describe() +
                                      ", config uses " + cfg_.resolution.describe());
    }
    if (h.model.multiplier != cfg_.multiplier) {
        throw CheckpointError("checkpoint multiplier " + fmt(h.model.multiplier) + " differs from config " +
                              fmt(cfg_.multiplier));
    }
    try {
        torch::NoGradGuard no_grad;
        torch::serialize::InputArchive model_ar;
        ar.read("model", model_ar);
        model_->load(model_ar);
        torch::Tensor lv;
        ar.read("log_vars", lv);
        log_vars_.copy_(lv);
        torch::serialize::InputArchive opt_ar;
        ar.read("optimizer", opt_ar);
        optimizer_->load(opt_ar);
        state_.epoch = static_cast<int>(read_value(ar, "epoch").toInt());
        set_lr(read_value(ar, "lr").toDouble());
        state_.halvings = static_cast<int>(read_value(ar, "halvings").toInt());
        state_.best_val = read_value(ar, "best_val").toDouble();
        state_.since_improvement = static_cast<int>(read_value(ar, "since_improvement").toInt());
        state_.plateau_counter = static_cast<int>(read_value(ar, "plateau_counter").toInt());
        state_.stopped = read_value(ar, "stopped").toBool();
        state_.steps = static_cast<std::uint64_t>(read_value(ar, "steps").toInt());
        state_.rng_state = read_value(ar, "rng").toStringRef();
        std::istringstream rng(state_.rng_state);
        rng >> rng_;
        if (!rng) throw CheckpointError("checkpoint RNG state is malformed");
        torch::Tensor gen;
        ar.read("torch_rng", gen);
        auto g = at::detail::getDefaultCPUGenerator();
        std::lock_guard<std::mutex> lock(g.mutex());
        g.set_state(gen);
    } catch (const c10::Error& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + first_line(e.what()));
    }
    // Parameters come back in the saved layout; restore the working layout.
    if (cfg_.channels_last) model_->use_channels_last();
}

LoadedModel load_model(const std::filesystem::path& path, const std::optional<ResolutionConfig>& expected) {
    torch::serialize::InputArchive ar;
    load_archive(ar, path);
    const CheckpointHeader h = read_header(ar, path);
    if (expected && !(*expected == h.model.resolution)) {
        throw ResolutionMismatchError("checkpoint " + path.string() + " uses " + h.model.resolution.describe() +
                                      ", requested " + expected->describe());
    }
    LoadedModel m;
    m.config = h.model;
    try {
        m.config.validate();
        m.model = TTNet(m.config);
        torch::NoGradGuard no_grad;
        torch::serialize::InputArchive model_ar;
        ar.read("model", model_ar);
        m.model->load(model_ar);
        ar.read("log_vars", m.log_vars);
    } catch (const c10::Error& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + first_line(e.what()));
    } catch (const std::invalid_argument& e) {
        throw CheckpointError("checkpoint " + path.string() + " holds an invalid model: " + e.what());
    }
    m.model->eval();
    return m;
}

SampleDataset make_dataset(const TrainConfig& cfg, bool validation) {
    DatasetOptions options;
    options.resolution = cfg.resolution;
    options.augment = cfg.augment && !validation;
    const std::size_t cap = validation ? cfg.max_val_samples : cfg.max_train_samples;
    if (!cfg.train_dir.empty()) {
        const std::string& dir = validation ? cfg.val_dir : cfg.train_dir;
        if (dir.empty()) throw ConfigError("config: val_dir is required when train_dir is set");
        LoadOptions load;
        load.fail_fast = false;
        const AnnotationSet set = load_annotations(dir, load);
        SampleIndex index = build_sample_index(set, cfg.negatives_ratio, cfg.seed);
        SampleDataset data(open_clips(set), std::move(index), options);
        if (cap) data.truncate(cap, cfg.seed);
        if (data.size() == 0) {
            throw InputError(dir + " yields no samples (" + std::to_string(set.clips.size()) + " clips, " +
                             std::to_string(set.diagnostics.size()) + " diagnostics)");
        }
        return data;
    }
    const std::size_t n = validation ? cfg.synthetic_val_samples : cfg.synthetic_train_samples;
    if (n == 0) {
        throw ConfigError(std::string("config: no ") + (validation ? "validation" : "training") +
                          " data; set train_dir/val_dir or synthetic_" + (validation ? "val" : "train") + "_samples");
    }
    SceneOptions scene;
    scene.width = cfg.resolution.w0;
    scene.height = cfg.resolution.h0;
    scene.global_width = cfg.resolution.w1;
    scene.global_height = cfg.resolution.h1;
    // Disjoint clip seeds for the two splits.
    const std::uint64_t seed = cfg.synthetic_seed * 1000003ULL + (validation ? 500000ULL : 0ULL);
    return make_synthetic_dataset(scene, cap ? std::min(cap, n) : n, seed, options, cfg.negatives_ratio);
}

}  // namespace ttnet
