#include "bci/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bci/error.hpp"

namespace bci {

std::string_view to_string(Phase p) noexcept {
    switch (p) {
        case Phase::Training: return "training";
        case Phase::Demo: return "demo";
        case Phase::Record: return "record";
        case Phase::Control: return "control";
    }
    return "?";
}

Phase parse_phase(std::string_view s) {
    for (auto p : {Phase::Training, Phase::Demo, Phase::Record, Phase::Control}) {
        if (s == to_string(p)) return p;
    }
    raise(ErrorKind::InvalidArgument, "unknown phase '" + std::string(s) + "'");
}

void SessionPlan::validate() const {
    if (!(training_s > 0 && demo_s > 0 && record_s > 0 && control_s > 0)) {
        raise(ErrorKind::InvalidArgument, "phase durations must be positive");
    }
}

double SessionPlan::duration(Phase p) const {
    switch (p) {
        case Phase::Training: return training_s;
        case Phase::Demo: return demo_s;
        case Phase::Record: return record_s;
        case Phase::Control: return control_s;
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Key drivers

void press_towards(ClassLabel target, double t, KeyLog& log) {
    const bool want[2] = {includes_left(target), includes_right(target)};
    for (auto k : {Key::Left, Key::Right}) {
        const bool w = want[static_cast<std::size_t>(k)];
        if (log.is_down(k) != w) log.append({t, k, w ? KeyAction::Down : KeyAction::Up});
    }
}

ScriptedPlayer::ScriptedPlayer(std::uint64_t seed, PlayerConfig cfg) : cfg_(cfg), rng_(seed) {
    if (!(cfg_.cue_min_s > 0 && cfg_.cue_max_s >= cfg_.cue_min_s)) {
        raise(ErrorKind::InvalidArgument, "cue durations must satisfy 0 < min <= max");
    }
}

ClassLabel ScriptedPlayer::next_cue() {
    if (block_.empty()) {
        block_.assign(kAllLabels.begin(), kAllLabels.end());
        rng_.shuffle(block_);
    }
    const auto c = block_.back();
    block_.pop_back();
    return c;
}

void ScriptedPlayer::on_tick(double t, Phase phase, const GameState& game, KeyLog& log) {
    ClassLabel target = ClassLabel::None;
    if (is_keyed(phase)) {
        if (t >= cue_end_) {
            cue_ = next_cue();
            cue_end_ = t + rng_.uniform(cfg_.cue_min_s, cfg_.cue_max_s);
        }
        target = cue_;
    } else {
        cue_end_ = -1.0;
        const double dx = game.box_x - game.bar_x;
        if (dx < -cfg_.align_tolerance) target = ClassLabel::Left;
        if (dx > cfg_.align_tolerance) target = ClassLabel::Right;
    }
    press_towards(target, t, log);
}

void QueuedKeys::push(Key key, KeyAction action) {
    std::lock_guard lock(mu_);
    queue_.emplace_back(key, action);
}

void QueuedKeys::on_tick(double t, Phase, const GameState&, KeyLog& log) {
    std::vector<std::pair<Key, KeyAction>> batch;
    {
        std::lock_guard lock(mu_);
        batch.swap(queue_);
    }
    for (const auto& [k, a] : batch) {
        if (log.append_lenient({t, k, a})) {
            ++accepted_;
        } else {
            ++rejected_;
        }
    }
}

// ---------------------------------------------------------------------------

Predictor model_predictor(const Classifier& model) {
    return [&model](const FeatureVector& fv) { return model.predict_proba(fv); };
}

Predictor constant_predictor(ClassLabel label) {
    return [label](const FeatureVector&) {
        std::array<double, kNumClasses> p{};
        p[index_of(label)] = 1.0;
        return p;
    };
}

SourceFactory make_source_factory(const SourceSpec& spec, const SamplingConfig& sampling) {
    return [spec, sampling](LabelProvider labels) { return open_source(spec, sampling, std::move(labels)); };
}

namespace {

const SamplingConfig& adopt_sampling(EngineConfig& cfg, const SampleSource& source) {
    cfg.sampling = source.config();
    return cfg.sampling;
}

}  // namespace

SessionEngine::SessionEngine(const SourceFactory& factory, EngineConfig cfg, KeyDriver& keys,
                             std::string session_id, SessionObservers observers)
    : cfg_(std::move(cfg)),
      keys_(keys),
      session_id_(std::move(session_id)),
      obs_(std::move(observers)),
      key_bits_(std::make_shared<std::atomic<std::uint8_t>>(0)),
      source_(factory([bits = key_bits_] { return static_cast<ClassLabel>(bits->load() & 3); })),
      pipeline_(adopt_sampling(cfg_, *source_), cfg_.filter, cfg_.window),
      game_rng_(derive_seed(cfg_.seed, 0x6761u)) {
    cfg_.game.validate();
    cfg_.montage.validate(cfg_.sampling.channel_count);
    if (cfg_.realtime_factor > 0) {
        const auto cap = static_cast<std::size_t>(std::ceil(4.0 * cfg_.sampling.sample_rate));
        fifo_ = std::make_unique<SampleFifo>(cap);
        acq_ = std::make_unique<AcquisitionThread>(std::move(source_), *fifo_, cfg_.realtime_factor);
    }
}

SessionEngine::~SessionEngine() {
    if (acq_) acq_->stop();
}

std::optional<RawSample> SessionEngine::next_sample() {
    if (pending_) {
        auto s = std::move(pending_);
        pending_.reset();
        return s;
    }
    if (fifo_) return fifo_->pop();
    return source_->next();
}

void SessionEngine::sync_keys() {
    const std::uint8_t bits = static_cast<std::uint8_t>(label_from_keys(key_log_.is_down(Key::Left),
                                                                        key_log_.is_down(Key::Right)));
    key_bits_->store(bits);
}

PhaseResult SessionEngine::run_phase(Phase phase, double duration_s, const Predictor* predictor) {
    if (!(duration_s > 0)) raise(ErrorKind::InvalidArgument, "phase duration must be positive");
    const bool keyed = is_keyed(phase);
    if (!keyed && !predictor) raise(ErrorKind::NotTrained, std::string(to_string(phase)) + " phase needs a model");

    PhaseResult res;
    res.phase = phase;
    res.start_t = now_;
    const double end = now_ + duration_s;
    const double tick_dt = 1.0 / cfg_.game.tick_hz;

    game_ = new_game(cfg_.game, game_rng_);
    game_.t = now_;
    CommandSmoother smoother(cfg_.smoothing);
    LatestValue<Command> mailbox;
    if (obs_.on_phase) obs_.on_phase(phase, duration_s);
    if (obs_.on_quality) obs_.on_quality(pipeline_.railed());

    auto tick = [&](double t) {
        keys_.on_tick(t, phase, game_, key_log_);
        sync_keys();
        Command cmd;
        if (keyed) {
            cmd = {label_from_keys(key_log_.is_down(Key::Left), key_log_.is_down(Key::Right)), CommandSource::Keys};
        } else {
            cmd = mailbox.get().value_or(Command{ClassLabel::None, CommandSource::Model});
        }
        game_ = game_step(game_, cmd, tick_dt, game_rng_, cfg_.game);
        game_.t = t + tick_dt;
        res.commands.push_back({t, cmd});
        if (obs_.on_tick) obs_.on_tick(phase, std::max(0.0, end - t), game_);
    };

    for (;;) {
        auto s = next_sample();
        if (!s) {
            raise(ErrorKind::SourceLost, "sample stream ended at t=" + std::to_string(now_) + " before " +
                                             std::string(to_string(phase)) + " phase end at t=" +
                                             std::to_string(end));
        }
        if (s->t >= end) {
            pending_ = std::move(s);
            break;
        }
        for (;;) {
            const double tt = static_cast<double>(tick_index_) / cfg_.game.tick_hz;
            if (tt > s->t) break;
            ++tick_index_;
            if (tt >= res.start_t) tick(tt);
        }
        now_ = s->t;
        auto fv = pipeline_.push(std::move(*s));
        if (!fv || fv->t < kTransientSeconds) continue;

        if (obs_.on_quality) {
            auto railed = pipeline_.railed();
            if (railed != railed_) {
                railed_ = railed;
                obs_.on_quality(railed_);
            }
        }
        const auto key_label = label_at(key_log_, fv->t);
        if (keyed) {
            LabeledExample ex;
            ex.t = fv->t;
            ex.label = key_label;
            ex.session_id = session_id_;
            ex.features = std::move(*fv);
            res.frames.push_back(std::move(ex));
        } else {
            const auto probs = (*predictor)(*fv);
            const auto cmd = command_from_prediction(probs, &smoother);
            mailbox.set(cmd);
            ++res.predictions;
            if (cmd.action == key_label) ++res.agreements;
        }
    }
    // remaining ticks up to the phase end
    for (;;) {
        const double tt = static_cast<double>(tick_index_) / cfg_.game.tick_hz;
        if (tt >= end) break;
        ++tick_index_;
        if (tt >= res.start_t) tick(tt);
    }
    now_ = end;
    res.end_t = end;
    res.game = game_;
    return res;
}

SessionRecord SessionEngine::make_record(std::vector<LabeledExample> frames, SessionMetrics metrics,
                                         std::string phase) const {
    SessionRecord r;
    r.header = make_header(session_id_, cfg_.sampling, pipeline_.cascade(), cfg_.window, cfg_.seed);
    r.header.montage = cfg_.montage;
    r.header.subject_id = "synthetic";
    r.header.source = source_desc_;
    r.header.phase = std::move(phase);
    r.frames = std::move(frames);
    r.key_log = key_log_;
    r.metrics = metrics;
    return r;
}

// ---------------------------------------------------------------------------
// Protocols

SessionRecord run_training_session(const EngineConfig& cfg, const SourceFactory& factory, KeyDriver& keys,
                                   const SessionPlan& plan, std::string session_id, SessionObservers observers) {
    plan.validate();
    SessionEngine engine(factory, cfg, keys, std::move(session_id), std::move(observers));
    auto res = engine.run_phase(Phase::Training, plan.training_s);
    SessionMetrics m;
    m.boxes_caught = res.game.score;
    m.max_streak = res.game.max_streak;
    return engine.make_record(std::move(res.frames), m, "training");
}

DemoResult run_demo(const Classifier& model, const EngineConfig& cfg, const SourceFactory& factory,
                    KeyDriver& keys, const SessionPlan& plan, SessionObservers observers) {
    plan.validate();
    SessionEngine engine(factory, cfg, keys, "demo", std::move(observers));
    const auto predictor = model_predictor(model);
    DemoResult out;
    out.phase = engine.run_phase(Phase::Demo, plan.demo_s, &predictor);
    out.boxes_caught = out.phase.game.score;
    out.max_streak = out.phase.game.max_streak;
    out.agreement = out.phase.agreement();
    return out;
}

ValidationResult run_validation(const ValidationOptions& opts, const EngineConfig& cfg, const SourceFactory& factory,
                                KeyDriver& keys, const SessionPlan& plan, std::string session_id,
                                SessionObservers observers) {
    plan.validate();
    if (opts.kind == ModelKind::Cnn && !opts.pretrained) {
        raise(ErrorKind::InvalidArgument, "CNN validation needs a pre-trained model for transfer");
    }
    SessionEngine engine(factory, cfg, keys, session_id, std::move(observers));
    auto rec = engine.run_phase(Phase::Record, plan.record_s);
    if (rec.frames.empty()) raise(ErrorKind::EmptyTrainingSet, "record phase produced no labeled frames");

    const auto balanced = balance(rec.frames, cfg.seed);
    const auto model = train_classifier(opts.kind, opts.hyper, balanced, cfg.seed,
                                        opts.kind == ModelKind::Cnn ? opts.pretrained : nullptr);
    const auto predictor = opts.constant_none_control ? constant_predictor(ClassLabel::None) : model_predictor(model);

    ValidationResult out;
    out.control = engine.run_phase(Phase::Control, plan.control_s, &predictor);
    auto& row = out.row;
    row.session_id = session_id;
    row.kind = opts.kind;
    row.training_accuracy = model.metadata().training_accuracy;
    row.boxes_caught = out.control.game.score;
    row.max_streak = out.control.game.max_streak;
    row.agreement = out.control.agreement();
    if (opts.rating) {
        const auto r = opts.rating();
        if (r && *r >= 1 && *r <= 5) row.user_rating = *r;
    }
    row.complete = row.user_rating.has_value();

    SessionMetrics m;
    m.boxes_caught = row.boxes_caught;
    m.max_streak = row.max_streak;
    m.training_accuracy = row.training_accuracy;
    if (row.user_rating) m.user_rating = static_cast<std::uint8_t>(*row.user_rating);
    out.record = engine.make_record(std::move(rec.frames), m, "validation");
    return out;
}

std::string validation_csv_header() {
    return "session_id,model,training_accuracy,boxes_caught,max_streak,user_rating,agreement,complete";
}

std::string validation_csv_line(const ValidationRow& r) {
    char acc[32], agr[32];
    std::snprintf(acc, sizeof acc, "%.4f", r.training_accuracy);
    std::snprintf(agr, sizeof agr, "%.4f", r.agreement);
    return r.session_id + "," + std::string(to_string(r.kind)) + "," + acc + "," + std::to_string(r.boxes_caught) +
           "," + std::to_string(r.max_streak) + "," + (r.user_rating ? std::to_string(*r.user_rating) : "") + "," +
           agr + "," + (r.complete ? "yes" : "no");
}

}  // namespace bci
