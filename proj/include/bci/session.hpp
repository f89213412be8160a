#pragma once

#include <array>
#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bci/acquisition.hpp"
#include "bci/classifier.hpp"
#include "bci/dataset.hpp"
#include "bci/game.hpp"
#include "bci/pipeline.hpp"

namespace bci {

enum class Phase : std::uint8_t { Training = 0, Demo = 1, Record = 2, Control = 3 };

std::string_view to_string(Phase p) noexcept;
Phase parse_phase(std::string_view s);
// Keys drive the game and frames are labeled in these phases.
inline bool is_keyed(Phase p) { return p == Phase::Training || p == Phase::Record; }

struct SessionPlan {
    double training_s = 300.0;
    double demo_s = 60.0;
    double record_s = 30.0;
    double control_s = 30.0;

    void validate() const;
    double duration(Phase p) const;
};

struct EngineConfig {
    SamplingConfig sampling;
    MontageConfig montage = MontageConfig::motor_strip();
    FilterDesign filter;
    WindowConfig window;
    GameConfig game;
    int smoothing = 3;  // 1 = raw argmax
    std::uint64_t seed = 0;
    // 0 pulls the source in lockstep with the session clock; > 0 runs it on
    // an acquisition thread paced at that multiple of real time.
    double realtime_factor = 0.0;
};

// Produces key presses. Called once per game tick with the session time of
// that tick; whatever it appends to the log is in effect from that time.
class KeyDriver {
public:
    virtual ~KeyDriver() = default;
    virtual void on_tick(double t, Phase phase, const GameState& game, KeyLog& log) = 0;
};

struct PlayerConfig {
    // keyed phases: each cue holds one class for U(cue_min_s, cue_max_s)
    double cue_min_s = 3.0;
    double cue_max_s = 6.0;
    // model phases: steer towards the box, rest when within this distance
    double align_tolerance = 20.0;
};

// Headless stand-in for a participant. In keyed phases it follows a random
// cue schedule that visits all four classes in shuffled blocks; in model
// phases it presses towards the falling box, as a player would.
class ScriptedPlayer final : public KeyDriver {
public:
    ScriptedPlayer(std::uint64_t seed, PlayerConfig cfg = {});
    void on_tick(double t, Phase phase, const GameState& game, KeyLog& log) override;

private:
    ClassLabel next_cue();

    PlayerConfig cfg_;
    Rng rng_;
    std::vector<ClassLabel> block_;
    ClassLabel cue_ = ClassLabel::None;
    double cue_end_ = -1.0;
};

// Key events pushed from another thread (e.g. a WebSocket session). They
// are stamped with the session time of the tick that drains them; events
// that would break down/up alternation are discarded and counted.
class QueuedKeys final : public KeyDriver {
public:
    void push(Key key, KeyAction action);
    void on_tick(double t, Phase phase, const GameState& game, KeyLog& log) override;
    std::size_t accepted() const { return accepted_.load(); }
    std::size_t rejected() const { return rejected_.load(); }

private:
    std::mutex mu_;
    std::vector<std::pair<Key, KeyAction>> queue_;
    std::atomic<std::size_t> accepted_{0};
    std::atomic<std::size_t> rejected_{0};
};

// Sets both keys to reproduce `target`, logging the needed events at t.
void press_towards(ClassLabel target, double t, KeyLog& log);

using Predictor = std::function<std::array<double, kNumClasses>(const FeatureVector&)>;
Predictor model_predictor(const Classifier& model);
Predictor constant_predictor(ClassLabel label);

struct CommandLogEntry {
    double t = 0.0;
    Command command;
};

struct PhaseResult {
    Phase phase = Phase::Training;
    double start_t = 0.0;
    double end_t = 0.0;
    GameState game;                      // final state; score = boxes caught
    std::vector<LabeledExample> frames;  // keyed phases only
    std::vector<CommandLogEntry> commands;
    std::size_t predictions = 0;
    std::size_t agreements = 0;  // applied model command == key label

    double agreement() const {
        return predictions ? static_cast<double>(agreements) / static_cast<double>(predictions) : 0.0;
    }
};

using SourceFactory = std::function<std::unique_ptr<SampleSource>(LabelProvider)>;
SourceFactory make_source_factory(const SourceSpec& spec, const SamplingConfig& sampling);

struct SessionObservers {
    std::function<void(Phase, double duration_s)> on_phase;
    std::function<void(Phase, double remaining_s, const GameState&)> on_tick;
    std::function<void(const std::vector<bool>& railed)> on_quality;
};

// One participant session on a single clock: the sample clock of the
// source. Game ticks are interleaved with samples by timestamp, so a
// lockstep run is fully deterministic.
class SessionEngine {
public:
    SessionEngine(const SourceFactory& factory, EngineConfig cfg, KeyDriver& keys,
                  std::string session_id, SessionObservers observers = {});
    ~SessionEngine();
    SessionEngine(const SessionEngine&) = delete;
    SessionEngine& operator=(const SessionEngine&) = delete;

    // Runs [now, now + duration). Model phases need a predictor. The game
    // restarts at each phase start; the signal chain runs on.
    PhaseResult run_phase(Phase phase, double duration_s, const Predictor* predictor = nullptr);

    const KeyLog& key_log() const { return key_log_; }
    double now() const { return now_; }
    const Pipeline& pipeline() const { return pipeline_; }
    const EngineConfig& config() const { return cfg_; }

    SessionRecord make_record(std::vector<LabeledExample> frames, SessionMetrics metrics,
                              std::string phase) const;
    void set_source_description(std::string d) { source_desc_ = std::move(d); }

private:
    std::optional<RawSample> next_sample();
    void sync_keys();

    EngineConfig cfg_;
    KeyDriver& keys_;
    std::string session_id_;
    SessionObservers obs_;
    std::shared_ptr<std::atomic<std::uint8_t>> key_bits_;
    std::unique_ptr<SampleSource> source_;
    Pipeline pipeline_;
    KeyLog key_log_;
    std::unique_ptr<SampleFifo> fifo_;
    std::unique_ptr<AcquisitionThread> acq_;
    std::optional<RawSample> pending_;
    Rng game_rng_;
    GameState game_;
    std::uint64_t tick_index_ = 0;
    double now_ = 0.0;
    std::vector<bool> railed_;
    std::string source_desc_ = "synthetic";
};

SessionRecord run_training_session(const EngineConfig& cfg, const SourceFactory& factory,
                                   KeyDriver& keys, const SessionPlan& plan, std::string session_id,
                                   SessionObservers observers = {});

struct DemoResult {
    std::int32_t boxes_caught = 0;
    std::int32_t max_streak = 0;
    double agreement = 0.0;
    PhaseResult phase;
};

DemoResult run_demo(const Classifier& model, const EngineConfig& cfg, const SourceFactory& factory,
                    KeyDriver& keys, const SessionPlan& plan, SessionObservers observers = {});

struct ValidationOptions {
    ModelKind kind = ModelKind::Knn;
    ModelHyper hyper;
    // Required for CNN: retrained by transfer on the recorded 30 s.
    const Classifier* pretrained = nullptr;
    // Replace the trained model by a constant "none" controller in the
    // control phase (baseline runs).
    bool constant_none_control = false;
    // Called after the control phase; nullopt means no rating arrived.
    std::function<std::optional<int>()> rating;
};

struct ValidationRow {
    std::string session_id;
    ModelKind kind = ModelKind::Knn;
    double training_accuracy = 0.0;
    std::int32_t boxes_caught = 0;
    std::int32_t max_streak = 0;
    std::optional<int> user_rating;
    bool complete = false;  // false when the rating is missing
    double agreement = 0.0;
};

struct ValidationResult {
    ValidationRow row;
    SessionRecord record;  // record-phase frames, key log, metrics
    PhaseResult control;
};

ValidationResult run_validation(const ValidationOptions& opts, const EngineConfig& cfg,
                                const SourceFactory& factory, KeyDriver& keys, const SessionPlan& plan,
                                std::string session_id, SessionObservers observers = {});

std::string validation_csv_header();
std::string validation_csv_line(const ValidationRow& row);

}  // namespace bci
