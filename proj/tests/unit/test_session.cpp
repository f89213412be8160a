#include <algorithm>
#include <set>

#include "bci/session.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace bci;

namespace {

SourceFactory synthetic_factory(std::uint64_t seed, std::uint64_t max_samples = 0) {
    SamplingConfig sampling;
    return [=](LabelProvider labels) -> std::unique_ptr<SampleSource> {
        SynthConfig s;
        s.seed = seed;
        return std::make_unique<SyntheticSource>(sampling, s, std::move(labels), max_samples);
    };
}

class NoKeys final : public KeyDriver {
public:
    void on_tick(double, Phase, const GameState&, KeyLog&) override {}
};

}  // namespace

TEST(Session, TrainingRecordConsistent) {
    const auto rec = synthetic_record(60.0, 1, "t1");
    EXPECT_EQ(rec.header.session_id, "t1");
    EXPECT_EQ(rec.header.phase, "training");
    EXPECT_FALSE(rec.key_log.empty());
    ASSERT_FALSE(rec.frames.empty());
    const double hop = 32.0 / 250.0;
    std::set<ClassLabel> seen;
    for (const auto& f : rec.frames) {
        EXPECT_GE(f.t, kTransientSeconds);
        EXPECT_LE(f.t, 60.0 + hop);
        EXPECT_EQ(f.label, label_at(rec.key_log, f.t));
        seen.insert(f.label);
    }
    EXPECT_EQ(seen.size(), 4u);
    // one frame per hop after the first full window
    const double expected = (60.0 - 256.0 / 250.0) / hop;
    EXPECT_NEAR(static_cast<double>(rec.frames.size()), expected - (kTransientSeconds - 256.0 / 250.0) / hop, 2.0);
    ASSERT_TRUE(rec.metrics.boxes_caught.has_value());
}

TEST(Session, Deterministic) {
    auto a = synthetic_record(30.0, 2);
    auto b = synthetic_record(30.0, 2);
    a.header.start_time.clear();
    b.header.start_time.clear();
    EXPECT_EQ(a, b);
}

// Paced acquisition runs on its own thread, so the synthetic subject sees key
// changes a little earlier or later than in lockstep; only structure matches.
TEST(Session, RealtimeRunsSameProtocol) {
    EngineConfig cfg;
    cfg.seed = 4;
    cfg.realtime_factor = 50.0;
    SourceSpec spec;
    spec.synth.seed = 104;
    ScriptedPlayer player(204);
    SessionPlan plan;
    plan.training_s = 10.0;
    auto live = run_training_session(cfg, make_source_factory(spec, cfg.sampling), player, plan, "fixture");
    auto step = synthetic_record(10.0, 4);
    live.header.start_time.clear();
    step.header.start_time.clear();
    ASSERT_EQ(live.frames.size(), step.frames.size());
    for (std::size_t i = 0; i < live.frames.size(); ++i) {
        EXPECT_EQ(live.frames[i].t, step.frames[i].t);
        EXPECT_EQ(live.frames[i].label, label_at(live.key_log, live.frames[i].t));
    }
    EXPECT_EQ(live.key_log, step.key_log);
}

TEST(Session, SourceLost) {
    EngineConfig cfg;
    NoKeys keys;
    SessionPlan plan;
    plan.training_s = 10.0;
    EXPECT_BCI_ERROR(run_training_session(cfg, synthetic_factory(1, 250 * 3), keys, plan, "lost"),
                     ErrorKind::SourceLost);
}

TEST(Session, QueuedKeysStampedBySession) {
    EngineConfig cfg;
    QueuedKeys keys;
    SessionEngine engine(synthetic_factory(2), cfg, keys, "q");
    keys.push(Key::Left, KeyAction::Down);
    keys.push(Key::Left, KeyAction::Down);  // repeat, rejected
    keys.push(Key::Right, KeyAction::Up);   // not down, rejected
    auto r = engine.run_phase(Phase::Training, 3.0);
    EXPECT_EQ(keys.accepted(), 1u);
    EXPECT_EQ(keys.rejected(), 2u);
    ASSERT_EQ(engine.key_log().size(), 1u);
    EXPECT_EQ(engine.key_log().events()[0].t, 0.0);
    for (const auto& f : r.frames) EXPECT_EQ(f.label, ClassLabel::Left);
}

TEST(Session, DemoCommandsComeFromModel) {
    const auto rec = synthetic_record(60.0, 3);
    const auto model = train_classifier(ModelKind::Knn, ModelHyper{}, balance(rec.frames, 1), 1);
    EngineConfig cfg;
    cfg.seed = 3;
    SourceSpec spec;
    ScriptedPlayer player(5);
    SessionPlan plan;
    plan.demo_s = 20.0;
    const auto res = run_demo(model, cfg, make_source_factory(spec, cfg.sampling), player, plan);
    ASSERT_FALSE(res.phase.commands.empty());
    for (const auto& c : res.phase.commands) EXPECT_EQ(c.command.source, CommandSource::Model);
    EXPECT_GT(res.phase.predictions, 0u);
    EXPECT_GE(res.agreement, 0.0);
    EXPECT_LE(res.agreement, 1.0);
}

TEST(Session, ValidationRating) {
    EngineConfig cfg;
    cfg.seed = 6;
    SourceSpec spec;
    SessionPlan plan;
    plan.record_s = 20.0;
    plan.control_s = 10.0;
    ValidationOptions opts;
    opts.kind = ModelKind::Lda;
    {
        ScriptedPlayer player(6);
        const auto res = run_validation(opts, cfg, make_source_factory(spec, cfg.sampling), player, plan, "v1");
        EXPECT_FALSE(res.row.complete);
        EXPECT_FALSE(res.record.metrics.user_rating.has_value());
        EXPECT_EQ(res.record.header.phase, "validation");
    }
    opts.rating = [] { return std::optional<int>(4); };
    ScriptedPlayer player(6);
    const auto res = run_validation(opts, cfg, make_source_factory(spec, cfg.sampling), player, plan, "v2");
    EXPECT_TRUE(res.row.complete);
    EXPECT_EQ(res.record.metrics.user_rating, std::optional<std::uint8_t>(4));
    EXPECT_GT(res.row.training_accuracy, 0.0);
    for (const auto& c : res.control.commands) EXPECT_EQ(c.command.source, CommandSource::Model);
    for (const auto& f : res.record.frames) EXPECT_LE(f.t, plan.record_s + 32.0 / 250.0);
}

TEST(Session, PlanValidation) {
    SessionPlan p;
    p.control_s = 0.0;
    EXPECT_BCI_ERROR(p.validate(), ErrorKind::InvalidArgument);
    EXPECT_EQ(parse_phase("record"), Phase::Record);
    EXPECT_TRUE(is_keyed(Phase::Training));
    EXPECT_FALSE(is_keyed(Phase::Control));
}

TEST(Pipeline, RailedDetection) {
    SamplingConfig sampling;
    Pipeline p(sampling, FilterDesign{}, WindowConfig{});
    const double rail = sampling.full_scale_uv();
    for (int i = 0; i < 300; ++i) {
        RawSample s;
        s.t = i / 250.0;
        s.volts.assign(8, 1.0);
        s.volts[2] = rail;
        p.push(s);
    }
    const auto r = p.railed();
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(r[c], c == 2) << c;
}

TEST(Mailbox, LatestValueWins) {
    LatestValue<int> box;
    EXPECT_FALSE(box.get().has_value());
    box.set(1);
    box.set(2);
    EXPECT_EQ(box.get(), std::optional<int>(2));
    EXPECT_EQ(box.version(), 2u);
}
