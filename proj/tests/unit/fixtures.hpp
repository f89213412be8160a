#pragma once

#include "bci/session.hpp"

// Headless scripted training session on the synthetic source.
inline bci::SessionRecord synthetic_record(double seconds, std::uint64_t seed, const std::string& id = "fixture",
                                           double mu_depth = 0.8) {
    bci::EngineConfig cfg;
    cfg.seed = seed;
    bci::SourceSpec spec;
    spec.synth.seed = seed + 100;
    spec.synth.mu_depth = mu_depth;
    bci::ScriptedPlayer player(seed + 200);
    bci::SessionPlan plan;
    plan.training_s = seconds;
    return bci::run_training_session(cfg, bci::make_source_factory(spec, cfg.sampling), player, plan, id);
}
