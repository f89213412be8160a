#include "bci/game.hpp"

#include <algorithm>
#include <cmath>

#include "bci/cnn.hpp"
#include "bci/error.hpp"

namespace bci {

namespace {

void spawn(GameState& s, const GameConfig& cfg, Rng& rng) {
    const double half = cfg.box_size / 2.0;
    s.box_x = rng.uniform(half, cfg.field_width - half);
    s.box_y = 0.0;
}

}  // namespace

void GameConfig::validate() const {
    if (!(field_width > 0 && field_height > 0 && bar_width > 0 && bar_height > 0 && bar_speed > 0 &&
          box_size > 0 && box_speed > 0 && tick_hz > 0)) {
        raise(ErrorKind::InvalidArgument, "game dimensions and speeds must be positive");
    }
    if (bar_width >= field_width) raise(ErrorKind::InvalidArgument, "bar must be narrower than the field");
    if (box_size >= field_width || box_size + bar_height >= field_height) {
        raise(ErrorKind::InvalidArgument, "box does not fit the field");
    }
}

std::string_view to_string(CommandSource s) noexcept {
    return s == CommandSource::Keys ? "keys" : "model";
}

GameState new_game(const GameConfig& cfg, Rng& rng) {
    cfg.validate();
    GameState s;
    s.bar_x = cfg.field_width / 2.0;
    spawn(s, cfg, rng);
    return s;
}

GameState game_step(const GameState& state, const Command& cmd, double dt, Rng& rng, const GameConfig& cfg) {
    if (!(dt > 0)) raise(ErrorKind::InvalidArgument, "game_step needs dt > 0");
    GameState s = state;
    s.t += dt;

    const double half_bar = cfg.bar_width / 2.0;
    if (cmd.action == ClassLabel::Left) s.bar_x -= cfg.bar_speed * dt;
    if (cmd.action == ClassLabel::Right) s.bar_x += cfg.bar_speed * dt;
    s.bar_x = std::clamp(s.bar_x, half_bar, cfg.field_width - half_bar);

    s.box_y += cfg.box_speed * dt;
    const double bottom = s.box_y + cfg.box_size;
    const bool overlaps = std::abs(s.box_x - s.bar_x) < half_bar + cfg.box_size / 2.0;
    if (bottom >= cfg.bar_top() && overlaps) {
        ++s.score;
        ++s.streak;
        s.max_streak = std::max(s.max_streak, s.streak);
        ++s.respawns;
        spawn(s, cfg, rng);
    } else if (bottom >= cfg.field_height) {
        ++s.misses;
        s.streak = 0;
        ++s.respawns;
        spawn(s, cfg, rng);
    }
    return s;
}

CommandSmoother::CommandSmoother(int window) : window_(window) {
    if (window < 1) raise(ErrorKind::InvalidArgument, "smoothing window must be >= 1");
}

ClassLabel CommandSmoother::push(ClassLabel prediction) {
    history_.push_back(prediction);
    while (static_cast<int>(history_.size()) > window_) history_.pop_front();
    std::array<int, kNumClasses> votes{};
    for (auto c : history_) ++votes[index_of(c)];
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
        if (votes[c] > votes[best]) best = c;
    }
    return label_from_index(best);
}

Command command_from_prediction(std::span<const double> probabilities, CommandSmoother* smoother) {
    ClassLabel c = argmax_label(probabilities);
    if (smoother) c = smoother->push(c);
    return {c, CommandSource::Model};
}

}  // namespace bci
