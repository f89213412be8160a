#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string_view>

#include "bci/labels.hpp"
#include "bci/rng.hpp"

namespace bci {

// Falling-box game. Units are abstract "field units"; y grows downward,
// the box is described by its centre x and its top edge y.
struct GameConfig {
    double field_width = 800.0;
    double field_height = 600.0;
    double bar_width = 150.0;
    double bar_height = 20.0;
    double bar_speed = 300.0;  // units/s
    double box_size = 40.0;
    double box_speed = 150.0;  // units/s
    double tick_hz = 60.0;

    void validate() const;
    double bar_top() const { return field_height - bar_height; }

    bool operator==(const GameConfig&) const = default;
};

struct GameState {
    double t = 0.0;
    double bar_x = 0.0;  // bar centre
    double box_x = 0.0;  // box centre
    double box_y = 0.0;  // box top edge
    std::int32_t score = 0;
    std::int32_t misses = 0;
    std::int32_t streak = 0;
    std::int32_t max_streak = 0;
    std::int32_t respawns = 0;

    bool operator==(const GameState&) const = default;
};

enum class CommandSource : std::uint8_t { Keys = 0, Model = 1 };

std::string_view to_string(CommandSource s) noexcept;

struct Command {
    ClassLabel action = ClassLabel::None;
    CommandSource source = CommandSource::Keys;

    bool operator==(const Command&) const = default;
};

// Bar centred, first box spawned at a uniform x at the top.
GameState new_game(const GameConfig& cfg, Rng& rng);

// left/right move the bar by speed*dt (clamped); none and both hold it.
// The box falls box_speed*dt. A box whose bottom edge is at or below the
// bar top while horizontally overlapping the bar is caught; one whose
// bottom reaches the field floor is missed. Either way a new box spawns at
// the top at a uniform x.
GameState game_step(const GameState& state, const Command& cmd, double dt, Rng& rng,
                    const GameConfig& cfg = {});

// Majority vote over the last `window` predictions, ties to the lowest
// class index. window 1 passes predictions through unchanged.
class CommandSmoother {
public:
    explicit CommandSmoother(int window = 3);

    ClassLabel push(ClassLabel prediction);
    void reset() { history_.clear(); }
    int window() const { return window_; }

private:
    int window_;
    std::deque<ClassLabel> history_;
};

// Argmax (ties to lowest index), optionally smoothed; source is always model.
Command command_from_prediction(std::span<const double> probabilities,
                                CommandSmoother* smoother = nullptr);

}  // namespace bci
