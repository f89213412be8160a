#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bci/acquisition.hpp"
#include "bci/features.hpp"
#include "bci/labels.hpp"
#include "bci/signal.hpp"

namespace bci {

enum class Key : std::uint8_t { Left = 0, Right = 1 };
enum class KeyAction : std::uint8_t { Down = 0, Up = 1 };

struct KeyEvent {
    double t = 0.0;
    Key key = Key::Left;
    KeyAction action = KeyAction::Down;

    bool operator==(const KeyEvent&) const = default;
};

// Ordered press/release log. append() enforces nondecreasing time and
// down/up alternation per key.
class KeyLog {
public:
    KeyLog() = default;
    explicit KeyLog(std::vector<KeyEvent> events);

    void append(const KeyEvent& e);
    // Like append() but drops events that would break alternation (key
    // repeat, duplicated release) instead of throwing.
    bool append_lenient(const KeyEvent& e);

    const std::vector<KeyEvent>& events() const { return events_; }
    bool empty() const { return events_.empty(); }
    std::size_t size() const { return events_.size(); }
    bool is_down(Key k) const { return down_[static_cast<std::size_t>(k)]; }

    bool operator==(const KeyLog& o) const { return events_ == o.events_; }

private:
    std::vector<KeyEvent> events_;
    bool down_[2] = {false, false};
};

// Key state at t; events stamped exactly t are already in effect.
ClassLabel label_at(const KeyLog& log, double t);

struct LabeledExample {
    FeatureVector features;
    ClassLabel label = ClassLabel::None;
    std::string session_id;
    double t = 0.0;

    bool operator==(const LabeledExample&) const = default;
};

struct SessionMetrics {
    std::optional<std::int32_t> boxes_caught;
    std::optional<std::int32_t> max_streak;
    std::optional<std::uint8_t> user_rating;  // 1..5
    std::optional<double> training_accuracy;

    bool operator==(const SessionMetrics&) const = default;
};

struct SessionHeader {
    std::string session_id;
    std::string subject_id;
    std::string start_time;  // ISO-8601 UTC
    SamplingConfig sampling;
    MontageConfig montage = MontageConfig::motor_strip();
    FilterDesign filter;
    // b0 b1 b2 a1 a2 per section, in cascade order
    std::vector<std::array<double, 5>> filter_coefficients;
    WindowConfig window;
    std::string software_version;
    std::uint64_t seed = 0;
    std::string source;  // e.g. "synthetic", "tcp:host:port"
    std::string phase;   // training | record | ...

    bool operator==(const SessionHeader&) const = default;
};

struct SessionRecord {
    SessionHeader header;
    std::vector<LabeledExample> frames;
    KeyLog key_log;
    SessionMetrics metrics;

    bool operator==(const SessionRecord&) const = default;
};

// Filter-transient rule: frames earlier than this are never labeled.
inline constexpr double kTransientSeconds = 2.0;

SessionHeader make_header(std::string session_id, const SamplingConfig& sampling,
                          const FilterCascade& cascade, const WindowConfig& window,
                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset operations

// Indices (ascending) of a class-balanced subset: every class present keeps
// exactly min-count members chosen uniformly without replacement.
std::vector<std::size_t> balance_indices(std::span<const ClassLabel> labels, std::uint64_t seed);
std::vector<LabeledExample> balance(std::span<const LabeledExample> examples, std::uint64_t seed);

enum class SplitMode : std::uint8_t { Random = 0, Temporal = 1 };

std::string_view to_string(SplitMode m) noexcept;
SplitMode parse_split_mode(std::string_view s);

// floor(fraction * n), computed in integer arithmetic (fraction resolved to
// 1e-6) so that e.g. 0.7 gives exactly 7n/10.
std::size_t fraction_count(double fraction, std::size_t n);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

SplitIndices split_indices(std::span<const double> times, double train_fraction, SplitMode mode,
                           std::uint64_t seed);
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split(
    std::span<const LabeledExample> examples, double train_fraction, SplitMode mode,
    std::uint64_t seed);

// Takes floor(fraction * |frames|) frames from each session (random subset
// kept in time order), session-major.
std::vector<LabeledExample> consolidate(std::span<const SessionRecord> sessions, double fraction,
                                        std::uint64_t seed);

// Relabels every frame from the stored key log; returns how many labels
// already matched.
std::size_t count_reproduced_labels(const SessionRecord& record);

// ---------------------------------------------------------------------------
// Session files

inline constexpr std::uint16_t kSessionFormatVersion = 1;

std::vector<std::uint8_t> encode_session(const SessionRecord& record);
SessionRecord decode_session(std::span<const std::uint8_t> bytes);
void save_session(const SessionRecord& record, const std::string& path);
SessionRecord load_session(const std::string& path);

std::string header_to_json(const SessionHeader& h);
SessionHeader header_from_json(const std::string& text);

}  // namespace bci
