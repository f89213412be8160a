#include "bci/dataset.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>

#include "bci/binary_io.hpp"
#include "bci/error.hpp"
#include "bci/json_io.hpp"
#include "bci/rng.hpp"
#include "bci/version.hpp"

namespace bci {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Key log

KeyLog::KeyLog(std::vector<KeyEvent> events) {
    for (const auto& e : events) append(e);
}

void KeyLog::append(const KeyEvent& e) {
    if (!append_lenient(e)) {
        raise(ErrorKind::InvalidArgument, "key event at t=" + std::to_string(e.t) +
                                              " breaks ordering or down/up alternation");
    }
}

bool KeyLog::append_lenient(const KeyEvent& e) {
    if (!std::isfinite(e.t) || e.t < 0.0) return false;
    if (!events_.empty() && e.t < events_.back().t) return false;
    auto& down = down_[static_cast<std::size_t>(e.key)];
    const bool want_down = e.action == KeyAction::Down;
    if (down == want_down) return false;
    down = want_down;
    events_.push_back(e);
    return true;
}

ClassLabel label_at(const KeyLog& log, double t) {
    bool down[2] = {false, false};
    for (const auto& e : log.events()) {
        if (e.t > t) break;
        down[static_cast<std::size_t>(e.key)] = e.action == KeyAction::Down;
    }
    return label_from_keys(down[0], down[1]);
}

SessionHeader make_header(std::string session_id, const SamplingConfig& sampling,
                          const FilterCascade& cascade, const WindowConfig& window,
                          std::uint64_t seed) {
    SessionHeader h;
    h.session_id = std::move(session_id);
    h.sampling = sampling;
    h.filter = cascade.design();
    for (const auto& s : cascade.stages()) {
        h.filter_coefficients.push_back({s.b[0], s.b[1], s.b[2], s.a[0], s.a[1]});
    }
    h.window = window;
    h.software_version = kSoftwareVersion;
    h.seed = seed;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    h.start_time = buf;
    return h;
}

// ---------------------------------------------------------------------------
// Balance / split / consolidate

std::vector<std::size_t> balance_indices(std::span<const ClassLabel> labels, std::uint64_t seed) {
    if (labels.empty()) raise(ErrorKind::EmptyDataset, "nothing to balance");
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[index_of(labels[i])].push_back(i);

    std::size_t m = labels.size();
    for (const auto& members : by_class) {
        if (!members.empty()) m = std::min(m, members.size());
    }
    Rng rng(seed);
    std::vector<std::size_t> out;
    for (const auto& members : by_class) {
        if (members.empty()) continue;
        for (auto j : sample_without_replacement(members.size(), m, rng)) out.push_back(members[j]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<LabeledExample> balance(std::span<const LabeledExample> examples, std::uint64_t seed) {
    std::vector<ClassLabel> labels;
    labels.reserve(examples.size());
    for (const auto& e : examples) labels.push_back(e.label);
    std::vector<LabeledExample> out;
    for (auto i : balance_indices(labels, seed)) out.push_back(examples[i]);
    return out;
}

std::string_view to_string(SplitMode m) noexcept {
    return m == SplitMode::Temporal ? "temporal" : "random";
}

SplitMode parse_split_mode(std::string_view s) {
    if (s == "random") return SplitMode::Random;
    if (s == "temporal") return SplitMode::Temporal;
    raise(ErrorKind::InvalidArgument, "split mode must be random or temporal");
}

std::size_t fraction_count(double fraction, std::size_t n) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        raise(ErrorKind::InvalidArgument, "fraction must be in [0, 1]");
    }
    constexpr std::uint64_t kScale = 1000000;
    const auto per_million = static_cast<std::uint64_t>(std::llround(fraction * kScale));
    return static_cast<std::size_t>(static_cast<std::uint64_t>(n) * per_million / kScale);
}

SplitIndices split_indices(std::span<const double> times, double train_fraction, SplitMode mode,
                           std::uint64_t seed) {
    if (times.empty()) raise(ErrorKind::EmptyDataset, "nothing to split");
    const std::size_t n = times.size();
    const std::size_t k = fraction_count(train_fraction, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (mode == SplitMode::Random) {
        Rng rng(seed);
        rng.shuffle(order);
    } else {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    }
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    return s;
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split(
    std::span<const LabeledExample> examples, double train_fraction, SplitMode mode,
    std::uint64_t seed) {
    std::vector<double> times;
    times.reserve(examples.size());
    for (const auto& e : examples) times.push_back(e.t);
    const auto idx = split_indices(times, train_fraction, mode, seed);
    std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
    out.first.reserve(idx.train.size());
    out.second.reserve(idx.test.size());
    for (auto i : idx.train) out.first.push_back(examples[i]);
    for (auto i : idx.test) out.second.push_back(examples[i]);
    return out;
}

std::vector<LabeledExample> consolidate(std::span<const SessionRecord> sessions, double fraction,
                                        std::uint64_t seed) {
    if (sessions.empty()) raise(ErrorKind::EmptyDataset, "no sessions to consolidate");
    std::vector<LabeledExample> out;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
        const auto& frames = sessions[s].frames;
        const std::size_t k = fraction_count(fraction, frames.size());
        if (k == frames.size()) {
            out.insert(out.end(), frames.begin(), frames.end());
            continue;
        }
        Rng rng(derive_seed(seed, s));
        auto picked = sample_without_replacement(frames.size(), k, rng);
        std::sort(picked.begin(), picked.end());
        for (auto i : picked) out.push_back(frames[i]);
    }
    return out;
}

std::size_t count_reproduced_labels(const SessionRecord& record) {
    std::size_t ok = 0;
    for (const auto& f : record.frames) {
        if (label_at(record.key_log, f.t) == f.label) ++ok;
    }
    return ok;
}

// ---------------------------------------------------------------------------
// Session files

namespace {

constexpr char kSessionMagic[4] = {'B', 'C', 'I', 'S'};

enum MetricsBits : std::uint8_t {
    kHasBoxes = 1,
    kHasStreak = 2,
    kHasRating = 4,
    kHasAccuracy = 8,
};

}  // namespace

std::string header_to_json(const SessionHeader& h) {
    json j;
    j["session_id"] = h.session_id;
    j["subject_id"] = h.subject_id;
    j["start_time"] = h.start_time;
    j["software_version"] = h.software_version;
    j["seed"] = h.seed;
    j["source"] = h.source;
    j["phase"] = h.phase;
    j["sampling"] = h.sampling;
    j["montage"] = h.montage;
    j["filter"] = h.filter;
    j["filter"]["sections"] = h.filter_coefficients;
    j["window"] = h.window;
    j["labels"] = {"none", "left", "right", "both"};
    j["normalization"] = "none (raw magnitudes; z-scoring is fitted per training run)";
    return j.dump(2);
}

SessionHeader header_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorKind::CorruptFile, std::string("session header: ") + e.what());
    }
    try {
        SessionHeader h;
        h.session_id = j.at("session_id").get<std::string>();
        h.subject_id = j.value("subject_id", std::string());
        h.start_time = j.value("start_time", std::string());
        h.software_version = j.value("software_version", std::string());
        h.seed = j.value("seed", std::uint64_t{0});
        h.source = j.value("source", std::string());
        h.phase = j.value("phase", std::string());
        h.sampling = j.at("sampling").get<SamplingConfig>();
        h.montage = j.at("montage").get<MontageConfig>();
        h.filter = j.at("filter").get<FilterDesign>();
        h.filter_coefficients =
            j.at("filter").value("sections", std::vector<std::array<double, 5>>{});
        h.window = j.at("window").get<WindowConfig>();
        return h;
    } catch (const json::exception& e) {
        raise(ErrorKind::CorruptFile, std::string("session header: ") + e.what());
    }
}

std::vector<std::uint8_t> encode_session(const SessionRecord& r) {
    io::ByteWriter w;
    w.put_bytes({kSessionMagic, 4});
    w.put<std::uint16_t>(kSessionFormatVersion);
    w.put_string32(header_to_json(r.header));

    const std::size_t per_frame = static_cast<std::size_t>(r.header.sampling.channel_count) *
                                  static_cast<std::size_t>(r.header.window.bins());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(r.frames.size()));
    std::vector<float> row(per_frame);
    for (const auto& f : r.frames) {
        if (f.features.mags.size() != per_frame) {
            raise(ErrorKind::ShapeMismatch, "frame size differs from header channels x bins");
        }
        w.put<double>(f.t);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(f.label));
        for (std::size_t i = 0; i < per_frame; ++i) row[i] = static_cast<float>(f.features.mags[i]);
        w.put_array<float>(row);
    }

    w.put<std::uint32_t>(static_cast<std::uint32_t>(r.key_log.size()));
    for (const auto& e : r.key_log.events()) {
        w.put<double>(e.t);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(e.key));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(e.action));
    }

    const auto& m = r.metrics;
    std::uint8_t bits = 0;
    if (m.boxes_caught) bits |= kHasBoxes;
    if (m.max_streak) bits |= kHasStreak;
    if (m.user_rating) bits |= kHasRating;
    if (m.training_accuracy) bits |= kHasAccuracy;
    w.put<std::uint8_t>(bits);
    w.put<std::int32_t>(m.boxes_caught.value_or(0));
    w.put<std::int32_t>(m.max_streak.value_or(0));
    w.put<std::uint8_t>(m.user_rating.value_or(0));
    w.put<double>(m.training_accuracy.value_or(0.0));

    w.put<std::uint64_t>(io::crc64(w.bytes()));
    return std::move(w.bytes());
}

SessionRecord decode_session(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 + 2 + 8 || std::memcmp(bytes.data(), kSessionMagic, 4) != 0) {
        raise(ErrorKind::CorruptFile, "not a session file (bad magic)");
    }
    io::ByteReader r(bytes);
    r.get_bytes(4);
    const auto version = r.get<std::uint16_t>();
    if (version != kSessionFormatVersion) {
        raise(ErrorKind::FormatVersionMismatch,
              "session format version " + std::to_string(version) + ", expected " +
                  std::to_string(kSessionFormatVersion));
    }
    const auto body = bytes.first(bytes.size() - 8);
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    if (io::crc64(body) != stored) raise(ErrorKind::CorruptFile, "session checksum mismatch");

    SessionRecord rec;
    rec.header = header_from_json(r.get_string32());
    const int channels = rec.header.sampling.channel_count;
    const int bins = rec.header.window.bins();
    const std::size_t per_frame = static_cast<std::size_t>(channels) * static_cast<std::size_t>(bins);

    const auto n_frames = r.get<std::uint32_t>();
    if (per_frame == 0 || r.remaining() / (per_frame * 4 + 9) < n_frames) {
        raise(ErrorKind::CorruptFile, "frame block larger than file");
    }
    rec.frames.reserve(n_frames);
    std::vector<float> row(per_frame);
    for (std::uint32_t i = 0; i < n_frames; ++i) {
        LabeledExample ex;
        ex.t = r.get<double>();
        const auto label = r.get<std::uint8_t>();
        if (label >= kNumClasses) raise(ErrorKind::CorruptFile, "label code out of range");
        ex.label = static_cast<ClassLabel>(label);
        r.get_array<float>(row);
        ex.session_id = rec.header.session_id;
        auto& fv = ex.features;
        fv.t = ex.t;
        fv.channels = channels;
        fv.bins = bins;
        fv.mags.assign(row.begin(), row.end());
        for (int c = 0; c < channels; ++c) {
            const auto b = extract_bands(
                std::span<const double>(fv.mags).subspan(static_cast<std::size_t>(c * bins),
                                                         static_cast<std::size_t>(bins)),
                rec.header.sampling.sample_rate);
            fv.bands.insert(fv.bands.end(), b.begin(), b.end());
        }
        rec.frames.push_back(std::move(ex));
    }

    const auto n_events = r.get<std::uint32_t>();
    std::vector<KeyEvent> events;
    events.reserve(n_events);
    for (std::uint32_t i = 0; i < n_events; ++i) {
        KeyEvent e;
        e.t = r.get<double>();
        const auto key = r.get<std::uint8_t>();
        const auto action = r.get<std::uint8_t>();
        if (key > 1 || action > 1) raise(ErrorKind::CorruptFile, "key event code out of range");
        e.key = static_cast<Key>(key);
        e.action = static_cast<KeyAction>(action);
        events.push_back(e);
    }
    try {
        rec.key_log = KeyLog(std::move(events));
    } catch (const Error& e) {
        raise(ErrorKind::CorruptFile, e.what());
    }

    const auto bits = r.get<std::uint8_t>();
    const auto boxes = r.get<std::int32_t>();
    const auto streak = r.get<std::int32_t>();
    const auto rating = r.get<std::uint8_t>();
    const auto acc = r.get<double>();
    if (bits & kHasBoxes) rec.metrics.boxes_caught = boxes;
    if (bits & kHasStreak) rec.metrics.max_streak = streak;
    if (bits & kHasRating) rec.metrics.user_rating = rating;
    if (bits & kHasAccuracy) rec.metrics.training_accuracy = acc;

    if (r.remaining() != 8) raise(ErrorKind::CorruptFile, "trailing bytes before checksum");
    return rec;
}

void save_session(const SessionRecord& record, const std::string& path) {
    const auto bytes = encode_session(record);
    io::write_file_atomic(path, bytes);
}

SessionRecord load_session(const std::string& path) {
    const auto bytes = io::read_file(path);
    return decode_session(bytes);
}

}  // namespace bci
