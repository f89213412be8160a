#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "bci/binary_io.hpp"
#include "bci/dataset.hpp"
#include "bci/rng.hpp"
#include "test_util.hpp"

using namespace bci;

namespace {

KeyLog log_of(std::initializer_list<KeyEvent> ev) { return KeyLog(std::vector<KeyEvent>(ev)); }

std::vector<LabeledExample> examples_with_counts(std::array<int, kNumClasses> counts) {
    std::vector<LabeledExample> out;
    int t = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        for (int i = 0; i < counts[c]; ++i) {
            LabeledExample e;
            e.label = label_from_index(c);
            e.t = t++;
            out.push_back(e);
        }
    }
    return out;
}

std::array<std::size_t, kNumClasses> count(const std::vector<LabeledExample>& ex) {
    std::array<std::size_t, kNumClasses> c{};
    for (const auto& e : ex) ++c[index_of(e.label)];
    return c;
}

SessionRecord sample_record(int frames, const std::string& id) {
    SessionRecord r;
    r.header = make_header(id, SamplingConfig{}, design_cascade(FilterDesign{}), WindowConfig{}, 42);
    r.header.subject_id = "subj";
    r.header.source = "synthetic";
    r.header.phase = "training";
    Rng rng(7);
    r.key_log = log_of({{2.0, Key::Left, KeyAction::Down}, {4.0, Key::Right, KeyAction::Down},
                        {5.0, Key::Left, KeyAction::Up}, {6.0, Key::Right, KeyAction::Up}});
    for (int i = 0; i < frames; ++i) {
        LabeledExample e;
        e.t = 2.0 + i * 0.128;
        e.session_id = id;
        e.features.t = e.t;
        e.features.channels = 8;
        e.features.bins = 128;
        for (int j = 0; j < 8 * 128; ++j) e.features.mags.push_back(static_cast<float>(std::abs(rng.normal())));
        // bands are derived data; the file stores magnitudes only
        for (int c = 0; c < 8; ++c) {
            const auto b = extract_bands(std::span(e.features.mags).subspan(static_cast<std::size_t>(c) * 128, 128), 250.0);
            e.features.bands.insert(e.features.bands.end(), b.begin(), b.end());
        }
        e.label = label_at(r.key_log, e.t);
        r.frames.push_back(e);
    }
    r.metrics.boxes_caught = 5;
    r.metrics.user_rating = 3;
    r.metrics.training_accuracy = 0.875;
    return r;
}

}  // namespace

TEST(Labels, KeyStateAtTime) {
    EXPECT_EQ(label_at(KeyLog{}, 12.0), ClassLabel::None);
    const auto one = log_of({{1.0, Key::Left, KeyAction::Down}, {2.0, Key::Left, KeyAction::Up}});
    EXPECT_EQ(label_at(one, 1.5), ClassLabel::Left);
    EXPECT_EQ(label_at(one, 0.5), ClassLabel::None);
    EXPECT_EQ(label_at(one, 2.5), ClassLabel::None);
    const auto both = log_of({{1.0, Key::Left, KeyAction::Down},
                              {2.0, Key::Right, KeyAction::Down},
                              {3.0, Key::Left, KeyAction::Up},
                              {4.0, Key::Right, KeyAction::Up}});
    EXPECT_EQ(label_at(both, 2.5), ClassLabel::Both);
    EXPECT_EQ(label_at(both, 3.5), ClassLabel::Right);
}

TEST(Labels, KeyLogRejectsBadSequences) {
    KeyLog log;
    log.append({1.0, Key::Left, KeyAction::Down});
    EXPECT_BCI_ERROR(log.append({1.5, Key::Left, KeyAction::Down}), ErrorKind::InvalidArgument);
    EXPECT_BCI_ERROR(log.append({0.5, Key::Right, KeyAction::Down}), ErrorKind::InvalidArgument);
    EXPECT_FALSE(log.append_lenient({2.0, Key::Right, KeyAction::Up}));
    EXPECT_TRUE(log.append_lenient({2.0, Key::Left, KeyAction::Up}));
}

TEST(Balance, Examples) {
    auto c = count(balance(examples_with_counts({10, 10, 10, 10}), 1));
    EXPECT_EQ(c, (std::array<std::size_t, 4>{10, 10, 10, 10}));
    c = count(balance(examples_with_counts({100, 20, 35, 20}), 1));
    EXPECT_EQ(c, (std::array<std::size_t, 4>{20, 20, 20, 20}));
    c = count(balance(examples_with_counts({5, 0, 0, 0}), 1));
    EXPECT_EQ(c, (std::array<std::size_t, 4>{5, 0, 0, 0}));
    EXPECT_BCI_ERROR(balance(std::vector<LabeledExample>{}, 1), ErrorKind::EmptyDataset);
}

TEST(Balance, RandomMultisets) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<int, kNumClasses> counts{};
        for (auto& v : counts) v = static_cast<int>(rng.below(40));
        if (std::all_of(counts.begin(), counts.end(), [](int v) { return v == 0; })) counts[0] = 1;
        int minimum = 1 << 30;
        for (int v : counts) {
            if (v > 0) minimum = std::min(minimum, v);
        }
        const auto out = balance(examples_with_counts(counts), rng.next_u64());
        const auto c = count(out);
        for (std::size_t k = 0; k < kNumClasses; ++k) {
            EXPECT_EQ(c[k], counts[k] > 0 ? static_cast<std::size_t>(minimum) : 0u);
        }
    }
}

TEST(Balance, Deterministic) {
    const auto ex = examples_with_counts({50, 20, 30, 25});
    EXPECT_EQ(balance(ex, 3), balance(ex, 3));
}

TEST(Split, Sizes) {
    for (std::size_t n = 1; n <= 200; ++n) {
        std::vector<double> times(n);
        for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i);
        const auto s = split_indices(times, 0.7, SplitMode::Random, n);
        EXPECT_EQ(s.train.size(), (7 * n) / 10);
        EXPECT_EQ(s.train.size() + s.test.size(), n);
    }
    EXPECT_EQ(fraction_count(0.7, 10), 7u);
}

TEST(Split, Temporal) {
    std::vector<LabeledExample> ex(10);
    for (int i = 0; i < 10; ++i) ex[static_cast<std::size_t>(i)].t = 9 - i;  // reverse order on purpose
    auto [train, test] = split(ex, 0.7, SplitMode::Temporal, 0);
    ASSERT_EQ(train.size(), 7u);
    ASSERT_EQ(test.size(), 3u);
    double max_train = -1, min_test = 100;
    for (const auto& e : train) max_train = std::max(max_train, e.t);
    for (const auto& e : test) min_test = std::min(min_test, e.t);
    EXPECT_EQ(max_train, 6.0);
    EXPECT_EQ(min_test, 7.0);
}

TEST(Split, Deterministic) {
    const auto ex = examples_with_counts({10, 10, 10, 10});
    EXPECT_EQ(split(ex, 0.7, SplitMode::Random, 5), split(ex, 0.7, SplitMode::Random, 5));
    EXPECT_NE(split(ex, 0.7, SplitMode::Random, 5).first, split(ex, 0.7, SplitMode::Random, 6).first);
    EXPECT_BCI_ERROR(split(std::vector<LabeledExample>{}, 0.7, SplitMode::Random, 0), ErrorKind::EmptyDataset);
}

TEST(Consolidate, Fractions) {
    std::vector<SessionRecord> sessions;
    for (int i = 0; i < 3; ++i) sessions.push_back(sample_record(1000, "s" + std::to_string(i)));
    const auto tenth = consolidate(sessions, 0.1, 9);
    ASSERT_EQ(tenth.size(), 300u);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 100; ++j) {
            const auto& e = tenth[static_cast<std::size_t>(i * 100 + j)];
            EXPECT_EQ(e.session_id, "s" + std::to_string(i));
            if (j > 0) EXPECT_LT(tenth[static_cast<std::size_t>(i * 100 + j - 1)].t, e.t);
        }
    }
    EXPECT_EQ(consolidate(sessions, 0.1, 9), tenth);
    const auto all = consolidate(sessions, 1.0, 9);
    ASSERT_EQ(all.size(), 3000u);
    EXPECT_EQ(all[1500], sessions[1].frames[500]);
}

TEST(SessionFile, RoundTripBitExact) {
    TempDir dir("session");
    const auto rec = sample_record(50, "rt");
    save_session(rec, dir.file("rt.bcis"));
    const auto back = load_session(dir.file("rt.bcis"));
    EXPECT_EQ(back, rec);
    EXPECT_EQ(count_reproduced_labels(back), rec.frames.size());
}

TEST(SessionFile, CorruptionDetected) {
    TempDir dir("corrupt");
    save_session(sample_record(20, "c"), dir.file("c.bcis"));
    auto bytes = io::read_file(dir.file("c.bcis"));
    bytes[bytes.size() / 2] ^= 0x40;
    EXPECT_BCI_ERROR(decode_session(bytes), ErrorKind::CorruptFile);
    bytes = io::read_file(dir.file("c.bcis"));
    bytes.resize(bytes.size() - 3);
    EXPECT_BCI_ERROR(decode_session(bytes), ErrorKind::CorruptFile);
}

TEST(SessionFile, HeaderJson) {
    const auto rec = sample_record(1, "h");
    EXPECT_EQ(header_from_json(header_to_json(rec.header)), rec.header);
}

TEST(Crc64, KnownVector) {
    // CRC-64/XZ check value for "123456789"
    const std::string s = "123456789";
    EXPECT_EQ(io::crc64(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())),
              0x995DC9BBDF1939FAull);
}
