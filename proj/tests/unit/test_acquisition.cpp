#include <cmath>
#include <numeric>

#include "bci/acquisition.hpp"
#include "bci/features.hpp"
#include "bci/raw_recording.hpp"
#include "test_util.hpp"

using namespace bci;

namespace {

// 24-bit big-endian two's complement, written by hand
void put24(std::array<std::uint8_t, 33>& p, std::size_t at, std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v) & 0xFFFFFFu;
    p[at] = static_cast<std::uint8_t>(u >> 16);
    p[at + 1] = static_cast<std::uint8_t>(u >> 8);
    p[at + 2] = static_cast<std::uint8_t>(u);
}

std::array<std::uint8_t, 33> packet(std::uint8_t seq, std::array<std::int32_t, 8> counts) {
    std::array<std::uint8_t, 33> p{};
    p[0] = 0xA0;
    p[1] = seq;
    for (std::size_t c = 0; c < 8; ++c) put24(p, 2 + 3 * c, counts[c]);
    p[32] = 0xC0;
    return p;
}

double band_power(const std::vector<RawSample>& s, std::size_t begin, std::size_t end, int ch) {
    // mean alpha-band power over 256-sample rectangular windows
    double total = 0.0;
    int n = 0;
    for (std::size_t i = begin; i + 256 <= end; i += 128) {
        std::vector<double> w(256);
        for (std::size_t j = 0; j < 256; ++j) w[j] = s[i + j].volts[static_cast<std::size_t>(ch)];
        const double mean = std::accumulate(w.begin(), w.end(), 0.0) / 256.0;
        for (auto& v : w) v -= mean;
        const auto m = fft_magnitude(w, WindowFn::Hann);
        total += extract_bands(m, 250.0)[static_cast<std::size_t>(Band::Alpha)];
        ++n;
    }
    return total / n;
}

}  // namespace

TEST(Cyton, CountsToMicrovoltsHandValues) {
    SamplingConfig cfg;
    EXPECT_EQ(counts_to_microvolts(0, cfg), 0.0);
    // (2^23-1) * 4.5 / (24 * (2^23-1)) V = 0.1875 V
    EXPECT_NEAR(counts_to_microvolts((1 << 23) - 1, cfg), 187500.0, 1e-6);
    EXPECT_NEAR(counts_to_microvolts(-((1 << 23) - 1), cfg), -187500.0, 1e-6);
    EXPECT_NEAR(counts_to_microvolts(1, cfg), 4.5e6 / 24.0 / 8388607.0, 1e-12);
}

TEST(Cyton, ParsePacket) {
    SamplingConfig cfg;
    const auto zero = packet(7, {});
    const auto s = parse_cyton_packet(zero, cfg, 1.5);
    EXPECT_EQ(s.seq, 7);
    EXPECT_EQ(s.t, 1.5);
    ASSERT_EQ(s.volts.size(), 8u);
    for (double v : s.volts) EXPECT_EQ(v, 0.0);

    const auto p = packet(0, {(1 << 23) - 1, -1, 0, 0, 0, 0, 0, -(1 << 23)});
    const auto s2 = parse_cyton_packet(p, cfg);
    EXPECT_NEAR(s2.volts[0], 187500.0, 1e-6);
    EXPECT_LT(s2.volts[1], 0.0);
    EXPECT_NEAR(s2.volts[7], -187500.0 * 8388608.0 / 8388607.0, 1e-6);
}

TEST(Cyton, FramingErrors) {
    SamplingConfig cfg;
    auto p = packet(0, {});
    p[0] = 0xA1;
    EXPECT_BCI_ERROR(parse_cyton_packet(p, cfg), ErrorKind::BadHeader);
    p = packet(0, {});
    p[32] = 0x00;
    EXPECT_BCI_ERROR(parse_cyton_packet(p, cfg), ErrorKind::BadFooter);
    p = packet(0, {});
    EXPECT_BCI_ERROR(parse_cyton_packet(std::span<const std::uint8_t>(p.data(), 20), cfg), ErrorKind::ShortPacket);
}

TEST(Cyton, EncodeDecodeRoundTrip) {
    CytonFrame f;
    f.seq = 200;
    f.counts = {1, -1, 8388607, -8388608, 12345, -54321, 0, 42};
    f.aux = {1, 2, 3, 4, 5, 6};
    const auto bytes = encode_cyton_frame(f);
    const auto g = decode_cyton_frame(bytes);
    EXPECT_EQ(g.seq, f.seq);
    EXPECT_EQ(g.counts, f.counts);
    EXPECT_EQ(g.aux, f.aux);
}

TEST(Cyton, StreamDecoderResyncAndGaps) {
    SamplingConfig cfg;
    std::vector<std::uint8_t> bytes = {0x11, 0x22};  // garbage before the first frame
    for (std::uint8_t seq : {0, 1, 2, 5, 6}) {
        const auto p = packet(seq, {seq, 0, 0, 0, 0, 0, 0, 0});
        bytes.insert(bytes.end(), p.begin(), p.end());
    }
    CytonStreamDecoder dec(cfg);
    std::vector<RawSample> out;
    // feed in awkward chunk sizes
    for (std::size_t i = 0; i < bytes.size(); i += 7) {
        const auto n = std::min<std::size_t>(7, bytes.size() - i);
        dec.feed(std::span<const std::uint8_t>(bytes.data() + i, n), out);
    }
    ASSERT_EQ(out.size(), 5u);
    EXPECT_EQ(dec.dropped(), 2u);
    EXPECT_EQ(dec.skipped_bytes(), 2u);
    EXPECT_EQ(out[3].seq, 5);
    // timestamps follow the sample index, gaps included
    EXPECT_NEAR(out[3].t, 5.0 / 250.0, 1e-12);
}

TEST(Synth, Deterministic) {
    SamplingConfig cfg;
    SynthConfig s;
    s.seed = 9;
    const auto sched = LabelSchedule::parse("0:2:left,2:4:both");
    EXPECT_EQ(synth_stream(cfg, s, sched, 4.0), synth_stream(cfg, s, sched, 4.0));
}

TEST(Synth, ZeroDepthIgnoresLabels) {
    SamplingConfig cfg;
    SynthConfig s;
    s.mu_depth = 0.0;
    const auto a = synth_stream(cfg, s, LabelSchedule::constant(ClassLabel::Left, 4.0), 4.0);
    const auto b = synth_stream(cfg, s, LabelSchedule::constant(ClassLabel::None, 4.0), 4.0);
    EXPECT_EQ(a, b);
}

TEST(Synth, LeftSuppressesMuOnC4) {
    SamplingConfig cfg;
    SynthConfig s;
    s.mu_depth = 0.8;
    s.seed = 3;
    const auto left = synth_stream(cfg, s, LabelSchedule::constant(ClassLabel::Left, 10.0), 10.0);
    const auto none = synth_stream(cfg, s, LabelSchedule::constant(ClassLabel::None, 10.0), 10.0);
    const int c4 = 4;
    ASSERT_EQ(MontageConfig::motor_strip().positions[c4], "C4");
    EXPECT_LT(band_power(left, 250, left.size(), c4), band_power(none, 250, none.size(), c4));
    // C3 is on the other side; left imagery leaves it roughly alone
    const double l3 = band_power(left, 250, left.size(), 3);
    const double n3 = band_power(none, 250, none.size(), 3);
    EXPECT_GT(l3, 0.5 * n3);
}

TEST(Synth, ScheduleGapRejected) {
    SamplingConfig cfg;
    SynthConfig s;
    EXPECT_BCI_ERROR(synth_stream(cfg, s, LabelSchedule::parse("0:1:left,2:3:none"), 3.0), ErrorKind::ScheduleGap);
}

TEST(Schedule, ParseAndLookup) {
    const auto s = LabelSchedule::parse("0:1.5:left,1.5:3:right");
    EXPECT_EQ(s.at(0.0), ClassLabel::Left);
    EXPECT_EQ(s.at(1.4999), ClassLabel::Left);
    EXPECT_EQ(s.at(1.5), ClassLabel::Right);
    EXPECT_TRUE(s.covers(0.0, 3.0));
    EXPECT_FALSE(s.covers(0.0, 3.5));
    EXPECT_BCI_ERROR(LabelSchedule::parse("0:1"), ErrorKind::InvalidArgument);
}

TEST(SourceSpec, Parse) {
    EXPECT_EQ(SourceSpec::parse("synthetic").kind, SourceKind::Synthetic);
    const auto t = SourceSpec::parse("tcp:localhost:6000");
    EXPECT_EQ(t.kind, SourceKind::Tcp);
    EXPECT_EQ(t.host, "localhost");
    EXPECT_EQ(t.port, 6000);
    EXPECT_EQ(SourceSpec::parse("file:/x/y.bcir").path, "/x/y.bcir");
    EXPECT_EQ(SourceSpec::parse("serial:/dev/ttyUSB0").describe(), "serial:/dev/ttyUSB0");
    EXPECT_BCI_ERROR(SourceSpec::parse("tcp:nohost"), ErrorKind::InvalidArgument);
    EXPECT_BCI_ERROR(SourceSpec::parse("carrier-pigeon"), ErrorKind::InvalidArgument);
}

TEST(Sources, MissingFileOrDevice) {
    SamplingConfig cfg;
    EXPECT_BCI_ERROR(open_source(SourceSpec::parse("file:/nonexistent/x.bcir"), cfg), ErrorKind::SourceUnavailable);
    EXPECT_BCI_ERROR(open_source(SourceSpec::parse("serial:/nonexistent/tty"), cfg), ErrorKind::SourceUnavailable);
}

TEST(RawRecording, RoundTripAndReplay) {
    TempDir dir("raw");
    SamplingConfig cfg;
    SynthConfig s;
    const auto samples = synth_stream(cfg, s, LabelSchedule::constant(ClassLabel::Right, 2.0), 2.0);
    write_raw_recording(dir.file("a.bcir"), cfg, samples);
    SamplingConfig back;
    const auto read = read_raw_recording(dir.file("a.bcir"), &back);
    EXPECT_EQ(back, cfg);
    ASSERT_EQ(read.size(), samples.size());
    for (std::size_t i = 0; i < read.size(); i += 37) {
        EXPECT_DOUBLE_EQ(read[i].t, samples[i].t);
        for (std::size_t c = 0; c < 8; ++c) {
            EXPECT_EQ(read[i].volts[c], static_cast<double>(static_cast<float>(samples[i].volts[c])));
        }
    }
    ReplaySource src(dir.file("a.bcir"));
    std::size_t n = 0;
    while (src.next()) ++n;
    EXPECT_EQ(n, samples.size());
}

TEST(Fifo, OverflowSurfaces) {
    SampleFifo fifo(2);
    EXPECT_TRUE(fifo.push(RawSample{}));
    EXPECT_TRUE(fifo.push(RawSample{}));
    EXPECT_FALSE(fifo.push(RawSample{}));
    EXPECT_BCI_ERROR(fifo.pop(), ErrorKind::Overflow);
}
