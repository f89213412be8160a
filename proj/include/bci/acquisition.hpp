#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "bci/labels.hpp"
#include "bci/rng.hpp"

namespace bci {

struct SamplingConfig {
    double sample_rate = 250.0;
    int channel_count = 8;
    int adc_bits = 24;
    double gain = 24.0;
    double vref = 4.5;  // volts
    int mains_freq = 50;

    void validate() const;
    double dt() const { return 1.0 / sample_rate; }
    std::int32_t max_count() const { return (std::int32_t{1} << (adc_bits - 1)) - 1; }
    double full_scale_uv() const;

    bool operator==(const SamplingConfig&) const = default;
};

enum class ChannelQuality : std::uint8_t { Good = 0, Railed = 1 };

struct MontageConfig {
    std::vector<std::string> positions;
    std::vector<ChannelQuality> channel_quality;

    // Cz, C1, C2, C3, C4, CP1, CP2, Fpz over the motor strip.
    static MontageConfig motor_strip();
    void validate(int channel_count) const;

    bool operator==(const MontageConfig&) const = default;
};

enum class Hemisphere { Left, Right, Midline };

// 10-20/10-10 rule: odd suffix is left, even is right, "z" is midline.
Hemisphere hemisphere_of(std::string_view position);
bool is_valid_position(std::string_view position);

struct RawSample {
    std::uint8_t seq = 0;
    double t = 0.0;
    std::vector<double> volts;  // µV, one per channel

    bool operator==(const RawSample&) const = default;
};

// ---------------------------------------------------------------------------
// Cyton serial protocol: 0xA0, seq, 8 x 24-bit big-endian counts, 6 aux
// bytes, footer 0xC0..0xCF.

inline constexpr std::size_t kCytonPacketSize = 33;
inline constexpr std::size_t kCytonChannels = 8;
inline constexpr std::uint8_t kCytonHeader = 0xA0;

struct CytonFrame {
    std::uint8_t seq = 0;
    std::array<std::int32_t, kCytonChannels> counts{};
    std::array<std::uint8_t, 6> aux{};
    std::uint8_t footer = 0xC0;
};

double counts_to_microvolts(std::int32_t count, const SamplingConfig& cfg);
// Nearest count for a voltage, clamped to the ADC range.
std::int32_t microvolts_to_counts(double microvolts, const SamplingConfig& cfg);

CytonFrame decode_cyton_frame(std::span<const std::uint8_t> block);
std::array<std::uint8_t, kCytonPacketSize> encode_cyton_frame(const CytonFrame& frame);

// `t` is stamped onto the result; the packet itself carries no time.
RawSample parse_cyton_packet(std::span<const std::uint8_t> block, const SamplingConfig& cfg,
                             double t = 0.0);

// Reassembles frames from an arbitrary byte stream, resynchronizing on
// framing errors and turning sequence gaps into a dropped-sample count.
class CytonStreamDecoder {
public:
    explicit CytonStreamDecoder(SamplingConfig cfg, std::uint8_t max_gap = 32);

    // Appends decoded samples to `out`. Throws DesyncDetected on a gap
    // larger than max_gap.
    void feed(std::span<const std::uint8_t> bytes, std::vector<RawSample>& out);

    std::uint64_t dropped() const { return dropped_; }
    std::uint64_t skipped_bytes() const { return skipped_bytes_; }

private:
    SamplingConfig cfg_;
    std::uint8_t max_gap_;
    std::vector<std::uint8_t> pending_;
    std::optional<std::uint8_t> last_seq_;
    std::uint64_t sample_index_ = 0;
    std::uint64_t dropped_ = 0;
    std::uint64_t skipped_bytes_ = 0;
};

// ---------------------------------------------------------------------------
// Synthetic EEG

struct SynthConfig {
    std::uint64_t seed = 1;
    double noise_amplitude = 4.0;  // µV
    double mu_low = 8.0;           // Hz
    double mu_high = 13.0;         // Hz
    double mu_amplitude = 10.0;    // µV, unattenuated mu oscillation
    double mu_depth = 0.8;
    double mains_leak = 20.0;       // µV
    double drift_amplitude = 15.0;  // µV

    void validate() const;
};

struct LabelSegment {
    double start = 0.0;  // inclusive
    double end = 0.0;    // exclusive
    ClassLabel label = ClassLabel::None;
};

class LabelSchedule {
public:
    LabelSchedule() = default;
    explicit LabelSchedule(std::vector<LabelSegment> segments);

    // Throws ScheduleGap if no segment covers t.
    ClassLabel at(double t) const;
    bool covers(double start, double end) const;
    const std::vector<LabelSegment>& segments() const { return segments_; }

    // "0:10:none,10:20:left" (start:end:label, seconds).
    static LabelSchedule parse(std::string_view text);
    static LabelSchedule constant(ClassLabel label, double duration);

private:
    std::vector<LabelSegment> segments_;
};

// Incremental generator. Each channel is 1/f noise (summed octave white
// generators) + slow drift + mains sine + a mu-band oscillation that is
// attenuated contralaterally to the imagined/pressed side.
class SynthGenerator {
public:
    SynthGenerator(SamplingConfig cfg, SynthConfig scfg,
                   MontageConfig montage = MontageConfig::motor_strip());

    RawSample next(ClassLabel label);
    std::uint64_t index() const { return index_; }
    const SamplingConfig& config() const { return cfg_; }

private:
    struct Channel {
        std::vector<double> pink_rows;
        double pink_sum = 0.0;
        std::array<double, 3> mu_freq{};
        std::array<double, 3> mu_phase{};
        std::array<double, 2> drift_freq{};
        std::array<double, 2> drift_phase{};
        Hemisphere side = Hemisphere::Midline;
        double mu_gain = 1.0;
    };

    SamplingConfig cfg_;
    SynthConfig scfg_;
    std::vector<Channel> channels_;
    double mains_phase_ = 0.0;
    double gain_alpha_ = 0.0;
    std::uint64_t index_ = 0;
    Rng rng_;
};

std::vector<RawSample> synth_stream(const SamplingConfig& cfg, const SynthConfig& scfg,
                                    const LabelSchedule& schedule, double duration_s,
                                    const MontageConfig& montage = MontageConfig::motor_strip());

// ---------------------------------------------------------------------------
// Sources

class SampleSource {
public:
    virtual ~SampleSource() = default;
    // nullopt at end of stream.
    virtual std::optional<RawSample> next() = 0;
    virtual const SamplingConfig& config() const = 0;
    virtual std::uint64_t dropped() const { return 0; }
};

enum class SourceKind { Serial, Tcp, FileReplay, Synthetic };

struct SourceSpec {
    SourceKind kind = SourceKind::Synthetic;
    std::string path;  // serial device or recording file
    std::string host;
    std::uint16_t port = 0;
    SynthConfig synth;

    // "serial:/dev/ttyUSB0", "tcp:host:port", "file:rec.bcir", "synthetic".
    static SourceSpec parse(std::string_view text);
    std::string describe() const;
};

using LabelProvider = std::function<ClassLabel()>;

// Synthetic source stops after `max_samples` (0 = unbounded). The label
// provider is polled once per sample.
class SyntheticSource final : public SampleSource {
public:
    SyntheticSource(SamplingConfig cfg, SynthConfig scfg, LabelProvider labels,
                    std::uint64_t max_samples = 0);
    std::optional<RawSample> next() override;
    const SamplingConfig& config() const override { return gen_.config(); }

private:
    SynthGenerator gen_;
    LabelProvider labels_;
    std::uint64_t max_samples_;
};

class ReplaySource final : public SampleSource {
public:
    explicit ReplaySource(const std::string& path);
    ~ReplaySource() override;
    std::optional<RawSample> next() override;
    const SamplingConfig& config() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Reads raw concatenated Cyton frames from a TCP peer.
class TcpSource final : public SampleSource {
public:
    TcpSource(const std::string& host, std::uint16_t port, SamplingConfig cfg);
    ~TcpSource() override;
    std::optional<RawSample> next() override;
    const SamplingConfig& config() const override { return cfg_; }
    std::uint64_t dropped() const override;

private:
    struct Impl;
    SamplingConfig cfg_;
    std::unique_ptr<Impl> impl_;
};

// Cyton dongle serial device, 115200 baud 8N1 raw mode.
class SerialSource final : public SampleSource {
public:
    SerialSource(const std::string& device, SamplingConfig cfg);
    ~SerialSource() override;
    std::optional<RawSample> next() override;
    const SamplingConfig& config() const override { return cfg_; }
    std::uint64_t dropped() const override;

private:
    SamplingConfig cfg_;
    int fd_ = -1;
    CytonStreamDecoder decoder_;
    std::deque<RawSample> ready_;
};

std::unique_ptr<SampleSource> open_source(const SourceSpec& spec, const SamplingConfig& cfg,
                                          LabelProvider labels = {}, std::uint64_t max_samples = 0);

// ---------------------------------------------------------------------------
// Producer/consumer hand-off

// Bounded FIFO between the acquisition producer and the pipeline consumer.
// A push into a full queue latches an Overflow that the consumer observes on
// its next pop.
class SampleFifo {
public:
    explicit SampleFifo(std::size_t capacity);

    bool push(RawSample s);
    // Blocks until a sample is available or the producer closed the queue.
    std::optional<RawSample> pop();
    void close(std::exception_ptr error = nullptr);
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<RawSample> q_;
    std::size_t capacity_;
    bool closed_ = false;
    bool overflow_ = false;
    std::exception_ptr error_;
};

// Drains a source into a FIFO on its own thread. realtime_factor > 0 paces
// delivery at that multiple of the nominal rate; 0 runs unpaced.
class AcquisitionThread {
public:
    AcquisitionThread(std::unique_ptr<SampleSource> source, SampleFifo& fifo,
                      double realtime_factor = 1.0);
    ~AcquisitionThread();
    AcquisitionThread(const AcquisitionThread&) = delete;
    AcquisitionThread& operator=(const AcquisitionThread&) = delete;

    void stop();
    std::uint64_t dropped() const { return dropped_.load(); }

private:
    void run(double realtime_factor);

    std::unique_ptr<SampleSource> source_;
    SampleFifo& fifo_;
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> dropped_{0};
    std::thread thread_;
};

}  // namespace bci
