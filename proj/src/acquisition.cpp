#include "bci/acquisition.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <sstream>
#include <string>

#include "bci/error.hpp"

namespace bci {

// ---------------------------------------------------------------------------
// Configuration

void SamplingConfig::validate() const {
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
        raise(ErrorKind::InvalidArgument, "sample_rate must be > 0");
    }
    if (channel_count < 1) raise(ErrorKind::InvalidArgument, "channel_count must be >= 1");
    if (adc_bits < 12 || adc_bits > 24) raise(ErrorKind::InvalidArgument, "adc_bits must be 12..24");
    if (!(gain > 0.0)) raise(ErrorKind::InvalidArgument, "gain must be > 0");
    if (!(vref > 0.0)) raise(ErrorKind::InvalidArgument, "vref must be > 0");
    if (mains_freq != 50 && mains_freq != 60) {
        raise(ErrorKind::InvalidArgument, "mains_freq must be 50 or 60");
    }
}

double SamplingConfig::full_scale_uv() const { return vref * 1e6 / gain; }

MontageConfig MontageConfig::motor_strip() {
    MontageConfig m;
    m.positions = {"Cz", "C1", "C2", "C3", "C4", "CP1", "CP2", "Fpz"};
    m.channel_quality.assign(m.positions.size(), ChannelQuality::Good);
    return m;
}

void MontageConfig::validate(int channel_count) const {
    if (positions.size() != static_cast<std::size_t>(channel_count)) {
        raise(ErrorKind::InvalidArgument, "montage has " + std::to_string(positions.size()) +
                                              " positions for " + std::to_string(channel_count) +
                                              " channels");
    }
    if (!channel_quality.empty() && channel_quality.size() != positions.size()) {
        raise(ErrorKind::InvalidArgument, "channel_quality length differs from positions");
    }
    for (const auto& p : positions) {
        if (!is_valid_position(p)) raise(ErrorKind::InvalidArgument, "not a 10-20 label: " + p);
    }
}

bool is_valid_position(std::string_view p) {
    // Region letters (Fp, AF, F, FC, FT, C, CP, TP, T, P, PO, O, I, A, M, N)
    // followed by a number or "z".
    static constexpr std::string_view kRegions[] = {"Fp", "AF", "FC", "FT", "CP", "TP", "PO",
                                                    "F",  "C",  "T",  "P",  "O",  "I",  "A",
                                                    "M",  "N"};
    for (auto region : kRegions) {
        if (p.size() <= region.size()) continue;
        if (!std::equal(region.begin(), region.end(), p.begin(),
                        [](char a, char b) { return std::tolower(a) == std::tolower(b); })) {
            continue;
        }
        auto rest = p.substr(region.size());
        if (rest == "z" || rest == "Z") return true;
        if (std::all_of(rest.begin(), rest.end(), [](char ch) { return std::isdigit(ch); }) &&
            rest.size() <= 2 && rest[0] != '0') {
            return true;
        }
    }
    return false;
}

Hemisphere hemisphere_of(std::string_view p) {
    if (p.empty()) return Hemisphere::Midline;
    const char last = p.back();
    if (last == 'z' || last == 'Z') return Hemisphere::Midline;
    if (std::isdigit(static_cast<unsigned char>(last))) {
        return ((last - '0') % 2 == 1) ? Hemisphere::Left : Hemisphere::Right;
    }
    return Hemisphere::Midline;
}

// ---------------------------------------------------------------------------
// Cyton protocol

double counts_to_microvolts(std::int32_t count, const SamplingConfig& cfg) {
    // Numerator stays exact in double for every 24-bit count.
    return (static_cast<double>(count) * (cfg.vref * 1e6)) /
           (cfg.gain * static_cast<double>(cfg.max_count()));
}

std::int32_t microvolts_to_counts(double microvolts, const SamplingConfig& cfg) {
    const double c = std::round(microvolts * cfg.gain * cfg.max_count() / (cfg.vref * 1e6));
    const double lo = -static_cast<double>(cfg.max_count()) - 1.0;
    const double hi = static_cast<double>(cfg.max_count());
    return static_cast<std::int32_t>(std::clamp(c, lo, hi));
}

CytonFrame decode_cyton_frame(std::span<const std::uint8_t> block) {
    if (block.size() != kCytonPacketSize) {
        raise(ErrorKind::ShortPacket, "expected 33 bytes, got " + std::to_string(block.size()));
    }
    if (block[0] != kCytonHeader) raise(ErrorKind::BadHeader, "first byte is not 0xA0");
    if ((block[32] & 0xF0) != 0xC0) raise(ErrorKind::BadFooter, "last byte outside 0xC0..0xCF");

    CytonFrame f;
    f.seq = block[1];
    for (std::size_t ch = 0; ch < kCytonChannels; ++ch) {
        const std::size_t o = 2 + 3 * ch;
        std::uint32_t raw = (std::uint32_t{block[o]} << 16) | (std::uint32_t{block[o + 1]} << 8) |
                            std::uint32_t{block[o + 2]};
        // sign-extend 24 -> 32 bits
        if (raw & 0x800000u) raw |= 0xFF000000u;
        f.counts[ch] = static_cast<std::int32_t>(raw);
    }
    std::copy(block.begin() + 26, block.begin() + 32, f.aux.begin());
    f.footer = block[32];
    return f;
}

std::array<std::uint8_t, kCytonPacketSize> encode_cyton_frame(const CytonFrame& frame) {
    std::array<std::uint8_t, kCytonPacketSize> out{};
    out[0] = kCytonHeader;
    out[1] = frame.seq;
    for (std::size_t ch = 0; ch < kCytonChannels; ++ch) {
        const auto raw = static_cast<std::uint32_t>(frame.counts[ch]) & 0xFFFFFFu;
        out[2 + 3 * ch] = static_cast<std::uint8_t>(raw >> 16);
        out[3 + 3 * ch] = static_cast<std::uint8_t>(raw >> 8);
        out[4 + 3 * ch] = static_cast<std::uint8_t>(raw);
    }
    std::copy(frame.aux.begin(), frame.aux.end(), out.begin() + 26);
    out[32] = static_cast<std::uint8_t>(0xC0 | (frame.footer & 0x0F));
    return out;
}

RawSample parse_cyton_packet(std::span<const std::uint8_t> block, const SamplingConfig& cfg,
                             double t) {
    if (cfg.channel_count != static_cast<int>(kCytonChannels)) {
        raise(ErrorKind::InvalidArgument, "Cyton frames carry exactly 8 channels");
    }
    const CytonFrame f = decode_cyton_frame(block);
    RawSample s;
    s.seq = f.seq;
    s.t = t;
    s.volts.resize(kCytonChannels);
    for (std::size_t ch = 0; ch < kCytonChannels; ++ch) {
        s.volts[ch] = counts_to_microvolts(f.counts[ch], cfg);
    }
    return s;
}

CytonStreamDecoder::CytonStreamDecoder(SamplingConfig cfg, std::uint8_t max_gap)
    : cfg_(cfg), max_gap_(max_gap) {}

void CytonStreamDecoder::feed(std::span<const std::uint8_t> bytes, std::vector<RawSample>& out) {
    pending_.insert(pending_.end(), bytes.begin(), bytes.end());
    std::size_t pos = 0;
    while (pending_.size() - pos >= kCytonPacketSize) {
        const std::uint8_t* p = pending_.data() + pos;
        if (p[0] != kCytonHeader || (p[32] & 0xF0) != 0xC0) {
            ++pos;
            ++skipped_bytes_;
            continue;
        }
        const std::uint8_t seq = p[1];
        if (last_seq_) {
            const auto gap = static_cast<std::uint8_t>(seq - static_cast<std::uint8_t>(*last_seq_ + 1));
            if (gap > max_gap_) {
                raise(ErrorKind::DesyncDetected,
                      "sequence jumped by " + std::to_string(gap) + " packets");
            }
            dropped_ += gap;
            sample_index_ += gap;
        }
        last_seq_ = seq;
        const double t = static_cast<double>(sample_index_) / cfg_.sample_rate;
        out.push_back(parse_cyton_packet({p, kCytonPacketSize}, cfg_, t));
        ++sample_index_;
        pos += kCytonPacketSize;
    }
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(pos));
}

// ---------------------------------------------------------------------------
// Synthetic EEG

void SynthConfig::validate() const {
    if (!(mu_depth >= 0.0 && mu_depth <= 1.0)) {
        raise(ErrorKind::InvalidArgument, "mu_depth must be in [0, 1]");
    }
    if (noise_amplitude < 0 || mu_amplitude < 0 || mains_leak < 0 || drift_amplitude < 0) {
        raise(ErrorKind::InvalidArgument, "synthetic amplitudes must be >= 0");
    }
    if (!(mu_low > 0.0 && mu_low < mu_high)) {
        raise(ErrorKind::InvalidArgument, "mu band must satisfy 0 < low < high");
    }
}

LabelSchedule::LabelSchedule(std::vector<LabelSegment> segments) : segments_(std::move(segments)) {
    std::sort(segments_.begin(), segments_.end(),
              [](const LabelSegment& a, const LabelSegment& b) { return a.start < b.start; });
    for (const auto& s : segments_) {
        if (!(s.end > s.start)) raise(ErrorKind::InvalidArgument, "empty schedule segment");
    }
}

ClassLabel LabelSchedule::at(double t) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const LabelSegment& s) { return v < s.start; });
    if (it != segments_.begin()) {
        --it;
        if (t < it->end) return it->label;
    }
    raise(ErrorKind::ScheduleGap, "no label scheduled at t=" + std::to_string(t));
}

bool LabelSchedule::covers(double start, double end) const {
    double reached = start;
    for (const auto& s : segments_) {
        if (s.start > reached) break;
        reached = std::max(reached, s.end);
        if (reached >= end) return true;
    }
    return reached >= end;
}

LabelSchedule LabelSchedule::parse(std::string_view text) {
    std::vector<LabelSegment> segs;
    std::stringstream ss{std::string(text)};
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto a = item.find(':');
        const auto b = item.find(':', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos) {
            raise(ErrorKind::InvalidArgument, "schedule item '" + item + "' is not start:end:label");
        }
        LabelSegment s;
        try {
            s.start = std::stod(item.substr(0, a));
            s.end = std::stod(item.substr(a + 1, b - a - 1));
        } catch (const std::exception&) {
            raise(ErrorKind::InvalidArgument, "bad times in schedule item '" + item + "'");
        }
        s.label = parse_label(item.substr(b + 1));
        segs.push_back(s);
    }
    return LabelSchedule(std::move(segs));
}

LabelSchedule LabelSchedule::constant(ClassLabel label, double duration) {
    return LabelSchedule({LabelSegment{0.0, duration, label}});
}

namespace {
constexpr int kPinkRows = 8;
constexpr double kMuSmoothingSeconds = 0.05;
}  // namespace

SynthGenerator::SynthGenerator(SamplingConfig cfg, SynthConfig scfg, MontageConfig montage)
    : cfg_(cfg), scfg_(scfg), rng_(scfg.seed) {
    cfg_.validate();
    scfg_.validate();
    montage.validate(cfg_.channel_count);
    gain_alpha_ = 1.0 - std::exp(-cfg_.dt() / kMuSmoothingSeconds);
    mains_phase_ = rng_.uniform(0.0, 2.0 * M_PI);
    channels_.resize(static_cast<std::size_t>(cfg_.channel_count));
    for (std::size_t c = 0; c < channels_.size(); ++c) {
        auto& ch = channels_[c];
        ch.side = hemisphere_of(montage.positions[c]);
        ch.pink_rows.resize(kPinkRows);
        for (auto& r : ch.pink_rows) {
            r = rng_.normal();
            ch.pink_sum += r;
        }
        for (std::size_t k = 0; k < ch.mu_freq.size(); ++k) {
            ch.mu_freq[k] = rng_.uniform(scfg_.mu_low, scfg_.mu_high);
            ch.mu_phase[k] = rng_.uniform(0.0, 2.0 * M_PI);
        }
        for (std::size_t k = 0; k < ch.drift_freq.size(); ++k) {
            ch.drift_freq[k] = rng_.uniform(0.05, 0.4);
            ch.drift_phase[k] = rng_.uniform(0.0, 2.0 * M_PI);
        }
    }
}

RawSample SynthGenerator::next(ClassLabel label) {
    const double t = static_cast<double>(index_) / cfg_.sample_rate;
    RawSample s;
    s.seq = static_cast<std::uint8_t>(index_ & 0xFF);
    s.t = t;
    s.volts.resize(channels_.size());

    // Voss-McCartney: row r refreshes every 2^r samples.
    const int row = std::countr_zero(index_ + 1);
    const double pink_norm = scfg_.noise_amplitude / std::sqrt(static_cast<double>(kPinkRows + 1));
    const double mains =
        scfg_.mains_leak * std::sin(2.0 * M_PI * cfg_.mains_freq * t + mains_phase_);
    const double mu_scale = scfg_.mu_amplitude / std::sqrt(3.0);
    const double drift_scale = scfg_.drift_amplitude / std::sqrt(2.0);

    for (std::size_t c = 0; c < channels_.size(); ++c) {
        auto& ch = channels_[c];
        if (row < kPinkRows) {
            const double fresh = rng_.normal();
            ch.pink_sum += fresh - ch.pink_rows[static_cast<std::size_t>(row)];
            ch.pink_rows[static_cast<std::size_t>(row)] = fresh;
        }
        const double white = rng_.normal();
        const double pink = (ch.pink_sum + white) * pink_norm;

        const bool attenuated = (ch.side == Hemisphere::Left && includes_right(label)) ||
                                (ch.side == Hemisphere::Right && includes_left(label));
        const double target = attenuated ? 1.0 - scfg_.mu_depth : 1.0;
        ch.mu_gain += (target - ch.mu_gain) * gain_alpha_;

        double mu = 0.0;
        for (std::size_t k = 0; k < ch.mu_freq.size(); ++k) {
            mu += std::sin(2.0 * M_PI * ch.mu_freq[k] * t + ch.mu_phase[k]);
        }
        double drift = 0.0;
        for (std::size_t k = 0; k < ch.drift_freq.size(); ++k) {
            drift += std::sin(2.0 * M_PI * ch.drift_freq[k] * t + ch.drift_phase[k]);
        }
        s.volts[c] = pink + drift_scale * drift + mains + mu_scale * ch.mu_gain * mu;
    }
    ++index_;
    return s;
}

std::vector<RawSample> synth_stream(const SamplingConfig& cfg, const SynthConfig& scfg,
                                    const LabelSchedule& schedule, double duration_s,
                                    const MontageConfig& montage) {
    const auto n = static_cast<std::size_t>(std::llround(duration_s * cfg.sample_rate));
    if (n > 0 && !schedule.covers(0.0, static_cast<double>(n - 1) / cfg.sample_rate)) {
        // still let at() name the first uncovered time
        for (std::size_t i = 0; i < n; ++i) schedule.at(static_cast<double>(i) / cfg.sample_rate);
    }
    SynthGenerator gen(cfg, scfg, montage);
    std::vector<RawSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(gen.next(schedule.at(static_cast<double>(i) / cfg.sample_rate)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sources

SourceSpec SourceSpec::parse(std::string_view text) {
    SourceSpec spec;
    auto colon = text.find(':');
    const std::string_view kind = text.substr(0, colon);
    const std::string_view rest = colon == std::string_view::npos ? "" : text.substr(colon + 1);
    if (kind == "synthetic") {
        spec.kind = SourceKind::Synthetic;
    } else if (kind == "serial" && !rest.empty()) {
        spec.kind = SourceKind::Serial;
        spec.path = rest;
    } else if (kind == "file" && !rest.empty()) {
        spec.kind = SourceKind::FileReplay;
        spec.path = rest;
    } else if (kind == "tcp") {
        const auto pc = rest.rfind(':');
        if (pc == std::string_view::npos) raise(ErrorKind::InvalidArgument, "tcp source needs host:port");
        spec.kind = SourceKind::Tcp;
        spec.host = rest.substr(0, pc);
        try {
            const int port = std::stoi(std::string(rest.substr(pc + 1)));
            if (port <= 0 || port > 65535) throw std::out_of_range("port");
            spec.port = static_cast<std::uint16_t>(port);
        } catch (const std::exception&) {
            raise(ErrorKind::InvalidArgument, "bad tcp port in '" + std::string(text) + "'");
        }
    } else {
        raise(ErrorKind::InvalidArgument, "unknown source '" + std::string(text) + "'");
    }
    return spec;
}

std::string SourceSpec::describe() const {
    switch (kind) {
        case SourceKind::Synthetic: return "synthetic";
        case SourceKind::Serial: return "serial:" + path;
        case SourceKind::FileReplay: return "file:" + path;
        case SourceKind::Tcp: return "tcp:" + host + ":" + std::to_string(port);
    }
    return "synthetic";
}

SyntheticSource::SyntheticSource(SamplingConfig cfg, SynthConfig scfg, LabelProvider labels,
                                 std::uint64_t max_samples)
    : gen_(cfg, scfg), labels_(std::move(labels)), max_samples_(max_samples) {}

std::optional<RawSample> SyntheticSource::next() {
    if (max_samples_ != 0 && gen_.index() >= max_samples_) return std::nullopt;
    return gen_.next(labels_ ? labels_() : ClassLabel::None);
}

std::unique_ptr<SampleSource> open_source(const SourceSpec& spec, const SamplingConfig& cfg,
                                          LabelProvider labels, std::uint64_t max_samples) {
    switch (spec.kind) {
        case SourceKind::Synthetic:
            return std::make_unique<SyntheticSource>(cfg, spec.synth, std::move(labels), max_samples);
        case SourceKind::FileReplay:
            return std::make_unique<ReplaySource>(spec.path);
        case SourceKind::Tcp:
            return std::make_unique<TcpSource>(spec.host, spec.port, cfg);
        case SourceKind::Serial:
            return std::make_unique<SerialSource>(spec.path, cfg);
    }
    raise(ErrorKind::SourceUnavailable, "unsupported source");
}

// ---------------------------------------------------------------------------
// FIFO + producer thread

SampleFifo::SampleFifo(std::size_t capacity) : capacity_(capacity) {}

bool SampleFifo::push(RawSample s) {
    {
        std::lock_guard lk(mu_);
        if (q_.size() >= capacity_) {
            overflow_ = true;
            cv_.notify_all();
            return false;
        }
        q_.push_back(std::move(s));
    }
    cv_.notify_one();
    return true;
}

std::optional<RawSample> SampleFifo::pop() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !q_.empty() || closed_ || overflow_; });
    if (overflow_) raise(ErrorKind::Overflow, "consumer fell behind the acquisition stream");
    if (!q_.empty()) {
        RawSample s = std::move(q_.front());
        q_.pop_front();
        return s;
    }
    if (error_) std::rethrow_exception(error_);
    return std::nullopt;
}

void SampleFifo::close(std::exception_ptr error) {
    {
        std::lock_guard lk(mu_);
        closed_ = true;
        error_ = error;
    }
    cv_.notify_all();
}

std::size_t SampleFifo::size() const {
    std::lock_guard lk(mu_);
    return q_.size();
}

AcquisitionThread::AcquisitionThread(std::unique_ptr<SampleSource> source, SampleFifo& fifo,
                                     double realtime_factor)
    : source_(std::move(source)), fifo_(fifo) {
    thread_ = std::thread([this, realtime_factor] { run(realtime_factor); });
}

AcquisitionThread::~AcquisitionThread() { stop(); }

void AcquisitionThread::stop() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
}

void AcquisitionThread::run(double realtime_factor) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const double period = source_->config().dt() / (realtime_factor > 0 ? realtime_factor : 1.0);
    std::uint64_t n = 0;
    try {
        while (!stop_) {
            auto s = source_->next();
            if (!s) break;
            dropped_ = source_->dropped();
            if (realtime_factor > 0) {
                std::this_thread::sleep_until(
                    start + std::chrono::duration_cast<clock::duration>(
                                std::chrono::duration<double>(period * static_cast<double>(n))));
            }
            if (!fifo_.push(std::move(*s))) break;
            ++n;
        }
        fifo_.close();
    } catch (...) {
        fifo_.close(std::current_exception());
    }
}

}  // namespace bci
