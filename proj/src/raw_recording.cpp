#include "bci/raw_recording.hpp"

#include <cstring>

#include "bci/binary_io.hpp"
#include "bci/error.hpp"

namespace bci {

namespace {

constexpr char kMagic[4] = {'B', 'C', 'I', 'R'};

template <class T>
void write_le(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) raise(ErrorKind::CorruptFile, "truncated raw recording header");
    return v;
}

}  // namespace

RawRecordingWriter::RawRecordingWriter(const std::string& path, const SamplingConfig& cfg)
    : out_(path, std::ios::binary | std::ios::trunc), channels_(cfg.channel_count) {
    if (!out_) raise(ErrorKind::InvalidArgument, "cannot write " + path);
    cfg.validate();
    out_.write(kMagic, 4);
    write_le<std::uint16_t>(out_, kRawRecordingVersion);
    write_le<double>(out_, cfg.sample_rate);
    write_le<std::uint16_t>(out_, static_cast<std::uint16_t>(cfg.channel_count));
    write_le<std::uint8_t>(out_, static_cast<std::uint8_t>(cfg.adc_bits));
    write_le<double>(out_, cfg.gain);
    write_le<double>(out_, cfg.vref);
    write_le<std::uint16_t>(out_, static_cast<std::uint16_t>(cfg.mains_freq));
    row_.resize(static_cast<std::size_t>(channels_));
}

void RawRecordingWriter::write(const RawSample& sample) {
    if (sample.volts.size() != row_.size()) {
        raise(ErrorKind::ShapeMismatch, "sample channel count differs from recording header");
    }
    for (std::size_t c = 0; c < row_.size(); ++c) row_[c] = static_cast<float>(sample.volts[c]);
    out_.write(reinterpret_cast<const char*>(row_.data()),
               static_cast<std::streamsize>(row_.size() * sizeof(float)));
    ++rows_;
}

RawRecordingReader::RawRecordingReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) raise(ErrorKind::SourceUnavailable, "cannot open " + path);
    char magic[4];
    in_.read(magic, 4);
    if (!in_ || std::memcmp(magic, kMagic, 4) != 0) {
        raise(ErrorKind::CorruptFile, path + " is not a raw recording");
    }
    const auto version = read_le<std::uint16_t>(in_);
    if (version != kRawRecordingVersion) {
        raise(ErrorKind::FormatVersionMismatch, "raw recording version " + std::to_string(version));
    }
    cfg_.sample_rate = read_le<double>(in_);
    cfg_.channel_count = read_le<std::uint16_t>(in_);
    cfg_.adc_bits = read_le<std::uint8_t>(in_);
    cfg_.gain = read_le<double>(in_);
    cfg_.vref = read_le<double>(in_);
    cfg_.mains_freq = read_le<std::uint16_t>(in_);
    cfg_.validate();
    row_.resize(static_cast<std::size_t>(cfg_.channel_count));
}

std::optional<RawSample> RawRecordingReader::next() {
    in_.read(reinterpret_cast<char*>(row_.data()),
             static_cast<std::streamsize>(row_.size() * sizeof(float)));
    if (in_.gcount() == 0) return std::nullopt;
    if (static_cast<std::size_t>(in_.gcount()) != row_.size() * sizeof(float)) {
        raise(ErrorKind::CorruptFile, "truncated raw recording row");
    }
    RawSample s;
    s.seq = static_cast<std::uint8_t>(index_ & 0xFF);
    s.t = static_cast<double>(index_) / cfg_.sample_rate;
    s.volts.assign(row_.begin(), row_.end());
    ++index_;
    return s;
}

void write_raw_recording(const std::string& path, const SamplingConfig& cfg,
                         std::span<const RawSample> samples) {
    RawRecordingWriter w(path, cfg);
    for (const auto& s : samples) w.write(s);
}

std::vector<RawSample> read_raw_recording(const std::string& path, SamplingConfig* cfg) {
    RawRecordingReader r(path);
    if (cfg) *cfg = r.config();
    std::vector<RawSample> out;
    while (auto s = r.next()) out.push_back(std::move(*s));
    return out;
}

}  // namespace bci
