#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bci/acquisition.hpp"

namespace bci {

// Debug raw recording: "BCIR", u16 version, sampling header, then one row
// of channel_count little-endian f32 µV values per sample until EOF.
// Sample times are implied by the row index.
inline constexpr std::uint16_t kRawRecordingVersion = 1;

class RawRecordingWriter {
public:
    RawRecordingWriter(const std::string& path, const SamplingConfig& cfg);
    void write(const RawSample& sample);
    std::uint64_t rows() const { return rows_; }

private:
    std::ofstream out_;
    int channels_;
    std::uint64_t rows_ = 0;
    std::vector<float> row_;
};

class RawRecordingReader {
public:
    explicit RawRecordingReader(const std::string& path);
    const SamplingConfig& config() const { return cfg_; }
    std::optional<RawSample> next();

private:
    std::ifstream in_;
    SamplingConfig cfg_;
    std::uint64_t index_ = 0;
    std::vector<float> row_;
};

void write_raw_recording(const std::string& path, const SamplingConfig& cfg,
                         std::span<const RawSample> samples);
std::vector<RawSample> read_raw_recording(const std::string& path, SamplingConfig* cfg = nullptr);

}  // namespace bci
