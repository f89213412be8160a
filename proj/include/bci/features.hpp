#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bci/acquisition.hpp"

namespace bci {

enum class WindowFn : std::uint8_t { Rectangular = 0, Hann = 1 };

struct WindowConfig {
    int window_len = 256;
    int hop = 32;
    WindowFn window_fn = WindowFn::Hann;

    void validate() const;
    int bins() const { return window_len / 2; }

    bool operator==(const WindowConfig&) const = default;
};

enum class Band : std::uint8_t { Delta = 0, Theta = 1, Alpha = 2, Beta = 3 };
inline constexpr std::size_t kNumBands = 4;

struct BandEdges {
    double lo;
    double hi;
};
// [0.5,4), [4,8), [8,13), [13,30) Hz
inline constexpr std::array<BandEdges, kNumBands> kBandEdges = {
    BandEdges{0.5, 4.0}, BandEdges{4.0, 8.0}, BandEdges{8.0, 13.0}, BandEdges{13.0, 30.0}};

// Raw magnitudes are rounded to f32 precision at construction so that
// session files (f32 on disk) round-trip bit-exactly.
struct FeatureVector {
    double t = 0.0;  // window end time, seconds
    int channels = 0;
    int bins = 0;
    std::vector<double> mags;   // channel-major, channels * bins
    std::vector<double> bands;  // channel-major, channels * 4

    double mag(int channel, int bin) const {
        return mags[static_cast<std::size_t>(channel) * static_cast<std::size_t>(bins) +
                    static_cast<std::size_t>(bin)];
    }
    double band(int channel, Band b) const {
        return bands[static_cast<std::size_t>(channel) * kNumBands + static_cast<std::size_t>(b)];
    }

    bool operator==(const FeatureVector&) const = default;
};

std::vector<double> window_coefficients(int n, WindowFn fn);

// Full complex DFT (any length; radix-2 sizes are fastest).
std::vector<std::complex<double>> fft_complex(std::span<const double> x);

// One-sided magnitude spectrum, bins 0..N/2-1, unnormalized: an on-bin
// cosine of amplitude A gives A*N/2 (rectangular window).
std::vector<double> fft_magnitude(std::span<const double> window, WindowFn fn);

// Sum of squared magnitudes over bins whose centre k*fs/N (N = 2*|mags|)
// lies in each band.
std::array<double, kNumBands> extract_bands(std::span<const double> mags, double sample_rate);

// windows: one span of window_len samples per channel.
FeatureVector make_feature(std::span<const std::vector<double>> windows, double t,
                           const WindowConfig& wcfg, double sample_rate);

// Streaming window: keeps the last window_len filtered samples per channel
// and emits a FeatureVector every `hop` samples once the window is full.
class FeatureExtractor {
public:
    FeatureExtractor(WindowConfig wcfg, int channels, double sample_rate);

    std::optional<FeatureVector> push(const RawSample& filtered);
    void reset();
    const WindowConfig& config() const { return wcfg_; }

private:
    WindowConfig wcfg_;
    int channels_;
    double sample_rate_;
    std::vector<std::vector<double>> ring_;
    std::size_t head_ = 0;
    std::uint64_t seen_ = 0;
    int since_emit_ = 0;
    std::vector<std::vector<double>> scratch_;
};

// Per-feature z-score statistics in log(1 + magnitude) space.
struct NormStats {
    int channels = 0;
    int bins = 0;
    std::vector<double> mean;
    std::vector<double> stddev;
    // Features constant over the fitting set; they normalize to 0.
    std::vector<std::uint32_t> dropped;

    std::size_t size() const { return mean.size(); }
};

NormStats fit_norm(std::span<const FeatureVector> train);
// Returns a copy whose mags hold z-scores; bands are carried over.
FeatureVector apply_norm(const FeatureVector& fv, const NormStats& stats);
std::vector<double> normalized_values(const FeatureVector& fv, const NormStats& stats);

}  // namespace bci
