#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "bci/acquisition.hpp"

namespace bci {

// One second-order section, a0 normalized to 1:
//   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
    std::array<double, 3> b{1.0, 0.0, 0.0};
    std::array<double, 2> a{0.0, 0.0};  // a1, a2

    bool stable() const;
    std::complex<double> response(double freq_hz, double sample_rate) const;
};

struct FilterDesign {
    double sample_rate = 250.0;
    double hp_cutoff = 0.5;
    double lp_cutoff = 45.0;
    double notch_freq = 50.0;
    double notch_q = 30.0;

    bool operator==(const FilterDesign&) const = default;
};

// Bilinear-transform biquads with frequency pre-warping.
Biquad butterworth_highpass(double sample_rate, double cutoff);
Biquad butterworth_lowpass(double sample_rate, double cutoff);
Biquad notch(double sample_rate, double center, double q);

// Per-channel streaming cascade. Stage order: high-pass, low-pass, notch.
class FilterCascade {
public:
    FilterCascade() = default;
    FilterCascade(std::vector<Biquad> stages, double sample_rate, int channel_count,
                  FilterDesign design = {});

    double step(int channel, double x);
    // Filters every channel in place; t and seq are untouched.
    void apply(RawSample& sample);
    void reset();

    std::complex<double> response(double freq_hz) const;

    const std::vector<Biquad>& stages() const { return stages_; }
    const FilterDesign& design() const { return design_; }
    double sample_rate() const { return sample_rate_; }
    int channel_count() const { return channel_count_; }
    // Count of NaN/inf inputs seen per channel.
    const std::vector<std::uint64_t>& nan_counts() const { return nan_counts_; }

private:
    std::vector<Biquad> stages_;
    double sample_rate_ = 250.0;
    int channel_count_ = 0;
    FilterDesign design_;
    // [channel][stage] -> two transposed direct-form II registers
    std::vector<std::array<double, 2>> state_;
    std::vector<std::uint64_t> nan_counts_;
};

// Throws InvalidBand unless 0 < hp < lp < fs/2 and 0 < notch < fs/2, and
// UnstableDesign if any section has a pole on or outside the unit circle.
FilterCascade design_cascade(const FilterDesign& design, int channel_count = 8);
FilterCascade design_cascade(double sample_rate, double hp_cutoff, double lp_cutoff,
                             double notch_freq, double notch_q, int channel_count = 8);

double filter_step(FilterCascade& cascade, int channel, double x);
RawSample filter_frame(FilterCascade& cascade, RawSample sample);

}  // namespace bci
