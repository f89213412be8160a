#include "bci/signal.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bci/error.hpp"

namespace bci {

namespace {

constexpr double kButterworthQ = 0.70710678118654752440;

struct Prewarped {
    double k;
    double norm;
    double a1;
    double a2;
};

Prewarped prewarp(double sample_rate, double freq, double q) {
    const double k = std::tan(M_PI * freq / sample_rate);
    const double norm = 1.0 / (1.0 + k / q + k * k);
    return {k, norm, 2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm};
}

}  // namespace

bool Biquad::stable() const {
    // Jury conditions for z^2 + a1 z + a2.
    const double a1 = a[0];
    const double a2 = a[1];
    if (!std::isfinite(a1) || !std::isfinite(a2)) return false;
    for (double v : b) {
        if (!std::isfinite(v)) return false;
    }
    return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
}

std::complex<double> Biquad::response(double freq_hz, double sample_rate) const {
    const std::complex<double> z1 = std::polar(1.0, -2.0 * M_PI * freq_hz / sample_rate);
    const std::complex<double> z2 = z1 * z1;
    const auto num = b[0] + b[1] * z1 + b[2] * z2;
    const auto den = 1.0 + a[0] * z1 + a[1] * z2;
    return num / den;
}

Biquad butterworth_highpass(double sample_rate, double cutoff) {
    const auto p = prewarp(sample_rate, cutoff, kButterworthQ);
    Biquad s;
    s.b = {p.norm, -2.0 * p.norm, p.norm};
    s.a = {p.a1, p.a2};
    return s;
}

Biquad butterworth_lowpass(double sample_rate, double cutoff) {
    const auto p = prewarp(sample_rate, cutoff, kButterworthQ);
    const double b0 = p.k * p.k * p.norm;
    Biquad s;
    s.b = {b0, 2.0 * b0, b0};
    s.a = {p.a1, p.a2};
    return s;
}

Biquad notch(double sample_rate, double center, double q) {
    const auto p = prewarp(sample_rate, center, q);
    const double b0 = (1.0 + p.k * p.k) * p.norm;
    Biquad s;
    s.b = {b0, p.a1, b0};
    s.a = {p.a1, p.a2};
    return s;
}

FilterCascade::FilterCascade(std::vector<Biquad> stages, double sample_rate, int channel_count,
                             FilterDesign design)
    : stages_(std::move(stages)),
      sample_rate_(sample_rate),
      channel_count_(channel_count),
      design_(design),
      state_(static_cast<std::size_t>(channel_count) * stages_.size(), {0.0, 0.0}),
      nan_counts_(static_cast<std::size_t>(channel_count), 0) {}

double FilterCascade::step(int channel, double x) {
    if (!std::isfinite(x)) {
        ++nan_counts_[static_cast<std::size_t>(channel)];
        return std::numeric_limits<double>::quiet_NaN();
    }
    auto* st = state_.data() + static_cast<std::size_t>(channel) * stages_.size();
    double v = x;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const auto& s = stages_[i];
        auto& z = st[i];
        const double y = s.b[0] * v + z[0];
        z[0] = s.b[1] * v - s.a[0] * y + z[1];
        z[1] = s.b[2] * v - s.a[1] * y;
        v = y;
    }
    return v;
}

void FilterCascade::apply(RawSample& sample) {
    if (sample.volts.size() != static_cast<std::size_t>(channel_count_)) {
        raise(ErrorKind::ShapeMismatch, "sample has " + std::to_string(sample.volts.size()) +
                                            " channels, cascade expects " +
                                            std::to_string(channel_count_));
    }
    for (int c = 0; c < channel_count_; ++c) {
        sample.volts[static_cast<std::size_t>(c)] = step(c, sample.volts[static_cast<std::size_t>(c)]);
    }
}

void FilterCascade::reset() {
    for (auto& z : state_) z = {0.0, 0.0};
    for (auto& n : nan_counts_) n = 0;
}

std::complex<double> FilterCascade::response(double freq_hz) const {
    std::complex<double> h = 1.0;
    for (const auto& s : stages_) h *= s.response(freq_hz, sample_rate_);
    return h;
}

FilterCascade design_cascade(const FilterDesign& d, int channel_count) {
    const double nyquist = d.sample_rate / 2.0;
    if (!(d.sample_rate > 0.0)) raise(ErrorKind::InvalidBand, "sample_rate must be > 0");
    if (!(d.hp_cutoff > 0.0 && d.hp_cutoff < d.lp_cutoff && d.lp_cutoff < nyquist)) {
        raise(ErrorKind::InvalidBand, "need 0 < hp_cutoff < lp_cutoff < sample_rate/2");
    }
    if (!(d.notch_freq > 0.0 && d.notch_freq < nyquist)) {
        raise(ErrorKind::InvalidBand, "need 0 < notch_freq < sample_rate/2");
    }
    if (!(d.notch_q > 0.0)) raise(ErrorKind::InvalidBand, "notch_q must be > 0");
    if (channel_count < 1) raise(ErrorKind::InvalidArgument, "channel_count must be >= 1");

    std::vector<Biquad> stages = {butterworth_highpass(d.sample_rate, d.hp_cutoff),
                                  butterworth_lowpass(d.sample_rate, d.lp_cutoff),
                                  notch(d.sample_rate, d.notch_freq, d.notch_q)};
    for (const auto& s : stages) {
        if (!s.stable()) raise(ErrorKind::UnstableDesign, "section has a pole outside |z| < 1");
    }
    return FilterCascade(std::move(stages), d.sample_rate, channel_count, d);
}

FilterCascade design_cascade(double sample_rate, double hp_cutoff, double lp_cutoff,
                             double notch_freq, double notch_q, int channel_count) {
    return design_cascade(FilterDesign{sample_rate, hp_cutoff, lp_cutoff, notch_freq, notch_q},
                          channel_count);
}

double filter_step(FilterCascade& cascade, int channel, double x) {
    return cascade.step(channel, x);
}

RawSample filter_frame(FilterCascade& cascade, RawSample sample) {
    cascade.apply(sample);
    return sample;
}

}  // namespace bci
