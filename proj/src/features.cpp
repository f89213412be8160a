#include "bci/features.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <string>

#include "bci/error.hpp"

namespace bci {

void WindowConfig::validate() const {
    if (window_len < 2 || (window_len & (window_len - 1)) != 0) {
        raise(ErrorKind::InvalidArgument, "window_len must be a power of two >= 2");
    }
    if (hop <= 0 || hop > window_len) raise(ErrorKind::InvalidArgument, "need 0 < hop <= window_len");
}

std::vector<double> window_coefficients(int n, WindowFn fn) {
    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    if (fn == WindowFn::Hann) {
        // periodic Hann
        for (int i = 0; i < n; ++i) {
            w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
        }
    }
    return w;
}

std::vector<std::complex<double>> fft_complex(std::span<const double> x) {
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> half;
    fft.fwd(half, in);
    // Rebuild the full spectrum from conjugate symmetry.
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < half.size() && k < n; ++k) out[k] = half[k];
    for (std::size_t k = half.size(); k < n; ++k) out[k] = std::conj(out[n - k]);
    return out;
}

std::vector<double> fft_magnitude(std::span<const double> window, WindowFn fn) {
    const int n = static_cast<int>(window.size());
    const auto w = window_coefficients(n, fn);
    std::vector<double> xw(window.size());
    for (std::size_t i = 0; i < xw.size(); ++i) xw[i] = window[i] * w[i];

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, xw);

    std::vector<double> mags(window.size() / 2);
    for (std::size_t k = 0; k < mags.size(); ++k) mags[k] = std::abs(spec[k]);
    return mags;
}

std::array<double, kNumBands> extract_bands(std::span<const double> mags, double sample_rate) {
    std::array<double, kNumBands> power{};
    const double n = 2.0 * static_cast<double>(mags.size());
    for (std::size_t k = 0; k < mags.size(); ++k) {
        const double f = static_cast<double>(k) * sample_rate / n;
        for (std::size_t b = 0; b < kNumBands; ++b) {
            if (f >= kBandEdges[b].lo && f < kBandEdges[b].hi) power[b] += mags[k] * mags[k];
        }
    }
    return power;
}

FeatureVector make_feature(std::span<const std::vector<double>> windows, double t,
                           const WindowConfig& wcfg, double sample_rate) {
    FeatureVector fv;
    fv.t = t;
    fv.channels = static_cast<int>(windows.size());
    fv.bins = wcfg.bins();
    fv.mags.reserve(windows.size() * static_cast<std::size_t>(fv.bins));
    fv.bands.reserve(windows.size() * kNumBands);
    for (const auto& win : windows) {
        if (win.size() != static_cast<std::size_t>(wcfg.window_len)) {
            raise(ErrorKind::ShapeMismatch, "window length differs from window_len");
        }
        auto m = fft_magnitude(win, wcfg.window_fn);
        for (auto& v : m) v = static_cast<double>(static_cast<float>(v));
        const auto bands = extract_bands(m, sample_rate);
        fv.mags.insert(fv.mags.end(), m.begin(), m.end());
        fv.bands.insert(fv.bands.end(), bands.begin(), bands.end());
    }
    return fv;
}

FeatureExtractor::FeatureExtractor(WindowConfig wcfg, int channels, double sample_rate)
    : wcfg_(wcfg), channels_(channels), sample_rate_(sample_rate) {
    wcfg_.validate();
    reset();
}

void FeatureExtractor::reset() {
    const auto n = static_cast<std::size_t>(wcfg_.window_len);
    ring_.assign(static_cast<std::size_t>(channels_), std::vector<double>(n, 0.0));
    scratch_.assign(static_cast<std::size_t>(channels_), std::vector<double>(n, 0.0));
    head_ = 0;
    seen_ = 0;
    since_emit_ = 0;
}

std::optional<FeatureVector> FeatureExtractor::push(const RawSample& s) {
    if (s.volts.size() != static_cast<std::size_t>(channels_)) {
        raise(ErrorKind::ShapeMismatch, "sample channel count differs from extractor");
    }
    const auto n = static_cast<std::size_t>(wcfg_.window_len);
    for (std::size_t c = 0; c < ring_.size(); ++c) ring_[c][head_] = s.volts[c];
    head_ = (head_ + 1) % n;
    ++seen_;
    if (seen_ < n) return std::nullopt;
    if (seen_ > n && ++since_emit_ < wcfg_.hop) return std::nullopt;
    since_emit_ = 0;
    // Unroll the ring oldest-first.
    for (std::size_t c = 0; c < ring_.size(); ++c) {
        std::rotate_copy(ring_[c].begin(), ring_[c].begin() + static_cast<std::ptrdiff_t>(head_),
                         ring_[c].end(), scratch_[c].begin());
    }
    return make_feature(scratch_, s.t, wcfg_, sample_rate_);
}

NormStats fit_norm(std::span<const FeatureVector> train) {
    if (train.empty()) raise(ErrorKind::EmptyTrainingSet, "cannot fit normalization on no data");
    NormStats st;
    st.channels = train.front().channels;
    st.bins = train.front().bins;
    const std::size_t d = train.front().mags.size();
    st.mean.assign(d, 0.0);
    st.stddev.assign(d, 0.0);
    std::vector<double> lo(d, INFINITY), hi(d, -INFINITY);
    for (const auto& fv : train) {
        if (fv.mags.size() != d) raise(ErrorKind::ShapeMismatch, "feature sizes differ in training set");
        for (std::size_t j = 0; j < d; ++j) {
            const double v = std::log1p(fv.mags[j]);
            st.mean[j] += v;
            lo[j] = std::min(lo[j], v);
            hi[j] = std::max(hi[j], v);
        }
    }
    const double n = static_cast<double>(train.size());
    for (auto& m : st.mean) m /= n;
    for (const auto& fv : train) {
        for (std::size_t j = 0; j < d; ++j) {
            const double dv = std::log1p(fv.mags[j]) - st.mean[j];
            st.stddev[j] += dv * dv;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        st.stddev[j] = std::sqrt(st.stddev[j] / n);
        if (lo[j] == hi[j]) {
            st.stddev[j] = 0.0;
            st.dropped.push_back(static_cast<std::uint32_t>(j));
        }
    }
    return st;
}

std::vector<double> normalized_values(const FeatureVector& fv, const NormStats& stats) {
    if (fv.mags.size() != stats.size()) {
        raise(ErrorKind::ShapeMismatch, "feature size " + std::to_string(fv.mags.size()) +
                                            " differs from normalization size " +
                                            std::to_string(stats.size()));
    }
    std::vector<double> z(fv.mags.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
        z[j] = stats.stddev[j] > 0.0 ? (std::log1p(fv.mags[j]) - stats.mean[j]) / stats.stddev[j]
                                     : 0.0;
    }
    return z;
}

FeatureVector apply_norm(const FeatureVector& fv, const NormStats& stats) {
    FeatureVector out = fv;
    out.mags = normalized_values(fv, stats);
    return out;
}

}  // namespace bci
