#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "bci/acquisition.hpp"
#include "bci/features.hpp"
#include "bci/signal.hpp"

namespace bci {

// Single-writer, single-reader slot where the newest value wins.
template <class T>
class LatestValue {
public:
    void set(T value) {
        std::lock_guard lock(mu_);
        value_ = std::move(value);
        ++version_;
    }
    std::optional<T> get() const {
        std::lock_guard lock(mu_);
        return value_;
    }
    std::uint64_t version() const {
        std::lock_guard lock(mu_);
        return version_;
    }

private:
    mutable std::mutex mu_;
    std::optional<T> value_;
    std::uint64_t version_ = 0;
};

// filter -> window -> FFT. Also watches the raw input for railed channels
// (pinned at or near ADC full scale).
class Pipeline {
public:
    Pipeline(const SamplingConfig& sampling, const FilterDesign& filter, const WindowConfig& window);

    std::optional<FeatureVector> push(RawSample sample);

    const FilterCascade& cascade() const { return cascade_; }
    const WindowConfig& window() const { return extractor_.config(); }
    const SamplingConfig& sampling() const { return sampling_; }
    std::uint64_t samples() const { return samples_; }
    // A channel is railed once |v| >= 95% of full scale for a whole
    // window's worth of consecutive samples.
    std::vector<bool> railed() const;

private:
    SamplingConfig sampling_;
    FilterCascade cascade_;
    FeatureExtractor extractor_;
    std::vector<std::uint64_t> rail_run_;
    double rail_threshold_;
    std::uint64_t samples_ = 0;
};

}  // namespace bci
