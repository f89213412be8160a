#include "bci/pipeline.hpp"

#include <cmath>

namespace bci {

namespace {

FilterDesign at_rate(FilterDesign d, double fs) {
    d.sample_rate = fs;
    return d;
}

}  // namespace

Pipeline::Pipeline(const SamplingConfig& sampling, const FilterDesign& filter, const WindowConfig& window)
    : sampling_(sampling),
      cascade_(design_cascade(at_rate(filter, sampling.sample_rate), sampling.channel_count)),
      extractor_(window, sampling.channel_count, sampling.sample_rate),
      rail_run_(static_cast<std::size_t>(sampling.channel_count), 0),
      rail_threshold_(0.95 * sampling.full_scale_uv()) {
    sampling.validate();
}

std::optional<FeatureVector> Pipeline::push(RawSample sample) {
    ++samples_;
    for (std::size_t c = 0; c < rail_run_.size() && c < sample.volts.size(); ++c) {
        if (std::abs(sample.volts[c]) >= rail_threshold_) {
            ++rail_run_[c];
        } else {
            rail_run_[c] = 0;
        }
    }
    cascade_.apply(sample);
    return extractor_.push(sample);
}

std::vector<bool> Pipeline::railed() const {
    std::vector<bool> out(rail_run_.size());
    const auto need = static_cast<std::uint64_t>(extractor_.config().window_len);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = rail_run_[c] >= need;
    return out;
}

}  // namespace bci
