#include "bci/json_io.hpp"

#include "bci/error.hpp"

namespace bci {

using nlohmann::json;

void to_json(json& j, const SamplingConfig& c) {
    j = json{{"sample_rate", c.sample_rate}, {"channel_count", c.channel_count},
             {"adc_bits", c.adc_bits},       {"gain", c.gain},
             {"vref", c.vref},               {"mains_freq", c.mains_freq}};
}

void from_json(const json& j, SamplingConfig& c) {
    SamplingConfig d;
    c.sample_rate = j.value("sample_rate", d.sample_rate);
    c.channel_count = j.value("channel_count", d.channel_count);
    c.adc_bits = j.value("adc_bits", d.adc_bits);
    c.gain = j.value("gain", d.gain);
    c.vref = j.value("vref", d.vref);
    c.mains_freq = j.value("mains_freq", d.mains_freq);
}

void to_json(json& j, const MontageConfig& m) {
    std::vector<std::string> quality;
    for (auto q : m.channel_quality) quality.push_back(q == ChannelQuality::Railed ? "railed" : "good");
    j = json{{"positions", m.positions}, {"channel_quality", quality}};
}

void from_json(const json& j, MontageConfig& m) {
    m.positions = j.at("positions").get<std::vector<std::string>>();
    m.channel_quality.clear();
    for (const auto& q : j.value("channel_quality", std::vector<std::string>{})) {
        m.channel_quality.push_back(q == "railed" ? ChannelQuality::Railed : ChannelQuality::Good);
    }
}

void to_json(json& j, const FilterDesign& d) {
    j = json{{"sample_rate", d.sample_rate}, {"hp_cutoff", d.hp_cutoff}, {"lp_cutoff", d.lp_cutoff},
             {"notch_freq", d.notch_freq},   {"notch_q", d.notch_q}};
}

void from_json(const json& j, FilterDesign& d) {
    FilterDesign def;
    d.sample_rate = j.value("sample_rate", def.sample_rate);
    d.hp_cutoff = j.value("hp_cutoff", def.hp_cutoff);
    d.lp_cutoff = j.value("lp_cutoff", def.lp_cutoff);
    d.notch_freq = j.value("notch_freq", def.notch_freq);
    d.notch_q = j.value("notch_q", def.notch_q);
}

void to_json(json& j, const WindowConfig& w) {
    j = json{{"window_len", w.window_len},
             {"hop", w.hop},
             {"window_fn", w.window_fn == WindowFn::Hann ? "hann" : "rectangular"}};
}

void from_json(const json& j, WindowConfig& w) {
    WindowConfig def;
    w.window_len = j.value("window_len", def.window_len);
    w.hop = j.value("hop", def.hop);
    const auto fn = j.value("window_fn", std::string("hann"));
    if (fn == "hann") {
        w.window_fn = WindowFn::Hann;
    } else if (fn == "rectangular") {
        w.window_fn = WindowFn::Rectangular;
    } else {
        raise(ErrorKind::InvalidArgument, "unknown window_fn '" + fn + "'");
    }
}

void to_json(json& j, const SynthConfig& s) {
    j = json{{"seed", s.seed},
             {"noise_amplitude", s.noise_amplitude},
             {"mu_band", {s.mu_low, s.mu_high}},
             {"mu_amplitude", s.mu_amplitude},
             {"mu_depth", s.mu_depth},
             {"mains_leak", s.mains_leak},
             {"drift_amplitude", s.drift_amplitude}};
}

void from_json(const json& j, SynthConfig& s) {
    SynthConfig def;
    s.seed = j.value("seed", def.seed);
    s.noise_amplitude = j.value("noise_amplitude", def.noise_amplitude);
    if (j.contains("mu_band")) {
        s.mu_low = j.at("mu_band").at(0).get<double>();
        s.mu_high = j.at("mu_band").at(1).get<double>();
    }
    s.mu_amplitude = j.value("mu_amplitude", def.mu_amplitude);
    s.mu_depth = j.value("mu_depth", def.mu_depth);
    s.mains_leak = j.value("mains_leak", def.mains_leak);
    s.drift_amplitude = j.value("drift_amplitude", def.drift_amplitude);
}

}  // namespace bci
