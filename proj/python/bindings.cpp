#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "bci/classifier.hpp"
#include "bci/cnn.hpp"
#include "bci/dataset.hpp"
#include "bci/error.hpp"
#include "bci/features.hpp"
#include "bci/knn.hpp"
#include "bci/rng.hpp"
#include "bci/lda.hpp"
#include "bci/session.hpp"
#include "bci/signal.hpp"
#include "bci/version.hpp"

namespace py = pybind11;
using namespace bci;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<std::vector<double>> rows_of(const DArray& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
    const auto r = a.unchecked<2>();
    std::vector<std::vector<double>> out(static_cast<std::size_t>(r.shape(0)));
    for (py::ssize_t i = 0; i < r.shape(0); ++i) {
        out[static_cast<std::size_t>(i)].assign(a.data(i, 0), a.data(i, 0) + r.shape(1));
    }
    return out;
}

std::vector<ClassLabel> labels_of(const std::vector<int>& v) {
    std::vector<ClassLabel> out;
    out.reserve(v.size());
    for (int x : v) {
        if (x < 0 || x >= static_cast<int>(kNumClasses)) throw py::value_error("label out of range 0..3");
        out.push_back(label_from_index(static_cast<std::size_t>(x)));
    }
    return out;
}

FeatureVector feature_from_mags(const double* p, int channels, int bins, double t, double fs) {
    FeatureVector fv;
    fv.t = t;
    fv.channels = channels;
    fv.bins = bins;
    fv.mags.reserve(static_cast<std::size_t>(channels * bins));
    for (int i = 0; i < channels * bins; ++i) fv.mags.push_back(static_cast<double>(static_cast<float>(p[i])));
    for (int c = 0; c < channels; ++c) {
        const auto b = extract_bands(std::span<const double>(fv.mags.data() + c * bins, static_cast<std::size_t>(bins)), fs);
        fv.bands.insert(fv.bands.end(), b.begin(), b.end());
    }
    return fv;
}

// mags: frames x channels x bins
std::vector<LabeledExample> examples_of(const DArray& mags, const std::vector<int>& labels, double fs) {
    if (mags.ndim() != 3) throw py::value_error("mags must be frames x channels x bins");
    if (static_cast<py::ssize_t>(labels.size()) != mags.shape(0)) throw py::value_error("one label per frame");
    const auto ls = labels_of(labels);
    const int ch = static_cast<int>(mags.shape(1));
    const int bins = static_cast<int>(mags.shape(2));
    std::vector<LabeledExample> out;
    for (py::ssize_t i = 0; i < mags.shape(0); ++i) {
        LabeledExample e;
        e.features = feature_from_mags(mags.data(i, 0, 0), ch, bins, static_cast<double>(i), fs);
        e.label = ls[static_cast<std::size_t>(i)];
        e.t = static_cast<double>(i);
        out.push_back(std::move(e));
    }
    return out;
}

py::dict record_to_dict(const SessionRecord& rec) {
    const auto n = static_cast<py::ssize_t>(rec.frames.size());
    const py::ssize_t ch = n ? rec.frames[0].features.channels : 0;
    const py::ssize_t bins = n ? rec.frames[0].features.bins : 0;
    py::array_t<double> mags({n, ch, bins});
    py::array_t<double> times(n);
    std::vector<int> labels;
    auto* m = mags.mutable_data();
    for (py::ssize_t i = 0; i < n; ++i) {
        const auto& f = rec.frames[static_cast<std::size_t>(i)];
        std::memcpy(m + i * ch * bins, f.features.mags.data(), f.features.mags.size() * sizeof(double));
        times.mutable_at(i) = f.t;
        labels.push_back(static_cast<int>(f.label));
    }
    py::dict d;
    d["session_id"] = rec.header.session_id;
    d["mags"] = mags;
    d["times"] = times;
    d["labels"] = labels;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "EEG motor-imagery engine";
    m.attr("__version__") = std::string(kSoftwareVersion);

    static PyObject* bci_error = PyErr_NewException("bci_engine._core.BciError", PyExc_RuntimeError, nullptr);
    m.attr("BciError") = py::reinterpret_borrow<py::object>(bci_error);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(bci_error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    m.def("class_names", [] {
        std::vector<std::string> out;
        for (auto l : kAllLabels) out.emplace_back(to_string(l));
        return out;
    });

    m.def(
        "filter_signal",
        [](const DArray& x, double sample_rate, double hp, double lp, double notch_freq, double notch_q) {
            const auto rows = rows_of(x);
            auto c = design_cascade(sample_rate, hp, lp, notch_freq, notch_q, static_cast<int>(rows.size()));
            py::array_t<double> out({x.shape(0), x.shape(1)});
            auto o = out.mutable_unchecked<2>();
            for (py::ssize_t j = 0; j < x.shape(1); ++j)
                for (py::ssize_t ch = 0; ch < x.shape(0); ++ch)
                    o(ch, j) = c.step(static_cast<int>(ch), rows[static_cast<std::size_t>(ch)][static_cast<std::size_t>(j)]);
            return out;
        },
        py::arg("x"), py::arg("sample_rate") = 250.0, py::arg("hp") = 0.5, py::arg("lp") = 45.0,
        py::arg("notch_freq") = 50.0, py::arg("notch_q") = 30.0);

    m.def(
        "filter_response",
        [](double f, double sample_rate, double hp, double lp, double notch_freq, double notch_q) {
            return design_cascade(sample_rate, hp, lp, notch_freq, notch_q, 1).response(f);
        },
        py::arg("freq"), py::arg("sample_rate") = 250.0, py::arg("hp") = 0.5, py::arg("lp") = 45.0,
        py::arg("notch_freq") = 50.0, py::arg("notch_q") = 30.0);

    m.def(
        "fft_magnitude",
        [](const DArray& x, const std::string& window) {
            if (window != "hann" && window != "rectangular") throw py::value_error("window: hann or rectangular");
            const auto w = window == "hann" ? WindowFn::Hann : WindowFn::Rectangular;
            const auto mags = fft_magnitude(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), w);
            py::array_t<double> out(static_cast<py::ssize_t>(mags.size()));
            std::memcpy(out.mutable_data(), mags.data(), mags.size() * sizeof(double));
            return out;
        },
        py::arg("x"), py::arg("window") = "hann");

    m.def(
        "extract_bands",
        [](const DArray& mags, double sample_rate) {
            const auto b = extract_bands(std::span<const double>(mags.data(), static_cast<std::size_t>(mags.size())), sample_rate);
            return std::vector<double>(b.begin(), b.end());
        },
        py::arg("mags"), py::arg("sample_rate") = 250.0);

    m.def(
        "balance_indices",
        [](const std::vector<int>& labels, std::uint64_t seed) { return balance_indices(labels_of(labels), seed); },
        py::arg("labels"), py::arg("seed") = 0);

    m.def(
        "split_indices",
        [](const std::vector<double>& times, double fraction, const std::string& mode, std::uint64_t seed) {
            const auto s = split_indices(times, fraction, parse_split_mode(mode), seed);
            return py::make_tuple(s.train, s.test);
        },
        py::arg("times"), py::arg("train_fraction") = 0.7, py::arg("mode") = "random", py::arg("seed") = 0);

    m.def(
        "knn_predict",
        [](const DArray& train, const std::vector<int>& labels, const DArray& queries, int k) {
            const auto model = knn_train(rows_of(train), labels_of(labels), k);
            std::vector<int> out;
            for (const auto& q : rows_of(queries)) out.push_back(static_cast<int>(knn_predict(model, q)));
            return out;
        },
        py::arg("train"), py::arg("labels"), py::arg("queries"), py::arg("k") = 5);

    m.def(
        "lda_predict",
        [](const DArray& train, const std::vector<int>& labels, const DArray& queries, double shrinkage) {
            const auto model = lda_fit(rows_of(train), labels_of(labels), shrinkage);
            std::vector<int> out;
            for (const auto& q : rows_of(queries)) out.push_back(static_cast<int>(lda_predict(model, q)));
            return out;
        },
        py::arg("train"), py::arg("labels"), py::arg("queries"), py::arg("shrinkage") = 1e-3);

    m.def(
        "cnn_shapes",
        [](int n_convs, int dense_len, int channels, int bins) {
            const auto spec = cnn_build(n_convs, dense_len, {channels, bins}, 0).first;
            py::dict d;
            d["conv_lengths"] = spec.conv_lengths();
            d["pooled_lengths"] = spec.pooled_lengths();
            d["flatten_len"] = spec.flatten_len();
            return d;
        },
        py::arg("n_convs"), py::arg("dense_len"), py::arg("channels") = 8, py::arg("bins") = 128);

    m.def(
        "simulate_session",
        [](double seconds, std::uint64_t seed, double mu_depth) {
            SessionRecord rec;
            {
                py::gil_scoped_release nogil;
                EngineConfig cfg;
                cfg.seed = seed;
                SourceSpec src;
                src.synth.seed = derive_seed(seed, 0x73796e);
                src.synth.mu_depth = mu_depth;
                ScriptedPlayer player(derive_seed(seed, 0x706c6179));
                SessionPlan plan;
                plan.training_s = seconds;
                rec = run_training_session(cfg, make_source_factory(src, cfg.sampling), player, plan, "python");
            }
            return record_to_dict(rec);
        },
        py::arg("seconds") = 60.0, py::arg("seed") = 1, py::arg("mu_depth") = 0.8);

    m.def(
        "load_session", [](const std::string& path) { return record_to_dict(load_session(path)); },
        py::arg("path"));

    py::class_<Classifier>(m, "Model")
        .def_property_readonly("kind", [](const Classifier& c) { return std::string(to_string(c.kind())); })
        .def_property_readonly("training_accuracy", [](const Classifier& c) { return c.metadata().training_accuracy; })
        .def(
            "predict",
            [](const Classifier& c, const DArray& mags, double sample_rate) {
                if (mags.ndim() != 3) throw py::value_error("mags must be frames x channels x bins");
                std::vector<int> out;
                for (py::ssize_t i = 0; i < mags.shape(0); ++i) {
                    const auto fv = feature_from_mags(mags.data(i, 0, 0), static_cast<int>(mags.shape(1)),
                                                      static_cast<int>(mags.shape(2)), 0.0, sample_rate);
                    out.push_back(static_cast<int>(c.predict(fv)));
                }
                return out;
            },
            py::arg("mags"), py::arg("sample_rate") = 250.0)
        .def(
            "accuracy",
            [](const Classifier& c, const DArray& mags, const std::vector<int>& labels, double sample_rate) {
                return evaluate(c, examples_of(mags, labels, sample_rate)).accuracy;
            },
            py::arg("mags"), py::arg("labels"), py::arg("sample_rate") = 250.0)
        .def("save", [](const Classifier& c, const std::string& path) { save_model(c, path); }, py::arg("path"));

    m.def(
        "train_model",
        [](const std::string& kind, const DArray& mags, const std::vector<int>& labels, std::uint64_t seed, int k,
           int n_convs, int dense_len, int epochs, double learning_rate, double sample_rate) {
            const auto ex = examples_of(mags, labels, sample_rate);
            ModelHyper h;
            h.k = k;
            h.n_convs = n_convs;
            h.dense_len = dense_len;
            h.train.epochs = epochs;
            h.train.learning_rate = learning_rate;
            const auto mk = parse_model_kind(kind);
            py::gil_scoped_release nogil;
            return train_classifier(mk, h, ex, seed);
        },
        py::arg("kind"), py::arg("mags"), py::arg("labels"), py::arg("seed") = 0, py::arg("k") = 5,
        py::arg("n_convs") = 2, py::arg("dense_len") = 200, py::arg("epochs") = 50, py::arg("learning_rate") = 1e-3,
        py::arg("sample_rate") = 250.0);

    m.def("load_model", &load_model, py::arg("path"));
}
