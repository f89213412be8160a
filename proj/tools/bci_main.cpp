#include <CLI11.hpp>
#include <glob.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "bci/classifier.hpp"
#include "bci/error.hpp"
#include "bci/json_io.hpp"
#include "bci/raw_recording.hpp"
#include "bci/service.hpp"
#include "bci/session.hpp"
#include "bci/sweep.hpp"
#include "bci/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bci;

namespace {

struct Opts {
    std::string config_path;
    std::string seed_text;
    std::uint64_t seed = 0;

    // source
    std::string source = "synthetic";
    SynthConfig synth;
    double realtime = 0.0;

    // plan
    SessionPlan plan;
    std::string schedule;
    double duration = 0.0;

    // model
    std::string model_kind = "knn";
    ModelHyper hyper;
    std::string split_mode = "random";
    double train_fraction = 0.7;
    double consolidate_fraction = 1.0;
    int smoothing = 3;

    // io
    std::vector<std::string> inputs;
    std::vector<std::string> datasets;
    std::string out;
    std::string model_path;
    std::string session_id;
    std::string subject_id;
    std::string grid;
    int jobs = 1;
    std::size_t max_new_cells = 0;
    int rating = 0;
    bool baseline = false;

    // serve
    std::string address = "127.0.0.1";
    int port = 8080;
    double rating_timeout = 60.0;
};

void print_error(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
    std::vector<std::string> out;
    for (const auto& p : patterns) {
        glob_t g{};
        if (glob(p.c_str(), 0, nullptr, &g) == 0) {
            for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
        }
        globfree(&g);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::uint64_t resolve_seed(const std::string& text) {
    if (text.empty()) {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(text, &pos, 0);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        raise(ErrorKind::InvalidArgument, "seed must be an unsigned integer, got '" + text + "'");
    }
}

ModelHyper hyper_for(const Opts& o) {
    ModelHyper h = o.hyper;
    h.train.seed = o.seed;
    return h;
}

SourceSpec source_spec(const Opts& o) {
    auto spec = SourceSpec::parse(o.source);
    spec.synth = o.synth;
    return spec;
}

EngineConfig engine_config(const Opts& o) {
    EngineConfig cfg;
    cfg.seed = o.seed;
    cfg.smoothing = o.smoothing;
    cfg.realtime_factor = o.realtime;
    return cfg;
}

json resolved_config(const std::string& cmd, const Opts& o) {
    json j;
    j["command"] = cmd;
    j["seed"] = o.seed;
    j["version"] = kSoftwareVersion;
    j["source"] = o.source;
    j["synth"] = o.synth;
    j["synth"].erase("seed");  // derived from the base seed
    j["plan"] = {{"training_s", o.plan.training_s},
                 {"demo_s", o.plan.demo_s},
                 {"record_s", o.plan.record_s},
                 {"control_s", o.plan.control_s}};
    j["model_kind"] = o.model_kind;
    j["hyper"] = {{"k", o.hyper.k},
                  {"shrinkage", o.hyper.shrinkage},
                  {"n_convs", o.hyper.n_convs},
                  {"dense_len", o.hyper.dense_len},
                  {"lr", o.hyper.train.learning_rate},
                  {"momentum", o.hyper.train.momentum},
                  {"batch", o.hyper.train.batch_size},
                  {"epochs", o.hyper.train.epochs}};
    j["split"] = o.split_mode;
    j["train_fraction"] = o.train_fraction;
    if (!o.out.empty()) j["out"] = o.out;
    return j;
}

void announce(const std::string& cmd, const Opts& o) {
    std::printf("seed: %llu\n", static_cast<unsigned long long>(o.seed));
    std::printf("config: %s\n", resolved_config(cmd, o).dump().c_str());
    std::fflush(stdout);
}

std::vector<SessionRecord> load_sessions(const std::vector<std::string>& patterns) {
    const auto files = expand_globs(patterns);
    if (files.empty()) raise(ErrorKind::EmptyDataset, "no session files match the given patterns");
    std::vector<SessionRecord> out;
    for (const auto& f : files) out.push_back(load_session(f));
    return out;
}

void print_confusion(const Evaluation& ev) {
    std::printf("confusion (rows true, cols predicted; none left right both):\n");
    for (std::size_t t = 0; t < kNumClasses; ++t) {
        std::printf("  %-6s", std::string(to_string(label_from_index(t))).c_str());
        for (std::size_t p = 0; p < kNumClasses; ++p) std::printf(" %6zu", ev.confusion[t][p]);
        std::printf("\n");
    }
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Opts& o) {
    if (o.out.empty()) raise(ErrorKind::InvalidArgument, "--out is required");
    if (o.duration <= 0) raise(ErrorKind::InvalidArgument, "--duration must be positive");
    SamplingConfig sampling;
    SynthConfig scfg = o.synth;
    scfg.seed = derive_seed(o.seed, 0x73796e);
    LabelSchedule schedule =
        o.schedule.empty() ? LabelSchedule::constant(ClassLabel::None, o.duration) : LabelSchedule::parse(o.schedule);
    if (!schedule.covers(0.0, o.duration)) {
        raise(ErrorKind::ScheduleGap, "schedule does not cover [0, " + std::to_string(o.duration) + ")");
    }
    const auto samples = synth_stream(sampling, scfg, schedule, o.duration);
    write_raw_recording(o.out, sampling, samples);
    std::printf("wrote %zu samples x %d channels to %s\n", samples.size(), sampling.channel_count, o.out.c_str());
    return 0;
}

int cmd_record(const Opts& o) {
    if (o.out.empty()) raise(ErrorKind::InvalidArgument, "--out is required");
    auto cfg = engine_config(o);
    auto spec = source_spec(o);
    spec.synth.seed = derive_seed(o.seed, 0x73796e);
    SessionPlan plan = o.plan;
    if (o.duration > 0) plan.training_s = o.duration;
    plan.validate();
    ScriptedPlayer player(derive_seed(o.seed, 0x706c6179));
    const std::string id = o.session_id.empty() ? fs::path(o.out).stem().string() : o.session_id;
    auto rec = run_training_session(cfg, make_source_factory(spec, cfg.sampling), player, plan, id);
    rec.header.subject_id = o.subject_id;
    rec.header.source = spec.describe();
    save_session(rec, o.out);
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& f : rec.frames) ++counts[index_of(f.label)];
    std::printf("frames: %zu (none %zu, left %zu, right %zu, both %zu)\n", rec.frames.size(), counts[0], counts[1],
                counts[2], counts[3]);
    std::printf("key events: %zu\n", rec.key_log.size());
    std::printf("boxes caught: %d, max streak: %d\n", rec.metrics.boxes_caught.value_or(0),
                rec.metrics.max_streak.value_or(0));
    std::printf("wrote %s\n", o.out.c_str());
    return 0;
}

int cmd_train(const Opts& o) {
    if (o.out.empty()) raise(ErrorKind::InvalidArgument, "--out is required");
    const auto sessions = load_sessions(o.inputs);
    const auto kind = parse_model_kind(o.model_kind);
    const auto mode = parse_split_mode(o.split_mode);
    const auto all = consolidate(sessions, o.consolidate_fraction, derive_seed(o.seed, 1));
    const auto balanced = balance(all, derive_seed(o.seed, 2));
    auto [train, test] = split(balanced, o.train_fraction, mode, derive_seed(o.seed, 3));
    std::printf("sessions: %zu, frames: %zu, balanced: %zu, train: %zu, test: %zu\n", sessions.size(), all.size(),
                balanced.size(), train.size(), test.size());
    const auto model = train_classifier(kind, hyper_for(o), train, o.seed);
    std::printf("train accuracy: %.4f\n", model.metadata().training_accuracy);
    if (!test.empty()) {
        const auto ev = evaluate(model, test);
        std::printf("test accuracy: %.4f\n", ev.accuracy);
        print_confusion(ev);
    }
    save_model(model, o.out);
    std::printf("wrote %s\n", o.out.c_str());
    return 0;
}

int cmd_sweep(const Opts& o) {
    if (o.out.empty()) raise(ErrorKind::InvalidArgument, "--out is required");
    if (o.datasets.empty()) raise(ErrorKind::InvalidArgument, "at least one --dataset NAME=GLOB is required");
    std::vector<SweepDataset> datasets;
    for (const auto& d : o.datasets) {
        const auto eq = d.find('=');
        if (eq == std::string::npos || eq == 0) raise(ErrorKind::InvalidArgument, "--dataset must be NAME=GLOB");
        const auto sessions = load_sessions({d.substr(eq + 1)});
        datasets.push_back({d.substr(0, eq), consolidate(sessions, o.consolidate_fraction, derive_seed(o.seed, 1))});
    }
    const auto grid = o.grid.empty() ? SweepGrid::full() : SweepGrid::parse(o.grid);
    SweepOptions opts;
    opts.out_dir = o.out;
    opts.seed = o.seed;
    opts.train_fraction = o.train_fraction;
    opts.split_mode = parse_split_mode(o.split_mode);
    opts.train = o.hyper.train;
    opts.jobs = o.jobs;
    opts.max_new_cells = o.max_new_cells;
    std::printf("cells: %zu per dataset, %zu datasets\n", grid.cells(), datasets.size());
    std::mutex print_mu;
    const auto res = run_sweep(datasets, grid, opts, [&](const SweepRow& r) {
        std::lock_guard lock(print_mu);
        std::printf("cell %s n=%d l=%d train=%.4f test=%.4f (%.1fs)\n", r.dataset.c_str(), r.n, r.l, r.train_acc,
                    r.test_acc, r.wall_seconds);
        std::fflush(stdout);
    });
    std::printf("rows: %zu (computed %zu, resumed %zu)%s\n", res.rows.size(), res.computed, res.resumed,
                res.complete ? "" : ", incomplete");
    std::printf("wrote %s\n", (fs::path(o.out) / "sweep.csv").string().c_str());
    return 0;
}

int cmd_validate(const Opts& o) {
    std::optional<Classifier> pretrained;
    ModelKind kind = parse_model_kind(o.model_kind);
    if (!o.model_path.empty()) {
        pretrained = load_model(o.model_path);
        kind = pretrained->kind();
    }
    if (kind == ModelKind::Cnn && !pretrained) raise(ErrorKind::InvalidArgument, "CNN validation needs --model");
    auto cfg = engine_config(o);
    auto spec = source_spec(o);
    spec.synth.seed = derive_seed(o.seed, 0x73796e);
    o.plan.validate();
    ValidationOptions vopts;
    vopts.kind = kind;
    vopts.hyper = hyper_for(o);
    vopts.pretrained = pretrained ? &*pretrained : nullptr;
    vopts.constant_none_control = o.baseline;
    const int rating = o.rating;
    vopts.rating = [rating]() -> std::optional<int> {
        if (rating < 1) return std::nullopt;
        return rating;
    };
    ScriptedPlayer player(derive_seed(o.seed, 0x706c6179));
    const std::string id = o.session_id.empty() ? "validation-" + std::to_string(o.seed) : o.session_id;
    auto res = run_validation(vopts, cfg, make_source_factory(spec, cfg.sampling), player, o.plan, id);
    const auto& row = res.row;
    std::printf("%s\n%s\n", validation_csv_header().c_str(), validation_csv_line(row).c_str());
    std::printf("control agreement: %.4f\n", row.agreement);
    if (!o.out.empty()) {
        const bool fresh = !fs::exists(o.out) || fs::file_size(o.out) == 0;
        std::ofstream f(o.out, std::ios::app);
        if (!f) raise(ErrorKind::InvalidArgument, "cannot write " + o.out);
        if (fresh) f << validation_csv_header() << "\n";
        f << validation_csv_line(row) << "\n";
        std::printf("appended to %s\n", o.out.c_str());
    }
    if (!row.complete) raise(ErrorKind::RatingMissing, "no user rating; row marked incomplete");
    return 0;
}

int cmd_demo(const Opts& o) {
    if (o.model_path.empty()) raise(ErrorKind::InvalidArgument, "--model is required");
    const auto model = load_model(o.model_path);
    auto cfg = engine_config(o);
    auto spec = source_spec(o);
    spec.synth.seed = derive_seed(o.seed, 0x73796e);
    ScriptedPlayer player(derive_seed(o.seed, 0x706c6179));
    const auto res = run_demo(model, cfg, make_source_factory(spec, cfg.sampling), player, o.plan);
    std::printf("boxes caught: %d, max streak: %d, agreement: %.4f\n", res.boxes_caught, res.max_streak,
                res.agreement);
    return 0;
}

int cmd_replay(const Opts& o) {
    if (o.inputs.size() != 1) raise(ErrorKind::InvalidArgument, "replay takes exactly one session file");
    const auto rec = load_session(o.inputs[0]);
    const auto ok = count_reproduced_labels(rec);
    const double pct = rec.frames.empty() ? 100.0 : 100.0 * static_cast<double>(ok) / static_cast<double>(rec.frames.size());
    std::printf("session: %s, frames: %zu, key events: %zu\n", rec.header.session_id.c_str(), rec.frames.size(),
                rec.key_log.size());
    if (!o.model_path.empty()) {
        const auto model = load_model(o.model_path);
        const auto ev = evaluate(model, rec.frames);
        std::printf("model accuracy on session: %.4f\n", ev.accuracy);
        print_confusion(ev);
    }
    if (ok == rec.frames.size()) {
        std::printf("labels: 100%% reproduced\n");
        return 0;
    }
    std::printf("labels: %.2f%% reproduced (%zu of %zu)\n", pct, ok, rec.frames.size());
    raise(ErrorKind::CorruptFile, "stored labels do not match the key log");
}

int report_session(const std::string& path) {
    const auto rec = load_session(path);
    const auto& h = rec.header;
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& f : rec.frames) ++counts[index_of(f.label)];
    std::printf("%s\n", path.c_str());
    std::printf("  session %s, subject '%s', phase %s, source %s, seed %llu\n", h.session_id.c_str(),
                h.subject_id.c_str(), h.phase.c_str(), h.source.c_str(), static_cast<unsigned long long>(h.seed));
    std::printf("  %g Hz x %d ch, window %d hop %d, started %s, software %s\n", h.sampling.sample_rate,
                h.sampling.channel_count, h.window.window_len, h.window.hop, h.start_time.c_str(),
                h.software_version.c_str());
    const double span = rec.frames.empty() ? 0.0 : rec.frames.back().t - rec.frames.front().t;
    std::printf("  frames %zu over %.1f s; none %zu, left %zu, right %zu, both %zu; key events %zu\n",
                rec.frames.size(), span, counts[0], counts[1], counts[2], counts[3], rec.key_log.size());
    const auto& m = rec.metrics;
    std::printf("  boxes %s, max streak %s, rating %s, training accuracy %s\n",
                m.boxes_caught ? std::to_string(*m.boxes_caught).c_str() : "-",
                m.max_streak ? std::to_string(*m.max_streak).c_str() : "-",
                m.user_rating ? std::to_string(*m.user_rating).c_str() : "-",
                m.training_accuracy ? std::to_string(*m.training_accuracy).c_str() : "-");
    return 0;
}

int report_sweep(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::InvalidArgument, "cannot read " + path);
    std::string line;
    std::getline(in, line);
    if (line != sweep_csv_header()) raise(ErrorKind::CorruptFile, path + " is not a sweep table");
    std::map<std::string, std::map<int, std::map<int, double>>> table;
    std::vector<int> ls;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto r = parse_sweep_csv_line(line);
        table[r.dataset][r.n][r.l] = r.test_acc;
        ls.push_back(r.l);
    }
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    std::printf("%s (test accuracy)\n", path.c_str());
    for (const auto& [ds, rows] : table) {
        std::printf("  %s\n  %4s", ds.c_str(), "n");
        for (int l : ls) std::printf(" %8s", ("l=" + std::to_string(l)).c_str());
        std::printf("\n");
        for (const auto& [n, cols] : rows) {
            std::printf("  %4d", n);
            for (int l : ls) {
                const auto it = cols.find(l);
                if (it == cols.end()) {
                    std::printf(" %8s", "-");
                } else {
                    std::printf(" %8.4f", it->second);
                }
            }
            std::printf("\n");
        }
    }
    std::printf("  published training accuracy on human EEG (reference only)\n  %4s", "n");
    for (int l : ls) std::printf(" %8s", ("l=" + std::to_string(l)).c_str());
    std::printf("\n");
    for (int n = 1; n <= 4; ++n) {
        std::printf("  %4d", n);
        for (int l : ls) {
            const auto ref = reference_training_accuracy(n, l);
            if (ref)
                std::printf(" %8.2f", *ref);
            else
                std::printf(" %8s", "-");
        }
        std::printf("\n");
    }
    return 0;
}

int report_model(const std::string& path) {
    const auto model = load_model(path);
    const auto& md = model.metadata();
    std::printf("%s\n  model %s, seed %llu, train size %zu, epochs %d, training accuracy %.4f, %.1f s%s\n",
                path.c_str(), std::string(to_string(model.kind())).c_str(),
                static_cast<unsigned long long>(md.seed), md.train_size, md.epochs, md.training_accuracy,
                md.wall_seconds, md.transfer ? ", transfer" : "");
    return 0;
}

int cmd_report(const Opts& o) {
    const auto files = expand_globs(o.inputs);
    if (files.empty()) raise(ErrorKind::EmptyDataset, "no files match the given patterns");
    for (const auto& f : files) {
        const auto ext = fs::path(f).extension().string();
        if (ext == ".bcis") {
            report_session(f);
        } else if (ext == ".bcim") {
            report_model(f);
        } else if (ext == ".csv") {
            report_sweep(f);
        } else {
            raise(ErrorKind::InvalidArgument, "don't know how to report on " + f);
        }
    }
    return 0;
}

Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) std::thread([] { g_service->stop(); }).detach();
}

int cmd_serve(const Opts& o) {
    ServiceConfig sc;
    sc.address = o.address;
    if (o.port < 0 || o.port > 65535) raise(ErrorKind::InvalidArgument, "--port out of range");
    sc.port = static_cast<std::uint16_t>(o.port);
    sc.sessions_dir = o.out.empty() ? "sessions" : o.out;
    sc.engine = engine_config(o);
    sc.engine.realtime_factor = o.realtime > 0 ? o.realtime : 1.0;
    sc.source = source_spec(o);
    sc.source.synth.seed = derive_seed(o.seed, 0x73796e);
    sc.plan = o.plan;
    sc.rating_timeout_s = o.rating_timeout;
    sc.model_path = o.model_path;
    Service service(sc);
    service.start();
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::printf("listening on http://%s:%u (ws at /ws)\n", sc.address.c_str(), service.port());
    std::fflush(stdout);
    service.wait();
    g_service = nullptr;
    return 0;
}

// Turns a flat JSON object into argument tokens placed ahead of the real
// command line, so explicit flags win.
std::vector<std::string> config_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::InvalidArgument, "cannot read config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise(ErrorKind::InvalidArgument, "config " + path + ": " + e.what());
    }
    if (!j.is_object()) raise(ErrorKind::InvalidArgument, "config must be a JSON object");
    std::vector<std::string> out;
    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        if (value.is_boolean()) {
            if (value.get<bool>()) out.push_back(flag);
        } else if (value.is_array()) {
            for (const auto& v : value) {
                out.push_back(flag);
                out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            }
        } else {
            out.push_back(flag);
            out.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        }
    }
    return out;
}

int run(int argc, char** argv) {
    // --config is resolved before parsing
    std::vector<std::string> args(argv + 1, argv + argc);
    std::vector<std::string> merged;
    std::vector<std::string> extra;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            const auto t = config_tokens(args[++i]);
            extra.insert(extra.end(), t.begin(), t.end());
        } else if (args[i].rfind("--config=", 0) == 0) {
            const auto t = config_tokens(args[i].substr(9));
            extra.insert(extra.end(), t.begin(), t.end());
        } else {
            merged.push_back(args[i]);
        }
    }
    merged.insert(merged.begin() + (merged.empty() ? 0 : 1), extra.begin(), extra.end());

    Opts o;
    CLI::App app{"EEG motor-imagery BCI engine"};
    app.set_version_flag("--version", kSoftwareVersion);
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    // handled above; declared so it shows in --help
    app.add_option("--config", o.config_path, "JSON file of flag values (flags override)");

    auto add_seed = [&](CLI::App* c) {
        c->add_option("--seed", o.seed_text, "base seed (default: from entropy, printed)");
    };
    auto add_source = [&](CLI::App* c) {
        c->add_option("--source", o.source, "synthetic | serial:DEV | tcp:HOST:PORT | file:PATH")->capture_default_str();
        c->add_option("--mu-depth", o.synth.mu_depth, "synthetic mu suppression depth")->capture_default_str();
        c->add_option("--mu-amplitude", o.synth.mu_amplitude, "synthetic mu amplitude, uV")->capture_default_str();
        c->add_option("--noise", o.synth.noise_amplitude, "synthetic noise amplitude, uV")->capture_default_str();
        c->add_option("--mains-leak", o.synth.mains_leak, "synthetic mains amplitude, uV")->capture_default_str();
        c->add_option("--drift", o.synth.drift_amplitude, "synthetic drift amplitude, uV")->capture_default_str();
        c->add_option("--realtime", o.realtime, "pace the source at this multiple of real time (0 = lockstep)")
            ->capture_default_str();
        c->add_option("--smoothing", o.smoothing, "majority window over predictions (1 = raw)")->capture_default_str();
    };
    auto add_plan = [&](CLI::App* c) {
        c->add_option("--training-s", o.plan.training_s)->capture_default_str();
        c->add_option("--demo-s", o.plan.demo_s)->capture_default_str();
        c->add_option("--record-s", o.plan.record_s)->capture_default_str();
        c->add_option("--control-s", o.plan.control_s)->capture_default_str();
    };
    auto add_model = [&](CLI::App* c) {
        c->add_option("--model-kind", o.model_kind, "knn | lda | cnn")->capture_default_str();
        c->add_option("--k", o.hyper.k)->capture_default_str();
        c->add_option("--shrinkage", o.hyper.shrinkage)->capture_default_str();
        c->add_option("--n-convs", o.hyper.n_convs)->capture_default_str();
        c->add_option("--dense-len", o.hyper.dense_len)->capture_default_str();
    };
    auto add_train = [&](CLI::App* c) {
        c->add_option("--lr", o.hyper.train.learning_rate)->capture_default_str();
        c->add_option("--momentum", o.hyper.train.momentum)->capture_default_str();
        c->add_option("--batch", o.hyper.train.batch_size)->capture_default_str();
        c->add_option("--epochs", o.hyper.train.epochs)->capture_default_str();
        c->add_option("--split", o.split_mode, "random | temporal")->capture_default_str();
        c->add_option("--train-fraction", o.train_fraction)->capture_default_str();
        c->add_option("--consolidate", o.consolidate_fraction, "fraction of each session's frames to use")
            ->capture_default_str();
    };

    auto* sim = app.add_subcommand("simulate", "generate a synthetic raw recording");
    add_seed(sim);
    sim->add_option("--duration", o.duration, "seconds")->required();
    sim->add_option("--schedule", o.schedule, "label schedule start:end:label,... (default: none throughout)");
    sim->add_option("--mu-depth", o.synth.mu_depth)->capture_default_str();
    sim->add_option("--noise", o.synth.noise_amplitude)->capture_default_str();
    sim->add_option("--out", o.out, "output .bcir")->required();

    auto* rec = app.add_subcommand("record", "run a headless training session and save it");
    add_seed(rec);
    add_source(rec);
    add_plan(rec);
    rec->add_option("--duration", o.duration, "training phase seconds (overrides --training-s)");
    rec->add_option("--session-id", o.session_id);
    rec->add_option("--subject", o.subject_id);
    rec->add_option("--out", o.out, "output .bcis")->required();

    auto* train = app.add_subcommand("train", "train and evaluate a model on recorded sessions");
    add_seed(train);
    add_model(train);
    add_train(train);
    train->add_option("sessions", o.inputs, "session files or glob patterns")->required();
    train->add_option("--out", o.out, "output .bcim")->required();

    auto* sweep = app.add_subcommand("sweep", "CNN (n, l) grid sweep, resumable");
    add_seed(sweep);
    add_train(sweep);
    sweep->add_option("--dataset", o.datasets, "NAME=GLOB, repeatable")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sweep->add_option("--grid", o.grid, "e.g. n=1..2,l=100,200 (default: full 24 cells)");
    sweep->add_option("--jobs", o.jobs)->capture_default_str();
    sweep->add_option("--max-new-cells", o.max_new_cells, "stop after this many new cells (0 = all)");
    sweep->add_option("--out", o.out, "output directory")->required();

    auto* val = app.add_subcommand("validate", "record, train, control, rate; appends a validation row");
    add_seed(val);
    add_source(val);
    add_plan(val);
    add_model(val);
    add_train(val);
    val->add_option("--model", o.model_path, "pretrained model (required for CNN; its kind wins)");
    val->add_option("--rating", o.rating, "participant rating 1-5 (omit: row incomplete)")->check(CLI::Range(1, 5));
    val->add_flag("--baseline", o.baseline, "constant 'none' controller in the control phase");
    val->add_option("--session-id", o.session_id);
    val->add_option("--out", o.out, "validation table .csv (appended)");

    auto* demo = app.add_subcommand("demo", "headless live-control phase with a model");
    add_seed(demo);
    add_source(demo);
    add_plan(demo);
    demo->add_option("--model", o.model_path, "model .bcim")->required();

    auto* replay = app.add_subcommand("replay", "re-label a stored session and check it reproduces");
    replay->add_option("session", o.inputs, "session .bcis")->required();
    replay->add_option("--model", o.model_path, "also evaluate this model on the session");

    auto* report = app.add_subcommand("report", "summarize sessions, models and sweep tables");
    report->add_option("files", o.inputs, ".bcis, .bcim or sweep .csv files / globs")->required();

    auto* serve = app.add_subcommand("serve", "HTTP + WebSocket service for the game UI");
    add_seed(serve);
    add_source(serve);
    add_plan(serve);
    serve->add_option("--address", o.address)->capture_default_str();
    serve->add_option("--port", o.port, "0 picks a free port")->capture_default_str();
    serve->add_option("--model", o.model_path, "default model for demo sessions");
    serve->add_option("--rating-timeout", o.rating_timeout, "seconds")->capture_default_str();
    serve->add_option("--out", o.out, "sessions directory (default: sessions)");

    std::reverse(merged.begin(), merged.end());
    try {
        app.parse(merged);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        print_error("Usage", e.what(), 2);
        return 2;
    }

    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "replay" || name == "report") {
        return name == "replay" ? cmd_replay(o) : cmd_report(o);
    }
    o.seed = resolve_seed(o.seed_text);
    announce(name, o);
    if (name == "simulate") return cmd_simulate(o);
    if (name == "record") return cmd_record(o);
    if (name == "train") return cmd_train(o);
    if (name == "sweep") return cmd_sweep(o);
    if (name == "validate") return cmd_validate(o);
    if (name == "demo") return cmd_demo(o);
    return cmd_serve(o);
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        const int code = exit_code_for(e.kind());
        std::fflush(stdout);
        print_error(std::string(to_string(e.kind())), e.what(), code);
        return code;
    } catch (const std::exception& e) {
        std::fflush(stdout);
        print_error("Internal", e.what(), 3);
        return 3;
    }
}
