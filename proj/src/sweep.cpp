#include "bci/sweep.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>

#include "bci/binary_io.hpp"
#include "bci/error.hpp"
#include "bci/rng.hpp"

namespace bci {

namespace fs = std::filesystem;

namespace {

int parse_int(std::string_view s) {
    int v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) {
        raise(ErrorKind::InvalidArgument, "expected an integer, got '" + std::string(s) + "'");
    }
    return v;
}

std::vector<int> parse_axis(const std::vector<std::string>& items) {
    std::vector<int> out;
    for (const auto& item : items) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_int(item));
            continue;
        }
        const int lo = parse_int(std::string_view(item).substr(0, dots));
        const int hi = parse_int(std::string_view(item).substr(dots + 2));
        if (hi < lo) raise(ErrorKind::InvalidArgument, "empty range " + item);
        for (int v = lo; v <= hi; ++v) out.push_back(v);
    }
    return out;
}

std::string marker_path(const std::string& out_dir, const std::string& ds, int n, int l) {
    return (fs::path(out_dir) / "cells" / (ds + "__n" + std::to_string(n) + "__l" + std::to_string(l) + ".csv"))
        .string();
}

std::string fmt_double(double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    io::write_file_atomic(path, std::span<const std::uint8_t>(
                                    reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

struct Prepared {
    std::vector<LabeledExample> train, test;
};

}  // namespace

SweepGrid SweepGrid::full() { return {{1, 2, 3, 4}, {100, 200, 400, 800, 1600, 3200}}; }

SweepGrid SweepGrid::parse(std::string_view text) {
    SweepGrid g = full();
    std::string s(text);
    boost::algorithm::erase_all(s, " ");
    if (s.empty()) return g;
    // split on commas, then regroup items under the most recent key
    std::vector<std::string> parts;
    boost::algorithm::split(parts, s, boost::is_any_of(","));
    std::map<std::string, std::vector<std::string>> axes;
    std::string key;
    for (const auto& p : parts) {
        const auto eq = p.find('=');
        if (eq != std::string::npos) {
            key = p.substr(0, eq);
            if (key != "n" && key != "l") raise(ErrorKind::InvalidArgument, "unknown grid axis '" + key + "'");
            if (axes.count(key)) raise(ErrorKind::InvalidArgument, "grid axis '" + key + "' given twice");
            axes[key].push_back(p.substr(eq + 1));
        } else {
            if (key.empty()) raise(ErrorKind::InvalidArgument, "grid must start with n= or l=");
            axes[key].push_back(p);
        }
    }
    if (axes.count("n")) g.n_values = parse_axis(axes["n"]);
    if (axes.count("l")) g.l_values = parse_axis(axes["l"]);
    for (int n : g.n_values) {
        if (n < 1 || n > 4) raise(ErrorKind::InvalidArgument, "n must be in 1..4");
    }
    for (int l : g.l_values) {
        if (l < 1) raise(ErrorKind::InvalidArgument, "l must be positive");
    }
    return g;
}

std::optional<double> reference_training_accuracy(int n, int l) {
    static constexpr int kL[] = {100, 200, 400, 800, 1600, 3200};
    static constexpr double kAcc[4][6] = {
        {0.56, 0.63, 0.67, 0.67, 0.70, 0.82},
        {0.26, 0.76, 0.75, 0.77, 0.67, 0.74},
        {0.26, 0.71, 0.78, 0.68, 0.88, 0.70},
        {0.88, 0.82, 0.80, 0.73, 0.84, 0.78},
    };
    if (n < 1 || n > 4) return std::nullopt;
    for (int j = 0; j < 6; ++j)
        if (kL[j] == l) return kAcc[n - 1][j];
    return std::nullopt;
}

std::uint64_t sweep_cell_seed(std::uint64_t base, int n, int l) {
    return derive_seed(base, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(l));
}

std::string sweep_csv_header() { return "dataset,n,l,seed,train_acc,test_acc,wall_seconds"; }

std::string sweep_csv_line(const SweepRow& r) {
    return r.dataset + "," + std::to_string(r.n) + "," + std::to_string(r.l) + "," + std::to_string(r.seed) + "," +
           fmt_double(r.train_acc, "%.17g") + "," + fmt_double(r.test_acc, "%.17g") + "," +
           fmt_double(r.wall_seconds, "%.3f");
}

SweepRow parse_sweep_csv_line(std::string_view line) {
    std::vector<std::string> f;
    std::string s(line);
    boost::algorithm::trim(s);
    boost::algorithm::split(f, s, boost::is_any_of(","));
    if (f.size() != 7) raise(ErrorKind::CorruptFile, "sweep row needs 7 fields: " + s);
    SweepRow r;
    try {
        r.dataset = f[0];
        r.n = std::stoi(f[1]);
        r.l = std::stoi(f[2]);
        r.seed = std::stoull(f[3]);
        r.train_acc = std::stod(f[4]);
        r.test_acc = std::stod(f[5]);
        r.wall_seconds = std::stod(f[6]);
    } catch (const std::exception&) {
        raise(ErrorKind::CorruptFile, "malformed sweep row: " + s);
    }
    return r;
}

SweepResult run_sweep(std::span<const SweepDataset> datasets, const SweepGrid& grid, const SweepOptions& opts,
                      const std::function<void(const SweepRow&)>& on_cell) {
    if (opts.out_dir.empty()) raise(ErrorKind::InvalidArgument, "sweep needs an output directory");
    if (opts.jobs < 1) raise(ErrorKind::InvalidArgument, "jobs must be >= 1");
    opts.train.validate();
    fs::create_directories(fs::path(opts.out_dir) / "cells");

    struct Cell {
        std::size_t ds;
        int n, l;
        std::string marker;
        bool done = false;
        SweepRow row;
    };
    std::vector<Cell> cells;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        for (int n : grid.n_values) {
            for (int l : grid.l_values) {
                Cell c{d, n, l, marker_path(opts.out_dir, datasets[d].name, n, l), false, {}};
                if (fs::exists(c.marker)) {
                    std::ifstream in(c.marker);
                    std::string header, line;
                    std::getline(in, header);
                    std::getline(in, line);
                    c.row = parse_sweep_csv_line(line);
                    c.done = true;
                }
                cells.push_back(std::move(c));
            }
        }
    }

    SweepResult result;
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].done) {
            ++result.resumed;
        } else {
            todo.push_back(i);
        }
    }
    if (opts.max_new_cells > 0 && todo.size() > opts.max_new_cells) todo.resize(opts.max_new_cells);

    // Balance and split once per dataset that still has work.
    std::vector<Prepared> prepared(datasets.size());
    std::vector<bool> need(datasets.size(), false);
    for (auto i : todo) need[cells[i].ds] = true;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        if (!need[d]) continue;
        if (datasets[d].examples.empty()) raise(ErrorKind::EmptyDataset, "dataset " + datasets[d].name + " is empty");
        const auto balanced = balance(datasets[d].examples, opts.seed);
        auto [tr, te] = split(balanced, opts.train_fraction, opts.split_mode, opts.seed);
        prepared[d] = {std::move(tr), std::move(te)};
    }

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= todo.size()) return;
            {
                std::lock_guard lock(mu);
                if (failure) return;
            }
            auto& c = cells[todo[k]];
            try {
                const auto start = std::chrono::steady_clock::now();
                ModelHyper h;
                h.n_convs = c.n;
                h.dense_len = c.l;
                h.train = opts.train;
                const auto seed = sweep_cell_seed(opts.seed, c.n, c.l);
                const auto& data = prepared[c.ds];
                const auto model = train_classifier(ModelKind::Cnn, h, data.train, seed);
                SweepRow row;
                row.dataset = datasets[c.ds].name;
                row.n = c.n;
                row.l = c.l;
                row.seed = seed;
                row.train_acc = model.metadata().training_accuracy;
                row.test_acc = evaluate(model, data.test).accuracy;
                row.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                write_text(c.marker, sweep_csv_header() + "\n" + sweep_csv_line(row) + "\n");
                std::lock_guard lock(mu);
                c.row = row;
                c.done = true;
                ++result.computed;
                if (on_cell) on_cell(row);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int threads = std::min<int>(opts.jobs, static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::string table = sweep_csv_header() + "\n";
    result.complete = true;
    for (const auto& c : cells) {
        if (!c.done) {
            result.complete = false;
            continue;
        }
        result.rows.push_back(c.row);
        table += sweep_csv_line(c.row) + "\n";
    }
    write_text((fs::path(opts.out_dir) / "sweep.csv").string(), table);

    if (result.complete) {
        std::string summary = "dataset,n";
        for (int l : grid.l_values) summary += ",test_acc_l" + std::to_string(l);
        for (int l : grid.l_values) summary += ",ref_train_acc_l" + std::to_string(l);
        summary += "\n";
        std::size_t i = 0;
        for (std::size_t d = 0; d < datasets.size(); ++d) {
            for (int n : grid.n_values) {
                summary += datasets[d].name + "," + std::to_string(n);
                for (std::size_t j = 0; j < grid.l_values.size(); ++j) {
                    summary += "," + fmt_double(cells[i++].row.test_acc, "%.4f");
                }
                for (int l : grid.l_values) {
                    const auto ref = reference_training_accuracy(n, l);
                    summary += "," + (ref ? fmt_double(*ref, "%.2f") : std::string());
                }
                summary += "\n";
            }
        }
        write_text((fs::path(opts.out_dir) / "summary.csv").string(), summary);
    }
    return result;
}

}  // namespace bci
