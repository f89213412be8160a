#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bci/classifier.hpp"
#include "bci/dataset.hpp"

namespace bci {

struct SweepGrid {
    std::vector<int> n_values;
    std::vector<int> l_values;

    // "n=1..2,l=100,200": ranges with "..", lists with commas. Keys may
    // appear in either order; a missing key keeps the full default axis.
    static SweepGrid parse(std::string_view text);
    // n 1..4 x l {100, 200, 400, 800, 1600, 3200}
    static SweepGrid full();

    std::size_t cells() const { return n_values.size() * l_values.size(); }
};

struct SweepDataset {
    std::string name;  // used in marker file names; [A-Za-z0-9_-]
    std::vector<LabeledExample> examples;
};

struct SweepOptions {
    std::string out_dir;
    std::uint64_t seed = 0;
    double train_fraction = 0.7;
    SplitMode split_mode = SplitMode::Random;
    TrainConfig train;  // per-cell seed is derived, cfg.seed ignored
    int jobs = 1;
    // Stop after computing this many new cells (0 = no limit). Used to
    // emulate an interrupted run.
    std::size_t max_new_cells = 0;
};

struct SweepRow {
    std::string dataset;
    int n = 0;
    int l = 0;
    std::uint64_t seed = 0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double wall_seconds = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // completed cells, dataset/n/l order
    std::size_t computed = 0;    // cells trained in this call
    std::size_t resumed = 0;     // cells read back from markers
    bool complete = false;
};

// Published training accuracies of the same architectures on human EEG
// (full training set). Annotation only; nullopt off the published grid.
std::optional<double> reference_training_accuracy(int n, int l);

std::uint64_t sweep_cell_seed(std::uint64_t base, int n, int l);

// Trains one CNN per (dataset, n, l). Each finished cell writes a marker
// out_dir/cells/<dataset>__n<n>__l<l>.csv; existing markers are reused.
// Always (re)writes out_dir/sweep.csv from all completed cells and, when
// the grid is complete, out_dir/summary.csv (test accuracy pivoted by l).
SweepResult run_sweep(std::span<const SweepDataset> datasets, const SweepGrid& grid,
                      const SweepOptions& opts,
                      const std::function<void(const SweepRow&)>& on_cell = {});

std::string sweep_csv_header();
std::string sweep_csv_line(const SweepRow& row);
SweepRow parse_sweep_csv_line(std::string_view line);

}  // namespace bci
