#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvdiag/matrix.hpp"

namespace mvdiag {

struct ViewSchema {
    std::string name;
    std::size_t dim = 0;
};

/// One feature group: schema plus an N x dim value matrix.
struct ViewBlock {
    ViewSchema schema;
    Matrix values;
};

/// Aligned per-view feature matrices with labels (1 = positive class,
/// 0 = negative class). labels may be empty for prediction-only data.
struct MultiViewDataset {
    std::vector<std::string> subject_ids;
    std::vector<ViewBlock> views;
    std::vector<int> labels;

    std::size_t num_samples() const { return subject_ids.size(); }
    std::size_t num_views() const { return views.size(); }
    std::size_t total_dim() const;
    bool has_labels() const { return !labels.empty(); }

    /// Per-view feature rows of sample n (views kept separate).
    std::vector<std::vector<double>> sample_views(std::size_t n) const;
    /// Features of sample n concatenated in view order.
    std::vector<double> concat_row(std::size_t n) const;
};

/// Built-in schema presets; "tableII" is a seven-view schema with mixed
/// dimensionalities (19, 74, 30, 24, 2, 7, 33).
std::vector<ViewSchema> preset_schema(const std::string& name);

/// Reads a manifest (lines `view <name> <dim> <csv>` plus `labels <csv>`,
/// paths relative to the manifest) and the CSV files it references.
/// Views are aligned by subject id; any mismatch is an error.
MultiViewDataset load_dataset(const std::filesystem::path& manifest_path);

/// Same as load_dataset but the labels line may be absent.
MultiViewDataset load_features(const std::filesystem::path& manifest_path);

/// Writes per-view CSVs, a labels CSV, and a manifest into `dir`.
/// Returns the manifest path.
std::filesystem::path save_dataset(const MultiViewDataset& data,
                                   const std::filesystem::path& dir);

/// Single-view dataset whose columns follow the original view order.
MultiViewDataset concat_views(const MultiViewDataset& data);

/// Keeps only the listed views (by index), preserving order.
MultiViewDataset select_views(const MultiViewDataset& data,
                              const std::vector<std::size_t>& view_indices);

/// New dataset holding the listed rows, in the order given.
MultiViewDataset select_rows(const MultiViewDataset& data,
                             const std::vector<std::size_t>& rows);

struct SplitResult {
    MultiViewDataset train;
    MultiViewDataset test;
};

/// Stratified (by default) train/test split, deterministic given seed.
/// Row order within each part follows the input order.
SplitResult split(const MultiViewDataset& data, double train_fraction,
                  std::uint64_t seed, bool stratified = true);

struct SynthConfig {
    std::size_t n_per_class = 100;
    std::vector<ViewSchema> schema;
    double class_separation = 1.0;
    std::vector<double> noise_per_view;
    std::uint64_t seed = 0;
};

/// Seeded generator: per class and view, samples scatter around a
/// class-specific anchor with the view's noise scale. Per-feature scale
/// factors are drawn log-uniform in [0.1, 10] so raw features have wildly
/// different magnitudes until preprocessed.
MultiViewDataset synth_generate(const SynthConfig& cfg);

}  // namespace mvdiag
