#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvdiag/baselines.hpp"
#include "mvdiag/dataset.hpp"
#include "mvdiag/pipeline.hpp"

namespace mvdiag {

/// Positive class is label 1.
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    void add(int truth, int predicted);
};

/// Sensitivity/specificity are absent when their denominator is zero.
struct MetricValues {
    double acc = 0.0;
    std::optional<double> sen;
    std::optional<double> spc;
};

MetricValues metrics(const ConfusionCounts& counts);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // population (1/n)
};

Aggregate aggregate(const std::vector<double>& values);

struct TrialRecord {
    std::uint64_t split_seed = 0;
    ConfusionCounts counts;
    MetricValues m;
};

struct EvalReport {
    std::string descriptor;
    std::vector<TrialRecord> trials;
    Aggregate acc;
    std::optional<Aggregate> sen;
    std::optional<Aggregate> spc;
};

/// Aggregates are recomputed from the per-trial records.
EvalReport make_report(std::string descriptor, std::vector<TrialRecord> trials);

struct MethodSpec {
    enum class Kind { pipeline, baseline };
    enum class Features { original, latent };

    Kind kind = Kind::pipeline;
    BaselineKind baseline = BaselineKind::neural_net;
    Features features = Features::original;
    /// Preprocessing for baseline original features; absent = raw.
    std::optional<PreprocessMode> prep = PreprocessMode::standardize;
    BaselineHyperparams hyper;

    std::string label() const;
};

ConfusionCounts evaluate_pipeline(const TrainedPipeline& pipe,
                                  const MultiViewDataset& test_data);
ConfusionCounts evaluate_baseline(const BaselineModel& model, const Matrix& x,
                                  const std::vector<int>& y);

/// Repeated trials: trial t splits with seed base_seed + t, trains the
/// method on the train part and scores the test part.
EvalReport run_experiment(const MultiViewDataset& data, const MethodSpec& method,
                          const PipelineConfig& pipe_cfg, std::size_t n_trials,
                          std::uint64_t base_seed, double train_fraction = 0.7);

/// Stratified fold assignment; every row lands in exactly one fold and each
/// fold holds both classes.
std::vector<std::vector<std::size_t>> make_stratified_folds(
    const std::vector<int>& labels, std::size_t k, std::uint64_t seed);

struct LambdaSelection {
    double best_lambda = 0.0;
    struct Row {
        double lambda = 0.0;
        double mean_accuracy = 0.0;
        std::vector<double> fold_accuracies;
    };
    std::vector<Row> table;  // empty when the grid had a single candidate
    std::vector<std::vector<std::size_t>> folds;
};

/// Cross-validated grid search for the balance factor. Accuracy ties pick
/// the larger lambda. A single-candidate grid returns it without running
/// any folds.
LambdaSelection kfold_lambda_select(const MultiViewDataset& train_data,
                                    const std::vector<double>& lambda_grid,
                                    std::size_t k, const PipelineConfig& cfg);

struct FeatureSetReport {
    std::string feature_set;
    std::vector<std::size_t> view_indices;
    std::vector<EvalReport> per_method;  // parallel to the methods argument
};

/// One report per (feature set, method): every single view, the named
/// view groups when present (gray+texture vs the rest), and the full
/// concatenation.
std::vector<FeatureSetReport> per_view_study(const MultiViewDataset& data,
                                             const std::vector<MethodSpec>& methods,
                                             const PipelineConfig& pipe_cfg,
                                             std::size_t n_trials,
                                             std::uint64_t base_seed);

struct RatioResult {
    double ratio = 0.0;
    bool skipped = false;
    std::string reason;
    std::size_t n_train = 0;
    ConfusionCounts counts;
    MetricValues m;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

/// Trains the pipeline on growing training subsets against one fixed test
/// partition (a stratified 20% held out with `seed`). Subsets are nested:
/// the rows used at a smaller ratio are contained in every larger one.
std::vector<RatioResult> ratio_sweep(const MultiViewDataset& data,
                                     const PipelineConfig& cfg,
                                     const std::vector<double>& ratios,
                                     std::uint64_t seed);

/// Projection onto the top-2 principal axes of the point covariance, sign
/// fixed so each axis' largest-magnitude loading is positive.
Matrix projection_2d(const Matrix& points);

void write_report_csv(const std::vector<EvalReport>& reports,
                      const std::filesystem::path& path);
void write_sweep_csv(const std::vector<RatioResult>& results,
                     const std::filesystem::path& path);
void write_projection_csv(const Matrix& coords, const std::vector<int>& labels,
                          const std::vector<std::string>& splits,
                          const std::filesystem::path& path);

}  // namespace mvdiag
