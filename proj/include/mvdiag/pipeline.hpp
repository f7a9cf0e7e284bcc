#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvdiag/dataset.hpp"
#include "mvdiag/latent.hpp"
#include "mvdiag/nn.hpp"
#include "mvdiag/preprocess.hpp"
#include "mvdiag/regressor.hpp"

namespace mvdiag {

/// Latent-space classifier: three weight layers, single sigmoid probability
/// output.
struct LatentClassifier {
    DenseNet net;
};

LatentClassifier make_latent_classifier(std::size_t latent_dim, std::size_t hidden,
                                        std::mt19937_64& rng);

bool is_valid_classifier_layout(const DenseNet& net);

struct ClassifierConfig {
    std::size_t hidden = 64;
    std::size_t epochs = 300;
    double step_size = 1e-3;
    std::uint64_t seed = 0;
};

/// Fits the classifier on latent rows under mean cross-entropy. Requires
/// both classes. Per-epoch loss appended to *trace when given.
LatentClassifier train_classifier(const Matrix& latents, const std::vector<int>& labels,
                                  const ClassifierConfig& cfg,
                                  std::vector<double>* trace = nullptr);

double classifier_probability(const LatentClassifier& clf, std::span<const double> h);

struct PipelineConfig {
    PreprocessMode prep = PreprocessMode::standardize;
    std::size_t latent_dim = 32;
    double lambda = 100.0;
    double margin = 1.0;
    std::size_t step1_epochs = 300;
    std::size_t regressor_epochs = 400;
    std::size_t classifier_epochs = 300;
    std::size_t recon_hidden = 0;  // 0 -> max(2 * latent_dim, 16)
    std::size_t regressor_hidden = 128;
    std::size_t classifier_hidden = 64;
    double step1_lr_theta = 1e-3;
    double step1_lr_h = 1e-2;
    double regressor_lr = 1e-3;
    double classifier_lr = 1e-3;
    std::uint64_t seed = 0;
    /// Train the classifier on regressor outputs (the prediction path);
    /// false trains it on the step-1 codes directly (ablation).
    bool classifier_on_regressor_outputs = true;
    bool recon_plain_sum = false;
    bool prototypes_per_step = false;
    std::size_t batch_size = 0;
};

/// Everything needed to predict: preprocessing stats, decoders, training
/// codes and prototypes, regressor, classifier, and the hyperparameters
/// they were trained with.
struct TrainedPipeline {
    std::uint32_t format_version = 1;
    std::vector<ViewSchema> schema;
    PreprocessStats stats;
    ReconstructionBank bank;
    LatentCodes codes;
    ClassPrototypes prototypes;
    LatentRegressor regressor;
    LatentClassifier classifier;
    PipelineConfig config;
};

struct PipelineTraces {
    std::vector<Step1Trace> step1;
    std::vector<double> regressor;
    std::vector<double> classifier;
};

/// Runs preprocess-fit, representation learning, regressor fitting, and
/// classifier fitting in order. Deterministic given cfg.seed.
TrainedPipeline train_pipeline(const MultiViewDataset& train_data,
                               const PipelineConfig& cfg,
                               PipelineTraces* traces = nullptr);

struct Prediction {
    int label = 0;
    double probability = 0.0;
    std::vector<double> latent;
};

/// Raw per-view features in, (label, probability, latent) out. Label is 1
/// iff probability >= 0.5.
Prediction predict(const TrainedPipeline& pipe,
                   const std::vector<std::vector<double>>& raw_views);

std::vector<Prediction> predict_all(const TrainedPipeline& pipe,
                                    const MultiViewDataset& raw_data);

/// Regressor output for every row of raw (unpreprocessed) data; one latent
/// per row.
Matrix regressor_latents(const TrainedPipeline& pipe,
                         const MultiViewDataset& raw_data);

/// Versioned binary model file; load(save(p)) reproduces predictions
/// bitwise.
void save_pipeline(const TrainedPipeline& pipe, const std::filesystem::path& path);
TrainedPipeline load_pipeline(const std::filesystem::path& path);

}  // namespace mvdiag
