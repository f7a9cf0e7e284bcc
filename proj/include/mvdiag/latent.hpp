#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mvdiag/dataset.hpp"
#include "mvdiag/nn.hpp"

namespace mvdiag {

/// Trainable per-sample representations, one row per training sample.
struct LatentCodes {
    Matrix values;  // N x d

    std::size_t count() const { return values.rows; }
    std::size_t dim() const { return values.cols; }
    std::span<const double> row(std::size_t n) const {
        return {values.row(n), values.cols};
    }
};

/// One decoder network per view: latent dim in, view dim out.
struct ReconstructionBank {
    std::vector<DenseNet> nets;
};

/// Hidden width 0 means the default max(2 * latent_dim, 16).
ReconstructionBank make_reconstruction_bank(const std::vector<ViewSchema>& schema,
                                            std::size_t latent_dim,
                                            std::size_t hidden, std::mt19937_64& rng);

/// Margin applied between the two classes; the similarity map is fixed to
/// identity, so class similarity reduces to a dot product with the class
/// mean (see ClassPrototypes).
struct StructuredLossConfig {
    double margin = 1.0;
};

/// Mean latent vector and member count per class.
struct ClassPrototypes {
    std::array<std::vector<double>, 2> mean;
    std::array<std::size_t, 2> count = {0, 0};
};

ClassPrototypes compute_prototypes(const Matrix& latents,
                                   const std::vector<int>& labels);

/// Sum over views of the squared reconstruction error of h against the
/// sample's features. Each view's error is a component mean by default
/// (plain_sum restores unreduced squared norms). Parameter gradients are
/// accumulated into bank_grads when given; h_grad is overwritten when given.
double reconstruction_loss(const ReconstructionBank& bank, std::span<const double> h,
                           const std::vector<std::vector<double>>& sample_views,
                           std::vector<GradientSet>* bank_grads = nullptr,
                           std::vector<double>* h_grad = nullptr,
                           bool plain_sum = false);

/// Mean similarity between h and the latents of class y. With the identity
/// map this equals dot(prototype_y, h).
double expected_similarity(std::span<const double> h, const ClassPrototypes& protos,
                           int y);

struct StructuredLossResult {
    double loss = 0.0;
    std::vector<double> h_grad;
};

/// Hinge penalty: max(0, margin + E_{other}F - E_{own}F). Zero when the
/// own-class similarity beats the other class by at least the margin.
StructuredLossResult structured_loss(std::span<const double> h, int y,
                                     const ClassPrototypes& protos,
                                     const StructuredLossConfig& cfg);

/// Class whose prototype has the larger dot product with h; ties go to 0.
int assign_class(std::span<const double> h, const ClassPrototypes& protos);

struct Step1Config {
    std::size_t latent_dim = 32;
    double lambda = 100.0;
    StructuredLossConfig structured;
    std::size_t epochs = 300;
    std::uint64_t seed = 0;
    double lr_theta = 1e-3;
    double lr_h = 1e-2;
    std::size_t recon_hidden = 0;  // 0 -> max(2d, 16)
    bool plain_sum = false;
    bool prototypes_per_step = false;  // recompute before the latent pass too
    std::size_t batch_size = 0;        // 0 = full batch (decoder pass only)
};

struct Step1Trace {
    double reconstruction = 0.0;  // mean over samples
    double structured = 0.0;      // mean over samples (unweighted by lambda)
    double total = 0.0;           // reconstruction + lambda * structured
};

struct Step1Result {
    ReconstructionBank bank;
    LatentCodes codes;
    ClassPrototypes prototypes;
    std::vector<Step1Trace> trace;
};

/// Alternating optimization of the joint objective: each epoch runs one
/// pass updating the decoder parameters with latents frozen, then one pass
/// updating the latents (through both loss terms) with decoders frozen.
/// Prototypes are recomputed from the current latents at epoch start.
/// Expects preprocessed training data with both classes present.
Step1Result train_step1(const MultiViewDataset& train_data, const Step1Config& cfg);

}  // namespace mvdiag
