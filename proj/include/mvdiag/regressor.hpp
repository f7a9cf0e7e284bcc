#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvdiag/matrix.hpp"
#include "mvdiag/nn.hpp"

namespace mvdiag {

/// Maps concatenated preprocessed features to latent codes. Fixed layout:
/// four weight layers with sigmoid activations after the first two and
/// linear outputs after the last two.
struct LatentRegressor {
    DenseNet net;
};

LatentRegressor make_latent_regressor(std::size_t input_dim, std::size_t latent_dim,
                                      std::size_t hidden, std::mt19937_64& rng);

bool is_valid_regressor_layout(const DenseNet& net);

struct RegressorConfig {
    std::size_t hidden = 128;
    std::size_t epochs = 400;
    double step_size = 1e-3;
    std::uint64_t seed = 0;
};

/// Fits the regressor to reproduce each row of `targets` from the matching
/// row of `inputs` under mean squared error. Full-batch adaptive steps;
/// the per-epoch loss is appended to *trace when given.
LatentRegressor train_regressor(const Matrix& inputs, const Matrix& targets,
                                const RegressorConfig& cfg,
                                std::vector<double>* trace = nullptr);

std::vector<double> infer_latent(const LatentRegressor& reg,
                                 std::span<const double> x);

}  // namespace mvdiag
