#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mvdiag/matrix.hpp"

namespace mvdiag {

enum class Activation : std::uint8_t { linear = 0, relu = 1, sigmoid = 2 };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Fully-connected stack. weights[l] has shape layer_dims[l+1] x layer_dims[l];
/// activations[l] is applied to the output of layer l.
struct DenseNet {
    std::vector<std::size_t> layer_dims;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    std::vector<Activation> activations;

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    std::size_t param_count() const;
};

/// Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
DenseNet make_dense_net(const std::vector<std::size_t>& dims,
                        const std::vector<Activation>& acts, std::mt19937_64& rng);

/// Per-layer pre/post activations recorded by forward; post[0] is the input.
struct ForwardCache {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

std::vector<double> forward(const DenseNet& net, std::span<const double> x);
std::vector<double> forward(const DenseNet& net, std::span<const double> x,
                            ForwardCache& cache);

/// Parameter gradients shaped like their DenseNet, plus the input gradient.
struct GradientSet {
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;
    std::vector<double> input_grad;
};

GradientSet make_zero_gradients(const DenseNet& net);
void zero_gradients(GradientSet& grads);

/// Backpropagates upstream = dL/d(output) through the cached forward pass.
/// Parameter gradients accumulate into `grads`; input_grad is overwritten.
void backward(const DenseNet& net, const ForwardCache& cache,
              std::span<const double> upstream, GradientSet& grads);
GradientSet backward(const DenseNet& net, const ForwardCache& cache,
                     std::span<const double> upstream);

/// Input gradient only (no parameter gradients); accumulates into
/// input_grad_accum, which must have length net.input_dim().
void backward_input(const DenseNet& net, const ForwardCache& cache,
                    std::span<const double> upstream,
                    std::vector<double>& input_grad_accum);

void scale_gradients(GradientSet& grads, double factor);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Mean over components of squared difference; grad = 2(pred-target)/len.
LossGrad mse_loss(std::span<const double> pred, std::span<const double> target);

struct ScalarLossGrad {
    double loss = 0.0;
    double grad = 0.0;
};

/// -[y log p + (1-y) log(1-p)] with p clamped to [1e-7, 1-1e-7].
ScalarLossGrad binary_cross_entropy(double p, int y);

double sigmoid(double z);

/// Adaptive moment estimation. Defaults: beta1=0.9, beta2=0.999, eps=1e-8.
struct AdamConfig {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    long step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

AdamState make_adam(std::size_t n_params, AdamConfig cfg = {});

/// One update over a flat parameter block. Throws TrainError on non-finite
/// gradients. Increments the step counter by 1.
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads);

/// One update over all parameters of a net, layer by layer in order.
/// The state must have been created with n_params = net.param_count().
void adam_step_net(AdamState& state, DenseNet& net, const GradientSet& grads);

}  // namespace mvdiag
