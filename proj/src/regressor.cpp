#include "mvdiag/regressor.hpp"

#include <cmath>
#include <stdexcept>

#include "mvdiag/errors.hpp"

namespace mvdiag {

LatentRegressor make_latent_regressor(std::size_t input_dim, std::size_t latent_dim,
                                      std::size_t hidden, std::mt19937_64& rng) {
    if (input_dim < 1 || latent_dim < 1 || hidden < 1)
        throw std::invalid_argument("latent regressor: dims must be >= 1");
    return {make_dense_net({input_dim, hidden, hidden, hidden, latent_dim},
                           {Activation::sigmoid, Activation::sigmoid,
                            Activation::linear, Activation::linear},
                           rng)};
}

bool is_valid_regressor_layout(const DenseNet& net) {
    return net.num_layers() == 4 && net.activations[0] == Activation::sigmoid &&
           net.activations[1] == Activation::sigmoid &&
           net.activations[2] == Activation::linear &&
           net.activations[3] == Activation::linear;
}

LatentRegressor train_regressor(const Matrix& inputs, const Matrix& targets,
                                const RegressorConfig& cfg,
                                std::vector<double>* trace) {
    if (cfg.epochs < 1) throw std::invalid_argument("train_regressor: epochs must be >= 1");
    if (inputs.rows != targets.rows)
        throw std::invalid_argument("train_regressor: input rows do not align with targets");
    if (inputs.rows == 0) throw std::invalid_argument("train_regressor: no samples");

    std::mt19937_64 rng(cfg.seed);
    LatentRegressor reg =
        make_latent_regressor(inputs.cols, targets.cols, cfg.hidden, rng);
    AdamState state = make_adam(reg.net.param_count(), {.step_size = cfg.step_size});
    GradientSet grads = make_zero_gradients(reg.net);

    const std::size_t n = inputs.rows;
    const double inv_n = 1.0 / static_cast<double>(n);
    ForwardCache cache;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        zero_gradients(grads);
        double loss_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<double> pred =
                forward(reg.net, {inputs.row(i), inputs.cols}, cache);
            LossGrad lg = mse_loss(pred, {targets.row(i), targets.cols});
            loss_sum += lg.loss;
            backward(reg.net, cache, lg.grad, grads);
        }
        if (!std::isfinite(loss_sum))
            throw TrainError("train_regressor: loss diverged at epoch " +
                             std::to_string(epoch));
        scale_gradients(grads, inv_n);
        adam_step_net(state, reg.net, grads);
        if (trace) trace->push_back(loss_sum * inv_n);
    }
    return reg;
}

std::vector<double> infer_latent(const LatentRegressor& reg,
                                 std::span<const double> x) {
    return forward(reg.net, x);
}

}  // namespace mvdiag
