#include "mvdiag/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mvdiag/errors.hpp"

namespace mvdiag {

const char* to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::svm_linear: return "svm";
        case BaselineKind::logistic_regression: return "lr";
        case BaselineKind::gaussian_nb: return "gnb";
        case BaselineKind::knn: return "knn";
        case BaselineKind::neural_net: return "nn";
    }
    return "unknown";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
    if (s == "svm") return BaselineKind::svm_linear;
    if (s == "lr") return BaselineKind::logistic_regression;
    if (s == "gnb") return BaselineKind::gaussian_nb;
    if (s == "knn") return BaselineKind::knn;
    if (s == "nn") return BaselineKind::neural_net;
    throw std::invalid_argument("unknown baseline kind: " + s);
}

const std::vector<BaselineKind>& all_baseline_kinds() {
    static const std::vector<BaselineKind> kinds = {
        BaselineKind::svm_linear, BaselineKind::logistic_regression,
        BaselineKind::gaussian_nb, BaselineKind::knn, BaselineKind::neural_net};
    return kinds;
}

namespace {

void check_training_input(const Matrix& x, const std::vector<int>& y) {
    if (x.rows != y.size())
        throw std::invalid_argument("fit_baseline: rows/labels size mismatch");
    if (x.rows == 0 || x.cols == 0)
        throw std::invalid_argument("fit_baseline: empty training data");
    bool has0 = false, has1 = false;
    for (int v : y) {
        if (v != 0 && v != 1)
            throw std::invalid_argument("fit_baseline: labels must be 0 or 1");
        (v == 1 ? has1 : has0) = true;
    }
    if (!has0 || !has1)
        throw std::invalid_argument("fit_baseline: both classes must be present");
}

// hinge loss with L2 penalty on the weights, adaptive full-batch steps
void fit_svm(BaselineModel& m, const Matrix& x, const std::vector<int>& y,
             const BaselineHyperparams& hp) {
    const std::size_t n = x.rows, p = x.cols;
    m.weights.assign(p, 0.0);
    m.bias = 0.0;
    AdamState state = make_adam(p + 1, {.step_size = hp.svm_lr});
    std::vector<double> params(p + 1, 0.0);
    std::vector<double> grads(p + 1);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t epoch = 0; epoch < hp.svm_epochs; ++epoch) {
        std::fill(grads.begin(), grads.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = x.row(i);
            double score = params[p];
            for (std::size_t j = 0; j < p; ++j) score += params[j] * xi[j];
            const double s = y[i] == 1 ? 1.0 : -1.0;
            if (1.0 - s * score > 0.0) {
                for (std::size_t j = 0; j < p; ++j) grads[j] -= inv_n * s * xi[j];
                grads[p] -= inv_n * s;
            }
        }
        for (std::size_t j = 0; j < p; ++j) grads[j] += 2.0 * hp.svm_l2 * params[j];
        adam_step(state, params, grads);
    }
    m.weights.assign(params.begin(), params.begin() + p);
    m.bias = params[p];
}

void fit_logistic(BaselineModel& m, const Matrix& x, const std::vector<int>& y,
                  const BaselineHyperparams& hp) {
    const std::size_t n = x.rows, p = x.cols;
    AdamState state = make_adam(p + 1, {.step_size = hp.lr_lr});
    std::vector<double> params(p + 1, 0.0);
    std::vector<double> grads(p + 1);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t epoch = 0; epoch < hp.lr_epochs; ++epoch) {
        std::fill(grads.begin(), grads.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = x.row(i);
            double score = params[p];
            for (std::size_t j = 0; j < p; ++j) score += params[j] * xi[j];
            const double err = sigmoid(score) - static_cast<double>(y[i]);
            for (std::size_t j = 0; j < p; ++j) grads[j] += inv_n * err * xi[j];
            grads[p] += inv_n * err;
        }
        adam_step(state, params, grads);
    }
    m.weights.assign(params.begin(), params.begin() + p);
    m.bias = params[p];
}

void fit_gnb(BaselineModel& m, const Matrix& x, const std::vector<int>& y,
             const BaselineHyperparams& hp) {
    const std::size_t n = x.rows, p = x.cols;
    std::array<std::size_t, 2> count = {0, 0};
    for (int v : y) count[v] += 1;
    for (int c = 0; c < 2; ++c) {
        m.feat_mean[c].assign(p, 0.0);
        m.feat_var[c].assign(p, 0.0);
        m.log_prior[c] = std::log(static_cast<double>(count[c]) /
                                  static_cast<double>(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        std::vector<double>& mean = m.feat_mean[y[i]];
        for (std::size_t j = 0; j < p; ++j) mean[j] += xi[j];
    }
    for (int c = 0; c < 2; ++c)
        for (double& v : m.feat_mean[c]) v /= static_cast<double>(count[c]);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        const std::vector<double>& mean = m.feat_mean[y[i]];
        std::vector<double>& var = m.feat_var[y[i]];
        for (std::size_t j = 0; j < p; ++j) {
            const double d = xi[j] - mean[j];
            var[j] += d * d;
        }
    }
    // smoothing proportional to the largest overall feature variance
    double max_var = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x(i, j) - mean;
            var += d * d;
        }
        max_var = std::max(max_var, var / static_cast<double>(n));
    }
    const double eps = hp.gnb_smoothing * (max_var > 0.0 ? max_var : 1.0);
    for (int c = 0; c < 2; ++c)
        for (double& v : m.feat_var[c])
            v = v / static_cast<double>(count[c]) + eps;
}

void fit_nn(BaselineModel& m, const Matrix& x, const std::vector<int>& y,
            const BaselineHyperparams& hp, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    m.net = make_dense_net(
        {x.cols, hp.nn_hidden, hp.nn_hidden, 1},
        {Activation::relu, Activation::relu, Activation::sigmoid}, rng);
    AdamState state = make_adam(m.net.param_count(), {.step_size = hp.nn_lr});
    GradientSet grads = make_zero_gradients(m.net);
    const double inv_n = 1.0 / static_cast<double>(x.rows);
    ForwardCache cache;
    std::vector<double> upstream(1);
    for (std::size_t epoch = 0; epoch < hp.nn_epochs; ++epoch) {
        zero_gradients(grads);
        double loss_sum = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const std::vector<double> out = forward(m.net, {x.row(i), x.cols}, cache);
            ScalarLossGrad lg = binary_cross_entropy(out[0], y[i]);
            loss_sum += lg.loss;
            upstream[0] = lg.grad;
            backward(m.net, cache, upstream, grads);
        }
        if (!std::isfinite(loss_sum))
            throw TrainError("fit_baseline: nn loss diverged at epoch " +
                             std::to_string(epoch));
        scale_gradients(grads, inv_n);
        adam_step_net(state, m.net, grads);
    }
}

}  // namespace

BaselineModel fit_baseline(BaselineKind kind, const Matrix& x,
                           const std::vector<int>& y,
                           const BaselineHyperparams& hyper, std::uint64_t seed) {
    check_training_input(x, y);
    BaselineModel m;
    m.kind = kind;
    m.feature_dim = x.cols;
    switch (kind) {
        case BaselineKind::svm_linear:
            fit_svm(m, x, y, hyper);
            break;
        case BaselineKind::logistic_regression:
            fit_logistic(m, x, y, hyper);
            break;
        case BaselineKind::gaussian_nb:
            fit_gnb(m, x, y, hyper);
            break;
        case BaselineKind::knn:
            if (hyper.knn_k < 1)
                throw std::invalid_argument("fit_baseline: k must be >= 1");
            m.train_x = x;
            m.train_y = y;
            m.k = std::min(hyper.knn_k, x.rows);
            break;
        case BaselineKind::neural_net:
            fit_nn(m, x, y, hyper, seed);
            break;
    }
    return m;
}

double gnb_log_posterior(const BaselineModel& model, std::span<const double> x,
                         int cls) {
    if (model.kind != BaselineKind::gaussian_nb)
        throw std::invalid_argument("gnb_log_posterior: not a gaussian_nb model");
    if (x.size() != model.feature_dim)
        throw std::invalid_argument("gnb_log_posterior: dimension mismatch");
    double lp = model.log_prior[cls];
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double var = model.feat_var[cls][j];
        const double d = x[j] - model.feat_mean[cls][j];
        lp += -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
    }
    return lp;
}

double linear_decision_value(const BaselineModel& model, std::span<const double> x) {
    if (model.kind != BaselineKind::svm_linear &&
        model.kind != BaselineKind::logistic_regression)
        throw std::invalid_argument("linear_decision_value: not a linear model");
    if (x.size() != model.feature_dim)
        throw std::invalid_argument("linear_decision_value: dimension mismatch");
    double score = model.bias;
    for (std::size_t j = 0; j < x.size(); ++j) score += model.weights[j] * x[j];
    return score;
}

int predict_baseline(const BaselineModel& model, std::span<const double> x) {
    if (x.size() != model.feature_dim)
        throw std::invalid_argument("predict_baseline: dimension mismatch");
    switch (model.kind) {
        case BaselineKind::svm_linear:
            return linear_decision_value(model, x) > 0.0 ? 1 : 0;
        case BaselineKind::logistic_regression:
            return linear_decision_value(model, x) > 0.0 ? 1 : 0;
        case BaselineKind::gaussian_nb:
            return gnb_log_posterior(model, x, 1) > gnb_log_posterior(model, x, 0) ? 1
                                                                                   : 0;
        case BaselineKind::knn: {
            // nearest first; equal distances resolved by lower sample index
            std::vector<std::pair<double, std::size_t>> dist(model.train_x.rows);
            for (std::size_t i = 0; i < model.train_x.rows; ++i) {
                const double* r = model.train_x.row(i);
                double d2 = 0.0;
                for (std::size_t j = 0; j < x.size(); ++j) {
                    const double d = r[j] - x[j];
                    d2 += d * d;
                }
                dist[i] = {d2, i};
            }
            std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(model.k),
                              dist.end());
            std::size_t votes1 = 0;
            for (std::size_t i = 0; i < model.k; ++i)
                votes1 += static_cast<std::size_t>(model.train_y[dist[i].second]);
            return 2 * votes1 > model.k ? 1 : 0;  // vote ties go to 0
        }
        case BaselineKind::neural_net:
            return forward(model.net, x)[0] >= 0.5 ? 1 : 0;
    }
    throw std::invalid_argument("predict_baseline: unknown model kind");
}

}  // namespace mvdiag
