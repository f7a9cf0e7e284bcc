#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvdiag/matrix.hpp"
#include "mvdiag/nn.hpp"

namespace mvdiag {

enum class BaselineKind : std::uint8_t {
    svm_linear,
    logistic_regression,
    gaussian_nb,
    knn,
    neural_net,
};

const char* to_string(BaselineKind k);
BaselineKind baseline_kind_from_string(const std::string& s);
const std::vector<BaselineKind>& all_baseline_kinds();

struct BaselineHyperparams {
    double svm_l2 = 1e-3;
    std::size_t svm_epochs = 600;
    double svm_lr = 1e-2;
    std::size_t lr_epochs = 600;
    double lr_lr = 1e-2;
    double gnb_smoothing = 1e-9;  // fraction of the largest feature variance
    std::size_t knn_k = 5;
    std::size_t nn_hidden = 64;
    std::size_t nn_epochs = 400;
    double nn_lr = 1e-3;
};

/// One fitted comparison classifier; only the fields of its kind are used.
struct BaselineModel {
    BaselineKind kind = BaselineKind::knn;
    std::size_t feature_dim = 0;

    // svm_linear / logistic_regression
    std::vector<double> weights;
    double bias = 0.0;

    // gaussian_nb
    std::array<double, 2> log_prior = {0.0, 0.0};
    std::array<std::vector<double>, 2> feat_mean;
    std::array<std::vector<double>, 2> feat_var;

    // knn
    Matrix train_x;
    std::vector<int> train_y;
    std::size_t k = 5;

    // neural_net
    DenseNet net;
};

/// Fits the requested kind on an N x p matrix with binary labels. Both
/// classes must be present. Deterministic given seed.
BaselineModel fit_baseline(BaselineKind kind, const Matrix& x,
                           const std::vector<int>& y,
                           const BaselineHyperparams& hyper = {},
                           std::uint64_t seed = 0);

int predict_baseline(const BaselineModel& model, std::span<const double> x);

/// Unnormalized log posterior of one class (gaussian_nb models only);
/// exposed so it can be checked against the density formula directly.
double gnb_log_posterior(const BaselineModel& model, std::span<const double> x,
                         int cls);

/// Decision value w.x + b (svm_linear / logistic_regression models).
double linear_decision_value(const BaselineModel& model, std::span<const double> x);

}  // namespace mvdiag
