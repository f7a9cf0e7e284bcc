#pragma once

// shared helpers for unit and acceptance tests

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "mvdiag/nn.hpp"

namespace testsupport {

// loss used by the gradient checks: component-mean squared error of the
// net output against a fixed target
inline double net_loss(const mvdiag::DenseNet& net, const std::vector<double>& x,
                       const std::vector<double>& target) {
    return mvdiag::mse_loss(mvdiag::forward(net, x), target).loss;
}

struct FdReport {
    bool ok = true;
    double worst_abs = 0.0;
    double worst_rel = 0.0;
};

inline void fd_check_entry(double analytic, double numeric, double rel_tol,
                           double abs_tol, FdReport& report) {
    const double abs_err = std::abs(analytic - numeric);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    report.worst_abs = std::max(report.worst_abs, abs_err);
    if (scale > 0.0) report.worst_rel = std::max(report.worst_rel, abs_err / scale);
    if (abs_err > abs_tol && abs_err > rel_tol * scale) report.ok = false;
}

/// Central-difference check of every weight, bias, and input gradient of
/// `net` against the analytic backward pass, under the net_loss above.
inline FdReport check_net_gradients(mvdiag::DenseNet net, std::vector<double> x,
                                    const std::vector<double>& target,
                                    double step = 1e-5, double rel_tol = 1e-4,
                                    double abs_tol = 1e-6) {
    using namespace mvdiag;
    ForwardCache cache;
    const std::vector<double> out = forward(net, x, cache);
    const LossGrad lg = mse_loss(out, target);
    const GradientSet grads = backward(net, cache, lg.grad);

    FdReport report;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].data.size(); ++i) {
            double& w = net.weights[l].data[i];
            const double saved = w;
            w = saved + step;
            const double lp = net_loss(net, x, target);
            w = saved - step;
            const double lm = net_loss(net, x, target);
            w = saved;
            fd_check_entry(grads.weight_grads[l].data[i], (lp - lm) / (2.0 * step),
                           rel_tol, abs_tol, report);
        }
        for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
            double& b = net.biases[l][i];
            const double saved = b;
            b = saved + step;
            const double lp = net_loss(net, x, target);
            b = saved - step;
            const double lm = net_loss(net, x, target);
            b = saved;
            fd_check_entry(grads.bias_grads[l][i], (lp - lm) / (2.0 * step), rel_tol,
                           abs_tol, report);
        }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double lp = net_loss(net, x, target);
        x[i] = saved - step;
        const double lm = net_loss(net, x, target);
        x[i] = saved;
        fd_check_entry(grads.input_grad[i], (lp - lm) / (2.0 * step), rel_tol, abs_tol,
                       report);
    }
    return report;
}

/// True when any relu unit sits within `tol` of its kink for this input;
/// finite differences are not valid there.
inline bool has_relu_kink(const mvdiag::DenseNet& net, const std::vector<double>& x,
                          double tol = 1e-4) {
    mvdiag::ForwardCache cache;
    mvdiag::forward(net, x, cache);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        if (net.activations[l] != mvdiag::Activation::relu) continue;
        for (double z : cache.pre[l])
            if (std::abs(z) < tol) return true;
    }
    return false;
}

/// Random stack of 1-3 layers, dims <= 8, cycling through all activations.
inline mvdiag::DenseNet random_small_net(std::mt19937_64& rng) {
    using namespace mvdiag;
    std::uniform_int_distribution<std::size_t> n_layers(1, 3);
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    std::uniform_int_distribution<int> act(0, 2);
    const std::size_t layers = n_layers(rng);
    std::vector<std::size_t> dims(layers + 1);
    for (auto& d : dims) d = dim(rng);
    std::vector<Activation> acts(layers);
    for (auto& a : acts) a = static_cast<Activation>(act(rng));
    return make_dense_net(dims, acts, rng);
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng,
                                         double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

/// Fresh temp directory under the system temp path; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        dir_ = std::filesystem::temp_directory_path() /
               (tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        std::filesystem::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
};

}  // namespace testsupport
