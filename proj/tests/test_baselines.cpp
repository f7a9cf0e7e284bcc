#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mvdiag/baselines.hpp"
#include "mvdiag/errors.hpp"
#include "test_support.hpp"

using namespace mvdiag;

namespace {

Matrix blobs(std::size_t n_per_class, std::size_t dim, double separation,
             double noise, std::uint64_t seed, std::vector<int>& labels) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise);
    Matrix x(2 * n_per_class, dim);
    labels.assign(2 * n_per_class, 0);
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        const int cls = i < n_per_class ? 0 : 1;
        labels[i] = cls;
        for (std::size_t j = 0; j < dim; ++j)
            x(i, j) = (j == 0 ? (cls == 1 ? 0.5 : -0.5) * separation : 0.0) + gauss(rng);
    }
    return x;
}

// exhaustive-distance majority vote with the same tie rules
int knn_oracle(const Matrix& train_x, const std::vector<int>& train_y, std::size_t k,
               std::span<const double> q) {
    std::vector<std::pair<double, std::size_t>> d(train_x.rows);
    for (std::size_t i = 0; i < train_x.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) {
            const double diff = train_x(i, j) - q[j];
            s += diff * diff;
        }
        d[i] = {s, i};
    }
    std::sort(d.begin(), d.end());
    std::size_t votes = 0;
    for (std::size_t i = 0; i < k; ++i) votes += train_y[d[i].second];
    return 2 * votes > k ? 1 : 0;
}

}  // namespace

TEST_CASE("gnb: closed-form means and symmetric tie") {
    std::vector<int> labels;
    Matrix x(20, 1);
    for (std::size_t i = 0; i < 20; ++i) {
        const int cls = i < 10 ? 0 : 1;
        x(i, 0) = cls == 0 ? -1.0 : 1.0;
        labels.push_back(cls);
    }
    const BaselineModel m = fit_baseline(BaselineKind::gaussian_nb, x, labels);
    CHECK(m.feat_mean[0][0] == doctest::Approx(-1.0));
    CHECK(m.feat_mean[1][0] == doctest::Approx(1.0));
    // equal priors, symmetric means, equal variances: x = 0 is a tie -> 0
    CHECK(predict_baseline(m, std::vector<double>{0.0}) == 0);
}

TEST_CASE("gnb: log posterior matches the density formula") {
    std::vector<int> labels;
    const Matrix x = blobs(30, 4, 3.0, 1.2, 7, labels);
    const BaselineModel m = fit_baseline(BaselineKind::gaussian_nb, x, labels);

    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        const auto q = testsupport::random_vector(4, rng, 2.0);
        for (int cls = 0; cls < 2; ++cls) {
            double expect = m.log_prior[cls];
            for (std::size_t j = 0; j < 4; ++j) {
                const double var = m.feat_var[cls][j];
                const double diff = q[j] - m.feat_mean[cls][j];
                expect += -0.5 * std::log(2.0 * M_PI * var) -
                          diff * diff / (2.0 * var);
            }
            CHECK(std::abs(gnb_log_posterior(m, q, cls) - expect) <= 1e-10);
        }
    }
}

TEST_CASE("logistic regression: separable 1-d data fits perfectly") {
    std::vector<int> labels;
    const Matrix x = blobs(25, 1, 6.0, 0.5, 9, labels);
    const BaselineModel m = fit_baseline(BaselineKind::logistic_regression, x, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.rows; ++i)
        if (predict_baseline(m, {x.row(i), x.cols}) == labels[i]) ++correct;
    CHECK(correct == x.rows);
}

TEST_CASE("logistic regression: duplicating every sample leaves the optimum") {
    std::vector<int> labels;
    const Matrix x = blobs(20, 3, 4.0, 1.0, 10, labels);
    Matrix doubled(2 * x.rows, x.cols);
    std::vector<int> doubled_labels;
    for (std::size_t rep = 0; rep < 2; ++rep)
        for (std::size_t i = 0; i < x.rows; ++i) {
            std::copy(x.row(i), x.row(i) + x.cols, doubled.row(rep * x.rows + i));
            doubled_labels.push_back(labels[i]);
        }
    const BaselineModel a = fit_baseline(BaselineKind::logistic_regression, x, labels);
    const BaselineModel b =
        fit_baseline(BaselineKind::logistic_regression, doubled, doubled_labels);
    for (std::size_t j = 0; j < a.weights.size(); ++j)
        CHECK(std::abs(a.weights[j] - b.weights[j]) <= 1e-6);
    CHECK(std::abs(a.bias - b.bias) <= 1e-6);
}

TEST_CASE("svm: separable data drives hinge loss to zero with unit margins") {
    std::vector<int> labels;
    const Matrix x = blobs(25, 2, 10.0, 0.1, 11, labels);
    const BaselineModel m = fit_baseline(BaselineKind::svm_linear, x, labels);

    double hinge = 0.0;
    double min_margin = 1e300;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double s = labels[i] == 1 ? 1.0 : -1.0;
        const double margin = s * linear_decision_value(m, {x.row(i), x.cols});
        hinge += std::max(0.0, 1.0 - margin) / static_cast<double>(x.rows);
        min_margin = std::min(min_margin, margin);
    }
    CHECK(hinge < 1e-3);
    CHECK(min_margin >= 1.0 - 1e-2);
}

TEST_CASE("knn: stores the training set verbatim and nearest point wins") {
    Matrix x(2, 1);
    x(0, 0) = 0.0;
    x(1, 0) = 10.0;
    const std::vector<int> labels = {0, 1};
    BaselineHyperparams hp;
    hp.knn_k = 1;
    const BaselineModel m = fit_baseline(BaselineKind::knn, x, labels, hp);
    CHECK(m.train_x.data == x.data);
    CHECK(m.train_y == labels);
    CHECK(predict_baseline(m, std::vector<double>{1.0}) == 0);
}

TEST_CASE("knn: agrees with the brute-force oracle for k in {1,3,5}") {
    std::vector<int> labels;
    const Matrix x = blobs(40, 3, 2.0, 1.5, 12, labels);
    std::mt19937_64 rng(13);
    for (std::size_t k : {1u, 3u, 5u}) {
        BaselineHyperparams hp;
        hp.knn_k = k;
        const BaselineModel m = fit_baseline(BaselineKind::knn, x, labels, hp);
        for (int rep = 0; rep < 200; ++rep) {
            const auto q = testsupport::random_vector(3, rng, 2.0);
            CHECK(predict_baseline(m, q) == knn_oracle(x, labels, k, q));
        }
    }
}

TEST_CASE("knn: tie rules") {
    // even k with equal votes -> 0
    Matrix x(4, 1);
    x(0, 0) = -1.0;
    x(1, 0) = -2.0;
    x(2, 0) = 1.0;
    x(3, 0) = 2.0;
    const std::vector<int> labels = {0, 0, 1, 1};
    BaselineHyperparams hp;
    hp.knn_k = 2;
    const BaselineModel m = fit_baseline(BaselineKind::knn, x, labels, hp);
    CHECK(predict_baseline(m, std::vector<double>{0.0}) == 0);

    // equidistant neighbours resolve by lower sample index
    Matrix x2(2, 1);
    x2(0, 0) = 1.0;
    x2(1, 0) = -1.0;
    const std::vector<int> labels2 = {1, 0};
    hp.knn_k = 1;
    const BaselineModel m2 = fit_baseline(BaselineKind::knn, x2, labels2, hp);
    CHECK(predict_baseline(m2, std::vector<double>{0.0}) == 1);
}

TEST_CASE("nn baseline: separable data reaches high accuracy") {
    std::vector<int> labels;
    const Matrix x = blobs(40, 2, 8.0, 0.8, 14, labels);
    BaselineHyperparams hp;
    hp.nn_hidden = 16;
    hp.nn_epochs = 300;
    const BaselineModel m = fit_baseline(BaselineKind::neural_net, x, labels, hp, 3);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.rows; ++i)
        if (predict_baseline(m, {x.row(i), x.cols}) == labels[i]) ++correct;
    CHECK(static_cast<double>(correct) / static_cast<double>(x.rows) >= 0.98);
}

TEST_CASE("baselines: contract violations") {
    std::vector<int> labels;
    const Matrix x = blobs(5, 2, 1.0, 1.0, 15, labels);
    const std::vector<int> one_class(x.rows, 0);
    for (BaselineKind kind : all_baseline_kinds()) {
        CAPTURE(to_string(kind));
        CHECK_THROWS_AS(fit_baseline(kind, x, one_class), std::invalid_argument);
        const BaselineModel m = fit_baseline(kind, x, labels, {}, 1);
        CHECK_THROWS_AS(predict_baseline(m, std::vector<double>{1.0, 2.0, 3.0}),
                        std::invalid_argument);
    }
    const std::vector<int> short_labels(3, 0);
    CHECK_THROWS_AS(fit_baseline(BaselineKind::knn, x, short_labels),
                    std::invalid_argument);
}

TEST_CASE("baselines: deterministic given seed") {
    std::vector<int> labels;
    const Matrix x = blobs(20, 3, 3.0, 1.0, 16, labels);
    for (BaselineKind kind : all_baseline_kinds()) {
        const BaselineModel a = fit_baseline(kind, x, labels, {}, 42);
        const BaselineModel b = fit_baseline(kind, x, labels, {}, 42);
        std::mt19937_64 rng(17);
        for (int rep = 0; rep < 20; ++rep) {
            const auto q = testsupport::random_vector(3, rng, 2.0);
            CHECK(predict_baseline(a, q) == predict_baseline(b, q));
        }
    }
}
