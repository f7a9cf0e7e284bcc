#include "mvdiag/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvdiag {

const char* to_string(PreprocessMode m) {
    return m == PreprocessMode::standardize ? "standardize" : "normalize";
}

PreprocessMode preprocess_mode_from_string(const std::string& s) {
    if (s == "standardize") return PreprocessMode::standardize;
    if (s == "normalize") return PreprocessMode::normalize;
    throw std::invalid_argument("unknown preprocessing mode: " + s);
}

namespace {

ViewStats fit_view(const Matrix& values, PreprocessMode mode) {
    ViewStats st;
    st.center.resize(values.cols);
    st.scale.resize(values.cols);
    st.constant.resize(values.cols);
    const double inv_n = 1.0 / static_cast<double>(values.rows);
    for (std::size_t c = 0; c < values.cols; ++c) {
        double lo = values(0, c), hi = values(0, c);
        for (std::size_t r = 1; r < values.rows; ++r) {
            lo = std::min(lo, values(r, c));
            hi = std::max(hi, values(r, c));
        }
        if (mode == PreprocessMode::standardize) {
            if (lo == hi) {
                // exactly constant; accumulation noise must not unflag it
                st.center[c] = lo;
                st.scale[c] = 0.0;
            } else {
                double mean = 0.0;
                for (std::size_t r = 0; r < values.rows; ++r) mean += values(r, c);
                mean *= inv_n;
                double var = 0.0;
                for (std::size_t r = 0; r < values.rows; ++r) {
                    const double d = values(r, c) - mean;
                    var += d * d;
                }
                var *= inv_n;
                st.center[c] = mean;
                st.scale[c] = std::sqrt(var);
            }
        } else {
            st.center[c] = lo;
            st.scale[c] = hi - lo;
        }
        st.constant[c] = st.scale[c] == 0.0 ? 1 : 0;
    }
    return st;
}

double transform_value(PreprocessMode mode, const ViewStats& st, std::size_t c,
                       double x) {
    if (st.constant[c]) return 0.0;
    const double t = (x - st.center[c]) / st.scale[c];
    if (mode == PreprocessMode::normalize) return std::clamp(t, 0.0, 1.0);
    return t;
}

}  // namespace

PreprocessStats fit_preprocess(PreprocessMode mode, const MultiViewDataset& data) {
    if (data.num_samples() < 2)
        throw std::invalid_argument("preprocess fit needs at least 2 samples");
    PreprocessStats stats;
    stats.mode = mode;
    stats.views.reserve(data.num_views());
    for (const ViewBlock& v : data.views) stats.views.push_back(fit_view(v.values, mode));
    return stats;
}

PreprocessStats fit_standardize(const MultiViewDataset& data) {
    return fit_preprocess(PreprocessMode::standardize, data);
}

PreprocessStats fit_normalize(const MultiViewDataset& data) {
    return fit_preprocess(PreprocessMode::normalize, data);
}

MultiViewDataset apply_preprocess(const PreprocessStats& stats,
                                  const MultiViewDataset& data) {
    if (stats.views.size() != data.num_views())
        throw std::invalid_argument("preprocess stats do not match dataset views");
    MultiViewDataset out = data;
    for (std::size_t v = 0; v < out.views.size(); ++v) {
        Matrix& m = out.views[v].values;
        const ViewStats& st = stats.views[v];
        if (st.center.size() != m.cols)
            throw std::invalid_argument("preprocess stats do not match view dim");
        for (std::size_t r = 0; r < m.rows; ++r)
            for (std::size_t c = 0; c < m.cols; ++c)
                m(r, c) = transform_value(stats.mode, st, c, m(r, c));
    }
    return out;
}

std::vector<std::vector<double>> apply_preprocess_sample(
    const PreprocessStats& stats, const std::vector<std::vector<double>>& sample) {
    if (stats.views.size() != sample.size())
        throw std::invalid_argument("preprocess stats do not match sample views");
    std::vector<std::vector<double>> out(sample.size());
    for (std::size_t v = 0; v < sample.size(); ++v) {
        const ViewStats& st = stats.views[v];
        if (st.center.size() != sample[v].size())
            throw std::invalid_argument("preprocess stats do not match sample dim");
        out[v].resize(sample[v].size());
        for (std::size_t c = 0; c < sample[v].size(); ++c)
            out[v][c] = transform_value(stats.mode, st, c, sample[v][c]);
    }
    return out;
}

}  // namespace mvdiag
