#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvdiag/dataset.hpp"

namespace mvdiag {

enum class PreprocessMode : std::uint8_t { standardize = 0, normalize = 1 };

const char* to_string(PreprocessMode m);
PreprocessMode preprocess_mode_from_string(const std::string& s);

/// Per-feature statistics for one view. For standardize mode center/scale
/// are mean and population standard deviation; for normalize mode they are
/// min and (max - min). `constant` flags features with zero spread, which
/// always map to 0.
struct ViewStats {
    std::vector<double> center;
    std::vector<double> scale;
    std::vector<std::uint8_t> constant;
};

struct PreprocessStats {
    PreprocessMode mode = PreprocessMode::standardize;
    std::vector<ViewStats> views;
};

/// Fit on training data only (N >= 2); the stats are reused verbatim on
/// any later data.
PreprocessStats fit_standardize(const MultiViewDataset& data);
PreprocessStats fit_normalize(const MultiViewDataset& data);
PreprocessStats fit_preprocess(PreprocessMode mode, const MultiViewDataset& data);

/// Transforms every view in place on a copy. Normalize mode clamps
/// transformed values to [0, 1].
MultiViewDataset apply_preprocess(const PreprocessStats& stats,
                                  const MultiViewDataset& data);

/// Transforms one raw per-view sample (layout must match the fitted data).
std::vector<std::vector<double>> apply_preprocess_sample(
    const PreprocessStats& stats, const std::vector<std::vector<double>>& sample);

}  // namespace mvdiag
