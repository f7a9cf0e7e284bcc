#include "mvdiag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "mvdiag/errors.hpp"
#include "mvdiag/preprocess.hpp"

namespace mvdiag {

void ConfusionCounts::add(int truth, int predicted) {
    if (truth == 1)
        predicted == 1 ? ++tp : ++fn;
    else
        predicted == 0 ? ++tn : ++fp;
}

MetricValues metrics(const ConfusionCounts& counts) {
    if (counts.total() == 0)
        throw std::invalid_argument("metrics: no evaluated samples");
    MetricValues m;
    m.acc = static_cast<double>(counts.tp + counts.tn) /
            static_cast<double>(counts.total());
    if (counts.tp + counts.fn > 0)
        m.sen = static_cast<double>(counts.tp) /
                static_cast<double>(counts.tp + counts.fn);
    if (counts.tn + counts.fp > 0)
        m.spc = static_cast<double>(counts.tn) /
                static_cast<double>(counts.tn + counts.fp);
    return m;
}

Aggregate aggregate(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("aggregate: no values");
    Aggregate a;
    for (double v : values) a.mean += v;
    a.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        const double d = v - a.mean;
        var += d * d;
    }
    a.stddev = std::sqrt(var / static_cast<double>(values.size()));
    return a;
}

EvalReport make_report(std::string descriptor, std::vector<TrialRecord> trials) {
    if (trials.empty()) throw std::invalid_argument("make_report: no trials");
    EvalReport r;
    r.descriptor = std::move(descriptor);
    r.trials = std::move(trials);
    std::vector<double> accs, sens, spcs;
    for (const TrialRecord& t : r.trials) {
        accs.push_back(t.m.acc);
        if (t.m.sen) sens.push_back(*t.m.sen);
        if (t.m.spc) spcs.push_back(*t.m.spc);
    }
    r.acc = aggregate(accs);
    if (!sens.empty()) r.sen = aggregate(sens);
    if (!spcs.empty()) r.spc = aggregate(spcs);
    return r;
}

std::string MethodSpec::label() const {
    if (kind == Kind::pipeline) return "pipeline";
    std::string out = to_string(baseline);
    if (features == Features::latent) return out + "/latent";
    if (prep) return out + "/" + to_string(*prep);
    return out + "/original";
}

ConfusionCounts evaluate_pipeline(const TrainedPipeline& pipe,
                                  const MultiViewDataset& test_data) {
    if (!test_data.has_labels())
        throw std::invalid_argument("evaluate_pipeline: test data has no labels");
    ConfusionCounts counts;
    const std::vector<Prediction> preds = predict_all(pipe, test_data);
    for (std::size_t i = 0; i < preds.size(); ++i)
        counts.add(test_data.labels[i], preds[i].label);
    return counts;
}

ConfusionCounts evaluate_baseline(const BaselineModel& model, const Matrix& x,
                                  const std::vector<int>& y) {
    if (x.rows != y.size())
        throw std::invalid_argument("evaluate_baseline: rows/labels size mismatch");
    ConfusionCounts counts;
    for (std::size_t i = 0; i < x.rows; ++i)
        counts.add(y[i], predict_baseline(model, {x.row(i), x.cols}));
    return counts;
}

namespace {

Matrix concat_matrix(const MultiViewDataset& data) {
    return concat_views(data).views[0].values;
}

TrialRecord run_trial(const MultiViewDataset& data, const MethodSpec& method,
                      const PipelineConfig& pipe_cfg, std::uint64_t split_seed,
                      std::uint64_t trial, double train_fraction) {
    TrialRecord rec;
    rec.split_seed = split_seed;
    SplitResult parts = split(data, train_fraction, split_seed);

    if (method.kind == MethodSpec::Kind::pipeline) {
        PipelineConfig cfg = pipe_cfg;
        cfg.seed = pipe_cfg.seed + trial;
        const TrainedPipeline pipe = train_pipeline(parts.train, cfg);
        rec.counts = evaluate_pipeline(pipe, parts.test);
    } else if (method.features == MethodSpec::Features::original) {
        MultiViewDataset train = parts.train;
        MultiViewDataset test = parts.test;
        if (method.prep) {
            const PreprocessStats stats = fit_preprocess(*method.prep, train);
            train = apply_preprocess(stats, train);
            test = apply_preprocess(stats, test);
        }
        const Matrix xtr = concat_matrix(train);
        const Matrix xte = concat_matrix(test);
        const BaselineModel model =
            fit_baseline(method.baseline, xtr, train.labels, method.hyper, split_seed);
        rec.counts = evaluate_baseline(model, xte, test.labels);
    } else {
        PipelineConfig cfg = pipe_cfg;
        cfg.seed = pipe_cfg.seed + trial;
        const TrainedPipeline pipe = train_pipeline(parts.train, cfg);
        const Matrix htr = regressor_latents(pipe, parts.train);
        const Matrix hte = regressor_latents(pipe, parts.test);
        const BaselineModel model =
            fit_baseline(method.baseline, htr, parts.train.labels, method.hyper,
                         split_seed);
        rec.counts = evaluate_baseline(model, hte, parts.test.labels);
    }
    rec.m = metrics(rec.counts);
    return rec;
}

}  // namespace

EvalReport run_experiment(const MultiViewDataset& data, const MethodSpec& method,
                          const PipelineConfig& pipe_cfg, std::size_t n_trials,
                          std::uint64_t base_seed, double train_fraction) {
    if (n_trials < 1) throw std::invalid_argument("run_experiment: n_trials must be >= 1");
    std::vector<TrialRecord> trials;
    trials.reserve(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t) {
        try {
            trials.push_back(
                run_trial(data, method, pipe_cfg, base_seed + t, t, train_fraction));
        } catch (const DataError& e) {
            throw DataError("trial " + std::to_string(t) + ": " + e.what());
        } catch (const TrainError& e) {
            throw TrainError("trial " + std::to_string(t) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("trial " + std::to_string(t) + ": " + e.what());
        }
    }
    return make_report(method.label(), trials);
}

std::vector<std::vector<std::size_t>> make_stratified_folds(
    const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("folds: k must be >= 2");
    std::array<std::vector<std::size_t>, 2> per_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw std::invalid_argument("folds: labels must be 0 or 1");
        per_class[labels[i]].push_back(i);
    }
    if (per_class[0].size() < k || per_class[1].size() < k)
        throw std::invalid_argument(
            "folds: every fold needs both classes (class smaller than k)");

    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> folds(k);
    for (auto& cls : per_class) {
        std::shuffle(cls.begin(), cls.end(), rng);
        for (std::size_t i = 0; i < cls.size(); ++i) folds[i % k].push_back(cls[i]);
    }
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

LambdaSelection kfold_lambda_select(const MultiViewDataset& train_data,
                                    const std::vector<double>& lambda_grid,
                                    std::size_t k, const PipelineConfig& cfg) {
    if (lambda_grid.empty())
        throw std::invalid_argument("lambda selection: empty grid");
    LambdaSelection sel;
    if (lambda_grid.size() == 1) {
        sel.best_lambda = lambda_grid[0];
        return sel;
    }

    sel.folds = make_stratified_folds(train_data.labels, k, cfg.seed);
    std::vector<double> grid = lambda_grid;
    std::sort(grid.begin(), grid.end());

    double best_acc = -1.0;
    for (double lambda : grid) {
        LambdaSelection::Row row;
        row.lambda = lambda;
        for (std::size_t f = 0; f < sel.folds.size(); ++f) {
            std::vector<std::size_t> train_rows;
            for (std::size_t g = 0; g < sel.folds.size(); ++g)
                if (g != f)
                    train_rows.insert(train_rows.end(), sel.folds[g].begin(),
                                      sel.folds[g].end());
            std::sort(train_rows.begin(), train_rows.end());

            PipelineConfig fold_cfg = cfg;
            fold_cfg.lambda = lambda;
            fold_cfg.seed = cfg.seed + f;
            const TrainedPipeline pipe =
                train_pipeline(select_rows(train_data, train_rows), fold_cfg);
            const ConfusionCounts counts =
                evaluate_pipeline(pipe, select_rows(train_data, sel.folds[f]));
            row.fold_accuracies.push_back(metrics(counts).acc);
        }
        row.mean_accuracy = aggregate(row.fold_accuracies).mean;
        // ties resolve toward the larger lambda (grid walked ascending)
        if (row.mean_accuracy >= best_acc) {
            best_acc = row.mean_accuracy;
            sel.best_lambda = lambda;
        }
        sel.table.push_back(std::move(row));
    }
    return sel;
}

std::vector<FeatureSetReport> per_view_study(const MultiViewDataset& data,
                                             const std::vector<MethodSpec>& methods,
                                             const PipelineConfig& pipe_cfg,
                                             std::size_t n_trials,
                                             std::uint64_t base_seed) {
    if (data.num_views() == 0)
        throw std::invalid_argument("per_view_study: dataset has no views");

    std::vector<std::pair<std::string, std::vector<std::size_t>>> sets;
    for (std::size_t v = 0; v < data.num_views(); ++v)
        sets.emplace_back(data.views[v].schema.name,
                          std::vector<std::size_t>{v});

    std::vector<std::size_t> grouped, rest;
    for (std::size_t v = 0; v < data.num_views(); ++v) {
        const std::string& name = data.views[v].schema.name;
        (name == "gray" || name == "texture" ? grouped : rest).push_back(v);
    }
    if (!grouped.empty() && !rest.empty()) {
        sets.emplace_back("radiomic", grouped);
        sets.emplace_back("handcrafted", rest);
    }
    if (data.num_views() > 1) {
        std::vector<std::size_t> all(data.num_views());
        for (std::size_t v = 0; v < all.size(); ++v) all[v] = v;
        sets.emplace_back("all", all);
    }

    std::vector<FeatureSetReport> out;
    for (const auto& [name, indices] : sets) {
        FeatureSetReport fsr;
        fsr.feature_set = name;
        fsr.view_indices = indices;
        const MultiViewDataset sub = select_views(data, indices);
        for (const MethodSpec& method : methods) {
            EvalReport rep = run_experiment(sub, method, pipe_cfg, n_trials, base_seed);
            rep.descriptor = name + ":" + rep.descriptor;
            fsr.per_method.push_back(std::move(rep));
        }
        out.push_back(std::move(fsr));
    }
    return out;
}

std::vector<RatioResult> ratio_sweep(const MultiViewDataset& data,
                                     const PipelineConfig& cfg,
                                     const std::vector<double>& ratios,
                                     std::uint64_t seed) {
    if (ratios.empty()) throw std::invalid_argument("ratio_sweep: no ratios");
    for (double r : ratios)
        if (!(r > 0.0 && r < 1.0))
            throw std::invalid_argument("ratio_sweep: ratios must lie in (0,1)");

    // fixed 20% test partition; the remaining pool feeds every ratio
    const SplitResult parts = split(data, 0.8, seed);
    const MultiViewDataset& pool = parts.train;
    const MultiViewDataset& test = parts.test;

    std::array<std::size_t, 2> full_count = {0, 0};
    for (int y : data.labels) full_count[y] += 1;

    std::array<std::vector<std::size_t>, 2> order;
    for (std::size_t i = 0; i < pool.num_samples(); ++i)
        order[pool.labels[i]].push_back(i);
    std::mt19937_64 rng(seed + 1);
    std::shuffle(order[0].begin(), order[0].end(), rng);
    std::shuffle(order[1].begin(), order[1].end(), rng);

    std::vector<RatioResult> out;
    for (double ratio : ratios) {
        RatioResult res;
        res.ratio = ratio;
        res.test_ids = test.subject_ids;

        std::array<std::size_t, 2> want;
        bool empty_class = false;
        for (int c = 0; c < 2; ++c) {
            want[c] = static_cast<std::size_t>(
                std::llround(ratio * static_cast<double>(full_count[c])));
            want[c] = std::min(want[c], order[c].size());
            if (want[c] == 0) empty_class = true;
        }
        if (empty_class) {
            res.skipped = true;
            res.reason = "a class has no training samples at this ratio";
            out.push_back(std::move(res));
            continue;
        }

        std::vector<std::size_t> rows;
        for (int c = 0; c < 2; ++c)
            rows.insert(rows.end(), order[c].begin(), order[c].begin() + want[c]);
        std::sort(rows.begin(), rows.end());

        const MultiViewDataset train = select_rows(pool, rows);
        res.n_train = train.num_samples();
        res.train_ids = train.subject_ids;

        const TrainedPipeline pipe = train_pipeline(train, cfg);
        res.counts = evaluate_pipeline(pipe, test);
        res.m = metrics(res.counts);
        out.push_back(std::move(res));
    }
    return out;
}

// ---------------------------------------------------------------------------
// 2-D principal-axis projection
// ---------------------------------------------------------------------------

namespace {

// cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues on the
// diagonal of a and eigenvectors as columns of v
void jacobi_eigen(Matrix& a, Matrix& v) {
    const std::size_t d = a.rows;
    v = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-26) break;

        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < d; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
}

}  // namespace

Matrix projection_2d(const Matrix& points) {
    if (points.rows < 2 || points.cols < 2)
        throw std::invalid_argument("projection_2d: need at least 2 points and 2 dims");
    const std::size_t n = points.rows, d = points.cols;

    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += points(i, j);
    for (double& m : mean) m /= static_cast<double>(n);

    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double xj = points(i, j) - mean[j];
            for (std::size_t k = j; k < d; ++k)
                cov(j, k) += xj * (points(i, k) - mean[k]);
        }
    double trace = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
            cov(j, k) /= static_cast<double>(n);
            cov(k, j) = cov(j, k);
        }
        trace += cov(j, j);
    }
    if (trace <= 0.0)
        throw std::invalid_argument("projection_2d: zero-variance (rank-0) input");

    Matrix vecs;
    jacobi_eigen(cov, vecs);

    // top-2 eigenvalues, ties by lower index
    std::vector<std::size_t> idx(d);
    for (std::size_t j = 0; j < d; ++j) idx[j] = j;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return cov(a, a) > cov(b, b);
    });

    Matrix axes(2, d);
    for (int ax = 0; ax < 2; ++ax) {
        const std::size_t col = idx[ax];
        double best = 0.0;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < d; ++j) {
            axes(ax, j) = vecs(j, col);
            if (std::abs(axes(ax, j)) > best) {
                best = std::abs(axes(ax, j));
                best_j = j;
            }
        }
        if (axes(ax, best_j) < 0.0)
            for (std::size_t j = 0; j < d; ++j) axes(ax, j) = -axes(ax, j);
    }

    Matrix out(n, 2);
    for (std::size_t i = 0; i < n; ++i)
        for (int ax = 0; ax < 2; ++ax) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                dot += (points(i, j) - mean[j]) * axes(ax, j);
            out(i, ax) = dot;
        }
    return out;
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt(*v) : std::string();
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write to " + path.string());
    return out;
}

}  // namespace

void write_report_csv(const std::vector<EvalReport>& reports,
                      const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    out << "descriptor,trial,split_seed,tp,tn,fp,fn,acc,sen,spc\n";
    for (const EvalReport& r : reports) {
        for (std::size_t t = 0; t < r.trials.size(); ++t) {
            const TrialRecord& rec = r.trials[t];
            out << r.descriptor << "," << t << "," << rec.split_seed << ","
                << rec.counts.tp << "," << rec.counts.tn << "," << rec.counts.fp << ","
                << rec.counts.fn << "," << fmt(rec.m.acc) << "," << fmt_opt(rec.m.sen)
                << "," << fmt_opt(rec.m.spc) << "\n";
        }
        out << r.descriptor << ",mean,,,,,," << fmt(r.acc.mean) << ","
            << (r.sen ? fmt(r.sen->mean) : std::string()) << ","
            << (r.spc ? fmt(r.spc->mean) : std::string()) << "\n";
        out << r.descriptor << ",std,,,,,," << fmt(r.acc.stddev) << ","
            << (r.sen ? fmt(r.sen->stddev) : std::string()) << ","
            << (r.spc ? fmt(r.spc->stddev) : std::string()) << "\n";
    }
}

void write_sweep_csv(const std::vector<RatioResult>& results,
                     const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    out << "ratio,n_train,status,reason,tp,tn,fp,fn,acc,sen,spc\n";
    for (const RatioResult& r : results) {
        if (r.skipped) {
            out << fmt(r.ratio) << ",0,skipped," << r.reason << ",,,,,,,\n";
            continue;
        }
        out << fmt(r.ratio) << "," << r.n_train << ",ok,," << r.counts.tp << ","
            << r.counts.tn << "," << r.counts.fp << "," << r.counts.fn << ","
            << fmt(r.m.acc) << "," << fmt_opt(r.m.sen) << "," << fmt_opt(r.m.spc)
            << "\n";
    }
}

void write_projection_csv(const Matrix& coords, const std::vector<int>& labels,
                          const std::vector<std::string>& splits,
                          const std::filesystem::path& path) {
    if (coords.cols != 2 || coords.rows != labels.size() ||
        coords.rows != splits.size())
        throw std::invalid_argument("write_projection_csv: shape mismatch");
    std::ofstream out = open_out(path);
    out << "x,y,label,split\n";
    char buf[80];
    for (std::size_t i = 0; i < coords.rows; ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g", coords(i, 0), coords(i, 1));
        out << buf << "," << labels[i] << "," << splits[i] << "\n";
    }
}

}  // namespace mvdiag
