// mvdiag: multi-view tabular diagnosis pipeline
//
// Subcommands: synth (seeded dataset generator), train (fit and save a
// pipeline), predict (score feature CSVs with a saved model), eval
// (repeated-trial studies and plot-data export).

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mvdiag/dataset.hpp"
#include "mvdiag/errors.hpp"
#include "mvdiag/eval.hpp"
#include "mvdiag/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mvdiag;

namespace {

struct PipelineFlags {
    std::size_t d = 32;
    double lambda = 100.0;
    double margin = 1.0;
    std::string prep = "standardize";
    std::size_t epochs_step1 = 300;
    std::size_t epochs_regressor = 400;
    std::size_t epochs_classifier = 300;
    std::uint64_t seed = 0;
    bool classifier_on_codes = false;
    bool plain_sum_recon = false;
    std::size_t batch_size = 0;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
    cmd->add_option("--d", f.d, "Latent dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda", f.lambda, "Balance factor for the structured loss")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--margin", f.margin, "Class margin in the structured loss")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--prep", f.prep, "Preprocessing mode")
        ->check(CLI::IsMember({"standardize", "normalize"}));
    cmd->add_option("--epochs-step1", f.epochs_step1, "Representation-learning epochs")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--epochs-regressor", f.epochs_regressor, "Regressor epochs")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--epochs-classifier", f.epochs_classifier, "Classifier epochs")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "Master seed for all training stages");
    cmd->add_flag("--classifier-on-codes", f.classifier_on_codes,
                  "Train the classifier on step-1 codes instead of regressor outputs");
    cmd->add_flag("--plain-sum-recon", f.plain_sum_recon,
                  "Plain squared norms in the reconstruction loss (no component mean)");
    cmd->add_option("--batch-size", f.batch_size,
                    "Mini-batch size (0 = full batch)");
}

PipelineConfig to_config(const PipelineFlags& f) {
    PipelineConfig cfg;
    cfg.prep = preprocess_mode_from_string(f.prep);
    cfg.latent_dim = f.d;
    cfg.lambda = f.lambda;
    cfg.margin = f.margin;
    cfg.step1_epochs = f.epochs_step1;
    cfg.regressor_epochs = f.epochs_regressor;
    cfg.classifier_epochs = f.epochs_classifier;
    cfg.seed = f.seed;
    cfg.classifier_on_regressor_outputs = !f.classifier_on_codes;
    cfg.recon_plain_sum = f.plain_sum_recon;
    cfg.batch_size = f.batch_size;
    return cfg;
}

std::vector<double> parse_ratios(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        const auto pos = text.find(':');
        const double lo = std::stod(text.substr(0, pos)) / 100.0;
        const double hi = std::stod(text.substr(pos + 1)) / 100.0;
        if (!(lo > 0.0 && hi < 1.0 && lo <= hi))
            throw std::invalid_argument("--ratios range must satisfy 0 < lo <= hi < 100");
        for (double pct : {2.0, 5.0, 10.0, 20.0, 40.0, 60.0, 80.0}) {
            const double r = pct / 100.0;
            if (r >= lo - 1e-12 && r <= hi + 1e-12) out.push_back(r);
        }
        if (out.empty()) out = {lo, hi};
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = std::stod(item);
        if (v >= 1.0) v /= 100.0;  // "20" means 20 percent
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("--ratios is empty");
    return out;
}

std::string fmt_pct(const Aggregate& a) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f+-%.2f", 100.0 * a.mean, 100.0 * a.stddev);
    return buf;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out_dir;
    std::size_t n = 100;
    std::size_t views = 0;
    std::string preset;
    std::string dims;
    double separation = 6.0;
    std::string noise = "1.0";
    std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
    SynthConfig cfg;
    cfg.n_per_class = a.n;
    cfg.class_separation = a.separation;
    cfg.seed = a.seed;

    if (!a.preset.empty()) {
        cfg.schema = preset_schema(a.preset);
        if (a.views != 0 && a.views != cfg.schema.size())
            throw std::invalid_argument("--views contradicts the preset view count");
    } else {
        const std::size_t n_views = a.views == 0 ? 2 : a.views;
        std::vector<std::size_t> dims(n_views, 8);
        if (!a.dims.empty()) {
            dims.clear();
            std::stringstream ss(a.dims);
            std::string item;
            while (std::getline(ss, item, ',')) dims.push_back(std::stoul(item));
            if (dims.size() != n_views)
                throw std::invalid_argument("--dims must list one dim per view");
        }
        for (std::size_t v = 0; v < n_views; ++v)
            cfg.schema.push_back({"v" + std::to_string(v + 1), dims[v]});
    }

    {
        std::vector<double> noise;
        std::stringstream ss(a.noise);
        std::string item;
        while (std::getline(ss, item, ',')) noise.push_back(std::stod(item));
        if (noise.size() == 1) noise.assign(cfg.schema.size(), noise[0]);
        if (noise.size() != cfg.schema.size())
            throw std::invalid_argument("--noise must give one value or one per view");
        cfg.noise_per_view = std::move(noise);
    }

    const MultiViewDataset data = synth_generate(cfg);
    const fs::path manifest = save_dataset(data, a.out_dir);
    std::cout << "wrote " << data.num_samples() << " samples, "
              << data.num_views() << " views to " << manifest.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string manifest;
    std::string model = "model.bin";
    std::string lambda_grid;
    std::size_t cv = 5;
    std::string trace_dir;
    PipelineFlags flags;
};

int run_train(const TrainArgs& a) {
    const MultiViewDataset data = load_dataset(a.manifest);
    PipelineConfig cfg = to_config(a.flags);

    if (!a.lambda_grid.empty()) {
        std::vector<double> grid;
        std::stringstream ss(a.lambda_grid);
        std::string item;
        while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
        const LambdaSelection sel = kfold_lambda_select(data, grid, a.cv, cfg);
        if (sel.table.empty()) {
            std::cout << "lambda " << sel.best_lambda << " (single candidate)\n";
        } else {
            std::cout << "lambda  cv-accuracy\n";
            for (const auto& row : sel.table)
                std::printf("%-7g %.4f\n", row.lambda, row.mean_accuracy);
            std::cout << "selected lambda " << sel.best_lambda << "\n";
        }
        cfg.lambda = sel.best_lambda;
    }

    PipelineTraces traces;
    const TrainedPipeline pipe = train_pipeline(data, cfg, &traces);
    save_pipeline(pipe, a.model);

    const fs::path trace_dir =
        a.trace_dir.empty() ? fs::path(a.model).parent_path() : fs::path(a.trace_dir);
    if (!trace_dir.empty()) fs::create_directories(trace_dir);
    {
        std::ofstream out(trace_dir / "step1_trace.csv");
        out << "epoch,reconstruction,structured,total\n";
        for (std::size_t e = 0; e < traces.step1.size(); ++e)
            out << e << "," << traces.step1[e].reconstruction << ","
                << traces.step1[e].structured << "," << traces.step1[e].total << "\n";
    }
    {
        std::ofstream out(trace_dir / "regressor_trace.csv");
        out << "epoch,mse\n";
        for (std::size_t e = 0; e < traces.regressor.size(); ++e)
            out << e << "," << traces.regressor[e] << "\n";
    }
    {
        std::ofstream out(trace_dir / "classifier_trace.csv");
        out << "epoch,cross_entropy\n";
        for (std::size_t e = 0; e < traces.classifier.size(); ++e)
            out << e << "," << traces.classifier[e] << "\n";
    }

    std::cout << "model written to " << a.model << "\n";
    std::cout << "final losses: reconstruction " << traces.step1.back().reconstruction
              << ", regressor " << traces.regressor.back() << ", classifier "
              << traces.classifier.back() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string model;
    std::string manifest;
    std::string out = "predictions.csv";
};

int run_predict(const PredictArgs& a) {
    const TrainedPipeline pipe = load_pipeline(a.model);
    const MultiViewDataset data = load_features(a.manifest);

    if (data.num_views() != pipe.schema.size())
        throw DataError("model expects " + std::to_string(pipe.schema.size()) +
                        " views, manifest has " + std::to_string(data.num_views()));
    for (std::size_t v = 0; v < pipe.schema.size(); ++v)
        if (data.views[v].schema.name != pipe.schema[v].name ||
            data.views[v].schema.dim != pipe.schema[v].dim)
            throw DataError("view '" + data.views[v].schema.name +
                            "' does not match the model schema (expected '" +
                            pipe.schema[v].name + "' dim " +
                            std::to_string(pipe.schema[v].dim) + ")");

    const std::vector<Prediction> preds = predict_all(pipe, data);
    std::ofstream out(a.out);
    if (!out) throw DataError("cannot write to " + a.out);
    out << "subject_id,label,probability\n";
    char buf[40];
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", preds[i].probability);
        out << data.subject_ids[i] << "," << preds[i].label << "," << buf << "\n";
    }
    std::cout << "wrote " << preds.size() << " predictions to " << a.out << "\n";

    if (data.has_labels()) {
        ConfusionCounts counts;
        for (std::size_t i = 0; i < preds.size(); ++i)
            counts.add(data.labels[i], preds[i].label);
        const MetricValues m = metrics(counts);
        std::printf("accuracy %.4f", m.acc);
        if (m.sen) std::printf(", sensitivity %.4f", *m.sen);
        if (m.spc) std::printf(", specificity %.4f", *m.spc);
        std::printf("\n");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string manifest;
    std::string study;
    std::string out_dir = ".";
    std::size_t trials = 10;
    std::uint64_t base_seed = 1000;
    std::string ratios = "2:80";
    PipelineFlags flags;
};

MethodSpec baseline_spec(BaselineKind kind,
                         std::optional<PreprocessMode> prep,
                         MethodSpec::Features features = MethodSpec::Features::original) {
    MethodSpec spec;
    spec.kind = MethodSpec::Kind::baseline;
    spec.baseline = kind;
    spec.prep = prep;
    spec.features = features;
    return spec;
}

int run_eval(const EvalArgs& a) {
    const MultiViewDataset data = load_dataset(a.manifest);
    const PipelineConfig cfg = to_config(a.flags);
    fs::create_directories(a.out_dir);
    const fs::path out_dir(a.out_dir);

    if (a.study == "experiment") {
        MethodSpec method;  // the pipeline itself
        const EvalReport rep =
            run_experiment(data, method, cfg, a.trials, a.base_seed);
        write_report_csv({rep}, out_dir / "experiment.csv");
        std::cout << rep.descriptor << ": acc " << fmt_pct(rep.acc) << "\n";
    } else if (a.study == "preprocess") {
        std::vector<EvalReport> reports;
        for (BaselineKind kind : all_baseline_kinds()) {
            for (const auto& prep :
                 {std::optional<PreprocessMode>{},
                  std::optional<PreprocessMode>{PreprocessMode::normalize},
                  std::optional<PreprocessMode>{PreprocessMode::standardize}}) {
                const EvalReport rep = run_experiment(
                    data, baseline_spec(kind, prep), cfg, a.trials, a.base_seed);
                std::cout << rep.descriptor << ": acc " << fmt_pct(rep.acc) << "\n";
                reports.push_back(rep);
            }
        }
        write_report_csv(reports, out_dir / "preprocess.csv");
    } else if (a.study == "views") {
        std::vector<MethodSpec> methods;
        for (BaselineKind kind : all_baseline_kinds())
            methods.push_back(baseline_spec(kind, PreprocessMode::standardize));
        const auto study = per_view_study(data, methods, cfg, a.trials, a.base_seed);
        std::vector<EvalReport> reports;
        for (const auto& fs_rep : study)
            for (const auto& rep : fs_rep.per_method) {
                std::cout << rep.descriptor << ": acc " << fmt_pct(rep.acc) << "\n";
                reports.push_back(rep);
            }
        write_report_csv(reports, out_dir / "views.csv");
    } else if (a.study == "latent") {
        std::vector<EvalReport> reports;
        MethodSpec pipeline_method;
        reports.push_back(
            run_experiment(data, pipeline_method, cfg, a.trials, a.base_seed));
        std::cout << reports.back().descriptor << ": acc "
                  << fmt_pct(reports.back().acc) << "\n";
        for (BaselineKind kind : all_baseline_kinds()) {
            for (auto features :
                 {MethodSpec::Features::original, MethodSpec::Features::latent}) {
                const EvalReport rep = run_experiment(
                    data,
                    baseline_spec(kind, PreprocessMode::standardize, features), cfg,
                    a.trials, a.base_seed);
                std::cout << rep.descriptor << ": acc " << fmt_pct(rep.acc) << "\n";
                reports.push_back(rep);
            }
        }
        write_report_csv(reports, out_dir / "latent.csv");
    } else if (a.study == "ratio") {
        const std::vector<double> ratios = parse_ratios(a.ratios);
        const auto results = ratio_sweep(data, cfg, ratios, a.base_seed);
        write_sweep_csv(results, out_dir / "ratio.csv");
        for (const auto& r : results) {
            if (r.skipped)
                std::printf("ratio %.2f: skipped (%s)\n", r.ratio, r.reason.c_str());
            else
                std::printf("ratio %.2f: acc %.4f (n_train %zu)\n", r.ratio, r.m.acc,
                            r.n_train);
        }
    } else if (a.study == "projection") {
        const SplitResult parts = split(data, 0.7, a.base_seed);
        const TrainedPipeline pipe = train_pipeline(parts.train, cfg);

        std::vector<int> labels = parts.train.labels;
        labels.insert(labels.end(), parts.test.labels.begin(), parts.test.labels.end());
        std::vector<std::string> splits(parts.train.num_samples(), "train");
        splits.insert(splits.end(), parts.test.num_samples(), "test");

        // original concatenated features, preprocessed with the training stats
        const Matrix orig_train =
            concat_views(apply_preprocess(pipe.stats, parts.train)).views[0].values;
        const Matrix orig_test =
            concat_views(apply_preprocess(pipe.stats, parts.test)).views[0].values;
        Matrix originals(orig_train.rows + orig_test.rows, orig_train.cols);
        std::copy(orig_train.data.begin(), orig_train.data.end(),
                  originals.data.begin());
        std::copy(orig_test.data.begin(), orig_test.data.end(),
                  originals.data.begin() + static_cast<long>(orig_train.data.size()));
        write_projection_csv(projection_2d(originals), labels, splits,
                             out_dir / "projection_original.csv");

        const Matrix lat_train = regressor_latents(pipe, parts.train);
        const Matrix lat_test = regressor_latents(pipe, parts.test);
        Matrix latents(lat_train.rows + lat_test.rows, lat_train.cols);
        std::copy(lat_train.data.begin(), lat_train.data.end(), latents.data.begin());
        std::copy(lat_test.data.begin(), lat_test.data.end(),
                  latents.data.begin() + static_cast<long>(lat_train.data.size()));
        write_projection_csv(projection_2d(latents), labels, splits,
                             out_dir / "projection_latent.csv");
        std::cout << "wrote projection_original.csv and projection_latent.csv to "
                  << a.out_dir << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-view tabular diagnosis pipeline"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
    synth->add_option("--n", synth_args.n, "Samples per class")
        ->required()
        ->check(CLI::PositiveNumber);
    synth->add_option("--views", synth_args.views, "Number of views");
    synth->add_option("--preset", synth_args.preset, "Schema preset")
        ->check(CLI::IsMember({"tableII"}));
    synth->add_option("--dims", synth_args.dims, "Comma-separated view dims");
    synth->add_option("--separation", synth_args.separation, "Class separation");
    synth->add_option("--noise", synth_args.noise,
                      "Noise scale, single value or one per view");
    synth->add_option("--seed", synth_args.seed, "Generator seed");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train a pipeline and save it");
    train->add_option("--manifest", train_args.manifest, "Dataset manifest")
        ->required();
    train->add_option("--model", train_args.model, "Output model path");
    train->add_option("--lambda-grid", train_args.lambda_grid,
                      "Comma-separated grid; cross-validates before training");
    train->add_option("--cv", train_args.cv, "Cross-validation folds")
        ->check(CLI::Range(std::size_t{2}, std::size_t{100}));
    train->add_option("--trace-dir", train_args.trace_dir,
                      "Directory for loss-trace CSVs");
    add_pipeline_flags(train, train_args.flags);

    PredictArgs predict_args;
    CLI::App* predict = app.add_subcommand("predict", "Score features with a model");
    predict->add_option("--model", predict_args.model, "Model file")->required();
    predict->add_option("--manifest", predict_args.manifest,
                        "Feature manifest (labels optional)")
        ->required();
    predict->add_option("--out", predict_args.out, "Predictions CSV path");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "Run an evaluation study");
    eval->add_option("--manifest", eval_args.manifest, "Dataset manifest")->required();
    eval->add_option("--study", eval_args.study, "Study to run")
        ->required()
        ->check(CLI::IsMember(
            {"experiment", "preprocess", "views", "latent", "ratio", "projection"}));
    eval->add_option("--out", eval_args.out_dir, "Output directory");
    eval->add_option("--trials", eval_args.trials, "Repeated trials")
        ->check(CLI::PositiveNumber);
    eval->add_option("--base-seed", eval_args.base_seed,
                     "First split seed; trial t uses base-seed + t");
    eval->add_option("--ratios", eval_args.ratios,
                     "Percent range lo:hi or comma list (ratio study)");
    add_pipeline_flags(eval, eval_args.flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*synth) return run_synth(synth_args);
        if (*train) return run_train(train_args);
        if (*predict) return run_predict(predict_args);
        if (*eval) return run_eval(eval_args);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const TrainError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
