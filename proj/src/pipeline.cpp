#include "mvdiag/pipeline.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mvdiag/errors.hpp"

namespace mvdiag {

LatentClassifier make_latent_classifier(std::size_t latent_dim, std::size_t hidden,
                                        std::mt19937_64& rng) {
    if (latent_dim < 1 || hidden < 1)
        throw std::invalid_argument("latent classifier: dims must be >= 1");
    return {make_dense_net(
        {latent_dim, hidden, hidden, 1},
        {Activation::relu, Activation::relu, Activation::sigmoid}, rng)};
}

bool is_valid_classifier_layout(const DenseNet& net) {
    return net.num_layers() == 3 && net.output_dim() == 1 &&
           net.activations.back() == Activation::sigmoid;
}

LatentClassifier train_classifier(const Matrix& latents, const std::vector<int>& labels,
                                  const ClassifierConfig& cfg,
                                  std::vector<double>* trace) {
    if (cfg.epochs < 1)
        throw std::invalid_argument("train_classifier: epochs must be >= 1");
    if (latents.rows != labels.size())
        throw std::invalid_argument("train_classifier: latents/labels size mismatch");
    {
        bool has0 = false, has1 = false;
        for (int y : labels) (y == 1 ? has1 : has0) = true;
        if (!has0 || !has1)
            throw std::invalid_argument("train_classifier: both classes must be present");
    }

    std::mt19937_64 rng(cfg.seed);
    LatentClassifier clf = make_latent_classifier(latents.cols, cfg.hidden, rng);
    AdamState state = make_adam(clf.net.param_count(), {.step_size = cfg.step_size});
    GradientSet grads = make_zero_gradients(clf.net);

    const std::size_t n = latents.rows;
    const double inv_n = 1.0 / static_cast<double>(n);
    ForwardCache cache;
    std::vector<double> upstream(1);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        zero_gradients(grads);
        double loss_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<double> out =
                forward(clf.net, {latents.row(i), latents.cols}, cache);
            ScalarLossGrad lg = binary_cross_entropy(out[0], labels[i]);
            loss_sum += lg.loss;
            upstream[0] = lg.grad;
            backward(clf.net, cache, upstream, grads);
        }
        if (!std::isfinite(loss_sum))
            throw TrainError("train_classifier: loss diverged at epoch " +
                             std::to_string(epoch));
        scale_gradients(grads, inv_n);
        adam_step_net(state, clf.net, grads);
        if (trace) trace->push_back(loss_sum * inv_n);
    }
    return clf;
}

double classifier_probability(const LatentClassifier& clf, std::span<const double> h) {
    return forward(clf.net, h)[0];
}

namespace {

template <typename F>
auto run_stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    } catch (const TrainError& e) {
        throw TrainError(std::string(name) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(name) + ": " + e.what());
    }
}

}  // namespace

TrainedPipeline train_pipeline(const MultiViewDataset& train_data,
                               const PipelineConfig& cfg, PipelineTraces* traces) {
    TrainedPipeline pipe;
    pipe.config = cfg;
    for (const ViewBlock& v : train_data.views) pipe.schema.push_back(v.schema);

    pipe.stats = run_stage("preprocess",
                           [&] { return fit_preprocess(cfg.prep, train_data); });
    const MultiViewDataset prep = apply_preprocess(pipe.stats, train_data);

    Step1Config s1;
    s1.latent_dim = cfg.latent_dim;
    s1.lambda = cfg.lambda;
    s1.structured.margin = cfg.margin;
    s1.epochs = cfg.step1_epochs;
    s1.seed = cfg.seed;
    s1.lr_theta = cfg.step1_lr_theta;
    s1.lr_h = cfg.step1_lr_h;
    s1.recon_hidden = cfg.recon_hidden;
    s1.plain_sum = cfg.recon_plain_sum;
    s1.prototypes_per_step = cfg.prototypes_per_step;
    s1.batch_size = cfg.batch_size;
    Step1Result step1 = run_stage("step1", [&] { return train_step1(prep, s1); });
    pipe.bank = std::move(step1.bank);
    pipe.codes = std::move(step1.codes);
    pipe.prototypes = std::move(step1.prototypes);
    if (traces) traces->step1 = std::move(step1.trace);

    const MultiViewDataset concat = concat_views(prep);
    const Matrix& inputs = concat.views[0].values;

    RegressorConfig rc;
    rc.hidden = cfg.regressor_hidden;
    rc.epochs = cfg.regressor_epochs;
    rc.step_size = cfg.regressor_lr;
    rc.seed = cfg.seed + 1;
    pipe.regressor = run_stage("step2", [&] {
        return train_regressor(inputs, pipe.codes.values, rc,
                               traces ? &traces->regressor : nullptr);
    });

    Matrix clf_inputs;
    if (cfg.classifier_on_regressor_outputs) {
        clf_inputs = Matrix(inputs.rows, cfg.latent_dim);
        for (std::size_t i = 0; i < inputs.rows; ++i) {
            const std::vector<double> h =
                infer_latent(pipe.regressor, {inputs.row(i), inputs.cols});
            std::copy(h.begin(), h.end(), clf_inputs.row(i));
        }
    } else {
        clf_inputs = pipe.codes.values;
    }

    ClassifierConfig cc;
    cc.hidden = cfg.classifier_hidden;
    cc.epochs = cfg.classifier_epochs;
    cc.step_size = cfg.classifier_lr;
    cc.seed = cfg.seed + 2;
    pipe.classifier = run_stage("step3", [&] {
        return train_classifier(clf_inputs, train_data.labels, cc,
                                traces ? &traces->classifier : nullptr);
    });
    return pipe;
}

Prediction predict(const TrainedPipeline& pipe,
                   const std::vector<std::vector<double>>& raw_views) {
    if (raw_views.size() != pipe.schema.size())
        throw std::invalid_argument("predict: expected " +
                                    std::to_string(pipe.schema.size()) + " views, got " +
                                    std::to_string(raw_views.size()));
    for (std::size_t v = 0; v < raw_views.size(); ++v)
        if (raw_views[v].size() != pipe.schema[v].dim)
            throw std::invalid_argument("predict: view '" + pipe.schema[v].name +
                                        "' expects dim " +
                                        std::to_string(pipe.schema[v].dim));

    const auto prep = apply_preprocess_sample(pipe.stats, raw_views);
    std::vector<double> x;
    for (const auto& view : prep) x.insert(x.end(), view.begin(), view.end());

    Prediction p;
    p.latent = infer_latent(pipe.regressor, x);
    p.probability = classifier_probability(pipe.classifier, p.latent);
    p.label = p.probability >= 0.5 ? 1 : 0;
    return p;
}

std::vector<Prediction> predict_all(const TrainedPipeline& pipe,
                                    const MultiViewDataset& raw_data) {
    std::vector<Prediction> out;
    out.reserve(raw_data.num_samples());
    for (std::size_t n = 0; n < raw_data.num_samples(); ++n)
        out.push_back(predict(pipe, raw_data.sample_views(n)));
    return out;
}

Matrix regressor_latents(const TrainedPipeline& pipe,
                         const MultiViewDataset& raw_data) {
    const MultiViewDataset prep = apply_preprocess(pipe.stats, raw_data);
    const MultiViewDataset concat = concat_views(prep);
    const Matrix& inputs = concat.views[0].values;
    Matrix out(inputs.rows, pipe.config.latent_dim);
    for (std::size_t i = 0; i < inputs.rows; ++i) {
        const std::vector<double> h =
            infer_latent(pipe.regressor, {inputs.row(i), inputs.cols});
        std::copy(h.begin(), h.end(), out.row(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'V', 'D', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot write model file: " + path.string());
    }
    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw DataError("model file write failed");
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void f64s(const std::vector<double>& v) {
        bytes(v.data(), v.size() * sizeof(double));
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open model file: " + path.string());
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw DataError("model file truncated or corrupt");
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, 8);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }
    std::vector<double> f64s(std::size_t n) {
        if (n > (1u << 28)) throw DataError("model file truncated or corrupt");
        std::vector<double> v(n);
        bytes(v.data(), n * sizeof(double));
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > (1u << 20)) throw DataError("model file truncated or corrupt");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

private:
    std::ifstream in_;
};

void write_net(Writer& w, const DenseNet& net) {
    w.u32(static_cast<std::uint32_t>(net.layer_dims.size()));
    for (std::size_t d : net.layer_dims) w.u64(d);
    for (Activation a : net.activations) w.u8(static_cast<std::uint8_t>(a));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        w.f64s(net.weights[l].data);
        w.f64s(net.biases[l]);
    }
}

DenseNet read_net(Reader& r) {
    const std::uint32_t n_dims = r.u32();
    if (n_dims < 2 || n_dims > 64) throw DataError("model file truncated or corrupt");
    DenseNet net;
    net.layer_dims.resize(n_dims);
    for (auto& d : net.layer_dims) d = r.u64();
    net.activations.resize(n_dims - 1);
    for (auto& a : net.activations) {
        const std::uint8_t tag = r.u8();
        if (tag > 2) throw DataError("model file truncated or corrupt");
        a = static_cast<Activation>(tag);
    }
    for (std::size_t l = 0; l + 1 < n_dims; ++l) {
        Matrix w;
        w.rows = net.layer_dims[l + 1];
        w.cols = net.layer_dims[l];
        w.data = r.f64s(w.rows * w.cols);
        net.weights.push_back(std::move(w));
        net.biases.push_back(r.f64s(net.layer_dims[l + 1]));
    }
    return net;
}

}  // namespace

void save_pipeline(const TrainedPipeline& pipe, const std::filesystem::path& path) {
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);

    w.u32(static_cast<std::uint32_t>(pipe.schema.size()));
    for (const ViewSchema& v : pipe.schema) {
        w.str(v.name);
        w.u64(v.dim);
    }

    w.u8(static_cast<std::uint8_t>(pipe.stats.mode));
    w.u32(static_cast<std::uint32_t>(pipe.stats.views.size()));
    for (const ViewStats& st : pipe.stats.views) {
        w.u64(st.center.size());
        w.f64s(st.center);
        w.f64s(st.scale);
        w.bytes(st.constant.data(), st.constant.size());
    }

    w.u32(static_cast<std::uint32_t>(pipe.bank.nets.size()));
    for (const DenseNet& net : pipe.bank.nets) write_net(w, net);

    w.u64(pipe.codes.values.rows);
    w.u64(pipe.codes.values.cols);
    w.f64s(pipe.codes.values.data);

    for (int c = 0; c < 2; ++c) {
        w.u64(pipe.prototypes.count[c]);
        w.u64(pipe.prototypes.mean[c].size());
        w.f64s(pipe.prototypes.mean[c]);
    }

    write_net(w, pipe.regressor.net);
    write_net(w, pipe.classifier.net);

    const PipelineConfig& c = pipe.config;
    w.u8(static_cast<std::uint8_t>(c.prep));
    w.u64(c.latent_dim);
    w.f64(c.lambda);
    w.f64(c.margin);
    w.u64(c.step1_epochs);
    w.u64(c.regressor_epochs);
    w.u64(c.classifier_epochs);
    w.u64(c.recon_hidden);
    w.u64(c.regressor_hidden);
    w.u64(c.classifier_hidden);
    w.f64(c.step1_lr_theta);
    w.f64(c.step1_lr_h);
    w.f64(c.regressor_lr);
    w.f64(c.classifier_lr);
    w.u64(c.seed);
    w.u8(c.classifier_on_regressor_outputs ? 1 : 0);
    w.u8(c.recon_plain_sum ? 1 : 0);
    w.u8(c.prototypes_per_step ? 1 : 0);
    w.u64(c.batch_size);
}

TrainedPipeline load_pipeline(const std::filesystem::path& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a model file: " + path.string());
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("unsupported model file version " + std::to_string(version));

    TrainedPipeline pipe;
    pipe.format_version = version;

    const std::uint32_t n_views = r.u32();
    if (n_views == 0 || n_views > 4096) throw DataError("model file truncated or corrupt");
    for (std::uint32_t v = 0; v < n_views; ++v) {
        ViewSchema s;
        s.name = r.str();
        s.dim = r.u64();
        pipe.schema.push_back(std::move(s));
    }

    const std::uint8_t mode = r.u8();
    if (mode > 1) throw DataError("model file truncated or corrupt");
    pipe.stats.mode = static_cast<PreprocessMode>(mode);
    const std::uint32_t n_stats = r.u32();
    if (n_stats != n_views) throw DataError("model file truncated or corrupt");
    for (std::uint32_t v = 0; v < n_stats; ++v) {
        ViewStats st;
        const std::uint64_t dim = r.u64();
        if (dim != pipe.schema[v].dim) throw DataError("model file truncated or corrupt");
        st.center = r.f64s(dim);
        st.scale = r.f64s(dim);
        st.constant.resize(dim);
        r.bytes(st.constant.data(), dim);
        pipe.stats.views.push_back(std::move(st));
    }

    const std::uint32_t n_nets = r.u32();
    if (n_nets != n_views) throw DataError("model file truncated or corrupt");
    for (std::uint32_t v = 0; v < n_nets; ++v)
        pipe.bank.nets.push_back(read_net(r));

    pipe.codes.values.rows = r.u64();
    pipe.codes.values.cols = r.u64();
    if (pipe.codes.values.rows > (1u << 24) || pipe.codes.values.cols > (1u << 20))
        throw DataError("model file truncated or corrupt");
    pipe.codes.values.data = r.f64s(pipe.codes.values.rows * pipe.codes.values.cols);

    for (int c = 0; c < 2; ++c) {
        pipe.prototypes.count[c] = r.u64();
        const std::uint64_t dim = r.u64();
        pipe.prototypes.mean[c] = r.f64s(dim);
    }

    pipe.regressor.net = read_net(r);
    pipe.classifier.net = read_net(r);
    if (!is_valid_regressor_layout(pipe.regressor.net) ||
        !is_valid_classifier_layout(pipe.classifier.net))
        throw DataError("model file truncated or corrupt");

    PipelineConfig& c = pipe.config;
    const std::uint8_t prep = r.u8();
    if (prep > 1) throw DataError("model file truncated or corrupt");
    c.prep = static_cast<PreprocessMode>(prep);
    c.latent_dim = r.u64();
    c.lambda = r.f64();
    c.margin = r.f64();
    c.step1_epochs = r.u64();
    c.regressor_epochs = r.u64();
    c.classifier_epochs = r.u64();
    c.recon_hidden = r.u64();
    c.regressor_hidden = r.u64();
    c.classifier_hidden = r.u64();
    c.step1_lr_theta = r.f64();
    c.step1_lr_h = r.f64();
    c.regressor_lr = r.f64();
    c.classifier_lr = r.f64();
    c.seed = r.u64();
    c.classifier_on_regressor_outputs = r.u8() != 0;
    c.recon_plain_sum = r.u8() != 0;
    c.prototypes_per_step = r.u8() != 0;
    c.batch_size = r.u64();
    return pipe;
}

}  // namespace mvdiag
