#include "mvdiag/latent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mvdiag/errors.hpp"

namespace mvdiag {

ReconstructionBank make_reconstruction_bank(const std::vector<ViewSchema>& schema,
                                            std::size_t latent_dim,
                                            std::size_t hidden, std::mt19937_64& rng) {
    if (latent_dim < 1)
        throw std::invalid_argument("reconstruction bank: latent dim must be >= 1");
    if (hidden == 0) hidden = std::max<std::size_t>(2 * latent_dim, 16);
    ReconstructionBank bank;
    bank.nets.reserve(schema.size());
    for (const ViewSchema& v : schema)
        bank.nets.push_back(make_dense_net({latent_dim, hidden, v.dim},
                                           {Activation::relu, Activation::linear}, rng));
    return bank;
}

ClassPrototypes compute_prototypes(const Matrix& latents,
                                   const std::vector<int>& labels) {
    if (latents.rows != labels.size())
        throw std::invalid_argument("compute_prototypes: latents/labels size mismatch");
    ClassPrototypes protos;
    protos.mean[0].assign(latents.cols, 0.0);
    protos.mean[1].assign(latents.cols, 0.0);
    for (std::size_t n = 0; n < latents.rows; ++n) {
        const int y = labels[n];
        if (y != 0 && y != 1)
            throw std::invalid_argument("compute_prototypes: labels must be 0 or 1");
        const double* r = latents.row(n);
        std::vector<double>& m = protos.mean[y];
        for (std::size_t c = 0; c < latents.cols; ++c) m[c] += r[c];
        protos.count[y] += 1;
    }
    for (int y = 0; y < 2; ++y) {
        if (protos.count[y] == 0) {
            protos.mean[y].clear();
            continue;
        }
        const double inv = 1.0 / static_cast<double>(protos.count[y]);
        for (double& x : protos.mean[y]) x *= inv;
    }
    return protos;
}

double reconstruction_loss(const ReconstructionBank& bank, std::span<const double> h,
                           const std::vector<std::vector<double>>& sample_views,
                           std::vector<GradientSet>* bank_grads,
                           std::vector<double>* h_grad, bool plain_sum) {
    if (sample_views.size() != bank.nets.size())
        throw std::invalid_argument("reconstruction_loss: view count mismatch");
    if (bank_grads && bank_grads->size() != bank.nets.size())
        throw std::invalid_argument("reconstruction_loss: gradient set count mismatch");
    if (h_grad) h_grad->assign(h.size(), 0.0);

    double total = 0.0;
    ForwardCache cache;
    std::vector<double> upstream;
    for (std::size_t v = 0; v < bank.nets.size(); ++v) {
        const DenseNet& net = bank.nets[v];
        const std::vector<double>& x = sample_views[v];
        if (x.size() != net.output_dim())
            throw std::invalid_argument("reconstruction_loss: view dim mismatch");
        const std::vector<double> pred = forward(net, h, cache);
        const double inv = plain_sum ? 1.0 : 1.0 / static_cast<double>(x.size());
        upstream.resize(x.size());
        double loss_v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double diff = pred[i] - x[i];
            loss_v += diff * diff * inv;
            upstream[i] = 2.0 * diff * inv;
        }
        total += loss_v;
        if (bank_grads) {
            GradientSet& g = (*bank_grads)[v];
            backward(net, cache, upstream, g);
            if (h_grad)
                for (std::size_t i = 0; i < h.size(); ++i)
                    (*h_grad)[i] += g.input_grad[i];
        } else if (h_grad) {
            backward_input(net, cache, upstream, *h_grad);
        }
    }
    return total;
}

double expected_similarity(std::span<const double> h, const ClassPrototypes& protos,
                           int y) {
    if (y != 0 && y != 1)
        throw std::invalid_argument("expected_similarity: class must be 0 or 1");
    if (protos.count[y] == 0)
        throw std::invalid_argument("expected_similarity: class has no members");
    const std::vector<double>& p = protos.mean[y];
    if (p.size() != h.size())
        throw std::invalid_argument("expected_similarity: dimension mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) dot += p[i] * h[i];
    return dot;
}

StructuredLossResult structured_loss(std::span<const double> h, int y,
                                     const ClassPrototypes& protos,
                                     const StructuredLossConfig& cfg) {
    if (!(cfg.margin > 0.0))
        throw std::invalid_argument("structured_loss: margin must be > 0");
    const int other = 1 - y;
    const double own_sim = expected_similarity(h, protos, y);
    const double other_sim = expected_similarity(h, protos, other);

    StructuredLossResult out;
    out.h_grad.assign(h.size(), 0.0);
    const double arg = cfg.margin + other_sim - own_sim;
    if (arg > 0.0) {
        out.loss = arg;
        for (std::size_t i = 0; i < h.size(); ++i)
            out.h_grad[i] = protos.mean[other][i] - protos.mean[y][i];
    }
    return out;
}

int assign_class(std::span<const double> h, const ClassPrototypes& protos) {
    const double sim0 = expected_similarity(h, protos, 0);
    const double sim1 = expected_similarity(h, protos, 1);
    return sim1 > sim0 ? 1 : 0;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> make_batches(std::size_t n,
                                                              std::size_t batch_size) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (batch_size == 0 || batch_size >= n) {
        out.emplace_back(0, n);
        return out;
    }
    for (std::size_t start = 0; start < n; start += batch_size)
        out.emplace_back(start, std::min(start + batch_size, n));
    return out;
}

}  // namespace

Step1Result train_step1(const MultiViewDataset& train_data, const Step1Config& cfg) {
    const std::size_t n = train_data.num_samples();
    if (!train_data.has_labels())
        throw std::invalid_argument("train_step1: training data has no labels");
    if (cfg.latent_dim < 1) throw std::invalid_argument("train_step1: latent dim must be >= 1");
    if (cfg.epochs < 1) throw std::invalid_argument("train_step1: epochs must be >= 1");
    if (cfg.lambda < 0.0) throw std::invalid_argument("train_step1: lambda must be >= 0");
    {
        bool has0 = false, has1 = false;
        for (int y : train_data.labels) (y == 1 ? has1 : has0) = true;
        if (!has0 || !has1)
            throw std::invalid_argument("train_step1: both classes must be present");
    }

    std::vector<ViewSchema> schema;
    for (const ViewBlock& v : train_data.views) schema.push_back(v.schema);

    std::mt19937_64 rng(cfg.seed);
    Step1Result result;
    result.bank =
        make_reconstruction_bank(schema, cfg.latent_dim, cfg.recon_hidden, rng);

    Matrix& latents = result.codes.values;
    latents = Matrix(n, cfg.latent_dim);
    std::normal_distribution<double> init(0.0, 0.1);
    for (double& x : latents.data) x = init(rng);

    // per-sample feature rows, extracted once
    std::vector<std::vector<std::vector<double>>> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = train_data.sample_views(i);

    std::vector<AdamState> net_states;
    for (const DenseNet& net : result.bank.nets)
        net_states.push_back(make_adam(net.param_count(), {.step_size = cfg.lr_theta}));

    // one optimizer block per latent batch; with full batch this is all of H
    const auto batches = make_batches(n, cfg.batch_size);
    std::vector<AdamState> latent_states;
    for (const auto& [start, end] : batches)
        latent_states.push_back(
            make_adam((end - start) * cfg.latent_dim, {.step_size = cfg.lr_h}));

    std::vector<GradientSet> bank_grads;
    for (const DenseNet& net : result.bank.nets)
        bank_grads.push_back(make_zero_gradients(net));

    std::vector<double> latent_grad;
    std::vector<double> h_grad;

    result.trace.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        ClassPrototypes protos = compute_prototypes(latents, train_data.labels);

        // decoder pass, latents frozen
        for (const auto& [start, end] : batches) {
            for (GradientSet& g : bank_grads) zero_gradients(g);
            for (std::size_t i = start; i < end; ++i)
                reconstruction_loss(result.bank, result.codes.row(i), samples[i],
                                    &bank_grads, nullptr, cfg.plain_sum);
            const double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t v = 0; v < result.bank.nets.size(); ++v) {
                scale_gradients(bank_grads[v], inv);
                adam_step_net(net_states[v], result.bank.nets[v], bank_grads[v]);
            }
        }

        // latent pass, decoders frozen
        double recon_sum = 0.0;
        double structured_sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto [start, end] = batches[b];
            if (cfg.prototypes_per_step)
                protos = compute_prototypes(latents, train_data.labels);
            const double inv = 1.0 / static_cast<double>(end - start);
            latent_grad.assign((end - start) * cfg.latent_dim, 0.0);
            for (std::size_t i = start; i < end; ++i) {
                recon_sum += reconstruction_loss(result.bank, result.codes.row(i),
                                                 samples[i], nullptr, &h_grad,
                                                 cfg.plain_sum);
                StructuredLossResult sl =
                    structured_loss(result.codes.row(i), train_data.labels[i], protos,
                                    cfg.structured);
                structured_sum += sl.loss;
                double* dst = latent_grad.data() + (i - start) * cfg.latent_dim;
                for (std::size_t c = 0; c < cfg.latent_dim; ++c)
                    dst[c] = inv * (h_grad[c] + cfg.lambda * sl.h_grad[c]);
            }
            std::span<double> block(latents.data.data() + start * cfg.latent_dim,
                                    (end - start) * cfg.latent_dim);
            adam_step(latent_states[b], block, latent_grad);
        }

        Step1Trace t;
        const double inv_n = 1.0 / static_cast<double>(n);
        t.reconstruction = recon_sum * inv_n;
        t.structured = structured_sum * inv_n;
        t.total = t.reconstruction + cfg.lambda * t.structured;
        if (!std::isfinite(t.total))
            throw TrainError("train_step1: objective diverged at epoch " +
                             std::to_string(epoch));
        result.trace.push_back(t);
    }

    result.prototypes = compute_prototypes(latents, train_data.labels);
    return result;
}

}  // namespace mvdiag
