#include "mvdiag/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "mvdiag/errors.hpp"

namespace mvdiag {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& s) {
    if (s == "linear") return Activation::linear;
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation tag: " + s);
}

std::size_t DenseNet::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += weights[l].data.size() + biases[l].size();
    return n;
}

DenseNet make_dense_net(const std::vector<std::size_t>& dims,
                        const std::vector<Activation>& acts, std::mt19937_64& rng) {
    if (dims.size() < 2)
        throw std::invalid_argument("dense net needs at least input and output dims");
    if (acts.size() != dims.size() - 1)
        throw std::invalid_argument("need one activation tag per layer");
    for (std::size_t d : dims)
        if (d == 0) throw std::invalid_argument("layer dims must be positive");

    DenseNet net;
    net.layer_dims = dims;
    net.activations = acts;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = dims[l];
        const std::size_t fan_out = dims[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix w(fan_out, fan_in);
        for (double& x : w.data) x = dist(rng);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace {

void apply_activation(Activation act, const std::vector<double>& pre,
                      std::vector<double>& post) {
    post.resize(pre.size());
    switch (act) {
        case Activation::linear:
            post = pre;
            break;
        case Activation::relu:
            for (std::size_t i = 0; i < pre.size(); ++i)
                post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < pre.size(); ++i) post[i] = sigmoid(pre[i]);
            break;
    }
}

}  // namespace

std::vector<double> forward(const DenseNet& net, std::span<const double> x,
                            ForwardCache& cache) {
    if (x.size() != net.input_dim())
        throw std::invalid_argument("forward: input length " + std::to_string(x.size()) +
                                    " does not match net input dim " +
                                    std::to_string(net.input_dim()));
    const std::size_t layers = net.num_layers();
    cache.pre.resize(layers);
    cache.post.resize(layers + 1);
    cache.post[0].assign(x.begin(), x.end());

    for (std::size_t l = 0; l < layers; ++l) {
        const Matrix& w = net.weights[l];
        const std::vector<double>& in = cache.post[l];
        std::vector<double>& z = cache.pre[l];
        z = net.biases[l];
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double* wr = w.row(r);
            double acc = z[r];
            for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * in[c];
            z[r] = acc;
        }
        apply_activation(net.activations[l], z, cache.post[l + 1]);
    }
    return cache.post[layers];
}

std::vector<double> forward(const DenseNet& net, std::span<const double> x) {
    ForwardCache cache;
    return forward(net, x, cache);
}

GradientSet make_zero_gradients(const DenseNet& net) {
    GradientSet g;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        g.weight_grads.emplace_back(net.weights[l].rows, net.weights[l].cols);
        g.bias_grads.emplace_back(net.biases[l].size(), 0.0);
    }
    g.input_grad.assign(net.input_dim(), 0.0);
    return g;
}

void zero_gradients(GradientSet& grads) {
    for (Matrix& m : grads.weight_grads)
        std::fill(m.data.begin(), m.data.end(), 0.0);
    for (auto& b : grads.bias_grads) std::fill(b.begin(), b.end(), 0.0);
    std::fill(grads.input_grad.begin(), grads.input_grad.end(), 0.0);
}

void backward(const DenseNet& net, const ForwardCache& cache,
              std::span<const double> upstream, GradientSet& grads) {
    const std::size_t layers = net.num_layers();
    if (cache.pre.size() != layers || cache.post.size() != layers + 1)
        throw std::invalid_argument("backward: cache does not match net layout");
    for (std::size_t l = 0; l < layers; ++l)
        if (cache.pre[l].size() != net.layer_dims[l + 1] ||
            cache.post[l].size() != net.layer_dims[l])
            throw std::invalid_argument("backward: cache does not match net layout");
    if (upstream.size() != net.output_dim())
        throw std::invalid_argument("backward: upstream length does not match output dim");
    if (grads.weight_grads.size() != layers)
        throw std::invalid_argument("backward: gradient set does not match net");

    std::vector<double> delta(upstream.begin(), upstream.end());
    std::vector<double> prev;
    for (std::size_t li = layers; li-- > 0;) {
        const Matrix& w = net.weights[li];
        const std::vector<double>& z = cache.pre[li];
        const std::vector<double>& a = cache.post[li + 1];
        // delta <- dL/d(pre-activation)
        switch (net.activations[li]) {
            case Activation::linear:
                break;
            case Activation::relu:
                for (std::size_t r = 0; r < delta.size(); ++r)
                    if (z[r] <= 0.0) delta[r] = 0.0;
                break;
            case Activation::sigmoid:
                for (std::size_t r = 0; r < delta.size(); ++r)
                    delta[r] *= a[r] * (1.0 - a[r]);
                break;
        }
        const std::vector<double>& in = cache.post[li];
        Matrix& wg = grads.weight_grads[li];
        std::vector<double>& bg = grads.bias_grads[li];
        prev.assign(w.cols, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double d = delta[r];
            bg[r] += d;
            double* wgr = wg.row(r);
            const double* wr = w.row(r);
            for (std::size_t c = 0; c < w.cols; ++c) {
                wgr[c] += d * in[c];
                prev[c] += d * wr[c];
            }
        }
        delta.swap(prev);
    }
    grads.input_grad = delta;
}

GradientSet backward(const DenseNet& net, const ForwardCache& cache,
                     std::span<const double> upstream) {
    GradientSet grads = make_zero_gradients(net);
    backward(net, cache, upstream, grads);
    return grads;
}

void backward_input(const DenseNet& net, const ForwardCache& cache,
                    std::span<const double> upstream,
                    std::vector<double>& input_grad_accum) {
    const std::size_t layers = net.num_layers();
    if (cache.pre.size() != layers || cache.post.size() != layers + 1)
        throw std::invalid_argument("backward_input: cache does not match net layout");
    if (upstream.size() != net.output_dim())
        throw std::invalid_argument("backward_input: upstream length mismatch");
    if (input_grad_accum.size() != net.input_dim())
        throw std::invalid_argument("backward_input: accumulator length mismatch");

    std::vector<double> delta(upstream.begin(), upstream.end());
    std::vector<double> prev;
    for (std::size_t li = layers; li-- > 0;) {
        const Matrix& w = net.weights[li];
        const std::vector<double>& z = cache.pre[li];
        const std::vector<double>& a = cache.post[li + 1];
        switch (net.activations[li]) {
            case Activation::linear:
                break;
            case Activation::relu:
                for (std::size_t r = 0; r < delta.size(); ++r)
                    if (z[r] <= 0.0) delta[r] = 0.0;
                break;
            case Activation::sigmoid:
                for (std::size_t r = 0; r < delta.size(); ++r)
                    delta[r] *= a[r] * (1.0 - a[r]);
                break;
        }
        prev.assign(w.cols, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double d = delta[r];
            const double* wr = w.row(r);
            for (std::size_t c = 0; c < w.cols; ++c) prev[c] += d * wr[c];
        }
        delta.swap(prev);
    }
    for (std::size_t c = 0; c < delta.size(); ++c) input_grad_accum[c] += delta[c];
}

void scale_gradients(GradientSet& grads, double factor) {
    for (Matrix& m : grads.weight_grads)
        for (double& x : m.data) x *= factor;
    for (auto& b : grads.bias_grads)
        for (double& x : b) x *= factor;
    for (double& x : grads.input_grad) x *= factor;
}

LossGrad mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("mse_loss: length mismatch");
    if (pred.empty()) throw std::invalid_argument("mse_loss: empty input");
    LossGrad out;
    out.grad.resize(pred.size());
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred[i] - target[i];
        out.loss += diff * diff * inv_n;
        out.grad[i] = 2.0 * diff * inv_n;
    }
    return out;
}

ScalarLossGrad binary_cross_entropy(double p, int y) {
    if (y != 0 && y != 1)
        throw std::invalid_argument("binary_cross_entropy: label must be 0 or 1");
    constexpr double eps = 1e-7;
    const double pc = std::min(std::max(p, eps), 1.0 - eps);
    ScalarLossGrad out;
    if (y == 1) {
        out.loss = -std::log(pc);
        out.grad = -1.0 / pc;
    } else {
        out.loss = -std::log(1.0 - pc);
        out.grad = 1.0 / (1.0 - pc);
    }
    return out;
}

AdamState make_adam(std::size_t n_params, AdamConfig cfg) {
    AdamState st;
    st.cfg = cfg;
    st.m.assign(n_params, 0.0);
    st.v.assign(n_params, 0.0);
    return st;
}

namespace {

void adam_update_block(AdamState& st, double* params, const double* grads,
                       std::size_t n, std::size_t offset, double corr1, double corr2) {
    const AdamConfig& c = st.cfg;
    double* m = st.m.data() + offset;
    double* v = st.v.data() + offset;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        if (!std::isfinite(g))
            throw TrainError("non-finite gradient in optimizer step " +
                             std::to_string(st.step));
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        const double mhat = m[i] / corr1;
        const double vhat = v[i] / corr2;
        params[i] -= c.step_size * mhat / (std::sqrt(vhat) + c.epsilon);
    }
}

}  // namespace

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step += 1;
    const double corr1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));
    adam_update_block(state, params.data(), grads.data(), params.size(), 0, corr1, corr2);
}

void adam_step_net(AdamState& state, DenseNet& net, const GradientSet& grads) {
    if (state.m.size() != net.param_count())
        throw std::invalid_argument("adam_step_net: state does not match net");
    if (grads.weight_grads.size() != net.num_layers())
        throw std::invalid_argument("adam_step_net: gradients do not match net");
    state.step += 1;
    const double corr1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));
    std::size_t offset = 0;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        Matrix& w = net.weights[l];
        const Matrix& wg = grads.weight_grads[l];
        if (!w.same_shape(wg))
            throw std::invalid_argument("adam_step_net: weight gradient shape mismatch");
        adam_update_block(state, w.data.data(), wg.data.data(), w.data.size(), offset,
                          corr1, corr2);
        offset += w.data.size();
        std::vector<double>& b = net.biases[l];
        const std::vector<double>& bg = grads.bias_grads[l];
        if (b.size() != bg.size())
            throw std::invalid_argument("adam_step_net: bias gradient shape mismatch");
        adam_update_block(state, b.data(), bg.data(), b.size(), offset, corr1, corr2);
        offset += b.size();
    }
}

}  // namespace mvdiag
