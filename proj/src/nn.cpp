#include "fervr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fervr/kernels.hpp"

namespace fervr::nn {

namespace {

constexpr double kProbClip = 1e-12;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Vector colsum(const Matrix& m) {
    Vector s(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            s[c] += m(r, c);
        }
    }
    return s;
}

void softmax_row(std::span<double> row) {
    double mx = row[0];
    for (double v : row) {
        mx = std::max(mx, v);
    }
    double sum = 0.0;
    for (double& v : row) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : row) {
        v /= sum;
    }
}

}  // namespace

const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::softmax: return "softmax";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "softmax") return Activation::softmax;
    throw std::runtime_error("unknown activation '" + s + "'");
}

DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng) {
    if (in == 0 || out == 0) {
        throw std::runtime_error("make_dense: zero dimension");
    }
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    layer.bias = Vector(out, 0.0);
    layer.activation = act;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weights.data) {
        w = dist(rng);
    }
    return layer;
}

DenseLayer make_dense_zero(std::size_t in, std::size_t out, Activation act) {
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    layer.bias = Vector(out, 0.0);
    layer.activation = act;
    return layer;
}

BatchNormLayer make_batchnorm(std::size_t d, double momentum, double epsilon) {
    if (momentum <= 0.0 || momentum >= 1.0) {
        throw std::runtime_error("make_batchnorm: momentum must be in (0,1)");
    }
    if (epsilon <= 0.0) {
        throw std::runtime_error("make_batchnorm: epsilon must be positive");
    }
    BatchNormLayer bn;
    bn.gamma = Vector(d, 1.0);
    bn.beta = Vector(d, 0.0);
    bn.running_mean = Vector(d, 0.0);
    bn.running_var = Vector(d, 1.0);
    bn.momentum = momentum;
    bn.epsilon = epsilon;
    return bn;
}

std::size_t DenseNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const Layer& layer : layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            n += d->weights.data.size() + d->bias.size();
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            n += bn->gamma.size() + bn->beta.size();
        }
    }
    return n;
}

Vector softmax(const Vector& v) {
    if (v.empty()) {
        throw std::runtime_error("softmax: empty input");
    }
    Vector out = v;
    softmax_row(out);
    return out;
}

void softmax_rows_inplace(Matrix& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        softmax_row(m.row(r));
    }
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& batch) {
    if (batch.cols != layer.in_size()) {
        throw std::runtime_error("dense_forward: batch has " + std::to_string(batch.cols) +
                                 " columns, layer expects " + std::to_string(layer.in_size()));
    }
    Matrix out = kernels::matmul_nt(batch, layer.weights);
    for (std::size_t r = 0; r < out.rows; ++r) {
        for (std::size_t c = 0; c < out.cols; ++c) {
            out(r, c) += layer.bias[c];
        }
    }
    switch (layer.activation) {
        case Activation::identity:
            break;
        case Activation::relu:
            for (double& v : out.data) {
                v = v > 0.0 ? v : 0.0;
            }
            break;
        case Activation::softmax:
            softmax_rows_inplace(out);
            break;
    }
    return out;
}

namespace {

// Shared by the plain and traced forward; fills `cache` when non-null.
Matrix batchnorm_apply(BatchNormLayer& bn, const Matrix& batch, Mode mode,
                       BatchNormCache* cache) {
    if (batch.cols != bn.dim()) {
        throw std::runtime_error("batchnorm_forward: batch has " + std::to_string(batch.cols) +
                                 " columns, layer expects " + std::to_string(bn.dim()));
    }
    const std::size_t n = batch.rows;
    const std::size_t d = batch.cols;
    Vector mean(d), inv_std(d);
    if (mode == Mode::train) {
        if (n < 2) {
            throw std::runtime_error("batchnorm_forward: train mode needs a batch of >= 2, got " +
                                     std::to_string(n));
        }
        for (std::size_t j = 0; j < d; ++j) {
            double m = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                m += batch(r, j);
            }
            m /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double diff = batch(r, j) - m;
                var += diff * diff;
            }
            var /= static_cast<double>(n);
            mean[j] = m;
            inv_std[j] = 1.0 / std::sqrt(var + bn.epsilon);
            bn.running_mean[j] = bn.momentum * bn.running_mean[j] + (1.0 - bn.momentum) * m;
            bn.running_var[j] = bn.momentum * bn.running_var[j] + (1.0 - bn.momentum) * var;
        }
    } else {
        for (std::size_t j = 0; j < d; ++j) {
            mean[j] = bn.running_mean[j];
            inv_std[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.epsilon);
        }
    }
    Matrix normalized(n, d);
    Matrix out(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            const double xhat = (batch(r, j) - mean[j]) * inv_std[j];
            normalized(r, j) = xhat;
            out(r, j) = bn.gamma[j] * xhat + bn.beta[j];
        }
    }
    if (cache != nullptr) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

Matrix dropout_apply(const DropoutLayer& layer, const Matrix& batch, Mode mode,
                     std::uint64_t rng_seed, DropoutCache* cache) {
    if (layer.rate < 0.0 || layer.rate >= 1.0) {
        throw std::runtime_error("dropout_forward: rate must be in [0,1)");
    }
    if (mode == Mode::inference || layer.rate == 0.0) {
        if (cache != nullptr) {
            cache->scaled_mask = Matrix();
        }
        return batch;
    }
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    const double scale = 1.0 / (1.0 - layer.rate);
    Matrix mask(batch.rows, batch.cols);
    Matrix out(batch.rows, batch.cols);
    for (std::size_t i = 0; i < batch.data.size(); ++i) {
        const double keep = dist(rng) >= layer.rate ? scale : 0.0;
        mask.data[i] = keep;
        out.data[i] = batch.data[i] * keep;
    }
    if (cache != nullptr) {
        cache->scaled_mask = std::move(mask);
    }
    return out;
}

}  // namespace

Matrix batchnorm_forward(BatchNormLayer& bn, const Matrix& batch, Mode mode) {
    return batchnorm_apply(bn, batch, mode, nullptr);
}

Matrix dropout_forward(const DropoutLayer& layer, const Matrix& batch, Mode mode,
                       std::uint64_t rng_seed) {
    return dropout_apply(layer, batch, mode, rng_seed, nullptr);
}

namespace {

Matrix network_apply(DenseNetwork& net, const Matrix& batch, Mode mode, std::uint64_t dropout_seed,
                     ForwardTrace* trace) {
    Matrix current = batch;
    if (trace != nullptr) {
        trace->mode = mode;
        trace->layers.clear();
        trace->layers.reserve(net.layers.size());
    }
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& layer = net.layers[li];
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            Matrix pre = kernels::matmul_nt(current, d->weights);
            for (std::size_t r = 0; r < pre.rows; ++r) {
                for (std::size_t c = 0; c < pre.cols; ++c) {
                    pre(r, c) += d->bias[c];
                }
            }
            Matrix out = pre;
            switch (d->activation) {
                case Activation::identity:
                    break;
                case Activation::relu:
                    for (double& v : out.data) {
                        v = v > 0.0 ? v : 0.0;
                    }
                    break;
                case Activation::softmax:
                    softmax_rows_inplace(out);
                    break;
            }
            if (trace != nullptr) {
                trace->layers.push_back(
                    DenseCache{std::move(current), std::move(pre), out});
            }
            current = std::move(out);
        } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            BatchNormCache cache;
            Matrix out = batchnorm_apply(*bn, current, mode, trace != nullptr ? &cache : nullptr);
            if (trace != nullptr) {
                trace->layers.push_back(std::move(cache));
            }
            current = std::move(out);
        } else if (auto* drop = std::get_if<DropoutLayer>(&layer)) {
            DropoutCache cache;
            Matrix out = dropout_apply(*drop, current, mode, mix_seed(dropout_seed, li),
                                       trace != nullptr ? &cache : nullptr);
            if (trace != nullptr) {
                trace->layers.push_back(std::move(cache));
            }
            current = std::move(out);
        }
    }
    if (trace != nullptr) {
        trace->output = current;
    }
    return current;
}

}  // namespace

Matrix network_forward(DenseNetwork& net, const Matrix& batch, Mode mode,
                       std::uint64_t dropout_seed) {
    return network_apply(net, batch, mode, dropout_seed, nullptr);
}

ForwardTrace network_forward_trace(DenseNetwork& net, const Matrix& batch, Mode mode,
                                   std::uint64_t dropout_seed) {
    ForwardTrace trace;
    network_apply(net, batch, mode, dropout_seed, &trace);
    return trace;
}

Matrix network_infer(const DenseNetwork& net, const Matrix& batch) {
    // The inference path reads but never writes layer state, so the cast is safe.
    return network_apply(const_cast<DenseNetwork&>(net), batch, Mode::inference, 0, nullptr);
}

std::vector<int> argmax_rows(const Matrix& probs) {
    std::vector<int> result(probs.rows);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols; ++c) {
            if (probs(r, c) > probs(r, best)) {
                best = c;
            }
        }
        result[r] = static_cast<int>(best);
    }
    return result;
}

ClassWeights uniform_class_weights() {
    ClassWeights w;
    w.fill(1.0);
    return w;
}

double weighted_cross_entropy(const Matrix& probs, const std::vector<int>& labels,
                              const ClassWeights& weights) {
    if (probs.rows != labels.size() || probs.rows == 0) {
        throw std::runtime_error("weighted_cross_entropy: " + std::to_string(probs.rows) +
                                 " probability rows vs " + std::to_string(labels.size()) +
                                 " labels");
    }
    if (probs.cols != kNumClasses) {
        throw std::runtime_error("weighted_cross_entropy: expected " +
                                 std::to_string(kNumClasses) + " columns");
    }
    for (std::size_t r = 0; r < probs.rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < probs.cols; ++c) {
            sum += probs(r, c);
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw std::runtime_error("weighted_cross_entropy: row " + std::to_string(r) +
                                     " sums to " + std::to_string(sum) + ", not a distribution");
        }
    }
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= kNumClasses) {
            throw std::runtime_error("weighted_cross_entropy: label " + std::to_string(y) +
                                     " out of range at row " + std::to_string(i));
        }
        const double w = weights[static_cast<std::size_t>(y)];
        const double p = std::clamp(probs(i, static_cast<std::size_t>(y)), kProbClip, 1.0);
        loss_sum += w * (-std::log(p));
        weight_sum += w;
    }
    return loss_sum / weight_sum;
}

Matrix weighted_cross_entropy_grad(const Matrix& probs, const std::vector<int>& labels,
                                   const ClassWeights& weights) {
    double weight_sum = 0.0;
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= kNumClasses) {
            throw std::runtime_error("weighted_cross_entropy_grad: label out of range");
        }
        weight_sum += weights[static_cast<std::size_t>(y)];
    }
    Matrix grad(probs.rows, probs.cols, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        const double p = probs(i, y);
        if (p >= kProbClip && p <= 1.0) {  // outside the clip range the loss is flat
            grad(i, y) = -(weights[y] / weight_sum) / p;
        }
    }
    return grad;
}

Matrix activation_backward(Activation act, const Matrix& pre_activation, const Matrix& output,
                           const Matrix& grad_output) {
    switch (act) {
        case Activation::identity:
            return grad_output;
        case Activation::relu: {
            Matrix g = grad_output;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                if (pre_activation.data[i] <= 0.0) {
                    g.data[i] = 0.0;
                }
            }
            return g;
        }
        case Activation::softmax: {
            // dz = y * (dy - <dy, y>) per row
            Matrix g(grad_output.rows, grad_output.cols);
            for (std::size_t r = 0; r < g.rows; ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < g.cols; ++c) {
                    dot += grad_output(r, c) * output(r, c);
                }
                for (std::size_t c = 0; c < g.cols; ++c) {
                    g(r, c) = output(r, c) * (grad_output(r, c) - dot);
                }
            }
            return g;
        }
    }
    throw std::runtime_error("activation_backward: unknown activation");
}

namespace {

Matrix batchnorm_backward(const BatchNormLayer& bn, const BatchNormCache& cache, Mode mode,
                          const Matrix& grad_output, Vector& dgamma, Vector& dbeta) {
    const std::size_t n = grad_output.rows;
    const std::size_t d = grad_output.cols;
    dgamma.assign(d, 0.0);
    dbeta.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            dgamma[j] += grad_output(r, j) * cache.normalized(r, j);
            dbeta[j] += grad_output(r, j);
        }
    }
    Matrix dx(n, d);
    if (mode == Mode::inference) {
        // Running statistics are constants; the map is affine per column.
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                dx(r, j) = grad_output(r, j) * bn.gamma[j] * cache.inv_std[j];
            }
        }
        return dx;
    }
    // Train mode: gradients flow through the batch mean and variance.
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double dxhat = grad_output(r, j) * bn.gamma[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * cache.normalized(r, j);
        }
        for (std::size_t r = 0; r < n; ++r) {
            const double dxhat = grad_output(r, j) * bn.gamma[j];
            dx(r, j) = cache.inv_std[j] * inv_n *
                       (static_cast<double>(n) * dxhat - sum_dxhat -
                        cache.normalized(r, j) * sum_dxhat_xhat);
        }
    }
    return dx;
}

}  // namespace

NetworkGrads network_backward(const DenseNetwork& net, const ForwardTrace& trace,
                              const std::vector<int>& labels, const ClassWeights& weights) {
    return network_backward_from(net, trace,
                                 weighted_cross_entropy_grad(trace.output, labels, weights))
        .grads;
}

BackwardResult network_backward_from(const DenseNetwork& net, const ForwardTrace& trace,
                                     const Matrix& grad_output) {
    if (trace.layers.size() != net.layers.size()) {
        throw std::runtime_error("network_backward: trace does not match network");
    }
    NetworkGrads grads;
    grads.layers.resize(net.layers.size());
    Matrix g = grad_output;
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        const Layer& layer = net.layers[i];
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            const auto& cache = std::get<DenseCache>(trace.layers[i]);
            Matrix g_pre = activation_backward(d->activation, cache.pre_activation, cache.output, g);
            DenseGrads dg;
            dg.weights = kernels::matmul_tn(g_pre, cache.input);
            dg.bias = colsum(g_pre);
            grads.layers[i] = std::move(dg);
            g = kernels::matmul(g_pre, d->weights);
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            const auto& cache = std::get<BatchNormCache>(trace.layers[i]);
            BatchNormGrads bg;
            g = batchnorm_backward(*bn, cache, trace.mode, g, bg.gamma, bg.beta);
            grads.layers[i] = std::move(bg);
        } else {
            const auto& cache = std::get<DropoutCache>(trace.layers[i]);
            if (!cache.scaled_mask.empty()) {
                for (std::size_t k = 0; k < g.data.size(); ++k) {
                    g.data[k] *= cache.scaled_mask.data[k];
                }
            }
            grads.layers[i] = NoGrads{};
        }
    }
    return {std::move(grads), std::move(g)};
}

std::vector<std::span<double>> param_spans(DenseNetwork& net) {
    std::vector<std::span<double>> spans;
    for (Layer& layer : net.layers) {
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            spans.emplace_back(d->weights.data);
            spans.emplace_back(d->bias);
        } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            spans.emplace_back(bn->gamma);
            spans.emplace_back(bn->beta);
        }
    }
    return spans;
}

std::vector<std::span<const double>> grad_spans(const NetworkGrads& grads) {
    std::vector<std::span<const double>> spans;
    for (const LayerGrads& lg : grads.layers) {
        if (const auto* d = std::get_if<DenseGrads>(&lg)) {
            spans.emplace_back(d->weights.data);
            spans.emplace_back(d->bias);
        } else if (const auto* bn = std::get_if<BatchNormGrads>(&lg)) {
            spans.emplace_back(bn->gamma);
            spans.emplace_back(bn->beta);
        }
    }
    return spans;
}

std::vector<double> snapshot_params(const DenseNetwork& net) {
    std::vector<double> snapshot;
    for (const Layer& layer : net.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            snapshot.insert(snapshot.end(), d->weights.data.begin(), d->weights.data.end());
            snapshot.insert(snapshot.end(), d->bias.begin(), d->bias.end());
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            snapshot.insert(snapshot.end(), bn->gamma.begin(), bn->gamma.end());
            snapshot.insert(snapshot.end(), bn->beta.begin(), bn->beta.end());
            snapshot.insert(snapshot.end(), bn->running_mean.begin(), bn->running_mean.end());
            snapshot.insert(snapshot.end(), bn->running_var.begin(), bn->running_var.end());
        }
    }
    return snapshot;
}

void restore_params(DenseNetwork& net, const std::vector<double>& snapshot) {
    std::size_t pos = 0;
    auto pull = [&](Vector& dst) {
        if (pos + dst.size() > snapshot.size()) {
            throw std::runtime_error("restore_params: snapshot too short");
        }
        std::copy(snapshot.begin() + static_cast<std::ptrdiff_t>(pos),
                  snapshot.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
        pos += dst.size();
    };
    for (Layer& layer : net.layers) {
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            pull(d->weights.data);
            pull(d->bias);
        } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            pull(bn->gamma);
            pull(bn->beta);
            pull(bn->running_mean);
            pull(bn->running_var);
        }
    }
    if (pos != snapshot.size()) {
        throw std::runtime_error("restore_params: snapshot size mismatch");
    }
}

void AdamState::step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size()) {
        throw std::runtime_error("adam_step: " + std::to_string(params.size()) +
                                 " parameter blocks vs " + std::to_string(grads.size()) +
                                 " gradient blocks");
    }
    if (first_moment.empty()) {
        first_moment.resize(params.size());
        second_moment.resize(params.size());
        for (std::size_t b = 0; b < params.size(); ++b) {
            first_moment[b].assign(params[b].size(), 0.0);
            second_moment[b].assign(params[b].size(), 0.0);
        }
    }
    if (first_moment.size() != params.size()) {
        throw std::runtime_error("adam_step: state was initialized for a different model");
    }
    step_count += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != grads[b].size() || params[b].size() != first_moment[b].size()) {
            throw std::runtime_error("adam_step: shape mismatch in block " + std::to_string(b));
        }
        auto& m = first_moment[b];
        auto& v = second_moment[b];
        auto p = params[b];
        auto g = grads[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon_hat);
        }
    }
}

double fd_max_rel_error(const std::vector<std::span<double>>& params,
                        const std::vector<std::span<const double>>& analytic,
                        const std::function<double()>& loss, const FdOptions& opts) {
    if (params.size() != analytic.size()) {
        throw std::runtime_error("fd_max_rel_error: block count mismatch");
    }
    if (opts.h <= 0.0) {
        throw std::runtime_error("fd_max_rel_error: h must be positive");
    }
    double max_err = 0.0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        auto a = analytic[b];
        if (p.size() != a.size()) {
            throw std::runtime_error("fd_max_rel_error: block " + std::to_string(b) +
                                     " size mismatch");
        }
        std::vector<std::size_t> indices(p.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        if (opts.max_checks_per_block > 0 && indices.size() > opts.max_checks_per_block) {
            std::mt19937_64 rng(mix_seed(opts.sample_seed, b));
            std::shuffle(indices.begin(), indices.end(), rng);
            indices.resize(opts.max_checks_per_block);
        }
        for (std::size_t i : indices) {
            const double saved = p[i];
            p[i] = saved + opts.h;
            const double lp = loss();
            p[i] = saved - opts.h;
            const double lm = loss();
            p[i] = saved;
            const double fd = (lp - lm) / (2.0 * opts.h);
            const double denom = std::max({std::abs(a[i]), std::abs(fd), 1e-8});
            max_err = std::max(max_err, std::abs(a[i] - fd) / denom);
        }
    }
    return max_err;
}

double finite_difference_check(DenseNetwork& net, const Matrix& batch,
                               const std::vector<int>& labels, const ClassWeights& weights,
                               double h) {
    ForwardTrace trace = network_forward_trace(net, batch, Mode::inference);
    NetworkGrads grads = network_backward(net, trace, labels, weights);
    auto loss = [&]() {
        Matrix probs = network_forward(net, batch, Mode::inference);
        return weighted_cross_entropy(probs, labels, weights);
    };
    FdOptions opts;
    opts.h = h;
    return fd_max_rel_error(param_spans(net), grad_spans(grads), loss, opts);
}

}  // namespace fervr::nn
