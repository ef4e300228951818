#include "fervr/fusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fervr/kernels.hpp"

namespace fervr::fuse {

namespace {

constexpr double kSimplexTolerance = 1e-6;

void check_simplex_rows(const Matrix& m, const char* func) {
    if (m.cols != nn::kNumClasses) {
        throw std::runtime_error(std::string(func) + ": rows of width " + std::to_string(m.cols) +
                                 ", expected " + std::to_string(nn::kNumClasses));
    }
    for (std::size_t i = 0; i < m.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double p = m(i, j);
            if (!(p >= 0.0)) {
                throw std::runtime_error(std::string(func) + ": row " + std::to_string(i) +
                                         " is not a probability vector");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSimplexTolerance) {
            throw std::runtime_error(std::string(func) + ": row " + std::to_string(i) +
                                     " sums to " + std::to_string(sum) + ", expected 1");
        }
    }
}

void check_paired(const Matrix& a, const Matrix& b, const char* func) {
    if (a.rows != b.rows) {
        throw std::runtime_error(std::string(func) + ": " + std::to_string(a.rows) +
                                 " FEA rows vs " + std::to_string(b.rows) + " image rows");
    }
}

Vector colsum(const Matrix& m) {
    Vector sums(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            sums[j] += m(i, j);
        }
    }
    return sums;
}

Matrix elementwise_product(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, a.cols);
    for (std::size_t k = 0; k < a.data.size(); ++k) {
        out.data[k] = a.data[k] * b.data[k];
    }
    return out;
}

// Row-wise softmax Jacobian product: dZ = y .* (dY - rowdot(dY, y)).
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
    Matrix dz(y.rows, y.cols);
    for (std::size_t i = 0; i < y.rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols; ++j) {
            dot += dy(i, j) * y(i, j);
        }
        for (std::size_t j = 0; j < y.cols; ++j) {
            dz(i, j) = y(i, j) * (dy(i, j) - dot);
        }
    }
    return dz;
}

std::vector<int> take_labels(const std::vector<int>& labels,
                             const std::vector<std::size_t>& rows) {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out[i] = labels[rows[i]];
    }
    return out;
}

// Flattened outer products: row i holds p_fea(i,a) * p_img(i,b) at index 7a+b.
Matrix bilinear_inputs(const Matrix& p_fea, const Matrix& p_img) {
    Matrix out(p_fea.rows, nn::kNumClasses * nn::kNumClasses);
    for (std::size_t i = 0; i < p_fea.rows; ++i) {
        for (std::size_t a = 0; a < nn::kNumClasses; ++a) {
            for (std::size_t b = 0; b < nn::kNumClasses; ++b) {
                out(i, a * nn::kNumClasses + b) = p_fea(i, a) * p_img(i, b);
            }
        }
    }
    return out;
}

// Everything a backward pass needs from one late-fusion forward.
struct LateAux {
    Vector pair;                // weighted_sum: softmaxed (alpha, beta)
    nn::ForwardTrace head_trace;  // concat_dense / bilinear
    Matrix gate_a_out;          // cross_attention: a (gates p_fea)
    Matrix gate_b_out;          // cross_attention: b (gates p_img)
    Matrix raw;                 // cross_attention: pre-normalization sums
    Vector row_sums;
    Matrix output;
};

LateAux late_forward_aux(const LateFusionModel& model, const Matrix& p_fea,
                         const Matrix& p_img) {
    check_paired(p_fea, p_img, "late_fusion_forward");
    check_simplex_rows(p_fea, "late_fusion_forward");
    check_simplex_rows(p_img, "late_fusion_forward");
    LateAux aux;
    switch (model.strategy) {
        case LateStrategy::average: {
            aux.output = fuse_average_rows(p_fea, p_img);
            break;
        }
        case LateStrategy::weighted_sum: {
            aux.pair = nn::softmax(model.mix_logits);
            aux.output = Matrix(p_fea.rows, nn::kNumClasses);
            for (std::size_t k = 0; k < aux.output.data.size(); ++k) {
                aux.output.data[k] = aux.pair[0] * p_fea.data[k] + aux.pair[1] * p_img.data[k];
            }
            break;
        }
        case LateStrategy::concat_dense: {
            // The head holds no stochastic layers, so the mode is irrelevant.
            auto& head = const_cast<nn::DenseNetwork&>(model.head);
            aux.head_trace =
                nn::network_forward_trace(head, hcat(p_fea, p_img), nn::Mode::inference);
            aux.output = aux.head_trace.output;
            break;
        }
        case LateStrategy::bilinear: {
            auto& head = const_cast<nn::DenseNetwork&>(model.head);
            aux.head_trace = nn::network_forward_trace(head, bilinear_inputs(p_fea, p_img),
                                                       nn::Mode::inference);
            aux.output = aux.head_trace.output;
            break;
        }
        case LateStrategy::cross_attention: {
            aux.gate_a_out = nn::dense_forward(model.gate_a, p_img);
            aux.gate_b_out = nn::dense_forward(model.gate_b, p_fea);
            aux.raw = Matrix(p_fea.rows, nn::kNumClasses);
            for (std::size_t k = 0; k < aux.raw.data.size(); ++k) {
                aux.raw.data[k] = aux.gate_a_out.data[k] * p_fea.data[k] +
                                  aux.gate_b_out.data[k] * p_img.data[k];
            }
            aux.row_sums.resize(p_fea.rows);
            aux.output = Matrix(p_fea.rows, nn::kNumClasses);
            for (std::size_t i = 0; i < p_fea.rows; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < nn::kNumClasses; ++j) {
                    sum += aux.raw(i, j);
                }
                if (!(sum > 0.0)) {
                    throw std::runtime_error("cross_attention: degenerate row sum");
                }
                aux.row_sums[i] = sum;
                for (std::size_t j = 0; j < nn::kNumClasses; ++j) {
                    aux.output(i, j) = aux.raw(i, j) / sum;
                }
            }
            break;
        }
    }
    return aux;
}

LateFusionGrads late_backward(const LateFusionModel& model, const LateAux& aux,
                              const Matrix& p_fea, const Matrix& p_img,
                              const Matrix& grad_output) {
    LateFusionGrads grads;
    switch (model.strategy) {
        case LateStrategy::average:
            break;  // parameter-free
        case LateStrategy::weighted_sum: {
            double d_alpha = 0.0;
            double d_beta = 0.0;
            for (std::size_t k = 0; k < grad_output.data.size(); ++k) {
                d_alpha += grad_output.data[k] * p_fea.data[k];
                d_beta += grad_output.data[k] * p_img.data[k];
            }
            const double dot = d_alpha * aux.pair[0] + d_beta * aux.pair[1];
            grads.mix_logits = {aux.pair[0] * (d_alpha - dot), aux.pair[1] * (d_beta - dot)};
            break;
        }
        case LateStrategy::concat_dense:
        case LateStrategy::bilinear: {
            grads.head = nn::network_backward_from(model.head, aux.head_trace, grad_output).grads;
            break;
        }
        case LateStrategy::cross_attention: {
            // out = raw / rowsum(raw): d(loss)/d(raw_k) = (g_k - sum_j g_j out_j) / S.
            Matrix d_raw(grad_output.rows, grad_output.cols);
            for (std::size_t i = 0; i < grad_output.rows; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < grad_output.cols; ++j) {
                    dot += grad_output(i, j) * aux.output(i, j);
                }
                for (std::size_t j = 0; j < grad_output.cols; ++j) {
                    d_raw(i, j) = (grad_output(i, j) - dot) / aux.row_sums[i];
                }
            }
            const Matrix d_gate_a = elementwise_product(d_raw, p_fea);
            const Matrix d_gate_b = elementwise_product(d_raw, p_img);
            const Matrix dz_a = softmax_rows_backward(aux.gate_a_out, d_gate_a);
            const Matrix dz_b = softmax_rows_backward(aux.gate_b_out, d_gate_b);
            grads.gate_a = {kernels::matmul_tn(dz_a, p_img), colsum(dz_a)};
            grads.gate_b = {kernels::matmul_tn(dz_b, p_fea), colsum(dz_b)};
            break;
        }
    }
    return grads;
}

Matrix apply_gate(const Matrix& pre, GateActivation activation) {
    Matrix out = pre;
    if (activation == GateActivation::softmax) {
        nn::softmax_rows_inplace(out);
    } else {
        for (double& v : out.data) {
            v = 1.0 / (1.0 + std::exp(-v));
        }
    }
    return out;
}

Matrix gate_backward(const Matrix& gate_out, const Matrix& grad_gate,
                     GateActivation activation) {
    if (activation == GateActivation::softmax) {
        return softmax_rows_backward(gate_out, grad_gate);
    }
    Matrix dz(gate_out.rows, gate_out.cols);
    for (std::size_t k = 0; k < gate_out.data.size(); ++k) {
        dz.data[k] = grad_gate.data[k] * gate_out.data[k] * (1.0 - gate_out.data[k]);
    }
    return dz;
}

struct IntermediateAux {
    nn::ForwardTrace fea_trace;
    nn::ForwardTrace img_trace;
    Matrix h_fea;
    Matrix h_img;
    Matrix a;  // gates h_fea, computed from h_img
    Matrix b;  // gates h_img, computed from h_fea
    nn::ForwardTrace head_trace;
    Matrix output;
};

IntermediateAux intermediate_forward_aux(IntermediateFusionModel& model,
                                         const Matrix& fea_features, const Matrix& img_features,
                                         nn::Mode mode, std::uint64_t dropout_seed) {
    check_paired(fea_features, img_features, "intermediate_fusion_forward");
    IntermediateAux aux;
    aux.fea_trace = nn::network_forward_trace(model.fea_branch, fea_features, mode);
    aux.img_trace = nn::network_forward_trace(model.img_branch, img_features, mode);
    aux.h_fea = aux.fea_trace.output;
    aux.h_img = aux.img_trace.output;
    aux.a = apply_gate(nn::dense_forward(model.gate_a, aux.h_img), model.config.gate_activation);
    aux.b = apply_gate(nn::dense_forward(model.gate_b, aux.h_fea), model.config.gate_activation);
    const Matrix z =
        hcat(elementwise_product(aux.a, aux.h_fea), elementwise_product(aux.b, aux.h_img));
    aux.head_trace = nn::network_forward_trace(model.head, z, mode, dropout_seed);
    aux.output = aux.head_trace.output;
    return aux;
}

IntermediateGrads intermediate_backward(const IntermediateFusionModel& model,
                                        const IntermediateAux& aux, const Matrix& grad_output) {
    IntermediateGrads grads;
    nn::BackwardResult head_back =
        nn::network_backward_from(model.head, aux.head_trace, grad_output);
    grads.head = std::move(head_back.grads);

    const std::size_t w = model.config.projection_width;
    Matrix g_left(aux.h_fea.rows, w);
    Matrix g_right(aux.h_fea.rows, w);
    for (std::size_t i = 0; i < aux.h_fea.rows; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            g_left(i, j) = head_back.grad_input(i, j);
            g_right(i, j) = head_back.grad_input(i, w + j);
        }
    }

    // z = [a .* h_fea || b .* h_img]
    const Matrix d_gate_a = elementwise_product(g_left, aux.h_fea);
    const Matrix d_gate_b = elementwise_product(g_right, aux.h_img);
    Matrix d_h_fea = elementwise_product(g_left, aux.a);
    Matrix d_h_img = elementwise_product(g_right, aux.b);

    const Matrix dz_a = gate_backward(aux.a, d_gate_a, model.config.gate_activation);
    const Matrix dz_b = gate_backward(aux.b, d_gate_b, model.config.gate_activation);
    grads.gate_a = {kernels::matmul_tn(dz_a, aux.h_img), colsum(dz_a)};
    grads.gate_b = {kernels::matmul_tn(dz_b, aux.h_fea), colsum(dz_b)};

    // Gate inputs add their own gradient terms to the branch outputs.
    const Matrix d_h_img_gate = kernels::matmul(dz_a, model.gate_a.weights);
    const Matrix d_h_fea_gate = kernels::matmul(dz_b, model.gate_b.weights);
    for (std::size_t k = 0; k < d_h_fea.data.size(); ++k) {
        d_h_fea.data[k] += d_h_fea_gate.data[k];
        d_h_img.data[k] += d_h_img_gate.data[k];
    }

    grads.fea_branch = nn::network_backward_from(model.fea_branch, aux.fea_trace, d_h_fea).grads;
    grads.img_branch = nn::network_backward_from(model.img_branch, aux.img_trace, d_h_img).grads;
    return grads;
}

void append_spans(std::vector<std::span<double>>& out, std::vector<std::span<double>> more) {
    out.insert(out.end(), more.begin(), more.end());
}

void append_const_spans(std::vector<std::span<const double>>& out,
                        std::vector<std::span<const double>> more) {
    out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

// ---- late fusion ----

const char* to_string(LateStrategy s) {
    switch (s) {
        case LateStrategy::average: return "average";
        case LateStrategy::weighted_sum: return "weighted_sum";
        case LateStrategy::concat_dense: return "concat_dense";
        case LateStrategy::bilinear: return "bilinear";
        case LateStrategy::cross_attention: return "cross_attention";
    }
    throw std::logic_error("to_string: bad LateStrategy");
}

LateStrategy late_strategy_from_string(const std::string& name) {
    for (LateStrategy s : {LateStrategy::average, LateStrategy::weighted_sum,
                           LateStrategy::concat_dense, LateStrategy::bilinear,
                           LateStrategy::cross_attention}) {
        if (name == to_string(s)) {
            return s;
        }
    }
    throw std::runtime_error("unknown late-fusion strategy '" + name + "'");
}

LateFusionModel make_late_fusion(LateStrategy strategy, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LateFusionModel model;
    model.strategy = strategy;
    switch (strategy) {
        case LateStrategy::average:
            break;
        case LateStrategy::weighted_sum:
            model.mix_logits = {0.0, 0.0};  // symmetric start: alpha = beta = 1/2
            break;
        case LateStrategy::concat_dense:
            model.head.layers.push_back(
                nn::make_dense(2 * nn::kNumClasses, nn::kNumClasses, nn::Activation::softmax, rng));
            break;
        case LateStrategy::bilinear:
            model.head.layers.push_back(nn::make_dense(nn::kNumClasses * nn::kNumClasses,
                                                       nn::kNumClasses, nn::Activation::softmax,
                                                       rng));
            break;
        case LateStrategy::cross_attention:
            model.gate_a = nn::make_dense(nn::kNumClasses, nn::kNumClasses,
                                          nn::Activation::softmax, rng);
            model.gate_b = nn::make_dense(nn::kNumClasses, nn::kNumClasses,
                                          nn::Activation::softmax, rng);
            break;
    }
    return model;
}

LateFusionModel make_late_fusion_zero(LateStrategy strategy) {
    LateFusionModel model = make_late_fusion(strategy, 0);
    for (double& v : model.mix_logits) {
        v = 0.0;
    }
    for (auto& layer : model.head.layers) {
        auto& dense = std::get<nn::DenseLayer>(layer);
        std::fill(dense.weights.data.begin(), dense.weights.data.end(), 0.0);
        std::fill(dense.bias.begin(), dense.bias.end(), 0.0);
    }
    if (strategy == LateStrategy::cross_attention) {
        std::fill(model.gate_a.weights.data.begin(), model.gate_a.weights.data.end(), 0.0);
        std::fill(model.gate_a.bias.begin(), model.gate_a.bias.end(), 0.0);
        std::fill(model.gate_b.weights.data.begin(), model.gate_b.weights.data.end(), 0.0);
        std::fill(model.gate_b.bias.begin(), model.gate_b.bias.end(), 0.0);
    }
    return model;
}

std::size_t parameter_count(const LateFusionModel& model) {
    switch (model.strategy) {
        case LateStrategy::average:
            return 0;
        case LateStrategy::weighted_sum:
            return model.mix_logits.size();
        case LateStrategy::concat_dense:
        case LateStrategy::bilinear:
            return model.head.parameter_count();
        case LateStrategy::cross_attention:
            return model.gate_a.weights.data.size() + model.gate_a.bias.size() +
                   model.gate_b.weights.data.size() + model.gate_b.bias.size();
    }
    throw std::logic_error("parameter_count: bad LateStrategy");
}

Vector fuse_average(const Vector& p_fea, const Vector& p_img) {
    if (p_fea.size() != p_img.size()) {
        throw std::runtime_error("fuse_average: " + std::to_string(p_fea.size()) + " vs " +
                                 std::to_string(p_img.size()) + " entries");
    }
    Vector out(p_fea.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = 0.5 * (p_fea[j] + p_img[j]);
    }
    return out;
}

Matrix fuse_average_rows(const Matrix& p_fea, const Matrix& p_img) {
    check_paired(p_fea, p_img, "fuse_average");
    Matrix out(p_fea.rows, p_fea.cols);
    for (std::size_t k = 0; k < out.data.size(); ++k) {
        out.data[k] = 0.5 * (p_fea.data[k] + p_img.data[k]);
    }
    return out;
}

Matrix late_fusion_forward(const LateFusionModel& model, const Matrix& p_fea,
                           const Matrix& p_img, nn::Mode mode) {
    (void)mode;  // no late strategy has stochastic layers
    return late_forward_aux(model, p_fea, p_img).output;
}

FusionSplit fusion_split(const data::MultimodalBundle& bundle, data::Split split,
                         const Matrix& fea_probs) {
    FusionSplit out;
    out.img_probs = data::image_probs_matrix(bundle, split);
    out.labels = data::label_vector(bundle, split);
    if (fea_probs.rows != out.labels.size()) {
        throw std::runtime_error("fusion_split: " + std::to_string(fea_probs.rows) +
                                 " probability rows vs " + std::to_string(out.labels.size()) +
                                 " samples");
    }
    out.fea_probs = fea_probs;
    return out;
}

LateFusionProblem::LateFusionProblem(LateFusionModel& model, FusionSplit train_split,
                                     FusionSplit val_split,
                                     const nn::ClassWeights& class_weights)
    : model_(&model),
      train_(std::move(train_split)),
      val_(std::move(val_split)),
      class_weights_(class_weights) {
    if (model.strategy == LateStrategy::average) {
        throw std::runtime_error("LateFusionProblem: average strategy has no parameters");
    }
    for (const FusionSplit* split : {&train_, &val_}) {
        if (split->fea_probs.rows != split->labels.size() ||
            split->img_probs.rows != split->labels.size()) {
            throw std::runtime_error("LateFusionProblem: rows and labels misaligned");
        }
    }
}

std::vector<std::span<double>> LateFusionProblem::params() {
    std::vector<std::span<double>> spans;
    switch (model_->strategy) {
        case LateStrategy::weighted_sum:
            spans.emplace_back(model_->mix_logits);
            break;
        case LateStrategy::concat_dense:
        case LateStrategy::bilinear:
            append_spans(spans, nn::param_spans(model_->head));
            break;
        case LateStrategy::cross_attention:
            spans.emplace_back(model_->gate_a.weights.data);
            spans.emplace_back(model_->gate_a.bias);
            spans.emplace_back(model_->gate_b.weights.data);
            spans.emplace_back(model_->gate_b.bias);
            break;
        default:
            break;
    }
    return spans;
}

std::vector<std::span<const double>> LateFusionProblem::grads() const {
    std::vector<std::span<const double>> spans;
    switch (model_->strategy) {
        case LateStrategy::weighted_sum:
            spans.emplace_back(grads_.mix_logits);
            break;
        case LateStrategy::concat_dense:
        case LateStrategy::bilinear:
            append_const_spans(spans, nn::grad_spans(grads_.head));
            break;
        case LateStrategy::cross_attention:
            spans.emplace_back(grads_.gate_a.weights.data);
            spans.emplace_back(grads_.gate_a.bias);
            spans.emplace_back(grads_.gate_b.weights.data);
            spans.emplace_back(grads_.gate_b.bias);
            break;
        default:
            break;
    }
    return spans;
}

double LateFusionProblem::compute_batch(const std::vector<std::size_t>& rows,
                                        std::uint64_t dropout_seed) {
    (void)dropout_seed;  // no stochastic layers
    const Matrix fea = take_rows(train_.fea_probs, rows);
    const Matrix img = take_rows(train_.img_probs, rows);
    const std::vector<int> labels = take_labels(train_.labels, rows);
    const LateAux aux = late_forward_aux(*model_, fea, img);
    const double loss = nn::weighted_cross_entropy(aux.output, labels, class_weights_);
    const Matrix g = nn::weighted_cross_entropy_grad(aux.output, labels, class_weights_);
    grads_ = late_backward(*model_, aux, fea, img, g);
    return loss;
}

double LateFusionProblem::train_accuracy() const {
    const Matrix probs = late_fusion_forward(*model_, train_.fea_probs, train_.img_probs);
    return train::accuracy_of(nn::argmax_rows(probs), train_.labels);
}

double LateFusionProblem::val_accuracy() const {
    const Matrix probs = late_fusion_forward(*model_, val_.fea_probs, val_.img_probs);
    return train::accuracy_of(nn::argmax_rows(probs), val_.labels);
}

std::vector<double> LateFusionProblem::snapshot() const {
    std::vector<double> state;
    switch (model_->strategy) {
        case LateStrategy::weighted_sum:
            state = model_->mix_logits;
            break;
        case LateStrategy::concat_dense:
        case LateStrategy::bilinear:
            state = nn::snapshot_params(model_->head);
            break;
        case LateStrategy::cross_attention:
            state.insert(state.end(), model_->gate_a.weights.data.begin(),
                         model_->gate_a.weights.data.end());
            state.insert(state.end(), model_->gate_a.bias.begin(), model_->gate_a.bias.end());
            state.insert(state.end(), model_->gate_b.weights.data.begin(),
                         model_->gate_b.weights.data.end());
            state.insert(state.end(), model_->gate_b.bias.begin(), model_->gate_b.bias.end());
            break;
        default:
            break;
    }
    return state;
}

void LateFusionProblem::restore(const std::vector<double>& state) {
    if (state.size() != parameter_count(*model_)) {
        throw std::runtime_error("LateFusionProblem: snapshot of " +
                                 std::to_string(state.size()) + " values, expected " +
                                 std::to_string(parameter_count(*model_)));
    }
    std::size_t offset = 0;
    auto pull = [&](double* dest, std::size_t count) {
        std::copy(state.begin() + static_cast<std::ptrdiff_t>(offset),
                  state.begin() + static_cast<std::ptrdiff_t>(offset + count), dest);
        offset += count;
    };
    switch (model_->strategy) {
        case LateStrategy::weighted_sum:
            pull(model_->mix_logits.data(), model_->mix_logits.size());
            break;
        case LateStrategy::concat_dense:
        case LateStrategy::bilinear:
            nn::restore_params(model_->head, state);
            break;
        case LateStrategy::cross_attention:
            pull(model_->gate_a.weights.data.data(), model_->gate_a.weights.data.size());
            pull(model_->gate_a.bias.data(), model_->gate_a.bias.size());
            pull(model_->gate_b.weights.data.data(), model_->gate_b.weights.data.size());
            pull(model_->gate_b.bias.data(), model_->gate_b.bias.size());
            break;
        default:
            break;
    }
}

double LateFusionProblem::eval_loss() const {
    const Matrix probs = late_fusion_forward(*model_, train_.fea_probs, train_.img_probs);
    return nn::weighted_cross_entropy(probs, train_.labels, class_weights_);
}

void LateFusionProblem::refresh_grads() {
    const LateAux aux = late_forward_aux(*model_, train_.fea_probs, train_.img_probs);
    const Matrix g =
        nn::weighted_cross_entropy_grad(aux.output, train_.labels, class_weights_);
    grads_ = late_backward(*model_, aux, train_.fea_probs, train_.img_probs, g);
}

std::pair<LateFusionModel, train::TrainHistory> train_late_fusion(
    LateStrategy strategy, const FusionSplit& train_split, const FusionSplit& val_split,
    const nn::ClassWeights& class_weights, const train::TrainConfig& config) {
    if (strategy == LateStrategy::average) {
        return {make_late_fusion_zero(LateStrategy::average), train::TrainHistory{}};
    }
    LateFusionModel model = make_late_fusion(strategy, config.seed);
    LateFusionProblem problem(model, train_split, val_split, class_weights);
    train::TrainHistory history = train::fit(problem, config);
    return {std::move(model), std::move(history)};
}

// ---- intermediate fusion ----

const char* to_string(GateActivation g) {
    switch (g) {
        case GateActivation::softmax: return "softmax";
        case GateActivation::sigmoid: return "sigmoid";
    }
    throw std::logic_error("to_string: bad GateActivation");
}

GateActivation gate_activation_from_string(const std::string& name) {
    if (name == "softmax") {
        return GateActivation::softmax;
    }
    if (name == "sigmoid") {
        return GateActivation::sigmoid;
    }
    throw std::runtime_error("unknown gate activation '" + name + "'");
}

std::size_t IntermediateFusionModel::parameter_count() const {
    return fea_branch.parameter_count() + img_branch.parameter_count() +
           gate_a.weights.data.size() + gate_a.bias.size() + gate_b.weights.data.size() +
           gate_b.bias.size() + head.parameter_count();
}

IntermediateFusionModel make_intermediate_fusion(const IntermediateConfig& config,
                                                 std::uint64_t seed) {
    if (config.projection_width < 128 || config.projection_width > 512) {
        throw std::runtime_error("make_intermediate_fusion: projection width " +
                                 std::to_string(config.projection_width) +
                                 " outside [128, 512]");
    }
    if (config.dropout_rate < 0.0 || config.dropout_rate >= 1.0) {
        throw std::runtime_error("make_intermediate_fusion: dropout rate must be in [0, 1)");
    }
    std::mt19937_64 rng(seed);
    const std::size_t w = config.projection_width;
    IntermediateFusionModel model;
    model.config = config;
    model.fea_branch.layers.push_back(
        nn::make_dense(model::kMlpFeatureDim, w, nn::Activation::identity, rng));
    model.fea_branch.layers.push_back(nn::make_batchnorm(w));
    model.img_branch.layers.push_back(
        nn::make_dense(data::kImageFeatureDim, w, nn::Activation::identity, rng));
    model.img_branch.layers.push_back(nn::make_batchnorm(w));
    model.gate_a = nn::make_dense(w, w, nn::Activation::identity, rng);
    model.gate_b = nn::make_dense(w, w, nn::Activation::identity, rng);
    model.head.layers.push_back(nn::DropoutLayer{config.dropout_rate});
    model.head.layers.push_back(
        nn::make_dense(2 * w, nn::kNumClasses, nn::Activation::softmax, rng));
    return model;
}

Matrix intermediate_fusion_forward(IntermediateFusionModel& model, const Matrix& fea_features,
                                   const Matrix& img_features, nn::Mode mode,
                                   std::uint64_t dropout_seed) {
    return intermediate_forward_aux(model, fea_features, img_features, mode, dropout_seed)
        .output;
}

Matrix intermediate_fusion_infer(const IntermediateFusionModel& model,
                                 const Matrix& fea_features, const Matrix& img_features) {
    check_paired(fea_features, img_features, "intermediate_fusion_infer");
    const Matrix h_fea = nn::network_infer(model.fea_branch, fea_features);
    const Matrix h_img = nn::network_infer(model.img_branch, img_features);
    const Matrix a = apply_gate(nn::dense_forward(model.gate_a, h_img),
                                model.config.gate_activation);
    const Matrix b = apply_gate(nn::dense_forward(model.gate_b, h_fea),
                                model.config.gate_activation);
    const Matrix z = hcat(elementwise_product(a, h_fea), elementwise_product(b, h_img));
    return nn::network_infer(model.head, z);
}

FeatureSplit feature_split(const data::MultimodalBundle& bundle, data::Split split,
                           const model::MlpModel& frozen) {
    FeatureSplit out;
    out.fea_features = model::extract_features(frozen, data::fea_matrix(bundle, split));
    out.img_features = data::image_feature_matrix(bundle, split);
    out.labels = data::label_vector(bundle, split);
    return out;
}

IntermediateProblem::IntermediateProblem(IntermediateFusionModel& model,
                                         FeatureSplit train_split, FeatureSplit val_split,
                                         const nn::ClassWeights& class_weights)
    : model_(&model),
      train_(std::move(train_split)),
      val_(std::move(val_split)),
      class_weights_(class_weights) {
    for (const FeatureSplit* split : {&train_, &val_}) {
        if (split->fea_features.rows != split->labels.size() ||
            split->img_features.rows != split->labels.size()) {
            throw std::runtime_error("IntermediateProblem: rows and labels misaligned");
        }
    }
}

std::vector<std::span<double>> IntermediateProblem::params() {
    std::vector<std::span<double>> spans;
    append_spans(spans, nn::param_spans(model_->fea_branch));
    append_spans(spans, nn::param_spans(model_->img_branch));
    spans.emplace_back(model_->gate_a.weights.data);
    spans.emplace_back(model_->gate_a.bias);
    spans.emplace_back(model_->gate_b.weights.data);
    spans.emplace_back(model_->gate_b.bias);
    append_spans(spans, nn::param_spans(model_->head));
    return spans;
}

std::vector<std::span<const double>> IntermediateProblem::grads() const {
    std::vector<std::span<const double>> spans;
    append_const_spans(spans, nn::grad_spans(grads_.fea_branch));
    append_const_spans(spans, nn::grad_spans(grads_.img_branch));
    spans.emplace_back(grads_.gate_a.weights.data);
    spans.emplace_back(grads_.gate_a.bias);
    spans.emplace_back(grads_.gate_b.weights.data);
    spans.emplace_back(grads_.gate_b.bias);
    append_const_spans(spans, nn::grad_spans(grads_.head));
    return spans;
}

double IntermediateProblem::compute_batch(const std::vector<std::size_t>& rows,
                                          std::uint64_t dropout_seed) {
    const Matrix fea = take_rows(train_.fea_features, rows);
    const Matrix img = take_rows(train_.img_features, rows);
    const std::vector<int> labels = take_labels(train_.labels, rows);
    const IntermediateAux aux =
        intermediate_forward_aux(*model_, fea, img, nn::Mode::train, dropout_seed);
    const double loss = nn::weighted_cross_entropy(aux.output, labels, class_weights_);
    const Matrix g = nn::weighted_cross_entropy_grad(aux.output, labels, class_weights_);
    grads_ = intermediate_backward(*model_, aux, g);
    return loss;
}

double IntermediateProblem::train_accuracy() const {
    const Matrix probs =
        intermediate_fusion_infer(*model_, train_.fea_features, train_.img_features);
    return train::accuracy_of(nn::argmax_rows(probs), train_.labels);
}

double IntermediateProblem::val_accuracy() const {
    const Matrix probs = intermediate_fusion_infer(*model_, val_.fea_features, val_.img_features);
    return train::accuracy_of(nn::argmax_rows(probs), val_.labels);
}

std::vector<double> IntermediateProblem::snapshot() const {
    std::vector<double> state = nn::snapshot_params(model_->fea_branch);
    const std::vector<double> img = nn::snapshot_params(model_->img_branch);
    state.insert(state.end(), img.begin(), img.end());
    state.insert(state.end(), model_->gate_a.weights.data.begin(),
                 model_->gate_a.weights.data.end());
    state.insert(state.end(), model_->gate_a.bias.begin(), model_->gate_a.bias.end());
    state.insert(state.end(), model_->gate_b.weights.data.begin(),
                 model_->gate_b.weights.data.end());
    state.insert(state.end(), model_->gate_b.bias.begin(), model_->gate_b.bias.end());
    const std::vector<double> head = nn::snapshot_params(model_->head);
    state.insert(state.end(), head.begin(), head.end());
    return state;
}

void IntermediateProblem::restore(const std::vector<double>& state) {
    // Part sizes are fixed by the architecture; slice the flat snapshot.
    const std::size_t fea_size = nn::snapshot_params(model_->fea_branch).size();
    const std::size_t img_size = nn::snapshot_params(model_->img_branch).size();
    const std::size_t head_size = nn::snapshot_params(model_->head).size();
    const std::size_t gate_size = model_->gate_a.weights.data.size() + model_->gate_a.bias.size();
    if (state.size() != fea_size + img_size + 2 * gate_size + head_size) {
        throw std::runtime_error("IntermediateProblem: snapshot of " +
                                 std::to_string(state.size()) + " values, expected " +
                                 std::to_string(fea_size + img_size + 2 * gate_size + head_size));
    }
    std::size_t offset = 0;
    auto slice = [&](std::size_t count) {
        std::vector<double> part(state.begin() + static_cast<std::ptrdiff_t>(offset),
                                 state.begin() + static_cast<std::ptrdiff_t>(offset + count));
        offset += count;
        return part;
    };
    nn::restore_params(model_->fea_branch, slice(fea_size));
    nn::restore_params(model_->img_branch, slice(img_size));
    auto pull = [&](double* dest, std::size_t count) {
        std::copy(state.begin() + static_cast<std::ptrdiff_t>(offset),
                  state.begin() + static_cast<std::ptrdiff_t>(offset + count), dest);
        offset += count;
    };
    pull(model_->gate_a.weights.data.data(), model_->gate_a.weights.data.size());
    pull(model_->gate_a.bias.data(), model_->gate_a.bias.size());
    pull(model_->gate_b.weights.data.data(), model_->gate_b.weights.data.size());
    pull(model_->gate_b.bias.data(), model_->gate_b.bias.size());
    nn::restore_params(model_->head, slice(head_size));
}

double IntermediateProblem::eval_loss() const {
    const Matrix probs =
        intermediate_fusion_infer(*model_, train_.fea_features, train_.img_features);
    return nn::weighted_cross_entropy(probs, train_.labels, class_weights_);
}

void IntermediateProblem::refresh_grads() {
    // Inference mode: batch norm on running statistics, dropout inactive.
    const IntermediateAux aux = intermediate_forward_aux(
        *model_, train_.fea_features, train_.img_features, nn::Mode::inference, 0);
    const Matrix g =
        nn::weighted_cross_entropy_grad(aux.output, train_.labels, class_weights_);
    grads_ = intermediate_backward(*model_, aux, g);
}

std::pair<IntermediateFusionModel, train::TrainHistory> train_intermediate_fusion(
    const model::MlpModel& frozen, const data::MultimodalBundle& bundle,
    const IntermediateConfig& fusion_config, const train::TrainConfig& config) {
    if (bundle.split_size(data::Split::train) == 0) {
        throw std::runtime_error("train_intermediate_fusion: empty train split");
    }
    if (bundle.split_size(data::Split::val) == 0) {
        throw std::runtime_error("train_intermediate_fusion: empty val split");
    }
    const std::vector<double> frozen_before = nn::snapshot_params(frozen.net);

    FeatureSplit train_split = feature_split(bundle, data::Split::train, frozen);
    FeatureSplit val_split = feature_split(bundle, data::Split::val, frozen);
    if (train_split.fea_features.cols != model::kMlpFeatureDim) {
        throw std::runtime_error("train_intermediate_fusion: frozen model extracts " +
                                 std::to_string(train_split.fea_features.cols) +
                                 "-dim features, expected " +
                                 std::to_string(model::kMlpFeatureDim));
    }
    const nn::ClassWeights weights =
        config.class_weighting
            ? data::compute_class_weights(bundle.class_counts(data::Split::train))
            : nn::uniform_class_weights();

    IntermediateFusionModel model = make_intermediate_fusion(fusion_config, config.seed);
    IntermediateProblem problem(model, std::move(train_split), std::move(val_split), weights);
    train::TrainHistory history = train::fit(problem, config);

    const std::vector<double> frozen_after = nn::snapshot_params(frozen.net);
    if (frozen_before != frozen_after) {
        throw std::logic_error(
            "train_intermediate_fusion: frozen feature extractor was mutated");
    }
    return {std::move(model), std::move(history)};
}

}  // namespace fervr::fuse
