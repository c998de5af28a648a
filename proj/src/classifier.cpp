#include "ndsal/classifier.hpp"

#include "ndsal/error.hpp"
#include "ndsal/rng.hpp"
#include "ndsal/simd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ndsal {
namespace {

void check_labels(std::span<const ClassLabel> y, std::size_t classes) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= classes) {
            throw InvalidArgument("label " + std::to_string(y[i]) + " at row " + std::to_string(i) +
                                  " outside 0.." + std::to_string(classes - 1));
        }
    }
}

void check_input(const ClassifierParams& params, const Matrix& x) {
    if (x.cols() != params.input_dim) {
        throw InvalidArgument("input dimension " + std::to_string(x.cols()) + " does not match model dimension " +
                              std::to_string(params.input_dim));
    }
}

// Hidden activations (after ReLU and the optional mask) for one sample.
void hidden_layer(const ClassifierParams& p, const double* x, const double* mask, double* pre, double* act) {
    const auto& kern = simd::kernels();
    for (std::size_t j = 0; j < p.hidden; ++j) {
        pre[j] = kern.dot(p.w1.row(j).data(), x, p.input_dim) + p.b1[j];
        const double relu = pre[j] > 0.0 ? pre[j] : 0.0;
        act[j] = mask != nullptr ? relu * mask[j] : relu;
    }
}

void output_layer(const ClassifierParams& p, const double* act, double* probs) {
    const auto& kern = simd::kernels();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < p.classes; ++c) {
        probs[c] = kern.dot(p.w2.row(c).data(), act, p.hidden) + p.b2[c];
        peak = std::max(peak, probs[c]);
    }
    double total = 0.0;
    for (std::size_t c = 0; c < p.classes; ++c) {
        probs[c] = std::exp(probs[c] - peak);
        total += probs[c];
    }
    for (std::size_t c = 0; c < p.classes; ++c) probs[c] /= total;
}

}  // namespace

ClassifierParams initialize_classifier(std::size_t input_dim, std::size_t classes, const ClassifierConfig& config) {
    if (input_dim == 0 || classes < 2 || config.hidden == 0) {
        throw InvalidArgument("classifier needs input_dim >= 1, classes >= 2 and hidden >= 1");
    }
    if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0)) {
        throw InvalidArgument("dropout rate must lie in [0, 1)");
    }
    ClassifierParams p;
    p.input_dim = input_dim;
    p.hidden = config.hidden;
    p.classes = classes;
    p.dropout_rate = config.dropout_rate;
    p.w1 = Matrix(config.hidden, input_dim);
    p.b1.assign(config.hidden, 0.0);
    p.w2 = Matrix(classes, config.hidden);
    p.b2.assign(classes, 0.0);

    Rng rng(config.seed);
    const double limit1 = std::sqrt(6.0 / static_cast<double>(input_dim + config.hidden));
    const double limit2 = std::sqrt(6.0 / static_cast<double>(config.hidden + classes));
    std::uniform_real_distribution<double> u1(-limit1, limit1);
    std::uniform_real_distribution<double> u2(-limit2, limit2);
    for (double& w : p.w1.data()) w = u1(rng);
    for (double& w : p.w2.data()) w = u2(rng);
    return p;
}

Matrix sample_dropout_mask(std::size_t samples, std::size_t hidden, double rate, std::uint64_t seed) {
    Matrix mask(samples, hidden, 1.0);
    if (rate <= 0.0) return mask;
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : mask.data()) m = unit(rng) < rate ? 0.0 : keep_scale;
    return mask;
}

double loss_and_gradient(const ClassifierParams& p, const Matrix& x, std::span<const ClassLabel> y,
                         const Matrix& mask, Gradients* grad) {
    const std::size_t n = x.rows();
    if (n == 0 || y.size() != n) throw InvalidArgument("loss_and_gradient: batch/label size mismatch");
    check_input(p, x);
    check_labels(y, p.classes);
    const bool masked = !mask.empty();
    if (masked && (mask.rows() != n || mask.cols() != p.hidden)) {
        throw InvalidArgument("dropout mask shape does not match the batch");
    }
    const auto& kern = simd::kernels();

    if (grad != nullptr) {
        grad->w1 = Matrix(p.hidden, p.input_dim);
        grad->b1.assign(p.hidden, 0.0);
        grad->w2 = Matrix(p.classes, p.hidden);
        grad->b2.assign(p.classes, 0.0);
    }
    std::vector<double> pre(p.hidden);
    std::vector<double> act(p.hidden);
    std::vector<double> probs(p.classes);
    std::vector<double> dact(p.hidden);
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.row(i).data();
        const double* mi = masked ? mask.row(i).data() : nullptr;
        hidden_layer(p, xi, mi, pre.data(), act.data());
        output_layer(p, act.data(), probs.data());
        const auto label = static_cast<std::size_t>(y[i]);
        loss -= std::log(std::max(probs[label], 1e-300));
        if (grad == nullptr) continue;

        std::ranges::fill(dact, 0.0);
        for (std::size_t c = 0; c < p.classes; ++c) {
            const double dlogit = (probs[c] - (c == label ? 1.0 : 0.0)) * inv_n;
            grad->b2[c] += dlogit;
            kern.axpy(dlogit, act.data(), grad->w2.row(c).data(), p.hidden);
            kern.axpy(dlogit, p.w2.row(c).data(), dact.data(), p.hidden);
        }
        for (std::size_t j = 0; j < p.hidden; ++j) {
            if (pre[j] <= 0.0) continue;
            const double dpre = masked ? dact[j] * mi[j] : dact[j];
            if (dpre == 0.0) continue;
            grad->b1[j] += dpre;
            kern.axpy(dpre, xi, grad->w1.row(j).data(), p.input_dim);
        }
    }
    return loss * inv_n;
}

ClassifierParams train_classifier(const Matrix& x, std::span<const ClassLabel> y, std::size_t classes,
                                  const ClassifierConfig& config, std::vector<double>* epoch_losses) {
    const std::size_t n = x.rows();
    if (n == 0) throw InvalidArgument("cannot train on an empty labeled set");
    if (y.size() != n) throw InvalidArgument("label count does not match sample count");
    require_finite(x);
    check_labels(y, classes);
    if (config.batch_size == 0) throw InvalidArgument("batch size must be at least 1");

    ClassifierParams p = initialize_classifier(x.cols(), classes, config);
    if (epoch_losses != nullptr) epoch_losses->clear();

    Rng rng(derive_seed(config.seed, 1));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Gradients grad;
    const auto& kern = simd::kernels();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            Matrix batch(end - start, x.cols());
            std::vector<ClassLabel> labels(end - start);
            for (std::size_t r = start; r < end; ++r) {
                std::ranges::copy(x.row(order[r]), batch.row(r - start).begin());
                labels[r - start] = y[order[r]];
            }
            Matrix mask;
            if (p.dropout_rate > 0.0) mask = sample_dropout_mask(batch.rows(), p.hidden, p.dropout_rate, rng());
            epoch_loss += loss_and_gradient(p, batch, labels, mask, &grad);
            ++batches;

            const double step = -config.learning_rate;
            kern.axpy(step, grad.w1.data().data(), p.w1.data().data(), p.w1.data().size());
            kern.axpy(step, grad.b1.data(), p.b1.data(), p.b1.size());
            kern.axpy(step, grad.w2.data().data(), p.w2.data().data(), p.w2.data().size());
            kern.axpy(step, grad.b2.data(), p.b2.data(), p.b2.size());
        }
        if (epoch_losses != nullptr) epoch_losses->push_back(epoch_loss / static_cast<double>(batches));
    }
    return p;
}

ProbMatrix predict_proba(const ClassifierParams& params, const Matrix& x, bool dropout_active, std::uint64_t seed) {
    check_input(params, x);
    const std::size_t n = x.rows();
    Matrix mask;
    if (dropout_active && params.dropout_rate > 0.0) {
        mask = sample_dropout_mask(n, params.hidden, params.dropout_rate, seed);
    }
    ProbMatrix out{Matrix(n, params.classes)};
    std::vector<double> pre(params.hidden);
    std::vector<double> act(params.hidden);
    for (std::size_t i = 0; i < n; ++i) {
        hidden_layer(params, x.row(i).data(), mask.empty() ? nullptr : mask.row(i).data(), pre.data(), act.data());
        output_layer(params, act.data(), out.values.row(i).data());
    }
    return out;
}

ProbMatrix mc_predict(const ClassifierParams& params, const Matrix& x, int passes, std::uint64_t seed) {
    if (passes < 1) throw InvalidArgument("mc_predict needs at least one pass");
    ProbMatrix mean = predict_proba(params, x, true, derive_seed(seed, 0));
    for (int pass = 1; pass < passes; ++pass) {
        const ProbMatrix sample = predict_proba(params, x, true, derive_seed(seed, static_cast<std::uint64_t>(pass)));
        // Running mean: identical passes leave the mean bitwise unchanged.
        const double weight = 1.0 / static_cast<double>(pass + 1);
        auto m = mean.values.data();
        auto s = sample.values.data();
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += (s[i] - m[i]) * weight;
    }
    return mean;
}

std::vector<int> predict_labels(const ProbMatrix& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const auto row = probs.row(i);
        out[i] = static_cast<int>(std::ranges::max_element(row) - row.begin());
    }
    return out;
}

std::vector<double> flatten(const ClassifierParams& params) {
    std::vector<double> out;
    out.reserve(params.w1.data().size() + params.b1.size() + params.w2.data().size() + params.b2.size());
    out.insert(out.end(), params.w1.data().begin(), params.w1.data().end());
    out.insert(out.end(), params.b1.begin(), params.b1.end());
    out.insert(out.end(), params.w2.data().begin(), params.w2.data().end());
    out.insert(out.end(), params.b2.begin(), params.b2.end());
    return out;
}

void unflatten(std::span<const double> values, ClassifierParams& params) {
    const std::size_t total = params.w1.data().size() + params.b1.size() + params.w2.data().size() + params.b2.size();
    if (values.size() != total) throw InvalidArgument("parameter vector has the wrong length");
    auto it = values.begin();
    auto take = [&](std::span<double> dst) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
        it += static_cast<std::ptrdiff_t>(dst.size());
    };
    take(params.w1.data());
    take(params.b1);
    take(params.w2.data());
    take(params.b2);
}

std::vector<double> flatten(const Gradients& g) {
    std::vector<double> out;
    out.insert(out.end(), g.w1.data().begin(), g.w1.data().end());
    out.insert(out.end(), g.b1.begin(), g.b1.end());
    out.insert(out.end(), g.w2.data().begin(), g.w2.data().end());
    out.insert(out.end(), g.b2.begin(), g.b2.end());
    return out;
}

}  // namespace ndsal
