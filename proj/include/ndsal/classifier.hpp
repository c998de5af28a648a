#pragma once

#include "ndsal/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ndsal {

// d -> hidden (ReLU) -> dropout -> K (softmax) network used as the model
// interrogated by the uncertainty acquisitions.
struct ClassifierConfig {
    std::size_t hidden = 64;
    double dropout_rate = 0.2;
    int epochs = 10;
    double learning_rate = 1e-2;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
};

struct ClassifierParams {
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    std::size_t classes = 0;
    Matrix w1;                  // hidden x input_dim
    std::vector<double> b1;     // hidden
    Matrix w2;                  // classes x hidden
    std::vector<double> b2;     // classes
    double dropout_rate = 0.0;

    bool operator==(const ClassifierParams&) const = default;
};

// Row-stochastic n x K matrix of class probabilities.
struct ProbMatrix {
    Matrix values;
    std::size_t rows() const noexcept { return values.rows(); }
    std::size_t classes() const noexcept { return values.cols(); }
    std::span<const double> row(std::size_t r) const noexcept { return values.row(r); }
};

// Fresh Glorot-uniform weights and zero biases drawn from `config.seed`.
ClassifierParams initialize_classifier(std::size_t input_dim, std::size_t classes, const ClassifierConfig& config);

// Minibatch gradient descent on mean cross-entropy from a fresh
// initialization (no warm start). Throws InvalidArgument for labels outside
// [0, classes). When `epoch_losses` is given it receives the mean minibatch
// loss of each epoch.
ClassifierParams train_classifier(const Matrix& x, std::span<const ClassLabel> y, std::size_t classes,
                                  const ClassifierConfig& config, std::vector<double>* epoch_losses = nullptr);

// Softmax outputs. With `dropout_active`, hidden units are dropped
// independently per sample at the model's dropout rate (inverted scaling),
// driven by `seed`.
ProbMatrix predict_proba(const ClassifierParams& params, const Matrix& x, bool dropout_active = false,
                         std::uint64_t seed = 0);

// Mean of `passes` dropout-active predictions with per-pass derived seeds.
ProbMatrix mc_predict(const ClassifierParams& params, const Matrix& x, int passes, std::uint64_t seed);

std::vector<int> predict_labels(const ProbMatrix& probs);

// Gradient of the mean cross-entropy, in the same layout as the parameters.
struct Gradients {
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;
};

// Multiplier per (sample, hidden unit): 0 for dropped units, 1/(1-p) for
// kept ones. An empty mask means no dropout.
Matrix sample_dropout_mask(std::size_t samples, std::size_t hidden, double rate, std::uint64_t seed);

double loss_and_gradient(const ClassifierParams& params, const Matrix& x, std::span<const ClassLabel> y,
                         const Matrix& mask, Gradients* gradients);

std::vector<double> flatten(const ClassifierParams& params);
void unflatten(std::span<const double> values, ClassifierParams& params);
std::vector<double> flatten(const Gradients& gradients);

}  // namespace ndsal
