#include "ndsal/error.hpp"
#include "ndsal/harness.hpp"

#include <string>

namespace ndsal {

F1Report f1_scores(std::span<const int> predictions, std::span<const int> truth, std::size_t classes) {
    if (predictions.empty()) throw InvalidArgument("F1 of an empty prediction set is undefined");
    if (predictions.size() != truth.size()) throw InvalidArgument("prediction and truth lengths differ");
    std::vector<double> tp(classes, 0.0);
    std::vector<double> fp(classes, 0.0);
    std::vector<double> fn(classes, 0.0);
    double correct = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int p = predictions[i];
        const int t = truth[i];
        if (p < 0 || static_cast<std::size_t>(p) >= classes || t < 0 || static_cast<std::size_t>(t) >= classes) {
            throw InvalidArgument("class index out of range at position " + std::to_string(i));
        }
        if (p == t) {
            tp[static_cast<std::size_t>(t)] += 1.0;
            correct += 1.0;
        } else {
            fp[static_cast<std::size_t>(p)] += 1.0;
            fn[static_cast<std::size_t>(t)] += 1.0;
        }
    }
    F1Report out;
    out.per_class.resize(classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double denom = 2.0 * tp[c] + fp[c] + fn[c];
        if (denom == 0.0) {
            out.absent_classes.push_back(static_cast<int>(c));
            out.per_class[c] = 0.0;
        } else {
            out.per_class[c] = 2.0 * tp[c] / denom;
        }
        sum += out.per_class[c];
    }
    out.macro = sum / static_cast<double>(classes);
    // Single-label multiclass: micro F1 equals accuracy.
    out.micro = correct / static_cast<double>(truth.size());
    return out;
}

double macro_f1(std::span<const int> predictions, std::span<const int> truth, std::size_t classes) {
    return f1_scores(predictions, truth, classes).macro;
}

}  // namespace ndsal
