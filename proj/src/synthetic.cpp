#include "ndsal/error.hpp"
#include "ndsal/harness.hpp"
#include "ndsal/rng.hpp"
#include "ndsal/simd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ndsal {

namespace {

// Class sizes from the class tables of the two benchmark corpora.
constexpr double kTwitterAbusive[] = {22766.0, 4496.0, 13996.0, 53560.0};
constexpr double kWikiAttack[] = {13542.0, 101881.0};

std::vector<double> normalize(std::span<const double> counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> out;
    for (double c : counts) out.push_back(c / total);
    return out;
}

}  // namespace

std::vector<double> preset_proportions(std::string_view preset, std::size_t balanced_classes) {
    if (preset == "twitter-abusive") return normalize(kTwitterAbusive);
    if (preset == "wiki-attack") return normalize(kWikiAttack);
    if (preset == "balanced") {
        if (balanced_classes < 2) throw InvalidArgument("balanced preset needs at least 2 classes");
        return std::vector<double>(balanced_classes, 1.0 / static_cast<double>(balanced_classes));
    }
    throw InvalidArgument("unknown preset '" + std::string(preset) + "' (expected twitter-abusive|wiki-attack|balanced)");
}

std::vector<std::string> preset_class_names(std::string_view preset, std::size_t balanced_classes) {
    if (preset == "twitter-abusive") return {"abusive", "hateful", "spam", "normal"};
    if (preset == "wiki-attack") return {"attack", "normal"};
    std::vector<std::string> names;
    for (std::size_t c = 0; c < preset_proportions(preset, balanced_classes).size(); ++c) {
        names.push_back("class" + std::to_string(c));
    }
    return names;
}

std::vector<std::size_t> apportion(std::span<const double> proportions, std::size_t n) {
    const std::size_t k = proportions.size();
    if (k == 0 || n < k) throw InvalidArgument("cannot apportion " + std::to_string(n) + " samples over " +
                                               std::to_string(k) + " classes");
    std::vector<std::size_t> counts(k);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double exact = proportions[c] * static_cast<double>(n);
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[c];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::ranges::stable_sort(remainders, [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % k].second];
    // Keep every class populated, taking from the largest.
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            ++counts[c];
            --*std::ranges::max_element(counts);
        }
    }
    return counts;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    const std::size_t k = spec.counts.size();
    if (k < 2) throw InvalidArgument("synthetic data needs at least 2 classes");
    if (spec.dim < 1) throw InvalidArgument("synthetic data needs dimension >= 1");
    if (!(spec.spread > 0.0)) throw InvalidArgument("blob spread must be positive");
    for (std::size_t c : spec.counts) {
        if (c < 1) throw InvalidArgument("every class needs at least one sample");
    }

    Rng rng(spec.seed);
    std::normal_distribution<double> gauss;
    const double min_separation = spec.min_center_distance.value_or(6.0 * spec.spread);
    if (!(min_separation >= 0.0)) throw InvalidArgument("minimum center distance must be non-negative");
    // Typical center distance: 8 * spread, or 1.5x the requested minimum.
    const double typical = std::max(8.0 * spec.spread, 1.5 * min_separation);
    const double center_scale = typical / std::sqrt(2.0 * static_cast<double>(spec.dim));

    Matrix centers(k, spec.dim);
    int attempts = 0;
    for (std::size_t c = 0; c < k;) {
        if (++attempts > 1000) {
            throw InvalidArgument("could not place " + std::to_string(k) + " blob centers after 1000 attempts");
        }
        for (double& v : centers.row(c)) v = center_scale * gauss(rng);
        bool ok = true;
        for (std::size_t o = 0; o < c && ok; ++o) {
            ok = std::sqrt(simd::squared_distance(centers.row(c).data(), centers.row(o).data(), spec.dim)) >=
                 min_separation;
        }
        if (ok) ++c;
    }

    const std::size_t n = std::accumulate(spec.counts.begin(), spec.counts.end(), std::size_t{0});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    Matrix values(n, spec.dim);
    std::vector<ClassLabel> labels(n);
    std::size_t next = 0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < spec.counts[c]; ++i, ++next) {
            const std::size_t row = order[next];
            labels[row] = static_cast<ClassLabel>(c);
            for (std::size_t j = 0; j < spec.dim; ++j) values(row, j) = centers(c, j) + spec.spread * gauss(rng);
        }
    }

    Dataset out{FeatureMatrix(std::move(values)), std::move(labels), k, spec.class_names};
    if (out.class_names.size() != k) {
        out.class_names.clear();
        for (std::size_t c = 0; c < k; ++c) out.class_names.push_back("class" + std::to_string(c));
    }
    return out;
}

}  // namespace ndsal
