#include "ndsal/acquisition.hpp"

#include "ndsal/error.hpp"
#include "ndsal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace ndsal {

std::string_view strategy_name(Strategy s) noexcept {
    switch (s) {
    case Strategy::random: return "random";
    case Strategy::min_margin: return "minmargin";
    case Strategy::var_ratio: return "varratio";
    case Strategy::nds: return "nds";
    case Strategy::nds_plus: return "ndsplus";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view name) {
    for (Strategy s : {Strategy::random, Strategy::min_margin, Strategy::var_ratio, Strategy::nds, Strategy::nds_plus}) {
        if (name == strategy_name(s)) return s;
    }
    throw InvalidArgument("unknown strategy '" + std::string(name) +
                          "' (expected random|minmargin|varratio|nds|ndsplus)");
}

double MixingState::alpha() const noexcept {
    if (mode == AlphaDecay::multiplicative) return std::pow(1.0 - decay_per_cycle, cycle);
    return std::max(0.0, 1.0 - decay_per_cycle * cycle);
}

AcquisitionScore score_random(std::span<const SampleId> pool) {
    if (pool.empty()) throw InvalidArgument("random scoring needs a non-empty pool");
    AcquisitionScore out;
    out.strategy = Strategy::random;
    out.ids.assign(pool.begin(), pool.end());
    out.phi.assign(pool.size(), 1.0 / static_cast<double>(pool.size()));
    return out;
}

AcquisitionScore score_min_margin(std::span<const SampleId> ids, const ProbMatrix& probs) {
    if (probs.classes() < 2) throw InvalidArgument("minimum margin needs at least two classes");
    if (ids.size() != probs.rows()) throw InvalidArgument("id count does not match probability rows");
    AcquisitionScore out;
    out.strategy = Strategy::min_margin;
    out.ids.assign(ids.begin(), ids.end());
    out.phi.resize(ids.size());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        double first = -1.0;
        double second = -1.0;
        for (double p : probs.row(i)) {
            if (p > first) {
                second = first;
                first = p;
            } else if (p > second) {
                second = p;
            }
        }
        out.phi[i] = std::clamp(1.0 - (first - second), 0.0, 1.0);
    }
    return out;
}

AcquisitionScore score_var_ratio(std::span<const SampleId> ids, const ProbMatrix& probs) {
    if (ids.size() != probs.rows()) throw InvalidArgument("id count does not match probability rows");
    AcquisitionScore out;
    out.strategy = Strategy::var_ratio;
    out.ids.assign(ids.begin(), ids.end());
    out.phi.resize(ids.size());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const auto row = probs.row(i);
        out.phi[i] = std::max(0.0, 1.0 - *std::ranges::max_element(row));
    }
    return out;
}

AcquisitionScore score_nds(const FeatureMatrix& pool, const ClusterAssignment& assignment, std::size_t m,
                           const NdsOptions& options) {
    const std::size_t k = assignment.k;
    if (m < k) {
        throw InvalidArgument("NDS needs a draw size of at least K (m=" + std::to_string(m) +
                              ", K=" + std::to_string(k) + ")");
    }
    const std::size_t required = (m + k - 1) / k;
    const std::vector<ClusterNds> clusters = nds_pools(pool, assignment, required, options);

    AcquisitionScore out;
    out.strategy = Strategy::nds;
    out.ids = pool.ids();
    out.phi.assign(pool.rows(), 0.0);
    std::unordered_map<SampleId, std::size_t> index;
    for (std::size_t i = 0; i < out.ids.size(); ++i) index.emplace(out.ids[i], i);
    for (const ClusterNds& c : clusters) {
        for (SampleId id : c.pool.split.nondominant_ids) out.phi[index.at(id)] = 1.0;
        out.strata.push_back(c.pool.split.nondominant_ids);
        out.cutoff_multipliers.push_back(c.pool.split.cutoff_multiplier);
        out.shortfalls.push_back(c.pool.shortfall);
    }
    return out;
}

namespace {

std::vector<double> normalized(const std::vector<double>& phi) {
    double total = 0.0;
    for (double v : phi) total += v;
    std::vector<double> out(phi.size(), 0.0);
    if (total > 0.0) {
        for (std::size_t i = 0; i < phi.size(); ++i) out[i] = phi[i] / total;
    }
    return out;
}

}  // namespace

AcquisitionScore score_nds_plus(const AcquisitionScore& nds, const AcquisitionScore& uncertainty,
                                const MixingState& mixing) {
    if (nds.ids != uncertainty.ids) throw InvalidArgument("NDS+ needs both scores over the identical id set");
    for (double u : uncertainty.phi) {
        if (!(u >= 0.0 && u <= 1.0)) throw InvalidArgument("uncertainty weights must lie in [0, 1]");
    }
    const double alpha = mixing.alpha();
    const std::vector<double> a = normalized(nds.phi);
    const std::vector<double> b = normalized(uncertainty.phi);

    AcquisitionScore out;
    out.strategy = Strategy::nds_plus;
    out.ids = nds.ids;
    out.phi.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (alpha == 1.0) {
            out.phi[i] = a[i];
        } else if (alpha == 0.0) {
            out.phi[i] = b[i];
        } else {
            out.phi[i] = alpha * a[i] + (1.0 - alpha) * b[i];
        }
    }
    out.cutoff_multipliers = nds.cutoff_multipliers;
    out.shortfalls = nds.shortfalls;
    out.alpha = alpha;
    return out;
}

DrawResult draw(const AcquisitionScore& scores, std::size_t m, std::uint64_t seed) {
    const std::size_t n = scores.ids.size();
    if (n == 0) throw InvalidArgument("cannot draw from an empty pool");
    if (m < 1) throw InvalidArgument("draw size must be at least 1");
    if (scores.phi.size() != n) throw InvalidArgument("score has mismatched id and weight counts");
    for (double w : scores.phi) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("acquisition weights must be finite and >= 0");
    }
    const std::size_t take = std::min(m, n);
    Rng rng(seed);
    DrawResult out;
    std::unordered_set<SampleId> chosen;

    if (scores.strategy == Strategy::nds && !scores.strata.empty()) {
        const std::size_t k = scores.strata.size();
        std::vector<std::vector<SampleId>> shuffled = scores.strata;
        for (auto& s : shuffled) std::shuffle(s.begin(), s.end(), rng);
        std::vector<std::size_t> used(k, 0);
        std::vector<std::size_t> quota(k, take / k);
        for (std::size_t c = 0; c < take % k; ++c) ++quota[c];
        for (std::size_t c = 0; c < k; ++c) {
            const std::size_t got = std::min(quota[c], shuffled[c].size());
            for (std::size_t i = 0; i < got; ++i) out.selected.push_back(shuffled[c][i]);
            used[c] = got;
        }
        // Quota a small cluster could not meet moves round-robin to the others.
        bool progress = true;
        while (out.selected.size() < take && progress) {
            progress = false;
            for (std::size_t c = 0; c < k && out.selected.size() < take; ++c) {
                if (used[c] < shuffled[c].size()) {
                    out.selected.push_back(shuffled[c][used[c]++]);
                    progress = true;
                }
            }
        }
    } else {
        // Weighted sampling without replacement: keep the largest log(u)/w.
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<std::pair<double, std::size_t>> keys;
        keys.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            double u = unit(rng);
            if (scores.phi[i] <= 0.0) continue;
            if (u <= 0.0) u = std::numeric_limits<double>::min();
            keys.emplace_back(std::log(u) / scores.phi[i], i);
        }
        const std::size_t got = std::min(take, keys.size());
        std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(got), keys.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        for (std::size_t i = 0; i < got; ++i) out.selected.push_back(scores.ids[keys[i].second]);
    }

    if (out.selected.size() < take) {
        chosen.insert(out.selected.begin(), out.selected.end());
        std::vector<SampleId> rest;
        for (SampleId id : scores.ids) {
            if (!chosen.contains(id)) rest.push_back(id);
        }
        std::shuffle(rest.begin(), rest.end(), rng);
        const std::size_t missing = take - out.selected.size();
        out.selected.insert(out.selected.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(missing));
        out.filled_from_remainder = missing;
    }
    return out;
}

}  // namespace ndsal
