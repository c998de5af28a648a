#pragma once

#include "ndsal/classifier.hpp"
#include "ndsal/dominant_set.hpp"
#include "ndsal/numerics.hpp"
#include "ndsal/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ndsal {

enum class Strategy { random, min_margin, var_ratio, nds, nds_plus };

// Command-line/config spellings: random, minmargin, varratio, nds, ndsplus.
std::string_view strategy_name(Strategy s) noexcept;
Strategy parse_strategy(std::string_view name);

// Per-sample sampling weights over the current pool.
struct AcquisitionScore {
    std::vector<SampleId> ids;
    std::vector<double> phi;
    Strategy strategy = Strategy::random;

    // NDS diagnostics. `strata` holds each cluster's non-dominant ids and
    // drives the stratified draw.
    std::vector<std::vector<SampleId>> strata;
    std::vector<double> cutoff_multipliers;
    std::vector<std::size_t> shortfalls;
    std::optional<double> alpha;
};

enum class AlphaDecay { additive, multiplicative };

// alpha = max(0, 1 - decay * cycle), or (1 - decay)^cycle when multiplicative.
struct MixingState {
    double decay_per_cycle = 0.02;
    int cycle = 0;
    AlphaDecay mode = AlphaDecay::additive;

    double alpha() const noexcept;
};

AcquisitionScore score_random(std::span<const SampleId> pool);

// weight = 1 - (p(c1|x) - p(c2|x)) for the two most probable classes.
AcquisitionScore score_min_margin(std::span<const SampleId> ids, const ProbMatrix& probs);

// weight = 1 - max_c p(c|x), intended for MC-dropout averaged probabilities.
AcquisitionScore score_var_ratio(std::span<const SampleId> ids, const ProbMatrix& probs);

// Weight 1 for every id in some cluster's non-dominant set, 0 otherwise.
// `assignment` labels align with the rows of `pool`; each cluster must supply
// ceil(m / K) non-dominant ids, escalating its cutoff when needed.
AcquisitionScore score_nds(const FeatureMatrix& pool, const ClusterAssignment& assignment, std::size_t m,
                           const NdsOptions& options = {});

// alpha * normalize(nds) + (1 - alpha) * normalize(uncertainty).
AcquisitionScore score_nds_plus(const AcquisitionScore& nds, const AcquisitionScore& uncertainty,
                                const MixingState& mixing);

struct DrawResult {
    std::vector<SampleId> selected;
    // Ids taken uniformly from zero-weight samples because the positive
    // support was smaller than the request.
    std::size_t filled_from_remainder = 0;
};

// Selects min(m, pool size) distinct ids. NDS scores with strata are drawn
// stratified (m/K per cluster, remainder round-robin in cluster order);
// every other score is drawn without replacement proportional to weight.
DrawResult draw(const AcquisitionScore& scores, std::size_t m, std::uint64_t seed);

}  // namespace ndsal
