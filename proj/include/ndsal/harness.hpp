#pragma once

#include "ndsal/acquisition.hpp"
#include "ndsal/classifier.hpp"
#include "ndsal/numerics.hpp"
#include "ndsal/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ndsal {

struct Dataset {
    FeatureMatrix features;
    std::vector<ClassLabel> labels;  // aligned with features rows
    std::size_t classes = 0;
    std::vector<std::string> class_names;

    ClassLabel label_of(SampleId id) const;
};

// ---- synthetic data ---------------------------------------------------------

struct SyntheticSpec {
    std::vector<std::size_t> counts;  // one entry per class
    std::size_t dim = 2;
    double spread = 1.0;              // per-coordinate standard deviation
    // Minimum distance between blob centers; 6 * spread when unset.
    std::optional<double> min_center_distance;
    std::uint64_t seed = 0;
    std::vector<std::string> class_names;  // optional
};

// Gaussian blobs whose centers are pairwise at least 6 * spread apart.
// Throws InvalidArgument when centers cannot be placed in 1000 attempts.
Dataset generate_synthetic(const SyntheticSpec& spec);

// Class proportions of the named preset: "twitter-abusive" (abusive,
// hateful, spam, normal), "wiki-attack" (attack, normal) or "balanced"
// (`balanced_classes` equal shares).
std::vector<double> preset_proportions(std::string_view preset, std::size_t balanced_classes = 2);
std::vector<std::string> preset_class_names(std::string_view preset, std::size_t balanced_classes = 2);

// Largest-remainder rounding of proportions * n; every class gets >= 1.
std::vector<std::size_t> apportion(std::span<const double> proportions, std::size_t n);

// ---- metrics ----------------------------------------------------------------

struct F1Report {
    double macro = 0.0;
    double micro = 0.0;
    std::vector<double> per_class;
    std::vector<int> absent_classes;  // absent from both truth and predictions
};

F1Report f1_scores(std::span<const int> predictions, std::span<const int> truth, std::size_t classes);
double macro_f1(std::span<const int> predictions, std::span<const int> truth, std::size_t classes);

// ---- pool bookkeeping -------------------------------------------------------

struct PoolState {
    std::map<SampleId, ClassLabel> labeled;
    std::vector<SampleId> pool;   // ascending ids
    std::vector<SampleId> test;   // ascending ids
    int cycle = 0;

    std::vector<SampleId> labeled_ids() const;
    // Moves ids from the pool to the labeled set. Throws when an id is not
    // in the pool.
    void label(SampleId id, ClassLabel label);
};

struct TrainTestSplit {
    std::vector<SampleId> train;
    std::vector<SampleId> test;
};

// Per-class random split; each class contributes round(fraction * count)
// samples to the test side.
TrainTestSplit stratified_split(const Dataset& data, double test_fraction, std::uint64_t seed);

// Labels initial_size / K samples per class, drawn uniformly from `train`;
// the rest of `train` becomes the pool.
PoolState init_balanced(const Dataset& data, std::span<const SampleId> train, std::span<const SampleId> test,
                        std::size_t initial_size, std::uint64_t seed);

// ---- configuration ----------------------------------------------------------

enum class F1Average { macro, micro };

struct ALConfig {
    std::vector<Strategy> strategies{Strategy::random};
    std::size_t draw_size = 20;
    std::size_t initial_size = 100;
    std::size_t budget = 500;
    std::size_t k = 4;
    int epochs = 10;
    int mc_passes = 10;
    double dropout_rate = 0.2;
    double learning_rate = 1e-2;
    std::size_t batch_size = 64;
    std::size_t hidden = 64;
    double alpha_decay = 0.02;
    AlphaDecay alpha_mode = AlphaDecay::additive;
    int repetitions = 10;
    std::uint64_t master_seed = 0;
    bool freeze_clusters = false;
    F1Average f1_average = F1Average::macro;
    int threads = 0;  // 0: hardware concurrency

    // Data source: a synthetic preset or embedding/label files.
    std::string data_preset = "twitter-abusive";
    std::size_t data_n = 2500;
    std::size_t data_dim = 32;
    double data_spread = 1.0;
    std::string embeddings;
    std::string labels;
    double test_fraction = 0.2;

    // Throws InvalidArgument when an invariant is violated.
    void validate() const;
    ClassifierConfig classifier(std::uint64_t seed) const;
};

// ---- selection engine (shared by the harness, CLI and service) ------------

struct SelectionRequest {
    Strategy strategy = Strategy::random;
    std::size_t k = 2;
    std::size_t draw_size = 20;
    std::uint64_t seed = 0;
    int cycle = 0;
    const ClassifierParams* model = nullptr;  // required by uncertainty strategies
    int mc_passes = 10;
    double alpha_decay = 0.02;
    AlphaDecay alpha_mode = AlphaDecay::additive;
    // Cluster labels per id, reused instead of re-clustering when set.
    const std::map<SampleId, int>* frozen_clusters = nullptr;
};

struct Selection {
    std::vector<SampleId> ids;
    AcquisitionScore score;
    std::size_t filled_from_remainder = 0;
    std::optional<ClusterAssignment> clusters;
};

// Seed for the selection made at `cycle` from a session/run seed.
std::uint64_t selection_seed(std::uint64_t seed, int cycle);

// Scores `pool` with the requested strategy and draws min(draw_size, pool) ids.
Selection select_batch(const FeatureMatrix& pool, const SelectionRequest& request);

// ---- experiment loop --------------------------------------------------------

struct CycleRow {
    int cycle = 0;
    std::size_t labeled_count = 0;
    double f1 = 0.0;  // macro or micro per config
    std::vector<double> per_class_f1;
    std::optional<double> alpha;
    std::vector<double> cutoff_multipliers;
    std::vector<SampleId> selected;
    double elapsed_ms = 0.0;
};

struct RunRecord {
    Strategy strategy = Strategy::random;
    int repetition = 0;
    std::vector<CycleRow> rows;
};

struct Experiment {
    Dataset data;
    TrainTestSplit split;
};

// Builds the dataset named by the config and its stratified split.
Experiment prepare_experiment(const ALConfig& config);

// One cycle: retrain from scratch, evaluate, score, draw, label. Returns the
// row for the current labeled set; `state` advances.
CycleRow run_cycle(PoolState& state, const Dataset& data, const ALConfig& config, Strategy strategy,
                   std::uint64_t cycle_seed, std::map<SampleId, int>* frozen_clusters = nullptr);

// Trains and evaluates without selecting (the row at the final budget).
CycleRow evaluate_state(const PoolState& state, const Dataset& data, const ALConfig& config,
                        std::uint64_t cycle_seed);

RunRecord run_repetition(const Experiment& experiment, const ALConfig& config, Strategy strategy, int repetition);

struct AggregateRow {
    Strategy strategy = Strategy::random;
    int cycle = 0;
    std::size_t labeled_count = 0;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
    int repetitions = 0;
};

struct ExperimentResult {
    std::vector<RunRecord> runs;
    std::vector<AggregateRow> aggregate;
};

std::vector<AggregateRow> aggregate(std::span<const RunRecord> runs);

// Runs every strategy for every repetition. When `output_dir` is given,
// records.jsonl, summary.tsv, plot.tsv and timings.jsonl are written there;
// if a repetition fails, the completed ones are persisted before rethrowing.
ExperimentResult run_experiment(const ALConfig& config, const std::optional<std::filesystem::path>& output_dir = {});

void write_experiment_files(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace ndsal
