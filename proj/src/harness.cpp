#include "ndsal/harness.hpp"

#include "ndsal/error.hpp"
#include "ndsal/iostore.hpp"
#include "ndsal/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include "json.hpp"

namespace ndsal {

namespace {
// Stream tags for seed derivation.
constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kSplitStream = 0x5b17;
constexpr std::uint64_t kRepetitionStream = 0x4e70;
}  // namespace

ClassLabel Dataset::label_of(SampleId id) const { return labels[features.index_of(id)]; }

std::vector<SampleId> PoolState::labeled_ids() const {
    std::vector<SampleId> out;
    out.reserve(labeled.size());
    for (const auto& [id, _] : labeled) out.push_back(id);
    return out;
}

void PoolState::label(SampleId id, ClassLabel value) {
    auto it = std::ranges::lower_bound(pool, id);
    if (it == pool.end() || *it != id) throw InvalidArgument("sample " + std::to_string(id) + " is not in the pool");
    pool.erase(it);
    labeled.emplace(id, value);
}

TrainTestSplit stratified_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw InvalidArgument("test fraction must lie in [0, 1)");
    std::vector<std::vector<SampleId>> by_class(data.classes);
    for (std::size_t i = 0; i < data.features.rows(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(data.features.id(i));
    }
    Rng rng(seed);
    TrainTestSplit out;
    for (auto& members : by_class) {
        std::ranges::sort(members);
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
        out.test.insert(out.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
        out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
    }
    std::ranges::sort(out.train);
    std::ranges::sort(out.test);
    return out;
}

PoolState init_balanced(const Dataset& data, std::span<const SampleId> train, std::span<const SampleId> test,
                        std::size_t initial_size, std::uint64_t seed) {
    const std::size_t k = data.classes;
    if (initial_size % k != 0) {
        throw InvalidArgument("initial size " + std::to_string(initial_size) + " is not divisible by K=" +
                              std::to_string(k));
    }
    const std::size_t per_class = initial_size / k;
    std::vector<std::vector<SampleId>> by_class(k);
    for (SampleId id : train) by_class[static_cast<std::size_t>(data.label_of(id))].push_back(id);

    Rng rng(seed);
    PoolState state;
    for (std::size_t c = 0; c < k; ++c) {
        auto& members = by_class[c];
        if (members.size() < per_class) {
            throw InvalidArgument("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                                  " training samples, fewer than the " + std::to_string(per_class) + " required");
        }
        std::ranges::sort(members);
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i = 0; i < per_class; ++i) state.labeled.emplace(members[i], static_cast<ClassLabel>(c));
    }
    for (SampleId id : train) {
        if (!state.labeled.contains(id)) state.pool.push_back(id);
    }
    std::ranges::sort(state.pool);
    state.test.assign(test.begin(), test.end());
    std::ranges::sort(state.test);
    return state;
}

void ALConfig::validate() const {
    if (strategies.empty()) throw InvalidArgument("config: at least one strategy is required");
    if (k < 2) throw InvalidArgument("config: k must be at least 2");
    if (draw_size < 1) throw InvalidArgument("config: draw_size must be at least 1");
    if (initial_size % k != 0) throw InvalidArgument("config: initial_size must be divisible by k");
    if (budget < initial_size) throw InvalidArgument("config: budget must be at least initial_size");
    if (epochs < 0) throw InvalidArgument("config: epochs must be non-negative");
    if (mc_passes < 1) throw InvalidArgument("config: mc_passes must be at least 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidArgument("config: dropout_rate must lie in [0,1)");
    if (repetitions < 1) throw InvalidArgument("config: repetitions must be at least 1");
    if (!(alpha_decay >= 0.0 && alpha_decay <= 1.0)) throw InvalidArgument("config: alpha_decay must lie in [0,1]");
}

ClassifierConfig ALConfig::classifier(std::uint64_t seed) const {
    ClassifierConfig c;
    c.hidden = hidden;
    c.dropout_rate = dropout_rate;
    c.epochs = epochs;
    c.learning_rate = learning_rate;
    c.batch_size = batch_size;
    c.seed = seed;
    return c;
}

std::uint64_t selection_seed(std::uint64_t seed, int cycle) {
    return derive_seed(seed, static_cast<std::uint64_t>(cycle));
}

namespace {

ClusterAssignment cluster_pool(const FeatureMatrix& pool, const SelectionRequest& request) {
    if (request.frozen_clusters != nullptr && !request.frozen_clusters->empty()) {
        std::vector<int> labels(pool.rows(), -1);
        std::vector<std::size_t> sizes(request.k, 0);
        bool complete = true;
        for (std::size_t i = 0; i < pool.rows() && complete; ++i) {
            auto it = request.frozen_clusters->find(pool.id(i));
            complete = it != request.frozen_clusters->end();
            if (complete) {
                labels[i] = it->second;
                ++sizes[static_cast<std::size_t>(it->second)];
            }
        }
        if (complete && std::ranges::none_of(sizes, [](std::size_t s) { return s == 0; })) {
            return make_assignment(pool, labels, request.k);
        }
    }
    return spectral_cluster(pool, request.k, derive_seed(request.seed, 1));
}

const ClassifierParams& require_model(const SelectionRequest& request) {
    if (request.model == nullptr) {
        throw InvalidArgument("strategy " + std::string(strategy_name(request.strategy)) + " needs a trained model");
    }
    return *request.model;
}

}  // namespace

Selection select_batch(const FeatureMatrix& pool, const SelectionRequest& request) {
    const std::size_t m = std::min(request.draw_size, pool.rows());
    if (m == 0) throw InvalidArgument("draw size must be at least 1");
    Selection out;
    Strategy strategy = request.strategy;
    // Too few points to form K clusters: every remaining sample is drawn anyway.
    const bool clusterable = pool.rows() > request.k;
    if ((strategy == Strategy::nds || strategy == Strategy::nds_plus) && !clusterable) strategy = Strategy::random;

    switch (strategy) {
    case Strategy::random:
        out.score = score_random(pool.ids());
        break;
    case Strategy::min_margin:
        out.score = score_min_margin(pool.ids(), predict_proba(require_model(request), pool.values()));
        break;
    case Strategy::var_ratio:
        out.score = score_var_ratio(pool.ids(), mc_predict(require_model(request), pool.values(), request.mc_passes,
                                                           derive_seed(request.seed, 3)));
        break;
    case Strategy::nds:
    case Strategy::nds_plus: {
        out.clusters = cluster_pool(pool, request);
        AcquisitionScore nds = score_nds(pool, *out.clusters, std::max(m, request.k));
        if (strategy == Strategy::nds) {
            out.score = std::move(nds);
        } else {
            const AcquisitionScore margin =
                score_min_margin(pool.ids(), predict_proba(require_model(request), pool.values()));
            const MixingState mixing{request.alpha_decay, request.cycle, request.alpha_mode};
            out.score = score_nds_plus(nds, margin, mixing);
        }
        break;
    }
    }
    DrawResult drawn = draw(out.score, m, derive_seed(request.seed, 4));
    out.ids = std::move(drawn.selected);
    out.filled_from_remainder = drawn.filled_from_remainder;
    return out;
}

Experiment prepare_experiment(const ALConfig& config) {
    config.validate();
    Experiment exp{[&] {
        if (!config.embeddings.empty()) {
            Dataset data = read_dataset(config.embeddings, config.labels, config.k);
            return data;
        }
        SyntheticSpec spec;
        spec.counts = apportion(preset_proportions(config.data_preset, config.k), config.data_n);
        spec.dim = config.data_dim;
        spec.spread = config.data_spread;
        spec.seed = derive_seed(config.master_seed, kDataStream);
        spec.class_names = preset_class_names(config.data_preset, config.k);
        return generate_synthetic(spec);
    }(), {}};
    if (exp.data.classes != config.k) {
        throw InvalidArgument("config k=" + std::to_string(config.k) + " but the data has " +
                              std::to_string(exp.data.classes) + " classes");
    }
    exp.split = stratified_split(exp.data, config.test_fraction, derive_seed(config.master_seed, kSplitStream));
    return exp;
}

namespace {

struct TrainedState {
    ClassifierParams model;
    F1Report f1;
    bool has_test = false;
};

TrainedState train_and_evaluate(const PoolState& state, const Dataset& data, const ALConfig& config,
                                std::uint64_t cycle_seed) {
    const std::vector<SampleId> ids = state.labeled_ids();
    const FeatureMatrix x = data.features.subset_by_id(ids);
    std::vector<ClassLabel> y;
    y.reserve(ids.size());
    for (SampleId id : ids) y.push_back(state.labeled.at(id));

    TrainedState out;
    out.model = train_classifier(x.values(), y, data.classes, config.classifier(derive_seed(cycle_seed, 1)));
    if (!state.test.empty()) {
        const FeatureMatrix test = data.features.subset_by_id(state.test);
        std::vector<int> truth;
        truth.reserve(state.test.size());
        for (SampleId id : state.test) truth.push_back(data.label_of(id));
        out.f1 = f1_scores(predict_labels(predict_proba(out.model, test.values())), truth, data.classes);
        out.has_test = true;
    }
    return out;
}

double milliseconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

CycleRow evaluate_state(const PoolState& state, const Dataset& data, const ALConfig& config, std::uint64_t cycle_seed) {
    const auto start = std::chrono::steady_clock::now();
    const TrainedState trained = train_and_evaluate(state, data, config, cycle_seed);
    CycleRow row;
    row.cycle = state.cycle;
    row.labeled_count = state.labeled.size();
    row.f1 = config.f1_average == F1Average::macro ? trained.f1.macro : trained.f1.micro;
    row.per_class_f1 = trained.f1.per_class;
    row.elapsed_ms = milliseconds_since(start);
    return row;
}

CycleRow run_cycle(PoolState& state, const Dataset& data, const ALConfig& config, Strategy strategy,
                   std::uint64_t cycle_seed, std::map<SampleId, int>* frozen_clusters) {
    if (state.pool.empty()) throw InvalidArgument("run_cycle: the pool is empty");
    if (state.labeled.size() >= config.budget) throw InvalidArgument("run_cycle: the labeling budget is exhausted");
    const auto start = std::chrono::steady_clock::now();
    const TrainedState trained = train_and_evaluate(state, data, config, cycle_seed);

    CycleRow row;
    row.cycle = state.cycle;
    row.labeled_count = state.labeled.size();
    row.f1 = config.f1_average == F1Average::macro ? trained.f1.macro : trained.f1.micro;
    row.per_class_f1 = trained.f1.per_class;

    const FeatureMatrix pool = data.features.subset_by_id(state.pool);
    SelectionRequest request;
    request.strategy = strategy;
    request.k = config.k;
    request.draw_size = std::min({config.draw_size, config.budget - state.labeled.size(), state.pool.size()});
    request.seed = derive_seed(cycle_seed, 2);
    request.cycle = state.cycle;
    request.model = &trained.model;
    request.mc_passes = config.mc_passes;
    request.alpha_decay = config.alpha_decay;
    request.alpha_mode = config.alpha_mode;
    request.frozen_clusters = config.freeze_clusters ? frozen_clusters : nullptr;

    Selection selection = select_batch(pool, request);
    if (config.freeze_clusters && frozen_clusters != nullptr && frozen_clusters->empty() && selection.clusters) {
        for (std::size_t i = 0; i < pool.rows(); ++i) frozen_clusters->emplace(pool.id(i), selection.clusters->labels[i]);
    }
    row.alpha = selection.score.alpha;
    row.cutoff_multipliers = selection.score.cutoff_multipliers;
    for (SampleId id : selection.ids) state.label(id, data.label_of(id));
    row.selected = std::move(selection.ids);
    ++state.cycle;
    row.elapsed_ms = milliseconds_since(start);
    return row;
}

RunRecord run_repetition(const Experiment& exp, const ALConfig& config, Strategy strategy, int repetition) {
    const std::uint64_t rep_seed =
        derive_seed(derive_seed(config.master_seed, kRepetitionStream), static_cast<std::uint64_t>(repetition));
    PoolState state = init_balanced(exp.data, exp.split.train, exp.split.test, config.initial_size, derive_seed(rep_seed, 0));
    RunRecord record{strategy, repetition, {}};
    std::map<SampleId, int> frozen;
    while (state.labeled.size() < config.budget && !state.pool.empty()) {
        const std::uint64_t cycle_seed = derive_seed(rep_seed, static_cast<std::uint64_t>(state.cycle) + 1);
        record.rows.push_back(run_cycle(state, exp.data, config, strategy, cycle_seed, &frozen));
    }
    record.rows.push_back(
        evaluate_state(state, exp.data, config, derive_seed(rep_seed, static_cast<std::uint64_t>(state.cycle) + 1)));
    return record;
}

std::vector<AggregateRow> aggregate(std::span<const RunRecord> runs) {
    std::map<std::pair<int, int>, std::vector<const CycleRow*>> groups;
    for (const RunRecord& run : runs) {
        for (const CycleRow& row : run.rows) groups[{static_cast<int>(run.strategy), row.cycle}].push_back(&row);
    }
    std::vector<AggregateRow> out;
    for (const auto& [key, rows] : groups) {
        AggregateRow agg;
        agg.strategy = static_cast<Strategy>(key.first);
        agg.cycle = key.second;
        agg.labeled_count = rows.front()->labeled_count;
        agg.repetitions = static_cast<int>(rows.size());
        double sum = 0.0;
        for (const CycleRow* r : rows) sum += r->f1;
        agg.mean_f1 = sum / static_cast<double>(rows.size());
        if (rows.size() > 1) {
            double sq = 0.0;
            for (const CycleRow* r : rows) sq += (r->f1 - agg.mean_f1) * (r->f1 - agg.mean_f1);
            agg.std_f1 = std::sqrt(sq / static_cast<double>(rows.size() - 1));
        }
        out.push_back(agg);
    }
    return out;
}

void write_experiment_files(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream records(dir / "records.jsonl", std::ios::binary | std::ios::trunc);
    std::ofstream timings(dir / "timings.jsonl", std::ios::binary | std::ios::trunc);
    for (const RunRecord& run : result.runs) {
        for (const CycleRow& row : run.rows) {
            nlohmann::ordered_json j;
            j["strategy"] = strategy_name(run.strategy);
            j["repetition"] = run.repetition;
            j["cycle"] = row.cycle;
            j["labeled_count"] = row.labeled_count;
            j["macro_f1"] = row.f1;
            j["per_class_f1"] = row.per_class_f1;
            j["alpha"] = row.alpha ? nlohmann::ordered_json(*row.alpha) : nlohmann::ordered_json(nullptr);
            j["cutoff_multipliers"] = row.cutoff_multipliers;
            j["selected"] = row.selected;
            records << j.dump() << '\n';

            nlohmann::ordered_json t;
            t["strategy"] = strategy_name(run.strategy);
            t["repetition"] = run.repetition;
            t["cycle"] = row.cycle;
            t["elapsed_ms"] = row.elapsed_ms;
            timings << t.dump() << '\n';
        }
    }

    std::ofstream summary(dir / "summary.tsv", std::ios::binary | std::ios::trunc);
    summary << "strategy\tcycle\tlabeled_count\tmean_f1\tstd_f1\trepetitions\n";
    for (const AggregateRow& a : result.aggregate) {
        summary << strategy_name(a.strategy) << '\t' << a.cycle << '\t' << a.labeled_count << '\t'
                << format_real(a.mean_f1) << '\t' << format_real(a.std_f1) << '\t' << a.repetitions << '\n';
    }

    std::set<int> strategies;
    std::map<std::size_t, std::map<int, double>> by_size;
    for (const AggregateRow& a : result.aggregate) {
        strategies.insert(static_cast<int>(a.strategy));
        by_size[a.labeled_count][static_cast<int>(a.strategy)] = a.mean_f1;
    }
    std::ofstream plot(dir / "plot.tsv", std::ios::binary | std::ios::trunc);
    plot << "labeled_count";
    for (int s : strategies) plot << '\t' << strategy_name(static_cast<Strategy>(s));
    plot << '\n';
    for (const auto& [size, means] : by_size) {
        plot << size;
        for (int s : strategies) {
            auto it = means.find(s);
            plot << '\t' << (it == means.end() ? std::string("nan") : format_real(it->second));
        }
        plot << '\n';
    }
}

ExperimentResult run_experiment(const ALConfig& config, const std::optional<std::filesystem::path>& output_dir) {
    const Experiment exp = prepare_experiment(config);

    struct Task {
        Strategy strategy;
        int repetition;
    };
    std::vector<Task> tasks;
    for (Strategy s : config.strategies) {
        for (int r = 0; r < config.repetitions; ++r) tasks.push_back({s, r});
    }
    std::vector<std::optional<RunRecord>> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                results[i] = run_repetition(exp, config, tasks[i].strategy, tasks[i].repetition);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::size_t threads = config.threads > 0 ? static_cast<std::size_t>(config.threads)
                                              : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, tasks.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    ExperimentResult result;
    std::exception_ptr failure;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (errors[i] && !failure) failure = errors[i];
        if (results[i]) result.runs.push_back(std::move(*results[i]));
    }
    result.aggregate = aggregate(result.runs);
    if (output_dir) write_experiment_files(result, *output_dir);
    if (failure) std::rethrow_exception(failure);
    return result;
}

}  // namespace ndsal
