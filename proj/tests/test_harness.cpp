#include "doctest.h"

#include "ndsal/error.hpp"
#include "ndsal/harness.hpp"
#include "oracles/naive.hpp"

#include <algorithm>
#include <set>

using namespace ndsal;

namespace {

std::vector<std::size_t> class_counts(const Dataset& data) {
    std::vector<std::size_t> counts(data.classes, 0);
    for (ClassLabel y : data.labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

ALConfig small_config(Strategy s) {
    ALConfig c;
    c.strategies = {s};
    c.data_preset = "balanced";
    c.k = 2;
    c.data_n = 300;
    c.data_dim = 4;
    c.data_spread = 1.0;
    c.initial_size = 10;
    c.budget = 60;
    c.draw_size = 10;
    c.repetitions = 2;
    c.epochs = 20;
    c.master_seed = 5;
    c.threads = 1;
    return c;
}

}  // namespace

TEST_CASE("preset proportions and apportioning") {
    const auto twitter = preset_proportions("twitter-abusive");
    REQUIRE(twitter.size() == 4);
    CHECK(twitter[0] == doctest::Approx(0.240).epsilon(0.002));
    CHECK(twitter[1] == doctest::Approx(0.047).epsilon(0.005));
    CHECK(twitter[2] == doctest::Approx(0.148).epsilon(0.002));
    CHECK(twitter[3] == doctest::Approx(0.565).epsilon(0.002));
    const auto wiki = preset_proportions("wiki-attack");
    CHECK(wiki[0] == doctest::Approx(0.117).epsilon(0.005));

    const auto counts = apportion(twitter, 2000);
    const std::size_t expected[] = {480, 94, 296, 1130};
    std::size_t total = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(counts[c] + 1 >= expected[c]);
        CHECK(counts[c] <= expected[c] + 1);
        total += counts[c];
    }
    CHECK(total == 2000);
    CHECK(apportion(preset_proportions("balanced", 3), 10) == std::vector<std::size_t>{4, 3, 3});
    CHECK_THROWS_AS(preset_proportions("imdb"), InvalidArgument);
}

TEST_CASE("synthetic generation") {
    SyntheticSpec spec;
    spec.counts = {50, 50};
    spec.dim = 3;
    spec.seed = 4;
    const Dataset a = generate_synthetic(spec);
    CHECK(class_counts(a) == std::vector<std::size_t>{50, 50});
    const Dataset b = generate_synthetic(spec);
    CHECK(a.features.values() == b.features.values());
    CHECK(a.labels == b.labels);
    spec.counts = {3, 0};
    CHECK_THROWS_AS(generate_synthetic(spec), InvalidArgument);
    // Forty centers on a line cannot all keep their distance.
    spec.counts.assign(40, 1);
    spec.dim = 1;
    CHECK_THROWS_AS(generate_synthetic(spec), InvalidArgument);
}

TEST_CASE("macro F1") {
    const std::vector<int> truth{1, 1, 0, 0};
    CHECK(macro_f1(truth, truth, 2) == 1.0);
    const F1Report r = f1_scores(std::vector<int>{1, 0, 0, 0}, truth, 2);
    CHECK(r.per_class[0] == doctest::Approx(0.8));
    CHECK(r.per_class[1] == doctest::Approx(2.0 / 3.0));
    CHECK(r.macro == doctest::Approx(0.7333).epsilon(1e-4));
    CHECK(r.micro == doctest::Approx(0.75));
    CHECK(macro_f1(std::vector<int>{0, 0, 0, 0}, truth, 2) == doctest::Approx(1.0 / 3.0));
    const F1Report absent = f1_scores(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 3);
    CHECK(absent.absent_classes == std::vector<int>{2});
    CHECK(absent.macro == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(macro_f1(std::vector<int>{}, std::vector<int>{}, 2), InvalidArgument);

    std::vector<int> pred, tr;
    for (int i = 0; i < 200; ++i) {
        pred.push_back((i * 7) % 3);
        tr.push_back((i * 5) % 3);
    }
    const auto expected = oracle::per_class_f1(pred, tr, 3);
    const F1Report got = f1_scores(pred, tr, 3);
    for (std::size_t c = 0; c < 3; ++c) CHECK(got.per_class[c] == doctest::Approx(expected[c]));
}

TEST_CASE("balanced initial set") {
    SyntheticSpec spec;
    spec.counts = apportion(preset_proportions("twitter-abusive"), 2500);
    spec.dim = 4;
    spec.seed = 1;
    const Dataset data = generate_synthetic(spec);
    const TrainTestSplit split = stratified_split(data, 0.2, 2);
    CHECK(split.train.size() + split.test.size() == 2500);
    for (std::size_t size : {100u, 4u}) {
        const PoolState s = init_balanced(data, split.train, split.test, size, 3);
        std::vector<std::size_t> per(4, 0);
        for (const auto& [id, y] : s.labeled) {
            CHECK(data.label_of(id) == y);
            ++per[static_cast<std::size_t>(y)];
        }
        for (std::size_t c = 0; c < 4; ++c) CHECK(per[c] == size / 4);
        CHECK(s.labeled.size() + s.pool.size() == split.train.size());
        CHECK(std::ranges::is_sorted(s.pool));
    }
    SyntheticSpec two;
    two.counts = {200, 200};
    two.dim = 2;
    const Dataset binary = generate_synthetic(two);
    const TrainTestSplit bsplit = stratified_split(binary, 0.2, 2);
    const PoolState b = init_balanced(binary, bsplit.train, bsplit.test, 50, 3);
    CHECK(b.labeled.size() == 50);
    CHECK_THROWS_AS(init_balanced(binary, bsplit.train, bsplit.test, 51, 3), InvalidArgument);
    CHECK_THROWS_AS(init_balanced(binary, bsplit.train, bsplit.test, 1000, 3), InvalidArgument);
}

TEST_CASE("pool state moves ids one way") {
    PoolState s;
    s.pool = {1, 2, 3};
    s.label(2, 0);
    CHECK(s.pool == std::vector<SampleId>{1, 3});
    CHECK(s.labeled.at(2) == 0);
    CHECK_THROWS_AS(s.label(2, 1), InvalidArgument);
}

TEST_CASE("config validation") {
    ALConfig c;
    CHECK_NOTHROW(c.validate());
    c.initial_size = 102;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = ALConfig{};
    c.budget = 50;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = ALConfig{};
    c.draw_size = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("repetition: conservation, budget and determinism") {
    for (Strategy s : {Strategy::random, Strategy::min_margin, Strategy::var_ratio, Strategy::nds, Strategy::nds_plus}) {
        CAPTURE(strategy_name(s));
        const ALConfig config = small_config(s);
        const Experiment exp = prepare_experiment(config);
        const RunRecord run = run_repetition(exp, config, s, 0);
        REQUIRE(run.rows.size() == 6);
        std::set<SampleId> seen;
        for (std::size_t i = 0; i < run.rows.size(); ++i) {
            CHECK(run.rows[i].labeled_count == 10 + 10 * i);
            CHECK(run.rows[i].cycle == static_cast<int>(i));
            for (SampleId id : run.rows[i].selected) {
                CHECK(seen.insert(id).second);
                CHECK_FALSE(std::ranges::binary_search(exp.split.test, id));
            }
        }
        CHECK(run.rows.back().labeled_count == config.budget);
        CHECK(run.rows.back().selected.empty());
        const RunRecord again = run_repetition(exp, config, s, 0);
        for (std::size_t i = 0; i < run.rows.size(); ++i) {
            CHECK(again.rows[i].selected == run.rows[i].selected);
            CHECK(again.rows[i].f1 == run.rows[i].f1);
        }
        if (s == Strategy::nds_plus) {
            CHECK(*run.rows[0].alpha == 1.0);
            CHECK(*run.rows[3].alpha == doctest::Approx(0.94));
        }
    }
}

TEST_CASE("strategies share the labeled-count grid and the initial set") {
    ALConfig config = small_config(Strategy::random);
    config.strategies = {Strategy::random, Strategy::nds};
    const ExperimentResult r = run_experiment(config);
    CHECK(r.runs.size() == 4);
    CHECK(r.aggregate.size() == 12);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(r.aggregate[i].labeled_count == r.aggregate[6 + i].labeled_count);
        CHECK(r.aggregate[i].repetitions == 2);
    }
    // Cycle 0 trains on the same balanced set with the same seed.
    CHECK(r.runs[0].rows[0].f1 == r.runs[2].rows[0].f1);
}

TEST_CASE("random reaches F1 0.95 on separable blobs") {
    ALConfig config = small_config(Strategy::random);
    config.k = 3;
    config.data_n = 600;
    config.data_spread = 0.5;
    config.initial_size = 30;
    config.budget = 150;
    config.draw_size = 20;
    config.epochs = 50;
    config.repetitions = 3;
    const ExperimentResult r = run_experiment(config);
    CHECK(r.aggregate.back().labeled_count == 150);
    CHECK(r.aggregate.back().mean_f1 >= 0.95);
}

TEST_CASE("frozen clusters reuse the cycle-0 clustering") {
    ALConfig config = small_config(Strategy::nds);
    config.freeze_clusters = true;
    const Experiment exp = prepare_experiment(config);
    const RunRecord run = run_repetition(exp, config, Strategy::nds, 1);
    CHECK(run.rows.back().labeled_count == 60);
}
