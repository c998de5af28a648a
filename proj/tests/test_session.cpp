#include "doctest.h"

#include "ndsal/error.hpp"
#include "ndsal/session.hpp"
#include "session_fixture.hpp"

#include <fstream>
#include <set>

using namespace ndsal;
using fixture::SessionData;

namespace {

LabelSubmission answer_all(const AnnotationBatch& batch, const SessionData& s) {
    LabelSubmission out;
    for (const auto& sample : batch.samples) out[std::to_string(sample.id)] = s.data.label_of(sample.id);
    return out;
}

std::vector<SampleId> ids_of(const AnnotationBatch& b) {
    std::vector<SampleId> out;
    for (const auto& s : b.samples) out.push_back(s.id);
    return out;
}

}  // namespace

TEST_CASE("session config round trip") {
    SessionConfig c;
    c.embeddings = "e.bin";
    c.labels = "l.csv";
    c.k = 4;
    c.class_names = {"a", "b", "c", "d"};
    c.strategy = Strategy::nds_plus;
    c.classifier.epochs = 7;
    const SessionConfig back = SessionConfig::parse(c.format());
    CHECK(back.format() == c.format());
    CHECK_THROWS_AS(SessionConfig::parse("labels = x\nk = 2\n"), FormatError);
    CHECK_THROWS_AS(SessionConfig::parse("embeddings = e\nlabels = l\nk = 2\nbogus = 1\n"), FormatError);
}

TEST_CASE("fresh session batch") {
    const SessionData s("session_fresh", 400, 5, 80);
    Session session = Session::create(s.dir("a"), s.config(Strategy::nds));
    const AnnotationBatch first = session.batch();
    CHECK(first.batch_id == "b0");
    CHECK(first.cycle == 0);
    CHECK(first.samples.size() == 20);
    CHECK(first.class_names == std::vector<std::string>{"class0", "class1", "class2", "class3"});
    std::set<SampleId> unique;
    for (const auto& sample : first.samples) {
        CHECK(sample.status == SampleStatus::pending);
        CHECK(sample.text.starts_with("sample " + std::to_string(sample.id) + "; nearest labeled: "));
        unique.insert(sample.id);
        CHECK_FALSE(std::ranges::binary_search(s.test, sample.id));
    }
    CHECK(unique.size() == 20);
    CHECK(ids_of(session.batch()) == ids_of(first));  // idempotent
    CHECK(session.progress().labeled == 20);
    CHECK(session.progress().f1_history->size() == 1);
    CHECK_THROWS_AS(Session::create(s.dir("a"), s.config(Strategy::nds)), InvalidArgument);
    CHECK_THROWS_AS(Session::open(s.dir("missing")), NotFound);
}

TEST_CASE("completing a batch advances the cycle") {
    const SessionData s("session_cycle", 400, 5, 80);
    Session session = Session::create(s.dir("a"), s.config(Strategy::nds_plus));
    const AnnotationBatch first = session.batch();
    const SubmitResult r = session.submit(answer_all(first, s));
    CHECK(r.accepted.size() == 20);
    CHECK(r.rejected.empty());
    CHECK(r.batch_complete);
    CHECK(r.cycle == 1);
    const Progress p = session.progress();
    CHECK(p.labeled == 40);
    CHECK(p.cycle == 1);
    CHECK(p.f1_history->size() == 2);
    CHECK(*p.alpha == doctest::Approx(0.98));
    const AnnotationBatch second = session.batch();
    CHECK(second.batch_id == "b1");
    CHECK(second.samples.size() == 20);
    const auto before = ids_of(first);
    for (SampleId id : ids_of(second)) CHECK(std::ranges::find(before, id) == before.end());
}

TEST_CASE("per-id rejection with partial acceptance") {
    const SessionData s("session_reject", 400, 5, 0);
    Session session = Session::create(s.dir("a"), s.config(Strategy::random));
    const AnnotationBatch batch = session.batch();
    LabelSubmission labels;
    labels[std::to_string(batch.samples[0].id)] = 7;
    labels[std::to_string(batch.samples[1].id)] = 1;
    labels[std::to_string(batch.samples[2].id)] = std::nullopt;
    labels["100000"] = 1;
    labels["abc"] = 1;
    const SubmitResult r = session.submit(labels);
    CHECK(r.accepted.size() == 2);
    REQUIRE(r.rejected.size() == 3);
    CHECK_FALSE(r.batch_complete);
    CHECK(session.batch().samples[0].status == SampleStatus::pending);
    CHECK(session.batch().samples[1].status == SampleStatus::labeled);
    CHECK(session.batch().samples[2].status == SampleStatus::skipped);
    // A second label for the same sample is rejected.
    LabelSubmission again;
    again[std::to_string(batch.samples[1].id)] = 0;
    CHECK(session.submit(again).rejected.size() == 1);
    CHECK(session.state().labeled.at(batch.samples[1].id) == 1);
    CHECK_FALSE(session.progress().f1_history.has_value());
}

TEST_CASE("skipped samples sit out the next selection only") {
    const SessionData s("session_skip", 120, 5, 0);
    SessionConfig config = s.config(Strategy::random);
    config.draw_size = 40;
    Session session = Session::create(s.dir("a"), config);
    const AnnotationBatch first = session.batch();
    LabelSubmission labels = answer_all(first, s);
    std::vector<SampleId> skipped;
    for (std::size_t i = 0; i < 10; ++i) {
        skipped.push_back(first.samples[i].id);
        labels[std::to_string(first.samples[i].id)] = std::nullopt;
    }
    CHECK(session.submit(labels).batch_complete);
    CHECK(session.state().labeled.size() == 20 + 30);
    for (SampleId id : skipped) CHECK(std::ranges::binary_search(session.state().pool, id));
    const auto second = ids_of(session.batch());
    for (SampleId id : skipped) CHECK(std::ranges::find(second, id) == second.end());
    // The third batch drains the pool, skipped ids included.
    CHECK(session.submit(answer_all(session.batch(), s)).batch_complete);
    const auto third = ids_of(session.batch());
    std::size_t reused = 0;
    for (SampleId id : skipped) reused += std::ranges::find(third, id) != third.end();
    CHECK(reused == skipped.size());
}

TEST_CASE("exhaustion: pool smaller than m and the budget cap") {
    const SessionData s("session_small", 60, 10, 0);
    SessionConfig config = s.config(Strategy::nds);
    config.budget = 50;
    Session session = Session::create(s.dir("a"), config);
    CHECK(session.batch().samples.size() == 10);  // budget 50 - 40 labeled
    CHECK(session.submit(answer_all(session.batch(), s)).batch_complete);
    CHECK(session.progress().finished);
    CHECK(session.batch().samples.empty());

    config.budget = 500;
    Session big = Session::create(s.dir("b"), config);
    CHECK(big.batch().samples.size() == 20);  // the whole remaining pool
    CHECK(big.submit(answer_all(big.batch(), s)).batch_complete);
    CHECK(big.state().pool.empty());
    CHECK(big.batch().samples.empty());
}

TEST_CASE("restart mid-batch replays the event log") {
    const SessionData s("session_replay", 400, 5, 80);
    std::vector<SampleId> pending_ids;
    PoolState before;
    {
        Session session = Session::create(s.dir("a"), s.config(Strategy::nds));
        session.submit(answer_all(session.batch(), s));
        const AnnotationBatch b = session.batch();
        pending_ids = ids_of(b);
        LabelSubmission part;
        for (std::size_t i = 0; i < 7; ++i) part[std::to_string(b.samples[i].id)] = s.data.label_of(b.samples[i].id);
        part[std::to_string(b.samples[7].id)] = std::nullopt;
        session.submit(part);
        before = session.state();
    }
    // A torn final line from a crash mid-append is ignored.
    {
        std::ofstream log(s.dir("a") / "events.jsonl", std::ios::app);
        log << "{\"type\":\"label\",\"id\":";
    }
    Session reopened = Session::open(s.dir("a"));
    const AnnotationBatch b = reopened.batch();
    CHECK(ids_of(b) == pending_ids);
    CHECK(b.batch_id == "b1");
    for (std::size_t i = 0; i < b.samples.size(); ++i) {
        const auto expected = i < 7 ? SampleStatus::labeled : i == 7 ? SampleStatus::skipped : SampleStatus::pending;
        CHECK(b.samples[i].status == expected);
    }
    CHECK(reopened.state().labeled == before.labeled);
    CHECK(reopened.state().pool == before.pool);
    CHECK(reopened.state().cycle == before.cycle);
    CHECK(reopened.progress().f1_history->size() == 2);
}

TEST_CASE("no sample is presented twice") {
    const SessionData s("session_unique", 200, 5, 0);
    Session session = Session::create(s.dir("a"), s.config(Strategy::min_margin));
    std::set<SampleId> seen;
    for (int cycle = 0; cycle < 5; ++cycle) {
        const AnnotationBatch b = session.batch();
        for (SampleId id : ids_of(b)) CHECK(seen.insert(id).second);
        session.submit(answer_all(b, s));
    }
    CHECK(session.progress().labeled == 120);
}

TEST_CASE("raw text is served when provided") {
    const SessionData s("session_text", 100, 5, 0);
    {
        std::ofstream texts(s.root / "texts.tsv");
        for (std::size_t r = 0; r < s.data.features.rows(); ++r) texts << r << "\tmessage number " << r << '\n';
    }
    SessionConfig config = s.config(Strategy::random);
    config.texts = (s.root / "texts.tsv").string();
    Session session = Session::create(s.dir("a"), config);
    for (const auto& sample : session.batch().samples) CHECK(sample.text == "message number " + std::to_string(sample.id));
}
