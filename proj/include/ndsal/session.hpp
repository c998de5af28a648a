#pragma once

#include "ndsal/acquisition.hpp"
#include "ndsal/classifier.hpp"
#include "ndsal/harness.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ndsal {

// Contents of <session>/session.kv. Relative paths resolve against the
// session directory.
struct SessionConfig {
    std::string embeddings;
    std::string labels;        // label file; -1 rows form the pool
    std::string test_labels;   // optional held-out labels (enables F1)
    std::string texts;         // optional "id<TAB>text" lines
    std::vector<std::string> class_names;
    std::size_t k = 2;
    Strategy strategy = Strategy::nds;
    std::size_t draw_size = 20;
    std::size_t budget = 500;
    std::uint64_t seed = 0;
    ClassifierConfig classifier{};
    int mc_passes = 10;
    double alpha_decay = 0.02;
    AlphaDecay alpha_mode = AlphaDecay::additive;

    static SessionConfig parse(std::string_view text);
    std::string format() const;
};

enum class SampleStatus { pending, labeled, skipped };
std::string_view status_name(SampleStatus s) noexcept;

struct BatchSample {
    SampleId id = 0;
    std::string text;
    SampleStatus status = SampleStatus::pending;
};

struct AnnotationBatch {
    std::string batch_id;
    int cycle = 0;
    std::vector<BatchSample> samples;
    std::vector<std::string> class_names;
    bool complete() const;
};

// Entry of a label submission: a class index, or std::nullopt for "skip".
using LabelSubmission = std::map<std::string, std::optional<ClassLabel>>;

struct SubmitResult {
    std::vector<SampleId> accepted;
    std::vector<std::pair<std::string, std::string>> rejected;  // (id as sent, reason)
    bool batch_complete = false;
    int cycle = 0;  // cycle after the submission
};

struct Progress {
    std::size_t labeled = 0;
    std::size_t budget = 0;
    std::optional<std::vector<double>> f1_history;  // absent without a test set
    std::optional<double> alpha;                    // NDS+ only
    std::vector<double> cutoff_multipliers;         // of the latest batch
    int cycle = 0;
    bool finished = false;
};

// Trains the model used at `cycle` on the labeled samples. Shared by the CLI
// `select` command and the annotation service so both select identically.
ClassifierParams train_selection_model(const FeatureMatrix& features, const std::map<SampleId, ClassLabel>& labeled,
                                       std::size_t classes, const ClassifierConfig& base, std::uint64_t seed, int cycle);

// One human-in-the-loop annotation session backed by an append-only event
// log. Opening a session replays the log, so a restart restores the exact
// pool state and pending batch.
class Session {
public:
    static Session create(const std::filesystem::path& dir, const SessionConfig& config);
    static Session open(const std::filesystem::path& dir);

    // The pending batch, selecting a new one when none is pending. Empty once
    // the budget or the pool is exhausted.
    const AnnotationBatch& batch();
    SubmitResult submit(const LabelSubmission& labels);
    Progress progress() const;

    const PoolState& state() const noexcept { return state_; }
    const SessionConfig& config() const noexcept { return config_; }

private:
    Session(std::filesystem::path dir, SessionConfig config);

    void load_data();
    void append_event(const nlohmann::json& event);
    void replay();
    void apply_batch(const std::vector<SampleId>& ids, const std::vector<double>& multipliers);
    void apply_label(SampleId id, std::optional<ClassLabel> label);
    void finish_cycle();
    const ClassifierParams& model();
    void evaluate();
    std::string describe(SampleId id) const;
    bool exhausted() const;

    std::filesystem::path dir_;
    SessionConfig config_;
    std::optional<FeatureMatrix> features_;
    std::map<SampleId, ClassLabel> test_labels_;
    std::map<SampleId, std::string> texts_;
    PoolState state_;
    std::optional<AnnotationBatch> pending_;
    std::set<SampleId> skipped_this_cycle_;
    std::set<SampleId> skipped_last_cycle_;
    std::optional<ClassifierParams> model_;
    int model_cycle_ = -1;
    std::vector<double> f1_history_;
    std::vector<double> last_multipliers_;
    bool replaying_ = false;
};

}  // namespace ndsal
