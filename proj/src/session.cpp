#include "ndsal/session.hpp"

#include "ndsal/error.hpp"
#include "ndsal/iostore.hpp"
#include "ndsal/rng.hpp"
#include "ndsal/simd.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

namespace ndsal {

namespace {

constexpr std::uint64_t kModelStream = 0x0de1;

std::string trim_copy(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T number(const std::string& key, const std::string& value) {
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw FormatError("session config key " + key + ": invalid value '" + value + "'");
    }
    return out;
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        out.push_back(trim_copy(text.substr(0, comma)));
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    }
    return out;
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    return std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count());
}

std::filesystem::path resolve(const std::filesystem::path& dir, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : dir / path;
}

}  // namespace

SessionConfig SessionConfig::parse(std::string_view text) {
    SessionConfig c;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "embeddings") c.embeddings = value;
        else if (key == "labels") c.labels = value;
        else if (key == "test_labels") c.test_labels = value;
        else if (key == "texts") c.texts = value;
        else if (key == "class_names") c.class_names = split_list(value);
        else if (key == "k") c.k = number<std::size_t>(key, value);
        else if (key == "strategy") c.strategy = parse_strategy(value);
        else if (key == "draw_size") c.draw_size = number<std::size_t>(key, value);
        else if (key == "budget") c.budget = number<std::size_t>(key, value);
        else if (key == "seed") c.seed = number<std::uint64_t>(key, value);
        else if (key == "epochs") c.classifier.epochs = number<int>(key, value);
        else if (key == "learning_rate") c.classifier.learning_rate = number<double>(key, value);
        else if (key == "batch_size") c.classifier.batch_size = number<std::size_t>(key, value);
        else if (key == "hidden") c.classifier.hidden = number<std::size_t>(key, value);
        else if (key == "dropout_rate") c.classifier.dropout_rate = number<double>(key, value);
        else if (key == "mc_passes") c.mc_passes = number<int>(key, value);
        else if (key == "alpha_decay") c.alpha_decay = number<double>(key, value);
        else if (key == "alpha_mode") {
            if (value == "additive") c.alpha_mode = AlphaDecay::additive;
            else if (value == "multiplicative") c.alpha_mode = AlphaDecay::multiplicative;
            else throw FormatError("session config key alpha_mode: expected additive or multiplicative");
        } else {
            throw FormatError("session config: unknown key " + key);
        }
    }
    if (c.embeddings.empty() || c.labels.empty()) throw FormatError("session config needs embeddings and labels");
    if (c.k < 2) throw FormatError("session config: k must be at least 2");
    if (c.draw_size < 1) throw FormatError("session config: draw_size must be at least 1");
    if (!c.class_names.empty() && c.class_names.size() != c.k) {
        throw FormatError("session config: class_names must list k names");
    }
    return c;
}

std::string SessionConfig::format() const {
    std::ostringstream out;
    out << "embeddings = " << embeddings << '\n' << "labels = " << labels << '\n';
    if (!test_labels.empty()) out << "test_labels = " << test_labels << '\n';
    if (!texts.empty()) out << "texts = " << texts << '\n';
    if (!class_names.empty()) {
        out << "class_names = ";
        for (std::size_t i = 0; i < class_names.size(); ++i) out << (i ? "," : "") << class_names[i];
        out << '\n';
    }
    out << "k = " << k << '\n'
        << "strategy = " << strategy_name(strategy) << '\n'
        << "draw_size = " << draw_size << '\n'
        << "budget = " << budget << '\n'
        << "seed = " << seed << '\n'
        << "epochs = " << classifier.epochs << '\n'
        << "learning_rate = " << format_real(classifier.learning_rate) << '\n'
        << "batch_size = " << classifier.batch_size << '\n'
        << "hidden = " << classifier.hidden << '\n'
        << "dropout_rate = " << format_real(classifier.dropout_rate) << '\n'
        << "mc_passes = " << mc_passes << '\n'
        << "alpha_decay = " << format_real(alpha_decay) << '\n'
        << "alpha_mode = " << (alpha_mode == AlphaDecay::additive ? "additive" : "multiplicative") << '\n';
    return out.str();
}

std::string_view status_name(SampleStatus s) noexcept {
    switch (s) {
    case SampleStatus::pending: return "pending";
    case SampleStatus::labeled: return "labeled";
    case SampleStatus::skipped: return "skipped";
    }
    return "unknown";
}

bool AnnotationBatch::complete() const {
    return std::ranges::none_of(samples, [](const BatchSample& s) { return s.status == SampleStatus::pending; });
}

ClassifierParams train_selection_model(const FeatureMatrix& features, const std::map<SampleId, ClassLabel>& labeled,
                                       std::size_t classes, const ClassifierConfig& base, std::uint64_t seed,
                                       int cycle) {
    std::vector<SampleId> ids;
    std::vector<ClassLabel> y;
    for (const auto& [id, label] : labeled) {
        ids.push_back(id);
        y.push_back(label);
    }
    ClassifierConfig config = base;
    config.seed = derive_seed(selection_seed(seed, cycle), kModelStream);
    return train_classifier(features.subset_by_id(ids).values(), y, classes, config);
}

Session::Session(std::filesystem::path dir, SessionConfig config) : dir_(std::move(dir)), config_(std::move(config)) {}

Session Session::create(const std::filesystem::path& dir, const SessionConfig& config) {
    std::filesystem::create_directories(dir);
    if (std::filesystem::exists(dir / "session.kv")) throw InvalidArgument("session already exists: " + dir.string());
    write_text_file(dir / "session.kv", config.format());
    write_text_file(dir / "events.jsonl", "");
    return open(dir);
}

Session Session::open(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "session.kv")) throw NotFound("no session at " + dir.string());
    Session s(dir, SessionConfig::parse(read_text_file(dir / "session.kv")));
    s.load_data();
    s.replay();
    return s;
}

void Session::load_data() {
    FeatureMatrix features(read_embeddings(resolve(dir_, config_.embeddings)));
    for (const LabelEntry& e : read_labels(resolve(dir_, config_.labels), config_.k)) {
        if (e.id < 0 || static_cast<std::size_t>(e.id) >= features.rows()) {
            throw FormatError("label file id " + std::to_string(e.id) + " has no embedding row");
        }
        if (e.label != kUnlabeled) state_.labeled.emplace(e.id, e.label);
    }
    if (!config_.test_labels.empty()) {
        for (const LabelEntry& e : read_labels(resolve(dir_, config_.test_labels), config_.k)) {
            if (e.label == kUnlabeled) continue;
            if (state_.labeled.contains(e.id)) {
                throw FormatError("sample " + std::to_string(e.id) + " is both labeled and in the test set");
            }
            test_labels_.emplace(e.id, e.label);
            state_.test.push_back(e.id);
        }
    }
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const SampleId id = features.id(r);
        if (!state_.labeled.contains(id) && !test_labels_.contains(id)) state_.pool.push_back(id);
    }
    if (!config_.texts.empty()) {
        std::istringstream in(read_text_file(resolve(dir_, config_.texts)));
        std::string line;
        while (std::getline(in, line)) {
            const auto tab = line.find('\t');
            if (tab == std::string::npos) continue;
            SampleId id = 0;
            const auto [ptr, ec] = std::from_chars(line.data(), line.data() + tab, id);
            if (ec == std::errc() && ptr == line.data() + tab) texts_[id] = line.substr(tab + 1);
        }
    }
    if (config_.class_names.empty()) {
        for (std::size_t c = 0; c < config_.k; ++c) config_.class_names.push_back("class" + std::to_string(c));
    }
    features_.emplace(std::move(features));
}

void Session::append_event(const nlohmann::json& event) {
    if (replaying_) return;
    std::ofstream out(dir_ / "events.jsonl", std::ios::binary | std::ios::app);
    if (!out) throw FormatError("cannot append to the session event log");
    out << event.dump() << '\n';
    out.flush();
}

void Session::replay() {
    replaying_ = true;
    evaluate();
    std::ifstream in(dir_ / "events.jsonl", std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json event;
        try {
            event = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            // A torn final line (crash mid-write) carries no committed label.
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw FormatError("event log line " + std::to_string(line_no) + " is not valid JSON");
        }
        const std::string type = event.at("type").get<std::string>();
        if (type == "batch") {
            apply_batch(event.at("ids").get<std::vector<SampleId>>(),
                        event.value("cutoff_multipliers", std::vector<double>{}));
        } else if (type == "label") {
            const auto& value = event.at("label");
            apply_label(event.at("id").get<SampleId>(),
                        value.is_null() ? std::nullopt : std::optional<ClassLabel>(value.get<ClassLabel>()));
        } else {
            throw FormatError("event log line " + std::to_string(line_no) + ": unknown event type " + type);
        }
    }
    replaying_ = false;
}

bool Session::exhausted() const { return state_.pool.empty() || state_.labeled.size() >= config_.budget; }

const ClassifierParams& Session::model() {
    if (!model_ || model_cycle_ != state_.cycle) {
        model_ = train_selection_model(*features_, state_.labeled, config_.k, config_.classifier, config_.seed,
                                       state_.cycle);
        model_cycle_ = state_.cycle;
    }
    return *model_;
}

void Session::evaluate() {
    if (test_labels_.empty()) return;
    const FeatureMatrix test = features_->subset_by_id(state_.test);
    std::vector<int> truth;
    for (SampleId id : state_.test) truth.push_back(test_labels_.at(id));
    const ProbMatrix probs = predict_proba(model(), test.values());
    f1_history_.push_back(macro_f1(predict_labels(probs), truth, config_.k));
}

std::string Session::describe(SampleId id) const {
    if (auto it = texts_.find(id); it != texts_.end()) return it->second;
    // Without raw text: the id and its three nearest labeled neighbours.
    const auto point = features_->row(features_->index_of(id));
    std::vector<std::pair<double, SampleId>> near;
    for (const auto& [other, _] : state_.labeled) {
        const auto q = features_->row(features_->index_of(other));
        near.emplace_back(simd::squared_distance(point.data(), q.data(), point.size()), other);
    }
    const std::size_t shown = std::min<std::size_t>(3, near.size());
    std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(shown), near.end());
    std::string text = "sample " + std::to_string(id);
    for (std::size_t i = 0; i < shown; ++i) {
        const ClassLabel label = state_.labeled.at(near[i].second);
        text += (i == 0 ? "; nearest labeled: " : ", ") + std::to_string(near[i].second) + " (" +
                config_.class_names[static_cast<std::size_t>(label)] + ")";
    }
    return text;
}

void Session::apply_batch(const std::vector<SampleId>& ids, const std::vector<double>& multipliers) {
    AnnotationBatch batch;
    batch.cycle = state_.cycle;
    batch.batch_id = "b" + std::to_string(state_.cycle);
    batch.class_names = config_.class_names;
    for (SampleId id : ids) {
        if (!std::ranges::binary_search(state_.pool, id)) {
            throw FormatError("batch event names sample " + std::to_string(id) + " outside the pool");
        }
        batch.samples.push_back({id, describe(id), SampleStatus::pending});
    }
    pending_ = std::move(batch);
    last_multipliers_ = multipliers;
    skipped_last_cycle_.clear();
}

const AnnotationBatch& Session::batch() {
    if (pending_ && !pending_->complete()) return *pending_;
    if (exhausted()) {
        pending_ = AnnotationBatch{"", state_.cycle, {}, config_.class_names};
        return *pending_;
    }
    std::vector<SampleId> candidates;
    for (SampleId id : state_.pool) {
        if (!skipped_last_cycle_.contains(id)) candidates.push_back(id);
    }
    if (candidates.empty()) candidates = state_.pool;

    SelectionRequest request;
    request.strategy = config_.strategy;
    request.k = config_.k;
    request.draw_size = std::min(config_.draw_size, config_.budget - state_.labeled.size());
    request.seed = selection_seed(config_.seed, state_.cycle);
    request.cycle = state_.cycle;
    request.mc_passes = config_.mc_passes;
    request.alpha_decay = config_.alpha_decay;
    request.alpha_mode = config_.alpha_mode;
    if (config_.strategy != Strategy::random && config_.strategy != Strategy::nds) request.model = &model();

    const Selection selection = select_batch(features_->subset_by_id(candidates), request);
    nlohmann::json event;
    event["type"] = "batch";
    event["cycle"] = state_.cycle;
    event["ids"] = selection.ids;
    event["cutoff_multipliers"] = selection.score.cutoff_multipliers;
    append_event(event);
    apply_batch(selection.ids, selection.score.cutoff_multipliers);
    return *pending_;
}

void Session::apply_label(SampleId id, std::optional<ClassLabel> label) {
    if (!pending_) throw FormatError("label event without a pending batch");
    auto it = std::ranges::find(pending_->samples, id, &BatchSample::id);
    if (it == pending_->samples.end() || it->status != SampleStatus::pending) {
        throw FormatError("label event for sample " + std::to_string(id) + " outside the pending batch");
    }
    if (label) {
        state_.label(id, *label);
        it->status = SampleStatus::labeled;
    } else {
        it->status = SampleStatus::skipped;
        skipped_this_cycle_.insert(id);
    }
    if (pending_->complete()) finish_cycle();
}

void Session::finish_cycle() {
    ++state_.cycle;
    skipped_last_cycle_ = std::move(skipped_this_cycle_);
    skipped_this_cycle_.clear();
    evaluate();
}

SubmitResult Session::submit(const LabelSubmission& labels) {
    SubmitResult result;
    if (!pending_ || pending_->complete()) batch();
    for (const auto& [key, label] : labels) {
        SampleId id = 0;
        const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
        if (ec != std::errc() || ptr != key.data() + key.size()) {
            result.rejected.emplace_back(key, "not a sample id");
            continue;
        }
        auto it = std::ranges::find(pending_->samples, id, &BatchSample::id);
        if (it == pending_->samples.end()) {
            result.rejected.emplace_back(key, "not in the pending batch");
            continue;
        }
        if (it->status != SampleStatus::pending) {
            result.rejected.emplace_back(key, "already " + std::string(status_name(it->status)));
            continue;
        }
        if (label && (*label < 0 || static_cast<std::size_t>(*label) >= config_.k)) {
            result.rejected.emplace_back(key, "label " + std::to_string(*label) + " outside 0.." +
                                                  std::to_string(config_.k - 1));
            continue;
        }
        nlohmann::json event;
        event["type"] = "label";
        event["id"] = id;
        event["label"] = label ? nlohmann::json(*label) : nlohmann::json(nullptr);
        event["ts"] = timestamp();
        append_event(event);
        const bool was_last = std::ranges::count(pending_->samples, SampleStatus::pending, &BatchSample::status) == 1;
        apply_label(id, label);
        result.accepted.push_back(id);
        if (was_last) {
            result.batch_complete = true;
            break;  // the batch is closed; remaining entries cannot belong to it
        }
    }
    result.cycle = state_.cycle;
    if (result.batch_complete) batch();
    return result;
}

Progress Session::progress() const {
    Progress p;
    p.labeled = state_.labeled.size();
    p.budget = config_.budget;
    if (!test_labels_.empty()) p.f1_history = f1_history_;
    if (config_.strategy == Strategy::nds_plus) {
        p.alpha = MixingState{config_.alpha_decay, state_.cycle, config_.alpha_mode}.alpha();
    }
    p.cutoff_multipliers = last_multipliers_;
    p.cycle = state_.cycle;
    p.finished = exhausted();
    return p;
}

}  // namespace ndsal
