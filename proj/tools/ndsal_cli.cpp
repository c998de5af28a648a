#include "ndsal/error.hpp"
#include "ndsal/harness.hpp"
#include "ndsal/iostore.hpp"
#include "ndsal/service.hpp"
#include "ndsal/session.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace {

using namespace ndsal;

struct SelectArgs {
    std::string embeddings;
    std::string labels;
    std::string strategy;
    std::size_t k = 2;
    std::size_t draw = 20;
    std::uint64_t seed = 0;
    std::string model;
    int cycle = 0;
    int mc_passes = 10;
};

int run_select(const SelectArgs& a) {
    const FeatureMatrix features(read_embeddings(a.embeddings));
    std::map<SampleId, ClassLabel> labeled;
    std::vector<SampleId> pool;
    for (const LabelEntry& e : read_labels(a.labels, a.k)) {
        if (e.id < 0 || static_cast<std::size_t>(e.id) >= features.rows()) {
            throw FormatError("label file id " + std::to_string(e.id) + " has no embedding row");
        }
        if (e.label == kUnlabeled) pool.push_back(e.id);
        else labeled.emplace(e.id, e.label);
    }
    if (pool.empty()) throw InvalidArgument("the label file marks no unlabeled (-1) rows");
    std::sort(pool.begin(), pool.end());

    SelectionRequest request;
    request.strategy = parse_strategy(a.strategy);
    request.k = a.k;
    request.draw_size = a.draw;
    request.seed = selection_seed(a.seed, a.cycle);
    request.cycle = a.cycle;
    request.mc_passes = a.mc_passes;

    std::optional<ClassifierParams> model;
    if (request.strategy != Strategy::random && request.strategy != Strategy::nds) {
        if (!a.model.empty()) {
            model = read_model(a.model);
        } else {
            if (labeled.empty()) throw InvalidArgument("uncertainty strategies need labeled rows or --model");
            model = train_selection_model(features, labeled, a.k, ClassifierConfig{}, a.seed, a.cycle);
        }
        request.model = &*model;
    }
    const Selection selection = select_batch(features.subset_by_id(pool), request);
    for (SampleId id : selection.ids) std::cout << id << '\n';
    return 0;
}

struct GenArgs {
    std::string preset = "twitter-abusive";
    std::size_t n = 2000;
    std::size_t dim = 32;
    double spread = 1.0;
    std::uint64_t seed = 0;
    std::size_t classes = 2;
    std::string out_embeddings;
    std::string out_labels;
};

int run_gen(const GenArgs& a) {
    SyntheticSpec spec;
    spec.counts = apportion(preset_proportions(a.preset, a.classes), a.n);
    spec.dim = a.dim;
    spec.spread = a.spread;
    spec.seed = a.seed;
    spec.class_names = preset_class_names(a.preset, a.classes);
    const Dataset data = generate_synthetic(spec);
    std::vector<LabelEntry> entries;
    for (std::size_t r = 0; r < data.features.rows(); ++r) entries.push_back({data.features.id(r), data.labels[r]});
    write_embeddings(a.out_embeddings, data.features.values());
    write_labels(a.out_labels, entries);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pool-based active learning with non-dominant-set selection"};
    app.require_subcommand(1);

    SelectArgs sel;
    auto* select = app.add_subcommand("select", "Select the next batch of ids to label (one id per line)");
    select->add_option("--embeddings", sel.embeddings, "Embedding file")->required();
    select->add_option("--labels", sel.labels, "Label file; -1 marks the pool")->required();
    select->add_option("--strategy", sel.strategy, "Acquisition strategy")
        ->required()
        ->check(CLI::IsMember({"random", "minmargin", "varratio", "nds", "ndsplus"}));
    select->add_option("--k", sel.k, "Number of classes")->required()->check(CLI::Range(2, 1 << 20));
    select->add_option("--draw", sel.draw, "Draw size")->capture_default_str()->check(CLI::PositiveNumber);
    select->add_option("--seed", sel.seed, "Seed")->capture_default_str();
    select->add_option("--model", sel.model, "Trained model (JSON); trained from the labeled rows when absent");
    select->add_option("--cycle", sel.cycle, "Cycle index (seeds and NDS+ mixing)")->capture_default_str();
    select->add_option("--mc-passes", sel.mc_passes, "MC dropout passes")->capture_default_str();

    std::string config_path, out_dir;
    auto* simulate = app.add_subcommand("simulate", "Run a simulated active-learning experiment");
    simulate->add_option("--config", config_path, "Key-value config file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out", out_dir, "Output directory for record files")->required();

    GenArgs gen;
    auto* gencmd = app.add_subcommand("gen", "Generate a synthetic labeled dataset");
    gencmd->add_option("--preset", gen.preset, "Class proportions")
        ->capture_default_str()
        ->check(CLI::IsMember({"twitter-abusive", "wiki-attack", "balanced"}));
    gencmd->add_option("--n", gen.n, "Samples")->capture_default_str();
    gencmd->add_option("--dim", gen.dim, "Dimension")->capture_default_str();
    gencmd->add_option("--spread", gen.spread, "Per-coordinate standard deviation")->capture_default_str();
    gencmd->add_option("--seed", gen.seed, "Seed")->capture_default_str();
    gencmd->add_option("--classes", gen.classes, "Classes for the balanced preset")->capture_default_str();
    gencmd->add_option("--out-embeddings", gen.out_embeddings, "Embedding file to write")->required();
    gencmd->add_option("--out-labels", gen.out_labels, "Label file to write")->required();

    int port = 8080;
    std::string host = "127.0.0.1", session_dir;
    auto* servecmd = app.add_subcommand("serve", "Serve annotation sessions over HTTP");
    servecmd->add_option("--port", port, "Port")->capture_default_str();
    servecmd->add_option("--host", host, "Bind address")->capture_default_str();
    servecmd->add_option("--session-dir", session_dir, "Directory holding one subdirectory per session")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        std::cerr << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
    }

    try {
        if (*select) return run_select(sel);
        if (*simulate) {
            run_experiment(read_al_config(config_path), std::filesystem::path(out_dir));
            return 0;
        }
        if (*gencmd) return run_gen(gen);
        if (*servecmd) {
            std::filesystem::create_directories(session_dir);
            AnnotationService service(session_dir);
            std::cerr << "serving " << session_dir << " on " << host << ':' << port << '\n';
            serve(service, host, port);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
