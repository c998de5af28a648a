#include "doctest.h"

#include "ndsal/error.hpp"
#include "ndsal/iostore.hpp"
#include "ndsal/rng.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace ndsal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "ndsal_test_iostore";
    fs::create_directories(dir);
    return dir / name;
}

// Random values exactly representable as float.
Matrix float_matrix(std::size_t n, std::size_t d, Rng& rng) {
    std::normal_distribution<float> g(0.0f, 100.0f);
    Matrix m(n, d);
    for (double& v : m.data()) v = static_cast<double>(g(rng));
    return m;
}

std::string error_of(const std::vector<std::uint8_t>& bytes) {
    try {
        decode_embeddings(bytes);
    } catch (const FormatError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("embedding layout") {
    const Matrix m(3, 2, {1.0, -2.0, 0.5, 3.25, 0.0, 1e-3});
    const auto bytes = encode_embeddings(m);
    REQUIRE(bytes.size() == 20 + 24 + 8);
    CHECK(std::memcmp(bytes.data(), "EMBF", 4) == 0);
    CHECK(bytes[4] == 1);
    CHECK(bytes[8] == 3);
    CHECK(bytes[16] == 2);
    // 1.0f little-endian is 00 00 80 3f.
    CHECK(bytes[20] == 0x00);
    CHECK(bytes[22] == 0x80);
    CHECK(bytes[23] == 0x3f);
    std::uint64_t sum = 0;
    for (std::size_t i = 20; i < 44; ++i) sum += bytes[i];
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= std::uint64_t{bytes[44 + static_cast<std::size_t>(i)]} << (8 * i);
    CHECK(stored == sum);
    const Matrix back = decode_embeddings(bytes);
    CHECK(back.rows() == 3);
    CHECK(back(1, 1) == 3.25);
    CHECK(back(2, 1) == static_cast<double>(1e-3f));
    CHECK(encode_embeddings(back) == bytes);
}

TEST_CASE("embedding round trips through files") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix m = float_matrix(1 + trial % 7, 1 + trial % 5, rng);
        const fs::path path = scratch("round.emb");
        write_embeddings(path, m);
        CHECK(read_embeddings(path) == m);
    }
}

TEST_CASE("embedding corruption diagnostics") {
    const auto good = encode_embeddings(Matrix(3, 2, {1, 2, 3, 4, 5, 6}));
    SUBCASE("truncated payload") {
        const std::vector<std::uint8_t> cut(good.begin(), good.begin() + 40);
        CHECK(error_of(cut) == "truncated payload: expected 24 bytes, found 20");
    }
    SUBCASE("bad magic") {
        auto bad = good;
        bad[0] = 'X';
        CHECK(error_of(bad).starts_with("bad magic"));
    }
    SUBCASE("truncated header") {
        CHECK(error_of({good.begin(), good.begin() + 10}).starts_with("truncated header"));
    }
    SUBCASE("unsupported version") {
        auto bad = good;
        bad[4] = 2;
        CHECK(error_of(bad).starts_with("unsupported version"));
    }
    SUBCASE("bad dimensions") {
        auto bad = good;
        bad[16] = 0;
        CHECK(error_of(bad).starts_with("bad dimensions"));
    }
    SUBCASE("checksum mismatch") {
        auto bad = good;
        bad[25] ^= 0x01;
        CHECK(error_of(bad).starts_with("checksum mismatch"));
    }
    SUBCASE("truncated checksum") {
        CHECK(error_of({good.begin(), good.end() - 3}).starts_with("truncated checksum"));
    }
    SUBCASE("trailing data") {
        auto bad = good;
        bad.push_back(0);
        CHECK(error_of(bad).starts_with("trailing data"));
    }
}

TEST_CASE("label files") {
    const std::vector<LabelEntry> entries{{0, 2}, {5, -1}, {3, 0}};
    const std::string text = encode_labels(entries);
    CHECK(text == "id,label\n0,2\n5,-1\n3,0\n");
    CHECK(decode_labels(text, 4) == entries);
    CHECK_THROWS_WITH_AS(decode_labels("id,label\n0,1\n1,5\n", 4), doctest::Contains("row 3"), FormatError);
    CHECK_THROWS_WITH_AS(decode_labels("id,label\n0,1\n0,2\n", 4), doctest::Contains("duplicate"), FormatError);
    CHECK_THROWS_WITH_AS(decode_labels("id,label\n0,x\n", 4), doctest::Contains("row 2"), FormatError);
    CHECK_THROWS_AS(decode_labels("0,1\n", 4), FormatError);
    const fs::path path = scratch("labels.csv");
    write_labels(path, entries);
    CHECK(read_labels(path, 3) == entries);
}

TEST_CASE("text import") {
    const fs::path path = scratch("vectors.csv");
    {
        std::ofstream out(path);
        out << "1.5,2,-3\n4,5e-1,6\n";
    }
    const Matrix m = import_text_embeddings(path);
    CHECK(m == Matrix(2, 3, {1.5, 2, -3, 4, 0.5, 6}));
    {
        std::ofstream out(path);
        out << "1,2\n3\n";
    }
    CHECK_THROWS_WITH_AS(import_text_embeddings(path), doctest::Contains("line 2"), FormatError);
}

TEST_CASE("config files") {
    const ALConfig c = parse_al_config("# experiment\nstrategy = nds, ndsplus\nbudget = 300\nmaster_seed = 9\n");
    CHECK(c.strategies == std::vector<Strategy>{Strategy::nds, Strategy::nds_plus});
    CHECK(c.budget == 300);
    CHECK(c.master_seed == 9);
    CHECK(c.epochs == 10);
    const ALConfig again = parse_al_config(format_al_config(c));
    CHECK(format_al_config(again) == format_al_config(c));
    CHECK_THROWS_WITH_AS(parse_al_config("budgett = 3\n"), doctest::Contains("unknown key"), FormatError);
    CHECK_THROWS_AS(parse_al_config("budget = 3\nbudget = 4\n"), FormatError);
    CHECK_THROWS_AS(parse_al_config("budget = many\n"), FormatError);
    CHECK_THROWS_AS(parse_al_config("strategy = entropy\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_al_config("initial_size = 7\n"), InvalidArgument);
    const ALConfig wiki = parse_al_config("data_preset = wiki-attack\ninitial_size = 50\n");
    CHECK(wiki.k == 2);
    CHECK(wiki.epochs == 5);
}

TEST_CASE("model files") {
    ClassifierConfig config;
    config.seed = 3;
    const ClassifierParams p = initialize_classifier(5, 3, config);
    const fs::path path = scratch("model.json");
    write_model(path, p);
    CHECK(read_model(path) == p);
    write_text_file(path, "{\"input_dim\": 2}");
    CHECK_THROWS_AS(read_model(path), FormatError);
}

TEST_CASE("shortest real formatting") {
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(1e-2) == "0.01");
    CHECK(std::stod(format_real(1.0 / 3.0)) == 1.0 / 3.0);
}
