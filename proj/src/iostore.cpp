#include "ndsal/iostore.hpp"

#include "ndsal/error.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace ndsal {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[offset + i]) << (8 * i);
    return value;
}

std::vector<std::uint8_t> read_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

std::vector<std::uint8_t> encode_embeddings(const Matrix& values) {
    if (values.cols() > 0xffffffffULL) throw InvalidArgument("embedding dimension exceeds 32 bits");
    std::vector<std::uint8_t> out{'E', 'M', 'B', 'F'};
    out.reserve(kEmbeddingHeaderSize + 4 * values.data().size() + 8);
    put_le<std::uint32_t>(out, kEmbeddingVersion);
    put_le<std::uint64_t>(out, values.rows());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(values.cols()));
    std::uint64_t checksum = 0;
    for (double v : values.data()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int i = 0; i < 4; ++i) {
            const auto byte = static_cast<std::uint8_t>(bits >> (8 * i));
            out.push_back(byte);
            checksum += byte;
        }
    }
    put_le<std::uint64_t>(out, checksum);
    return out;
}

Matrix decode_embeddings(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "EMBF", 4) != 0) {
        throw FormatError("bad magic: expected \"EMBF\"");
    }
    if (bytes.size() < kEmbeddingHeaderSize) {
        throw FormatError("truncated header: expected " + std::to_string(kEmbeddingHeaderSize) + " bytes, found " +
                          std::to_string(bytes.size()));
    }
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kEmbeddingVersion) {
        throw FormatError("unsupported version: " + std::to_string(version) + " (expected " +
                          std::to_string(kEmbeddingVersion) + ")");
    }
    const auto n = get_le<std::uint64_t>(bytes, 8);
    const auto d = get_le<std::uint32_t>(bytes, 16);
    if (n == 0 || d == 0) throw FormatError("bad dimensions: n=" + std::to_string(n) + " d=" + std::to_string(d));
    if (n > (std::uint64_t{1} << 40) / d) throw FormatError("bad dimensions: n*d too large");
    const std::uint64_t payload = 4 * n * d;
    const std::size_t available = bytes.size() - kEmbeddingHeaderSize;
    if (available < payload) {
        throw FormatError("truncated payload: expected " + std::to_string(payload) + " bytes, found " +
                          std::to_string(available));
    }
    if (available < payload + 8) {
        throw FormatError("truncated checksum: expected 8 bytes, found " + std::to_string(available - payload));
    }
    if (available > payload + 8) {
        throw FormatError("trailing data: " + std::to_string(available - payload - 8) + " unexpected bytes");
    }

    Matrix out(n, d);
    std::uint64_t checksum = 0;
    auto values = out.data();
    for (std::uint64_t i = 0; i < n * d; ++i) {
        const std::size_t offset = kEmbeddingHeaderSize + 4 * i;
        for (std::size_t b = 0; b < 4; ++b) checksum += bytes[offset + b];
        values[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset)));
    }
    const auto stored = get_le<std::uint64_t>(bytes, kEmbeddingHeaderSize + payload);
    if (stored != checksum) {
        throw FormatError("checksum mismatch: stored " + std::to_string(stored) + ", computed " +
                          std::to_string(checksum));
    }
    for (std::uint64_t r = 0; r < n; ++r) {
        for (double v : out.row(r)) {
            if (!std::isfinite(v)) throw FormatError("non-finite payload value in row " + std::to_string(r));
        }
    }
    return out;
}

void write_embeddings(const std::filesystem::path& path, const Matrix& values) {
    const auto bytes = encode_embeddings(values);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Matrix read_embeddings(const std::filesystem::path& path) { return decode_embeddings(read_binary(path)); }

Matrix import_text_embeddings(const std::filesystem::path& path, char delimiter) {
    std::istringstream in(read_text_file(path));
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        const std::string cleaned = trim(line);
        if (cleaned.empty()) continue;
        std::size_t count = 0;
        std::size_t start = 0;
        while (start <= cleaned.size()) {
            const std::size_t stop = std::min(cleaned.find(delimiter, start), cleaned.size());
            double v = 0.0;
            if (!parse_number(trim(std::string_view(cleaned).substr(start, stop - start)), v)) {
                throw FormatError("line " + std::to_string(rows + 1) + ": not a number");
            }
            values.push_back(v);
            ++count;
            start = stop + 1;
        }
        if (rows == 0) cols = count;
        if (count != cols) {
            throw FormatError("line " + std::to_string(rows + 1) + ": expected " + std::to_string(cols) +
                              " values, found " + std::to_string(count));
        }
        ++rows;
    }
    if (rows == 0) throw FormatError("no embeddings in " + path.string());
    return Matrix(rows, cols, std::move(values));
}

std::string encode_labels(std::span<const LabelEntry> entries) {
    std::string out = "id,label\n";
    for (const LabelEntry& e : entries) out += std::to_string(e.id) + "," + std::to_string(e.label) + "\n";
    return out;
}

std::vector<LabelEntry> decode_labels(std::string_view text, std::size_t classes) {
    std::vector<LabelEntry> out;
    std::unordered_set<SampleId> seen;
    std::size_t line_no = 0;
    bool header = false;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        const std::string line = trim(text.substr(0, eol));
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (line.empty()) continue;
        if (!header) {
            if (line != "id,label") throw FormatError("label file: expected header \"id,label\" on line 1");
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        LabelEntry e;
        if (comma == std::string::npos || !parse_number(trim(std::string_view(line).substr(0, comma)), e.id) ||
            !parse_number(trim(std::string_view(line).substr(comma + 1)), e.label)) {
            throw FormatError("label file row " + std::to_string(line_no) + ": expected \"<id>,<label>\"");
        }
        if (e.label != kUnlabeled && (e.label < 0 || static_cast<std::size_t>(e.label) >= classes)) {
            throw FormatError("label file row " + std::to_string(line_no) + ": label " + std::to_string(e.label) +
                              " outside 0.." + std::to_string(classes - 1));
        }
        if (!seen.insert(e.id).second) {
            throw FormatError("label file row " + std::to_string(line_no) + ": duplicate id " + std::to_string(e.id));
        }
        out.push_back(e);
    }
    if (!header) throw FormatError("label file: missing header \"id,label\"");
    return out;
}

void write_labels(const std::filesystem::path& path, std::span<const LabelEntry> entries) {
    write_text_file(path, encode_labels(entries));
}

std::vector<LabelEntry> read_labels(const std::filesystem::path& path, std::size_t classes) {
    return decode_labels(read_text_file(path), classes);
}

Dataset read_dataset(const std::filesystem::path& embeddings, const std::filesystem::path& labels,
                     std::size_t classes) {
    Matrix values = read_embeddings(embeddings);
    const auto entries = read_labels(labels, classes);
    std::vector<ClassLabel> by_row(values.rows(), kUnlabeled);
    for (const LabelEntry& e : entries) {
        if (e.id < 0 || static_cast<std::size_t>(e.id) >= values.rows()) {
            throw FormatError("label file id " + std::to_string(e.id) + " has no embedding row");
        }
        by_row[static_cast<std::size_t>(e.id)] = e.label;
    }
    for (std::size_t r = 0; r < by_row.size(); ++r) {
        if (by_row[r] == kUnlabeled) throw FormatError("sample " + std::to_string(r) + " has no label");
    }
    Dataset data{FeatureMatrix(std::move(values)), std::move(by_row), classes, {}};
    for (std::size_t c = 0; c < classes; ++c) data.class_names.push_back("class" + std::to_string(c));
    return data;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view raw = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty key");
        if (!out.emplace(key, trim(std::string_view(line).substr(eq + 1))).second) {
            throw FormatError("config line " + std::to_string(line_no) + ": repeated key " + key);
        }
    }
    return out;
}

namespace {

template <typename T>
T config_number(const std::string& key, const std::string& value) {
    T out{};
    if (!parse_number(value, out)) throw FormatError("config key " + key + ": invalid value '" + value + "'");
    return out;
}

bool config_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw FormatError("config key " + key + ": expected true or false");
}

}  // namespace

ALConfig parse_al_config(std::string_view text) {
    ALConfig c;
    const auto entries = parse_key_values(text);
    // The binary preset defaults to two classes and 5 epochs.
    if (auto it = entries.find("data_preset"); it != entries.end() && it->second == "wiki-attack") {
        c.k = 2;
        c.epochs = 5;
    }
    for (const auto& [key, value] : entries) {
        if (key == "strategy") {
            c.strategies.clear();
            std::string_view rest = value;
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                c.strategies.push_back(parse_strategy(trim(rest.substr(0, comma))));
                rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
            }
        } else if (key == "draw_size") {
            c.draw_size = config_number<std::size_t>(key, value);
        } else if (key == "initial_size") {
            c.initial_size = config_number<std::size_t>(key, value);
        } else if (key == "budget") {
            c.budget = config_number<std::size_t>(key, value);
        } else if (key == "k") {
            c.k = config_number<std::size_t>(key, value);
        } else if (key == "epochs") {
            c.epochs = config_number<int>(key, value);
        } else if (key == "mc_passes") {
            c.mc_passes = config_number<int>(key, value);
        } else if (key == "dropout_rate") {
            c.dropout_rate = config_number<double>(key, value);
        } else if (key == "learning_rate") {
            c.learning_rate = config_number<double>(key, value);
        } else if (key == "batch_size") {
            c.batch_size = config_number<std::size_t>(key, value);
        } else if (key == "hidden") {
            c.hidden = config_number<std::size_t>(key, value);
        } else if (key == "alpha_decay") {
            c.alpha_decay = config_number<double>(key, value);
        } else if (key == "alpha_mode") {
            if (value == "additive") {
                c.alpha_mode = AlphaDecay::additive;
            } else if (value == "multiplicative") {
                c.alpha_mode = AlphaDecay::multiplicative;
            } else {
                throw FormatError("config key alpha_mode: expected additive or multiplicative");
            }
        } else if (key == "repetitions") {
            c.repetitions = config_number<int>(key, value);
        } else if (key == "master_seed") {
            c.master_seed = config_number<std::uint64_t>(key, value);
        } else if (key == "freeze_clusters") {
            c.freeze_clusters = config_bool(key, value);
        } else if (key == "f1_average") {
            if (value == "macro") {
                c.f1_average = F1Average::macro;
            } else if (value == "micro") {
                c.f1_average = F1Average::micro;
            } else {
                throw FormatError("config key f1_average: expected macro or micro");
            }
        } else if (key == "threads") {
            c.threads = config_number<int>(key, value);
        } else if (key == "data_preset") {
            c.data_preset = value;
        } else if (key == "data_n") {
            c.data_n = config_number<std::size_t>(key, value);
        } else if (key == "data_dim") {
            c.data_dim = config_number<std::size_t>(key, value);
        } else if (key == "data_spread") {
            c.data_spread = config_number<double>(key, value);
        } else if (key == "embeddings") {
            c.embeddings = value;
        } else if (key == "labels") {
            c.labels = value;
        } else if (key == "test_fraction") {
            c.test_fraction = config_number<double>(key, value);
        } else {
            throw FormatError("config: unknown key " + key);
        }
    }
    c.validate();
    return c;
}

ALConfig read_al_config(const std::filesystem::path& path) { return parse_al_config(read_text_file(path)); }

std::string format_real(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string format_al_config(const ALConfig& c) {
    std::string strategies;
    for (Strategy s : c.strategies) {
        if (!strategies.empty()) strategies += ",";
        strategies += strategy_name(s);
    }
    std::ostringstream out;
    out << "strategy = " << strategies << '\n'
        << "draw_size = " << c.draw_size << '\n'
        << "initial_size = " << c.initial_size << '\n'
        << "budget = " << c.budget << '\n'
        << "k = " << c.k << '\n'
        << "epochs = " << c.epochs << '\n'
        << "mc_passes = " << c.mc_passes << '\n'
        << "dropout_rate = " << format_real(c.dropout_rate) << '\n'
        << "learning_rate = " << format_real(c.learning_rate) << '\n'
        << "batch_size = " << c.batch_size << '\n'
        << "hidden = " << c.hidden << '\n'
        << "alpha_decay = " << format_real(c.alpha_decay) << '\n'
        << "alpha_mode = " << (c.alpha_mode == AlphaDecay::additive ? "additive" : "multiplicative") << '\n'
        << "repetitions = " << c.repetitions << '\n'
        << "master_seed = " << c.master_seed << '\n'
        << "freeze_clusters = " << (c.freeze_clusters ? "true" : "false") << '\n'
        << "f1_average = " << (c.f1_average == F1Average::macro ? "macro" : "micro") << '\n'
        << "threads = " << c.threads << '\n'
        << "data_preset = " << c.data_preset << '\n'
        << "data_n = " << c.data_n << '\n'
        << "data_dim = " << c.data_dim << '\n'
        << "data_spread = " << format_real(c.data_spread) << '\n'
        << "test_fraction = " << format_real(c.test_fraction) << '\n';
    if (!c.embeddings.empty()) out << "embeddings = " << c.embeddings << '\n';
    if (!c.labels.empty()) out << "labels = " << c.labels << '\n';
    return out.str();
}

void write_model(const std::filesystem::path& path, const ClassifierParams& p) {
    nlohmann::json j;
    j["input_dim"] = p.input_dim;
    j["hidden"] = p.hidden;
    j["classes"] = p.classes;
    j["dropout_rate"] = p.dropout_rate;
    j["w1"] = std::vector<double>(p.w1.data().begin(), p.w1.data().end());
    j["b1"] = p.b1;
    j["w2"] = std::vector<double>(p.w2.data().begin(), p.w2.data().end());
    j["b2"] = p.b2;
    write_text_file(path, j.dump());
}

ClassifierParams read_model(const std::filesystem::path& path) {
    try {
        const auto j = nlohmann::json::parse(read_text_file(path));
        ClassifierParams p;
        p.input_dim = j.at("input_dim").get<std::size_t>();
        p.hidden = j.at("hidden").get<std::size_t>();
        p.classes = j.at("classes").get<std::size_t>();
        p.dropout_rate = j.at("dropout_rate").get<double>();
        p.w1 = Matrix(p.hidden, p.input_dim, j.at("w1").get<std::vector<double>>());
        p.b1 = j.at("b1").get<std::vector<double>>();
        p.w2 = Matrix(p.classes, p.hidden, j.at("w2").get<std::vector<double>>());
        p.b2 = j.at("b2").get<std::vector<double>>();
        if (p.b1.size() != p.hidden || p.b2.size() != p.classes) throw FormatError("model: bias length mismatch");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model file " + path.string() + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError("model file " + path.string() + ": " + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace ndsal
