#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "erp/decimal.hpp"
#include "erp/errors.hpp"
#include "erp/rng.hpp"
#include "erp/sha256.hpp"
#include "erp/textscan.hpp"

namespace erp {

enum class Dataset { gsm8k, aqua, math, csqa, strategyqa };
enum class TaskKind { numeric, choice, boolean_answer, expression };

inline const char* dataset_name(Dataset d) {
    switch (d) {
        case Dataset::gsm8k: return "gsm8k";
        case Dataset::aqua: return "aqua";
        case Dataset::math: return "math";
        case Dataset::csqa: return "csqa";
        case Dataset::strategyqa: return "strategyqa";
    }
    return "?";
}

inline std::optional<Dataset> parse_dataset(std::string_view name) {
    std::string n = lower_ascii(name);
    if (n == "gsm8k") return Dataset::gsm8k;
    if (n == "aqua") return Dataset::aqua;
    if (n == "math") return Dataset::math;
    if (n == "csqa") return Dataset::csqa;
    if (n == "strategyqa") return Dataset::strategyqa;
    return std::nullopt;
}

inline TaskKind task_kind_of(Dataset d) {
    switch (d) {
        case Dataset::gsm8k: return TaskKind::numeric;
        case Dataset::aqua:
        case Dataset::csqa: return TaskKind::choice;
        case Dataset::strategyqa: return TaskKind::boolean_answer;
        case Dataset::math: return TaskKind::expression;
    }
    return TaskKind::numeric;
}

inline const char* task_kind_name(TaskKind k) {
    switch (k) {
        case TaskKind::numeric: return "numeric";
        case TaskKind::choice: return "choice";
        case TaskKind::boolean_answer: return "boolean";
        case TaskKind::expression: return "expression";
    }
    return "?";
}

// Evaluation splits: dev for the two commonsense datasets (their test
// answers are not public), test otherwise.
inline const char* default_split(Dataset d) {
    return (d == Dataset::csqa || d == Dataset::strategyqa) ? "dev" : "test";
}

struct GoldAnswer {
    TaskKind kind = TaskKind::numeric;
    Decimal numeric;            // kind == numeric
    char choice = 0;            // kind == choice, 'A'..'E'
    bool boolean = false;       // kind == boolean_answer
    std::string expression;       // kind == expression, raw boxed payload
    std::string expression_norm;  // normalize_expression(expression)

    static GoldAnswer of_numeric(Decimal d) {
        GoldAnswer g;
        g.kind = TaskKind::numeric;
        g.numeric = std::move(d);
        return g;
    }
    static GoldAnswer of_choice(char label) {
        GoldAnswer g;
        g.kind = TaskKind::choice;
        g.choice = label;
        return g;
    }
    static GoldAnswer of_boolean(bool value) {
        GoldAnswer g;
        g.kind = TaskKind::boolean_answer;
        g.boolean = value;
        return g;
    }
    static GoldAnswer of_expression(std::string raw) {
        GoldAnswer g;
        g.kind = TaskKind::expression;
        g.expression_norm = normalize_expression(raw);
        g.expression = std::move(raw);
        return g;
    }

    std::string display() const {
        switch (kind) {
            case TaskKind::numeric: return numeric.canonical();
            case TaskKind::choice: return std::string(1, choice);
            case TaskKind::boolean_answer: return boolean ? "yes" : "no";
            case TaskKind::expression: return expression;
        }
        return "";
    }

    friend bool operator==(const GoldAnswer& a, const GoldAnswer& b) {
        return a.kind == b.kind && a.numeric == b.numeric &&
               a.choice == b.choice && a.boolean == b.boolean &&
               a.expression == b.expression &&
               a.expression_norm == b.expression_norm;
    }
};

struct Choice {
    char label = 0;
    std::string text;
    friend bool operator==(const Choice& a, const Choice& b) {
        return a.label == b.label && a.text == b.text;
    }
};

struct ProblemRecord {
    std::string id;
    Dataset dataset = Dataset::gsm8k;
    std::string question;
    std::vector<Choice> choices;
    GoldAnswer gold;
    std::map<std::string, std::string> meta;

    friend bool operator==(const ProblemRecord& a, const ProblemRecord& b) {
        return a.id == b.id && a.dataset == b.dataset &&
               a.question == b.question && a.choices == b.choices &&
               a.gold == b.gold && a.meta == b.meta;
    }
};

inline void validate_record(const ProblemRecord& rec) {
    bool wants_choices =
        rec.dataset == Dataset::aqua || rec.dataset == Dataset::csqa;
    require(rec.choices.empty() != wants_choices, Errc::malformed_record,
            rec.id + ": choices must be non-empty iff dataset has options");
    require(rec.gold.kind == task_kind_of(rec.dataset), Errc::malformed_record,
            rec.id + ": gold kind does not match dataset task kind");
    require(!rec.question.empty(), Errc::malformed_record,
            rec.id + ": empty question");
    if (rec.gold.kind == TaskKind::choice) {
        bool found = false;
        for (const auto& c : rec.choices) found |= c.label == rec.gold.choice;
        require(found, Errc::malformed_record,
                rec.id + ": gold label not among choices");
    }
}

// ---------------------------------------------------------------------------
// Gold extraction per dataset

namespace detail {

inline std::string json_string(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) return "";
    return j.at(key).get<std::string>();
}

inline std::optional<char> parse_choice_key(std::string_view raw) {
    auto t = trim_view(raw);
    if (t.empty()) return std::nullopt;
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
    if (c < 'A' || c > 'E') return std::nullopt;
    return c;
}

}  // namespace detail

inline GoldAnswer extract_gold(Dataset dataset, const nlohmann::json& raw) {
    switch (dataset) {
        case Dataset::gsm8k: {
            std::string answer = detail::json_string(raw, "answer");
            size_t pos = answer.rfind("####");
            require(pos != std::string::npos, Errc::gold_missing,
                    "gsm8k answer has no #### delimiter");
            std::string tail = trim(answer.substr(pos + 4));
            std::string digits;
            for (char c : tail) {
                if (c == ',' || c == '$' || c == ' ') continue;
                digits += c;
            }
            while (!digits.empty() && digits.back() == '.') digits.pop_back();
            auto dec = Decimal::parse(digits);
            require(dec.has_value(), Errc::gold_missing,
                    "gsm8k gold not numeric: '" + tail + "'");
            return GoldAnswer::of_numeric(*dec);
        }
        case Dataset::math: {
            std::string solution = detail::json_string(raw, "solution");
            auto scan = scan_boxed_groups(solution);
            require(!scan.groups.empty(), Errc::gold_missing,
                    "math solution has no balanced \\boxed group");
            return GoldAnswer::of_expression(scan.groups.back().content);
        }
        case Dataset::aqua: {
            auto key = detail::parse_choice_key(detail::json_string(raw, "correct"));
            require(key.has_value(), Errc::gold_missing,
                    "aqua correct key absent or not A..E");
            return GoldAnswer::of_choice(*key);
        }
        case Dataset::csqa: {
            auto key =
                detail::parse_choice_key(detail::json_string(raw, "answerKey"));
            require(key.has_value(), Errc::gold_missing,
                    "csqa answerKey absent or not A..E");
            return GoldAnswer::of_choice(*key);
        }
        case Dataset::strategyqa: {
            require(raw.contains("answer"), Errc::gold_missing,
                    "strategyqa item has no answer field");
            const auto& a = raw.at("answer");
            if (a.is_boolean()) return GoldAnswer::of_boolean(a.get<bool>());
            if (a.is_string()) {
                std::string s = lower_ascii(a.get<std::string>());
                if (s == "yes" || s == "true") return GoldAnswer::of_boolean(true);
                if (s == "no" || s == "false")
                    return GoldAnswer::of_boolean(false);
            }
            fail(Errc::gold_missing, "strategyqa answer is not a boolean");
        }
    }
    fail(Errc::gold_missing, "unknown dataset");
}

// ---------------------------------------------------------------------------
// Loaders

namespace detail {

inline nlohmann::json parse_json_line(const std::string& line, size_t line_no) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    require(!j.is_discarded(), Errc::malformed_record,
            "line " + std::to_string(line_no) + ": invalid JSON");
    require(j.is_object(), Errc::malformed_record,
            "line " + std::to_string(line_no) + ": expected a JSON object");
    return j;
}

inline std::string make_id(Dataset d, const nlohmann::json& raw, size_t index) {
    for (const char* key : {"id", "qid"}) {
        if (raw.contains(key) && raw.at(key).is_string()) {
            return std::string(dataset_name(d)) + "/" +
                   raw.at(key).get<std::string>();
        }
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05zu", index);
    return std::string(dataset_name(d)) + "/" + buf;
}

inline ProblemRecord record_from_item(Dataset d, const nlohmann::json& raw,
                                      size_t index, const std::string& split) {
    ProblemRecord rec;
    rec.dataset = d;
    rec.id = make_id(d, raw, index);
    rec.meta["split"] = split;
    rec.meta["line"] = std::to_string(index);
    try {
        switch (d) {
            case Dataset::gsm8k: {
                rec.question = json_string(raw, "question");
                std::string answer = json_string(raw, "answer");
                size_t pos = answer.rfind("####");
                if (pos != std::string::npos) {
                    rec.meta["rationale"] = trim(answer.substr(0, pos));
                }
                break;
            }
            case Dataset::aqua: {
                rec.question = json_string(raw, "question");
                require(raw.contains("options") && raw.at("options").is_array(),
                        Errc::malformed_record, "aqua item has no options list");
                for (const auto& opt : raw.at("options")) {
                    require(opt.is_string(), Errc::malformed_record,
                            "aqua option is not a string");
                    std::string s = trim(opt.get<std::string>());
                    require(s.size() >= 2, Errc::malformed_record,
                            "aqua option too short: '" + s + "'");
                    char label = static_cast<char>(
                        std::toupper(static_cast<unsigned char>(s[0])));
                    require(label >= 'A' && label <= 'E' && s[1] == ')',
                            Errc::malformed_record,
                            "aqua option not in 'A)...' form: '" + s + "'");
                    rec.choices.push_back({label, trim(s.substr(2))});
                }
                std::string rationale = json_string(raw, "rationale");
                if (!rationale.empty()) rec.meta["rationale"] = rationale;
                break;
            }
            case Dataset::math: {
                rec.question = json_string(raw, "problem");
                if (raw.contains("level") && raw.at("level").is_string())
                    rec.meta["level"] = raw.at("level").get<std::string>();
                if (raw.contains("type") && raw.at("type").is_string())
                    rec.meta["type"] = raw.at("type").get<std::string>();
                break;
            }
            case Dataset::csqa: {
                require(raw.contains("question") && raw.at("question").is_object(),
                        Errc::malformed_record, "csqa item has no question object");
                const auto& q = raw.at("question");
                rec.question = json_string(q, "stem");
                require(q.contains("choices") && q.at("choices").is_array(),
                        Errc::malformed_record, "csqa question has no choices");
                for (const auto& c : q.at("choices")) {
                    std::string label = json_string(c, "label");
                    auto key = parse_choice_key(label);
                    require(key.has_value(), Errc::malformed_record,
                            "csqa choice label not A..E: '" + label + "'");
                    rec.choices.push_back({*key, json_string(c, "text")});
                }
                break;
            }
            case Dataset::strategyqa: {
                rec.question = json_string(raw, "question");
                break;
            }
        }
        rec.gold = extract_gold(d, raw);
        validate_record(rec);
    } catch (const Error& e) {
        if (e.code() == Errc::gold_missing) throw;
        fail(Errc::malformed_record,
             "item " + std::to_string(index) + ": " + e.what());
    }
    return rec;
}

inline std::vector<nlohmann::json> read_items(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    std::vector<nlohmann::json> items;
    auto body = trim_view(text);
    if (body.empty()) return items;

    // StrategyQA ships as one JSON array; everything else is JSON-lines.
    if (body.front() == '[') {
        nlohmann::json arr = nlohmann::json::parse(body, nullptr, false);
        require(!arr.is_discarded() && arr.is_array(), Errc::malformed_record,
                path.string() + ": invalid JSON array");
        for (auto& item : arr) items.push_back(std::move(item));
        return items;
    }

    std::istringstream lines(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        items.push_back(parse_json_line(line, line_no));
    }
    return items;
}

inline std::vector<ProblemRecord> load_math_dir(
    const std::filesystem::path& dir, const std::string& split) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<ProblemRecord> records;
    size_t index = 0;
    for (const auto& f : files) {
        std::ifstream in(f);
        nlohmann::json raw;
        raw = nlohmann::json::parse(in, nullptr, false);
        require(!raw.is_discarded() && raw.is_object(), Errc::malformed_record,
                f.string() + ": invalid JSON object");
        ProblemRecord rec = record_from_item(Dataset::math, raw, index, split);
        std::string rel = fs::relative(f, dir).generic_string();
        if (rel.size() > 5 && rel.ends_with(".json")) {
            rel = rel.substr(0, rel.size() - 5);
        }
        rec.id = std::string(dataset_name(Dataset::math)) + "/" + rel;
        records.push_back(std::move(rec));
        ++index;
    }
    return records;
}

}  // namespace detail

// Loads one dataset file (or, for MATH, optionally a directory of
// per-problem JSON files) into the uniform record form.
inline std::vector<ProblemRecord> load_dataset(Dataset dataset,
                                               const std::filesystem::path& path,
                                               std::string split = "") {
    if (split.empty()) split = default_split(dataset);
    require(std::filesystem::exists(path), Errc::io_error,
            "dataset path does not exist: " + path.string());
    if (dataset == Dataset::math && std::filesystem::is_directory(path)) {
        return detail::load_math_dir(path, split);
    }
    auto items = detail::read_items(path);
    std::vector<ProblemRecord> records;
    records.reserve(items.size());
    std::vector<std::string> seen_ids;
    for (size_t i = 0; i < items.size(); ++i) {
        records.push_back(detail::record_from_item(dataset, items[i], i, split));
    }
    // id uniqueness within the dataset
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    auto dup = std::adjacent_find(ids.begin(), ids.end());
    require(dup == ids.end(), Errc::malformed_record,
            "duplicate record id: " + (dup == ids.end() ? "" : *dup));
    return records;
}

// ---------------------------------------------------------------------------
// Slicing

struct CorpusSlice {
    Dataset dataset = Dataset::gsm8k;
    uint64_t seed = 0;
    std::optional<size_t> count;  // nullopt = ALL
    std::vector<ProblemRecord> records;
};

// Deterministic seeded shuffle + truncation. count > size clamps; the
// input list is left untouched.
inline CorpusSlice slice(const std::vector<ProblemRecord>& records,
                         uint64_t seed, std::optional<size_t> count,
                         Dataset dataset) {
    require(!count.has_value() || *count >= 1, Errc::invalid_argument,
            "slice count must be >= 1 or ALL");
    CorpusSlice s;
    s.dataset = dataset;
    s.seed = seed;
    s.count = count;
    s.records = records;
    seeded_shuffle(s.records, seed);
    if (count.has_value() && s.records.size() > *count) {
        s.records.resize(*count);
    }
    return s;
}

// ---------------------------------------------------------------------------
// JSON round trip

inline nlohmann::json gold_to_json(const GoldAnswer& g) {
    nlohmann::json j;
    j["kind"] = task_kind_name(g.kind);
    switch (g.kind) {
        case TaskKind::numeric: j["value"] = g.numeric.canonical(); break;
        case TaskKind::choice: j["value"] = std::string(1, g.choice); break;
        case TaskKind::boolean_answer: j["value"] = g.boolean; break;
        case TaskKind::expression:
            j["value"] = g.expression;
            j["normalized"] = g.expression_norm;
            break;
    }
    return j;
}

inline GoldAnswer gold_from_json(const nlohmann::json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "numeric") {
        auto d = Decimal::parse(j.at("value").get<std::string>());
        require(d.has_value(), Errc::malformed_record, "bad numeric gold");
        return GoldAnswer::of_numeric(*d);
    }
    if (kind == "choice") {
        std::string v = j.at("value").get<std::string>();
        require(v.size() == 1, Errc::malformed_record, "bad choice gold");
        return GoldAnswer::of_choice(v[0]);
    }
    if (kind == "boolean") {
        return GoldAnswer::of_boolean(j.at("value").get<bool>());
    }
    if (kind == "expression") {
        return GoldAnswer::of_expression(j.at("value").get<std::string>());
    }
    fail(Errc::malformed_record, "unknown gold kind: " + kind);
}

inline nlohmann::json record_to_json(const ProblemRecord& rec) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["dataset"] = dataset_name(rec.dataset);
    j["question"] = rec.question;
    auto choices = nlohmann::json::array();
    for (const auto& c : rec.choices) {
        choices.push_back({std::string(1, c.label), c.text});
    }
    j["choices"] = choices;
    j["gold"] = gold_to_json(rec.gold);
    j["meta"] = rec.meta;
    return j;
}

inline ProblemRecord record_from_json(const nlohmann::json& j) {
    ProblemRecord rec;
    rec.id = j.at("id").get<std::string>();
    auto d = parse_dataset(j.at("dataset").get<std::string>());
    require(d.has_value(), Errc::malformed_record, "unknown dataset in record");
    rec.dataset = *d;
    rec.question = j.at("question").get<std::string>();
    for (const auto& c : j.at("choices")) {
        std::string label = c.at(0).get<std::string>();
        require(label.size() == 1, Errc::malformed_record, "bad choice label");
        rec.choices.push_back({label[0], c.at(1).get<std::string>()});
    }
    rec.gold = gold_from_json(j.at("gold"));
    rec.meta = j.at("meta").get<std::map<std::string, std::string>>();
    return rec;
}

// Manifest: header line {dataset, seed, count, content_hash} followed by
// one record per line. The hash covers the record lines exactly as
// written, so a reload can prove it is reading what was stored.
inline void save_slice_manifest(const CorpusSlice& s,
                                const std::filesystem::path& path) {
    std::string body;
    for (const auto& rec : s.records) {
        body += record_to_json(rec).dump();
        body += '\n';
    }
    nlohmann::json header;
    header["dataset"] = dataset_name(s.dataset);
    header["seed"] = s.seed;
    if (s.count.has_value()) {
        header["count"] = *s.count;
    } else {
        header["count"] = "all";
    }
    header["content_hash"] = sha256_hex(body);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_error, "cannot write " + path.string());
    out << header.dump() << '\n' << body;
}

inline CorpusSlice load_slice_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io_error, "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), Errc::malformed_record,
            "manifest is empty: " + path.string());
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    require(!header.is_discarded() && header.is_object(), Errc::malformed_record,
            "manifest header is not a JSON object");

    CorpusSlice s;
    auto d = parse_dataset(header.at("dataset").get<std::string>());
    require(d.has_value(), Errc::malformed_record, "manifest dataset unknown");
    s.dataset = *d;
    s.seed = header.at("seed").get<uint64_t>();
    if (header.at("count").is_string()) {
        require(header.at("count").get<std::string>() == "all",
                Errc::malformed_record, "manifest count must be a number or 'all'");
        s.count = std::nullopt;
    } else {
        s.count = header.at("count").get<size_t>();
    }

    std::string body;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        body += line;
        body += '\n';
        s.records.push_back(record_from_json(detail::parse_json_line(line, line_no)));
    }
    require(sha256_hex(body) == header.at("content_hash").get<std::string>(),
            Errc::malformed_record, "manifest content hash mismatch");
    return s;
}

}  // namespace erp
