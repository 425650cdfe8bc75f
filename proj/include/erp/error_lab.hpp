#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "erp/evaluator.hpp"
#include "erp/meta_prompts.hpp"
#include "erp/rng.hpp"
#include "erp/taxonomy.hpp"

namespace erp {

// ---------------------------------------------------------------------------
// Annotations

struct ErrorAnnotation {
    std::string problem_id;
    std::string run_id;
    ErrorCategoryId category = ErrorCategoryId::misinterpretation;
    std::string judge_rationale;
    std::string judge_transcript_digest;
    std::optional<bool> validity;  // human T/F judgment, set later
};

inline nlohmann::json annotation_to_json(const ErrorAnnotation& a) {
    nlohmann::json j;
    j["problem_id"] = a.problem_id;
    j["run_id"] = a.run_id;
    j["category"] = std::string(category_info(a.category).name);
    j["judge_rationale"] = a.judge_rationale;
    j["judge_transcript_digest"] = a.judge_transcript_digest;
    if (a.validity.has_value()) {
        j["validity"] = *a.validity;
    } else {
        j["validity"] = nullptr;
    }
    return j;
}

inline ErrorAnnotation annotation_from_json(const nlohmann::json& j) {
    ErrorAnnotation a;
    a.problem_id = j.at("problem_id").get<std::string>();
    a.run_id = j.at("run_id").get<std::string>();
    std::string name = j.at("category").get<std::string>();
    auto id = category_by_name(name);
    require(id.has_value(), Errc::unknown_category,
            "unknown category: " + name);
    a.category = *id;
    a.judge_rationale = j.at("judge_rationale").get<std::string>();
    a.judge_transcript_digest =
        j.at("judge_transcript_digest").get<std::string>();
    if (j.contains("validity") && !j.at("validity").is_null()) {
        a.validity = j.at("validity").get<bool>();
    }
    return a;
}

inline void save_annotations(const std::vector<ErrorAnnotation>& annotations,
                             const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_error, "cannot write " + path.string());
    for (const auto& a : annotations) {
        out << annotation_to_json(a).dump() << '\n';
    }
}

inline std::vector<ErrorAnnotation> load_annotations(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open " + path.string());
    std::vector<ErrorAnnotation> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim_view(line).empty()) continue;
        out.push_back(annotation_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Error sampling

// Deterministic sample of incorrect verdicts, without replacement. Error
// analyses typically judge a fixed-size draw per dataset rather than every
// failure, so callers pass k explicitly.
inline std::vector<Verdict> sample_errors(const std::vector<Verdict>& verdicts,
                                          size_t k, uint64_t seed) {
    require(k >= 1, Errc::invalid_argument, "k must be >= 1");
    for (const auto& v : verdicts) {
        require(!v.correct, Errc::invalid_argument,
                "sample_errors expects only incorrect verdicts: " +
                    v.problem_id);
    }
    return seeded_sample(verdicts, k, seed);
}

// ---------------------------------------------------------------------------
// LLM-judge annotation

struct JudgeOptions {
    std::string model_id;
    bool allow_math = false;  // the analysis skips MATH unless forced
    int max_tokens = 256;
};

namespace detail {

// "Category: <name> <sep> <justification>" with <sep> a spaced hyphen or
// em dash. Returns nullopt unless the name resolves inside `family`.
inline std::optional<std::pair<ErrorCategoryId, std::string>>
parse_judge_reply(const std::string& text, ReasoningFamily family) {
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        std::string line = text.substr(
            pos, (eol == std::string::npos ? text.size() : eol) - pos);
        pos = eol == std::string::npos ? text.size() : eol + 1;

        auto trimmed = trim(line);
        constexpr std::string_view kPrefix = "Category:";
        if (trimmed.rfind(kPrefix, 0) != 0) continue;
        std::string rest = trim(trimmed.substr(kPrefix.size()));

        std::string name = rest;
        std::string rationale;
        for (std::string_view sep : {" - ", " \xE2\x80\x94 "}) {
            size_t cut = rest.find(sep);
            if (cut != std::string::npos) {
                name = trim(rest.substr(0, cut));
                rationale = trim(rest.substr(cut + sep.size()));
                break;
            }
        }
        while (!name.empty() && name.back() == '.') name.pop_back();

        auto id = category_by_name(name);
        if (!id.has_value()) return std::nullopt;
        if (category_info(*id).family != family) return std::nullopt;
        return std::make_pair(*id, rationale);
    }
    return std::nullopt;
}

}  // namespace detail

// One judge call per incorrect verdict. The reply must name a category of
// the dataset's family exactly; one retry with a stricter reminder, then
// JUDGE_UNPARSEABLE.
inline ErrorAnnotation annotate(const Verdict& verdict,
                                const ProblemRecord& record,
                                ReasoningFamily family, ModelGateway& gateway,
                                const std::string& run_id,
                                const JudgeOptions& options) {
    require(!verdict.correct, Errc::invalid_argument,
            "annotate() takes incorrect verdicts only");
    require(verdict.problem_id == record.id, Errc::invalid_argument,
            "verdict and record do not match");
    require(family == family_of(record.dataset), Errc::invalid_argument,
            "family does not match the dataset's reasoning type");
    require(record.dataset != Dataset::math || options.allow_math,
            Errc::invalid_argument,
            "MATH is excluded from error analysis unless explicitly enabled");
    require(!options.model_id.empty(), Errc::invalid_argument,
            "judge model_id empty");

    std::string prompt = render_meta_prompt(
        "judge_v1", {{"categories", category_menu(family)},
                     {"question", prompt_question(record)},
                     {"gold", record.gold.display()},
                     {"answer", verdict.transcript}});

    auto ask = [&](const std::string& text) {
        return gateway.complete(
            make_user_request(options.model_id, text, 0.0,
                              options.max_tokens));
    };

    ChatExchange ex = ask(prompt);
    auto parsed = detail::parse_judge_reply(ex.response_text, family);
    if (!parsed) {
        ex = ask(prompt +
                 "\n\nYour previous reply did not follow the format. Answer "
                 "with one line: \"Category: <category name> - <one-sentence "
                 "justification>\", using a category name from the list "
                 "verbatim.");
        parsed = detail::parse_judge_reply(ex.response_text, family);
    }
    require(parsed.has_value(), Errc::judge_unparseable,
            "judge reply named no usable category for " + verdict.problem_id);

    ErrorAnnotation a;
    a.problem_id = verdict.problem_id;
    a.run_id = run_id;
    a.category = parsed->first;
    a.judge_rationale = parsed->second;
    a.judge_transcript_digest = sha256_hex(ex.response_text);
    return a;
}

// ---------------------------------------------------------------------------
// Annotation validity confidence

// Pools one 0/1 validity vector per annotating model:
// (sum(a) + sum(b)) / (len(a) + len(b)), with both vectors length 50 by
// default.
inline double annotation_confidence(const std::vector<int>& validity_a,
                                    const std::vector<int>& validity_b,
                                    size_t expected_length = 50) {
    require(validity_a.size() == expected_length &&
                validity_b.size() == expected_length,
            Errc::length_mismatch,
            "validity vectors must both have length " +
                std::to_string(expected_length));
    long sum = 0;
    for (const auto* vec : {&validity_a, &validity_b}) {
        for (int bit : *vec) {
            require(bit == 0 || bit == 1, Errc::invalid_argument,
                    "validity entries must be 0 or 1");
            sum += bit;
        }
    }
    return static_cast<double>(sum) /
           static_cast<double>(validity_a.size() + validity_b.size());
}

// ---------------------------------------------------------------------------
// Distributions

struct ErrorDistribution {
    std::string run_id;
    std::vector<std::pair<ErrorCategoryId, size_t>> counts;  // taxonomy order
    size_t sample_size = 0;
};

// Counts per category over one run's annotations. Categories of the
// family always appear, zero-filled, so exports have a stable shape.
inline ErrorDistribution distribution(
    const std::vector<ErrorAnnotation>& annotations,
    std::optional<ReasoningFamily> family = std::nullopt) {
    ErrorDistribution dist;
    dist.sample_size = annotations.size();
    if (!annotations.empty()) {
        dist.run_id = annotations.front().run_id;
        ReasoningFamily inferred =
            category_info(annotations.front().category).family;
        require(!family.has_value() || *family == inferred,
                Errc::mixed_runs, "annotations are not of the given family");
        family = inferred;
        for (const auto& a : annotations) {
            require(a.run_id == dist.run_id, Errc::mixed_runs,
                    "annotations span multiple runs");
            require(category_info(a.category).family == *family,
                    Errc::mixed_runs, "annotations mix reasoning families");
        }
    }
    if (family.has_value()) {
        for (const auto& cat : categories_for(*family)) {
            size_t n = 0;
            for (const auto& a : annotations) {
                if (a.category == cat.id) ++n;
            }
            dist.counts.emplace_back(cat.id, n);
        }
    }
    return dist;
}

inline nlohmann::json distribution_to_json(const ErrorDistribution& dist) {
    nlohmann::json counts = nlohmann::json::object();
    nlohmann::json fractions = nlohmann::json::object();
    for (const auto& [id, n] : dist.counts) {
        std::string name(category_info(id).name);
        counts[name] = n;
        fractions[name] =
            dist.sample_size == 0
                ? 0.0
                : static_cast<double>(n) /
                      static_cast<double>(dist.sample_size);
    }
    return {{"run_id", dist.run_id},
            {"sample_size", dist.sample_size},
            {"counts", counts},
            {"fractions", fractions}};
}

inline std::string distribution_to_csv(const ErrorDistribution& dist) {
    std::string out = "category,count,fraction\n";
    for (const auto& [id, n] : dist.counts) {
        double fraction = dist.sample_size == 0
                              ? 0.0
                              : static_cast<double>(n) /
                                    static_cast<double>(dist.sample_size);
        out += "\"" + std::string(category_info(id).name) + "\"," +
               std::to_string(n) + "," + std::to_string(fraction) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Human labels

// JSON-lines {problem_id, category, validity?}; categories must belong to
// `family` (annotating one run means one dataset, hence one family).
inline std::vector<ErrorAnnotation> import_human_labels(
    const std::filesystem::path& path, ReasoningFamily family,
    const std::string& run_id) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open " + path.string());
    std::vector<ErrorAnnotation> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        require(!j.is_discarded() && j.is_object(), Errc::malformed_record,
                "human label line " + std::to_string(line_no) +
                    " is not a JSON object");
        std::string name = j.at("category").get<std::string>();
        auto id = category_by_name(name);
        require(id.has_value(), Errc::unknown_category,
                "line " + std::to_string(line_no) +
                    ": unknown category: " + name);
        require(category_info(*id).family == family, Errc::unknown_category,
                "line " + std::to_string(line_no) + ": category \"" + name +
                    "\" is outside this run's reasoning family");
        ErrorAnnotation a;
        a.problem_id = j.at("problem_id").get<std::string>();
        a.run_id = run_id;
        a.category = *id;
        a.judge_rationale = "human";
        if (j.contains("validity") && !j.at("validity").is_null()) {
            a.validity = j.at("validity").get<bool>();
        }
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace erp
