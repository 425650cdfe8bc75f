#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "erp/corpus.hpp"
#include "erp/errors.hpp"
#include "erp/taxonomy.hpp"

namespace erp {

enum class PromptStyle { cot, erp, erp_with_categories, erp_no_categories };

inline const char* style_name(PromptStyle s) {
    switch (s) {
        case PromptStyle::cot: return "cot";
        case PromptStyle::erp: return "erp";
        case PromptStyle::erp_with_categories: return "erp_with_categories";
        case PromptStyle::erp_no_categories: return "erp_no_categories";
    }
    return "?";
}

inline std::optional<PromptStyle> parse_style(std::string_view name) {
    std::string n = lower_ascii(name);
    if (n == "cot") return PromptStyle::cot;
    if (n == "erp") return PromptStyle::erp;
    if (n == "erp_with_categories") return PromptStyle::erp_with_categories;
    if (n == "erp_no_categories") return PromptStyle::erp_no_categories;
    return std::nullopt;
}

struct ErrorReflection {
    int index = 0;  // 1-based position in the rendered numbered list
    std::optional<ErrorCategoryId> category;
    std::string description;
};

struct Exemplar {
    std::string question;
    std::optional<std::string> incorrect_answer;
    std::vector<ErrorReflection> reflections;
    std::string correct_answer;
    PromptStyle style = PromptStyle::cot;
};

inline void validate_exemplar(const Exemplar& e) {
    require(!e.question.empty(), Errc::empty_question, "exemplar question empty");
    require(!e.correct_answer.empty(), Errc::malformed_record,
            "exemplar correct answer empty");
    if (e.style == PromptStyle::cot) {
        require(!e.incorrect_answer.has_value() && e.reflections.empty(),
                Errc::malformed_record,
                "cot exemplar must have no incorrect answer and no reflections");
        return;
    }
    require(e.incorrect_answer.has_value() && !e.incorrect_answer->empty(),
            Errc::malformed_record, "erp exemplar needs an incorrect answer");
    require(!e.reflections.empty(), Errc::malformed_record,
            "erp exemplar needs at least one reflection");
    bool first_has = e.reflections.front().category.has_value();
    for (const auto& r : e.reflections) {
        require(!r.description.empty(), Errc::malformed_record,
                "reflection description empty");
        require(r.category.has_value() == first_has, Errc::malformed_record,
                "category presence must be uniform within one exemplar");
    }
    if (e.style == PromptStyle::erp_with_categories) {
        require(first_has, Errc::malformed_record,
                "erp_with_categories requires a category on every reflection");
    }
    if (e.style == PromptStyle::erp_no_categories) {
        require(!first_has, Errc::malformed_record,
                "erp_no_categories forbids categories on reflections");
    }
}

// ---------------------------------------------------------------------------
// Templates. Marker strings are fixed per version; v1 follows the shipped
// prompt fixtures exactly. New phrasings get a new version entry, never an
// edit to v1.

struct PromptTemplate {
    std::string_view version;
    std::string_view question_marker;   // "Question: "
    std::string_view incorrect_marker;  // "Incorrect A: "
    std::string_view errors_header;     // "Errors:"
    std::string_view correct_marker;    // "Correct A: "
    std::string_view cot_answer_marker; // "A: "
    std::string_view shot_separator;    // between exemplar blocks
};

inline const PromptTemplate& prompt_template(std::string_view version) {
    static const PromptTemplate v1{
        "v1", "Question: ", "Incorrect A: ", "Errors:", "Correct A: ",
        "A: ", "\n\n"};
    require(version == "v1", Errc::invalid_argument,
            "unknown template version: " + std::string(version));
    return v1;
}

struct RenderedPrompt {
    std::optional<std::string> system_text;
    std::vector<std::string> shots;
    std::string query_block;
    std::string full_text;
    size_t shot_count = 0;
};

inline std::string render_shot(const Exemplar& e, const PromptTemplate& t) {
    std::string out;
    out += t.question_marker;
    out += e.question;
    out += '\n';
    if (e.style == PromptStyle::cot) {
        out += t.cot_answer_marker;
        out += e.correct_answer;
        return out;
    }
    out += t.incorrect_marker;
    out += *e.incorrect_answer;
    out += '\n';
    out += t.errors_header;
    out += '\n';
    int n = 0;
    for (const auto& r : e.reflections) {
        ++n;
        out += std::to_string(n);
        out += ". ";
        if (r.category.has_value()) {
            out += category_info(*r.category).name;
            out += " - ";
        }
        out += r.description;
        out += '\n';
    }
    out += t.correct_marker;
    out += e.correct_answer;
    return out;
}

// The question text as it appears in a prompt: option datasets get their
// choices appended in the fixtures' "(a) text (b) text" form.
inline std::string prompt_question(const ProblemRecord& rec) {
    std::string q = rec.question;
    if (!rec.choices.empty()) {
        q += " Answer Choices:";
        for (const auto& c : rec.choices) {
            q += " (";
            q += to_lower_ascii(c.label);
            q += ") ";
            q += c.text;
        }
    }
    return q;
}

namespace detail {

inline PromptStyle common_style(const std::vector<Exemplar>& exemplars) {
    require(!exemplars.empty(), Errc::empty_exemplars, "no exemplars given");
    PromptStyle style = exemplars.front().style;
    for (const auto& e : exemplars) {
        require(e.style == style, Errc::mixed_styles,
                "exemplars mix prompt styles");
        validate_exemplar(e);
    }
    return style;
}

}  // namespace detail

// Few-shot prompt: every exemplar block, then the target question with
// the answer slot open (continuation marker only). Byte-deterministic in
// (exemplars, question, version).
inline RenderedPrompt render_prompt(const std::vector<Exemplar>& exemplars,
                                    const std::string& target_question,
                                    const std::string& version = "v1",
                                    std::optional<std::string> system_text =
                                        std::nullopt) {
    PromptStyle style = detail::common_style(exemplars);
    require(!target_question.empty(), Errc::empty_question,
            "target question is empty");
    const PromptTemplate& t = prompt_template(version);

    RenderedPrompt out;
    out.system_text = std::move(system_text);
    for (const auto& e : exemplars) out.shots.push_back(render_shot(e, t));
    out.shot_count = out.shots.size();

    out.query_block += t.question_marker;
    out.query_block += target_question;
    out.query_block += '\n';
    std::string_view open_marker = style == PromptStyle::cot
                                       ? t.cot_answer_marker
                                       : t.incorrect_marker;
    // trailing space trimmed: the model continues right after the colon
    out.query_block += trim(open_marker);

    for (const auto& s : out.shots) {
        out.full_text += s;
        out.full_text += t.shot_separator;
    }
    out.full_text += out.query_block;
    return out;
}

inline RenderedPrompt render_prompt(const std::vector<Exemplar>& exemplars,
                                    const ProblemRecord& target,
                                    const std::string& version = "v1",
                                    std::optional<std::string> system_text =
                                        std::nullopt) {
    return render_prompt(exemplars, prompt_question(target), version,
                         std::move(system_text));
}

// Fixture body: the exemplar blocks only, no target question. This is the
// exact byte content of the shipped golden prompt files.
inline std::string render_prompt_set(const std::vector<Exemplar>& exemplars,
                                     const std::string& version = "v1") {
    detail::common_style(exemplars);
    const PromptTemplate& t = prompt_template(version);
    std::string out;
    for (size_t i = 0; i < exemplars.size(); ++i) {
        if (i > 0) out += t.shot_separator;
        out += render_shot(exemplars[i], t);
    }
    out += '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Error subsets

struct ErrorSet {
    std::vector<std::string> universe;  // E
    std::vector<size_t> selected;       // Q, indices into universe
};

// Replaces the exemplar's reflections with the selected subset, kept in
// universe order. Unselected errors do not appear.
inline Exemplar embed_error_subset(const ErrorSet& errors, Exemplar exemplar) {
    require(!errors.selected.empty(), Errc::empty_selection,
            "error subset is empty");
    std::vector<size_t> idx = errors.selected;
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    require(idx.back() < errors.universe.size(), Errc::invalid_argument,
            "selected index out of range");
    exemplar.reflections.clear();
    int n = 0;
    for (size_t i : idx) {
        exemplar.reflections.push_back({++n, std::nullopt, errors.universe[i]});
    }
    return exemplar;
}

// ---------------------------------------------------------------------------
// The fixtures transcribe their source text as-written, including its
// "pERPle" typo for "people". This restores plain English for live runs
// when byte fidelity does not matter.
inline std::string restore_people(std::string text) {
    auto replace_all = [&](std::string_view from, std::string_view to) {
        size_t pos = 0;
        while ((pos = text.find(from, pos)) != std::string::npos) {
            text.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all("pERPle", "people");
    replace_all("PERPle", "People");
    return text;
}

// ---------------------------------------------------------------------------
// Exemplar definition files: one JSON document per prompt set so new sets
// need no code changes.
//   {"style": "erp", "exemplars": [{"question": ..., "incorrect": ...,
//    "errors": [{"category"?: ..., "text": ...}], "correct": ...}]}

inline std::vector<Exemplar> exemplars_from_json(const nlohmann::json& doc) {
    require(doc.is_object() && doc.contains("style") && doc.contains("exemplars"),
            Errc::malformed_record, "exemplar file needs style and exemplars");
    auto style = parse_style(doc.at("style").get<std::string>());
    require(style.has_value(), Errc::malformed_record,
            "unknown exemplar style: " + doc.at("style").dump());
    std::vector<Exemplar> out;
    for (const auto& item : doc.at("exemplars")) {
        Exemplar e;
        e.style = *style;
        e.question = item.at("question").get<std::string>();
        if (item.contains("incorrect")) {
            e.incorrect_answer = item.at("incorrect").get<std::string>();
        }
        if (item.contains("errors")) {
            int n = 0;
            for (const auto& err : item.at("errors")) {
                ErrorReflection r;
                r.index = ++n;
                if (err.contains("category")) {
                    auto cat =
                        category_by_name(err.at("category").get<std::string>());
                    require(cat.has_value(), Errc::unknown_category,
                            "exemplar error category unknown: " +
                                err.at("category").dump());
                    r.category = *cat;
                }
                r.description = err.at("text").get<std::string>();
                e.reflections.push_back(std::move(r));
            }
        }
        e.correct_answer = item.at("correct").get<std::string>();
        validate_exemplar(e);
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<Exemplar> load_exemplar_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), Errc::fixture_missing,
            "exemplar file not found: " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    require(!doc.is_discarded(), Errc::malformed_record,
            "exemplar file is not valid JSON: " + path.string());
    return exemplars_from_json(doc);
}

}  // namespace erp
