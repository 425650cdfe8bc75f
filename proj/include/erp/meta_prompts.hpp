#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "erp/errors.hpp"
#include "erp/taxonomy.hpp"

namespace erp {

// Meta-prompts driving the automated pipeline stages: proposing plausible
// errors, generating an intentionally flawed solution, and judging which
// category an observed error falls into. Embedded here and shipped as
// text assets; a test pins the two copies together. Placeholders use
// {name} and must all be resolved at render time.

inline constexpr std::string_view kErrorProposalPromptV1 =
    "You are designing teaching material about common mistakes in problem "
    "solving.\n"
    "Given the question below, list {n} plausible, distinct errors someone "
    "might make while solving it.\n"
    "Write exactly {n} lines, numbered \"1.\" through \"{n}.\", one error per "
    "line, and nothing else.\n"
    "\n"
    "Question: {question}\n";

inline constexpr std::string_view kIncorrectSolutionPromptV1 =
    "You are writing an intentionally flawed worked solution for teaching "
    "purposes.\n"
    "Solve the question below, but commit exactly the errors listed - no "
    "others - so the reasoning arrives at a wrong answer.\n"
    "Do not mention that the solution is flawed.\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Errors to commit:\n"
    "{errors}\n"
    "\n"
    "Write the flawed solution now, ending with a final answer sentence.\n";

inline constexpr std::string_view kJudgePromptV1 =
    "You are auditing an incorrect answer to a reasoning question.\n"
    "Classify the primary error using exactly one of these categories:\n"
    "\n"
    "{categories}\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Correct answer: {gold}\n"
    "\n"
    "Incorrect answer:\n"
    "{answer}\n"
    "\n"
    "Reply with a single line in the form \"Category: <category name> - "
    "<one-sentence justification>\".\n";

inline const std::map<std::string, std::string_view>& meta_prompt_registry() {
    static const std::map<std::string, std::string_view> reg = {
        {"error_proposal_v1", kErrorProposalPromptV1},
        {"incorrect_solution_v1", kIncorrectSolutionPromptV1},
        {"judge_v1", kJudgePromptV1},
    };
    return reg;
}

inline std::string_view meta_prompt(const std::string& name) {
    auto it = meta_prompt_registry().find(name);
    require(it != meta_prompt_registry().end(), Errc::invalid_argument,
            "unknown meta prompt: " + name);
    return it->second;
}

// "- Name: definition" menu for the judge prompt, one category per line,
// restricted to the family under analysis.
inline std::string category_menu(ReasoningFamily family) {
    std::string out;
    for (const auto& cat : categories_for(family)) {
        if (!out.empty()) out += '\n';
        out += "- ";
        out += cat.name;
        out += ": ";
        out += cat.definition;
    }
    return out;
}

// Placeholder names as declared by the template itself ({lowercase_word}).
// Substituted values may contain braces (LaTeX questions do), so coverage
// is checked against the template, never the rendered output.
inline std::vector<std::string> meta_prompt_placeholders(std::string_view tpl) {
    std::vector<std::string> names;
    for (size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] != '{') continue;
        size_t j = i + 1;
        while (j < tpl.size() && (tpl[j] == '_' || std::islower(static_cast<unsigned char>(tpl[j])))) {
            ++j;
        }
        if (j > i + 1 && j < tpl.size() && tpl[j] == '}') {
            std::string name(tpl.substr(i + 1, j - i - 1));
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                names.push_back(name);
            }
            i = j;
        }
    }
    return names;
}

inline std::string render_meta_prompt(
    const std::string& name, const std::map<std::string, std::string>& vars) {
    std::string_view tpl = meta_prompt(name);
    for (const auto& key : meta_prompt_placeholders(tpl)) {
        require(vars.count(key) > 0, Errc::invalid_argument,
                "meta prompt " + name + " needs placeholder value: " + key);
    }
    std::string text;
    text.reserve(tpl.size());
    for (size_t i = 0; i < tpl.size();) {
        if (tpl[i] == '{') {
            size_t close = tpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto it = vars.find(std::string(tpl.substr(i + 1, close - i - 1)));
                if (it != vars.end()) {
                    text += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        text += tpl[i++];
    }
    return text;
}

}  // namespace erp
