#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "erp/corpus.hpp"

namespace erp {

enum class ReasoningFamily { arithmetic, commonsense };

inline const char* family_name(ReasoningFamily f) {
    return f == ReasoningFamily::arithmetic ? "arithmetic" : "commonsense";
}

inline ReasoningFamily family_of(Dataset d) {
    switch (d) {
        case Dataset::gsm8k:
        case Dataset::aqua:
        case Dataset::math: return ReasoningFamily::arithmetic;
        case Dataset::csqa:
        case Dataset::strategyqa: return ReasoningFamily::commonsense;
    }
    return ReasoningFamily::arithmetic;
}

enum class ErrorCategoryId {
    // arithmetic
    misinterpretation,
    missed_steps,
    logical_commonsense,
    wrong_selection,
    algebraic_calculation,
    // commonsense
    commonsense,
    encyclopedic,
    self_contradiction,
    assumption,
};

struct ErrorCategory {
    ErrorCategoryId id;
    ReasoningFamily family;
    std::string_view name;        // canonical display name, used verbatim in
                                  // prompts and parsed back by exact match
    std::string_view definition;
    std::string_view example;
};

// Five arithmetic classes and four commonsense classes.
inline const std::array<ErrorCategory, 9>& error_taxonomy() {
    static const std::array<ErrorCategory, 9> table = {{
        {ErrorCategoryId::misinterpretation, ReasoningFamily::arithmetic,
         "Misinterpretation of Question",
         "Misinterpretation of the question's information or tasks",
         "Prompt: Timothy has 1/4 less cookies... Model: Timothy has 1/4 as "
         "many..."},
        {ErrorCategoryId::missed_steps, ReasoningFamily::arithmetic,
         "Missed Steps",
         "Missing an extra step to completely solve the problem",
         "Prompt: ...leave your answer in hours Model: ...answer is 360 "
         "minutes."},
        {ErrorCategoryId::logical_commonsense, ReasoningFamily::arithmetic,
         "Logical/Commonsense Error",
         "Logic does not follow natural laws of the world",
         "To solve this, we use d = r/t..."},
        {ErrorCategoryId::wrong_selection, ReasoningFamily::arithmetic,
         "Wrong Selection of Answer",
         "The presented answer is different from the calculated one",
         "...comes out to 56, which corresponds to option (A). Therefore, the "
         "answer is (B)."},
        {ErrorCategoryId::algebraic_calculation, ReasoningFamily::arithmetic,
         "Algebraic/Calculation Error",
         "Arithmetic operations are wrong. This includes operations in "
         "algebraic equations",
         "102 + 56 = 160"},
        {ErrorCategoryId::commonsense, ReasoningFamily::commonsense,
         "Commonsense Error",
         "The answer violates commonsense and basic understanding of natural "
         "laws",
         "...the sun is as cold as ice cream."},
        {ErrorCategoryId::encyclopedic, ReasoningFamily::commonsense,
         "Encyclopedic Error",
         "Factual information that the annotator knows is wrong",
         "Wallets are a specialized type of water bottle"},
        {ErrorCategoryId::self_contradiction, ReasoningFamily::commonsense,
         "Self-Contradiction Error",
         "Answer's reasoning is contradictory",
         "...a very bright environment, so the dark would be suitable..."},
        {ErrorCategoryId::assumption, ReasoningFamily::commonsense,
         "Assumption Error",
         "Assuming information that is not given in the question",
         "Assuming all animals like hot environments..."},
    }};
    return table;
}

inline const ErrorCategory& category_info(ErrorCategoryId id) {
    for (const auto& c : error_taxonomy()) {
        if (c.id == id) return c;
    }
    return error_taxonomy()[0];  // unreachable; ids cover the table
}

inline std::vector<ErrorCategory> categories_for(ReasoningFamily family) {
    std::vector<ErrorCategory> out;
    for (const auto& c : error_taxonomy()) {
        if (c.family == family) out.push_back(c);
    }
    return out;
}

// Exact display-name lookup (whitespace-trimmed, case preserved).
inline std::optional<ErrorCategoryId> category_by_name(std::string_view name) {
    auto t = trim_view(name);
    for (const auto& c : error_taxonomy()) {
        if (c.name == t) return c.id;
    }
    return std::nullopt;
}

}  // namespace erp
