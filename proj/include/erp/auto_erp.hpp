#pragma once

#include <string>
#include <vector>

#include "erp/gateway.hpp"
#include "erp/meta_prompts.hpp"
#include "erp/prompt.hpp"

namespace erp {

// Automated ERP exemplar construction: propose plausible errors for a
// question, then generate an incorrect solution that commits exactly those
// errors. Generation runs warm (temperature 0.7); everything downstream of
// the gateway cache stays deterministic.

inline constexpr double kAutoErpTemperature = 0.7;
inline constexpr int kAutoErpMaxTokens = 512;

struct ProposedErrors {
    std::vector<std::string> descriptors;
    std::string raw_transcript;  // kept verbatim for audit
};

namespace detail {

// Lines of the form "1. text" (or "1) text"), returned in listed order.
inline std::vector<std::string> parse_numbered_lines(const std::string& text) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (eol == std::string::npos ? text.size() : eol) -
                                  pos);
        pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
        line = trim_view(line);
        size_t i = 0;
        while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
        if (i == 0 || i >= line.size()) continue;
        if (line[i] != '.' && line[i] != ')') continue;
        auto body = trim_view(line.substr(i + 1));
        if (body.empty()) continue;
        out.emplace_back(body);
    }
    return out;
}

}  // namespace detail

// One chat call with the error-proposal meta-prompt; a shortfall is retried
// once with an explicit count reminder (a fresh prompt, so the cache cannot
// replay the first response).
inline ProposedErrors propose_errors(const std::string& question, int n,
                                     ModelGateway& gateway,
                                     const std::string& model_id) {
    require(n >= 1, Errc::invalid_argument, "n must be >= 1");
    require(!question.empty(), Errc::empty_question, "question is empty");

    std::string prompt = render_meta_prompt(
        "error_proposal_v1",
        {{"n", std::to_string(n)}, {"question", question}});

    auto ask = [&](const std::string& text) {
        auto ex = gateway.complete(make_user_request(
            model_id, text, kAutoErpTemperature, kAutoErpMaxTokens));
        ProposedErrors p;
        p.raw_transcript = ex.response_text;
        p.descriptors = detail::parse_numbered_lines(ex.response_text);
        return p;
    };

    ProposedErrors first = ask(prompt);
    if (first.descriptors.size() >= static_cast<size_t>(n)) {
        first.descriptors.resize(n);
        return first;
    }
    ProposedErrors second = ask(
        prompt + "\n\nYour previous list was too short. Write exactly " +
        std::to_string(n) + " numbered lines.");
    if (second.descriptors.size() >= static_cast<size_t>(n)) {
        second.descriptors.resize(n);
        return second;
    }
    size_t best = std::max(first.descriptors.size(),
                           second.descriptors.size());
    fail(Errc::parse_shortfall,
         "error proposal yielded " + std::to_string(best) + " of " +
             std::to_string(n) + " descriptors after retry");
}

// One chat call with the incorrect-solution meta-prompt; the result plus
// the input errors and the provided correct solution form a plain ERP
// exemplar (no category prefixes).
inline Exemplar build_auto_exemplar(const std::string& question,
                                    const std::vector<std::string>& errors,
                                    const std::string& correct_solution,
                                    ModelGateway& gateway,
                                    const std::string& model_id) {
    require(!errors.empty(), Errc::empty_selection, "error list is empty");
    require(!correct_solution.empty(), Errc::invalid_argument,
            "correct solution is empty");
    require(!question.empty(), Errc::empty_question, "question is empty");

    std::string numbered;
    for (size_t i = 0; i < errors.size(); ++i) {
        numbered += std::to_string(i + 1) + ". " + errors[i];
        if (i + 1 < errors.size()) numbered += '\n';
    }
    std::string prompt = render_meta_prompt(
        "incorrect_solution_v1",
        {{"question", question}, {"errors", numbered}});
    auto ex = gateway.complete(make_user_request(
        model_id, prompt, kAutoErpTemperature, kAutoErpMaxTokens));
    std::string incorrect = trim(ex.response_text);
    require(!incorrect.empty(), Errc::empty_generation,
            "model returned a blank incorrect solution");

    Exemplar out;
    out.style = PromptStyle::erp_no_categories;
    out.question = question;
    out.incorrect_answer = std::move(incorrect);
    for (size_t i = 0; i < errors.size(); ++i) {
        out.reflections.push_back(
            {static_cast<int>(i + 1), std::nullopt, errors[i]});
    }
    out.correct_answer = correct_solution;
    validate_exemplar(out);
    return out;
}

// Seed file for the auto pipeline: {"exemplars": [{question, correct}...]}.
struct AutoSeed {
    std::string question;
    std::string correct;
};

inline std::vector<AutoSeed> load_auto_seeds(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), Errc::fixture_missing,
            "auto-ERP seed file not found: " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    require(!doc.is_discarded() && doc.is_object() &&
                doc.contains("exemplars") && doc.at("exemplars").is_array(),
            Errc::malformed_record,
            "seed file must hold an \"exemplars\" array: " + path.string());
    std::vector<AutoSeed> seeds;
    for (const auto& item : doc.at("exemplars")) {
        AutoSeed s;
        s.question = item.at("question").get<std::string>();
        s.correct = item.at("correct").get<std::string>();
        require(!s.question.empty() && !s.correct.empty(),
                Errc::malformed_record, "seed entries need question+correct");
        seeds.push_back(std::move(s));
    }
    require(!seeds.empty(), Errc::malformed_record,
            "seed file has no entries: " + path.string());
    return seeds;
}

// Full pipeline: one exemplar per seed, n_errors proposals each. The gold
// rationale from the seed file is the correct solution; nothing is
// model-generated on the teaching side.
inline std::vector<Exemplar> build_auto_exemplars(
    const std::vector<AutoSeed>& seeds, ModelGateway& gateway,
    const std::string& model_id, int n_errors = 2) {
    std::vector<Exemplar> out;
    out.reserve(seeds.size());
    for (const auto& seed : seeds) {
        auto proposed =
            propose_errors(seed.question, n_errors, gateway, model_id);
        out.push_back(build_auto_exemplar(seed.question, proposed.descriptors,
                                          seed.correct, gateway, model_id));
    }
    return out;
}

}  // namespace erp
