#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "erp/auto_erp.hpp"
#include "erp/corpus.hpp"
#include "erp/extract.hpp"
#include "erp/gateway.hpp"
#include "erp/prompt.hpp"

namespace erp {

// ---------------------------------------------------------------------------
// Configuration

enum class Method { cot, erp, erp_with_categories, auto_erp };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::cot: return "cot";
        case Method::erp: return "erp";
        case Method::erp_with_categories: return "erp_with_categories";
        case Method::auto_erp: return "auto_erp";
    }
    return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
    if (name == "cot") return Method::cot;
    if (name == "erp") return Method::erp;
    if (name == "erp_with_categories") return Method::erp_with_categories;
    if (name == "auto_erp") return Method::auto_erp;
    return std::nullopt;
}

struct RunConfig {
    Dataset dataset = Dataset::gsm8k;
    Method method = Method::erp;
    std::string model_id;
    int shots = 4;  // the shipped prompt sets carry 4; auto_erp runs use 5
    uint64_t seed = 0;
    std::optional<size_t> count;  // nullopt = ALL
    std::filesystem::path dataset_path;
    // exemplar JSON for cot/erp methods; question+solution seed file for
    // auto_erp
    std::filesystem::path exemplar_file;
    std::string template_version = "v1";
    double temperature = 0.0;
    int max_tokens = 1024;
    int parallelism = 4;
    int auto_error_count = 2;    // proposals per auto exemplar
    bool restore_people = false;  // fix the fixtures' "pERPle" for live runs
    std::filesystem::path output_dir;
};

inline void validate_config(const RunConfig& cfg) {
    require(!cfg.model_id.empty(), Errc::invalid_argument, "model_id empty");
    require(cfg.shots >= 1, Errc::invalid_argument, "shots must be >= 1");
    require(cfg.parallelism >= 1, Errc::invalid_argument,
            "parallelism must be >= 1");
    require(!cfg.count.has_value() || *cfg.count >= 1, Errc::invalid_argument,
            "count must be >= 1 or ALL");
    require(!cfg.dataset_path.empty(), Errc::invalid_argument,
            "dataset_path empty");
    require(!cfg.exemplar_file.empty(), Errc::invalid_argument,
            "exemplar_file empty");
    require(!cfg.output_dir.empty(), Errc::invalid_argument,
            "output_dir empty");
}

// Everything except the output directory participates in run identity, so
// reruns land on the same id and compare() can enforce like-for-like.
inline nlohmann::json config_to_json(const RunConfig& cfg,
                                     bool include_output = true) {
    nlohmann::json j;
    j["dataset"] = dataset_name(cfg.dataset);
    j["method"] = method_name(cfg.method);
    j["model_id"] = cfg.model_id;
    j["shots"] = cfg.shots;
    j["seed"] = cfg.seed;
    if (cfg.count.has_value()) {
        j["count"] = *cfg.count;
    } else {
        j["count"] = "all";
    }
    j["dataset_path"] = cfg.dataset_path.string();
    j["exemplar_file"] = cfg.exemplar_file.string();
    j["template_version"] = cfg.template_version;
    j["temperature"] = cfg.temperature;
    j["max_tokens"] = cfg.max_tokens;
    j["parallelism"] = cfg.parallelism;
    j["auto_error_count"] = cfg.auto_error_count;
    j["restore_people"] = cfg.restore_people;
    if (include_output) j["output_dir"] = cfg.output_dir.string();
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    auto d = parse_dataset(j.at("dataset").get<std::string>());
    require(d.has_value(), Errc::malformed_record, "unknown dataset");
    cfg.dataset = *d;
    auto m = parse_method(j.at("method").get<std::string>());
    require(m.has_value(), Errc::malformed_record, "unknown method");
    cfg.method = *m;
    cfg.model_id = j.at("model_id").get<std::string>();
    cfg.shots = j.at("shots").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    if (j.at("count").is_string()) {
        require(j.at("count").get<std::string>() == "all",
                Errc::malformed_record, "count must be a number or 'all'");
    } else {
        cfg.count = j.at("count").get<size_t>();
    }
    cfg.dataset_path = j.at("dataset_path").get<std::string>();
    cfg.exemplar_file = j.at("exemplar_file").get<std::string>();
    cfg.template_version = j.at("template_version").get<std::string>();
    cfg.temperature = j.at("temperature").get<double>();
    cfg.max_tokens = j.at("max_tokens").get<int>();
    cfg.parallelism = j.at("parallelism").get<int>();
    cfg.auto_error_count = j.value("auto_error_count", 2);
    cfg.restore_people = j.at("restore_people").get<bool>();
    if (j.contains("output_dir")) {
        cfg.output_dir = j.at("output_dir").get<std::string>();
    }
    return cfg;
}

inline std::string run_id_of(const RunConfig& cfg) {
    return sha256_hex(config_to_json(cfg, false).dump());
}

// ---------------------------------------------------------------------------
// Verdicts

struct Verdict {
    std::string problem_id;
    std::string prompt_digest;  // sha256 of the full rendered prompt
    std::string transcript;
    ExtractStatus extract_status = ExtractStatus::no_answer;
    std::optional<ExtractedAnswer> extracted;
    GoldAnswer gold;
    bool correct = false;
    std::string error_note;  // non-empty when the gateway call failed
    Usage usage;
    long latency_ms = 0;
    bool cache_hit = false;
};

inline nlohmann::json verdict_to_json(const Verdict& v) {
    nlohmann::json j;
    j["problem_id"] = v.problem_id;
    j["prompt_digest"] = v.prompt_digest;
    j["transcript"] = v.transcript;
    j["extract_status"] = extract_status_name(v.extract_status);
    if (v.extracted.has_value()) {
        j["extracted"] = {{"value", gold_to_json(v.extracted->value)},
                          {"span", {v.extracted->span_begin,
                                    v.extracted->span_end}},
                          {"rule_id", v.extracted->rule_id}};
    } else {
        j["extracted"] = nullptr;
    }
    j["gold"] = gold_to_json(v.gold);
    j["correct"] = v.correct;
    j["error_note"] = v.error_note;
    j["usage"] = {{"prompt_tokens", v.usage.prompt_tokens},
                  {"completion_tokens", v.usage.completion_tokens}};
    j["latency_ms"] = v.latency_ms;
    j["cache_hit"] = v.cache_hit;
    return j;
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
    Verdict v;
    v.problem_id = j.at("problem_id").get<std::string>();
    v.prompt_digest = j.at("prompt_digest").get<std::string>();
    v.transcript = j.at("transcript").get<std::string>();
    std::string status = j.at("extract_status").get<std::string>();
    for (auto s : {ExtractStatus::ok, ExtractStatus::no_answer,
                   ExtractStatus::label_out_of_range,
                   ExtractStatus::unbalanced_braces}) {
        if (status == extract_status_name(s)) v.extract_status = s;
    }
    if (!j.at("extracted").is_null()) {
        ExtractedAnswer a;
        a.value = gold_from_json(j.at("extracted").at("value"));
        a.span_begin = j.at("extracted").at("span").at(0).get<size_t>();
        a.span_end = j.at("extracted").at("span").at(1).get<size_t>();
        a.rule_id = j.at("extracted").at("rule_id").get<std::string>();
        v.extracted = std::move(a);
    }
    v.gold = gold_from_json(j.at("gold"));
    v.correct = j.at("correct").get<bool>();
    v.error_note = j.at("error_note").get<std::string>();
    v.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<long>();
    v.usage.completion_tokens =
        j.at("usage").at("completion_tokens").get<long>();
    v.latency_ms = j.at("latency_ms").get<long>();
    v.cache_hit = j.at("cache_hit").get<bool>();
    return v;
}

// ---------------------------------------------------------------------------
// Reports

struct RunReport {
    RunConfig config;
    std::string run_id;
    size_t total = 0;
    size_t correct = 0;
    double accuracy = 0.0;  // correct / total
    size_t no_answer_count = 0;
    size_t error_count = 0;  // verdicts with a gateway error note
    std::string verdicts_file = "verdicts.jsonl";
    // wall time is measured but kept out of report.json so a warm-cache
    // rerun reproduces the report byte for byte
    long wall_time_ms = 0;
};

inline nlohmann::json report_to_json(const RunReport& r) {
    nlohmann::json j;
    j["run_id"] = r.run_id;
    j["config"] = config_to_json(r.config, false);
    j["total"] = r.total;
    j["correct"] = r.correct;
    j["accuracy"] = r.accuracy;
    j["no_answer_count"] = r.no_answer_count;
    j["error_count"] = r.error_count;
    j["verdicts_file"] = r.verdicts_file;
    return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.run_id = j.at("run_id").get<std::string>();
    r.config = config_from_json(j.at("config"));
    r.total = j.at("total").get<size_t>();
    r.correct = j.at("correct").get<size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.no_answer_count = j.at("no_answer_count").get<size_t>();
    r.error_count = j.at("error_count").get<size_t>();
    r.verdicts_file = j.at("verdicts_file").get<std::string>();
    return r;
}

// ---------------------------------------------------------------------------
// Run orchestration

using ProgressHook = std::function<void(const Verdict&, size_t done,
                                        size_t total)>;

namespace detail {

inline PromptStyle style_for_method(Method m) {
    switch (m) {
        case Method::cot: return PromptStyle::cot;
        case Method::erp: return PromptStyle::erp;
        case Method::erp_with_categories:
            return PromptStyle::erp_with_categories;
        case Method::auto_erp: return PromptStyle::erp_no_categories;
    }
    return PromptStyle::cot;
}

inline bool style_matches_method(PromptStyle style, Method m) {
    if (m == Method::erp) {
        // "plain ERP" covers both unprefixed reflection forms
        return style == PromptStyle::erp ||
               style == PromptStyle::erp_no_categories;
    }
    return style == style_for_method(m);
}

inline std::string allowed_labels(const ProblemRecord& rec) {
    std::string out;
    for (const auto& c : rec.choices) out += c.label;
    return out.empty() ? std::string("ABCDE") : out;
}

inline Verdict score_verdict(const ProblemRecord& rec,
                             const std::string& prompt_digest,
                             const ChatExchange& ex) {
    Verdict v;
    v.problem_id = rec.id;
    v.prompt_digest = prompt_digest;
    v.transcript = ex.response_text;
    v.gold = rec.gold;
    auto result = extract_for_kind(rec.gold.kind, ex.response_text,
                                   allowed_labels(rec));
    v.extract_status = result.status;
    if (result.ok()) {
        v.extracted = result.answer;
        v.correct = answers_match(result.answer->value, rec.gold);
    }
    v.usage = ex.usage;
    v.latency_ms = ex.latency_ms;
    v.cache_hit = ex.cache_hit;
    return v;
}

}  // namespace detail

// Exemplars for a run: loaded from the exemplar file, or generated through
// the gateway for auto_erp. Always truncated to the first `shots`.
inline std::vector<Exemplar> exemplars_for_run(const RunConfig& cfg,
                                               ModelGateway& gateway) {
    std::vector<Exemplar> exemplars;
    if (cfg.method == Method::auto_erp) {
        auto seeds = load_auto_seeds(cfg.exemplar_file);
        exemplars = build_auto_exemplars(seeds, gateway, cfg.model_id,
                                         cfg.auto_error_count);
    } else {
        exemplars = load_exemplar_file(cfg.exemplar_file);
    }
    require(exemplars.size() >= static_cast<size_t>(cfg.shots),
            Errc::invalid_argument,
            "exemplar set has fewer entries than shots=" +
                std::to_string(cfg.shots));
    exemplars.resize(cfg.shots);
    PromptStyle style = exemplars.front().style;
    require(detail::style_matches_method(style, cfg.method),
            Errc::invalid_argument,
            std::string("exemplar style ") + style_name(style) +
                " does not fit method " + method_name(cfg.method));
    return exemplars;
}

// Full run: slice the dataset, prompt every problem through the gateway,
// extract and score, stream one verdict line per problem, and write the
// report last. A directory holding verdicts from an interrupted run of the
// same config is picked up where it stopped; finished problems are never
// re-queried.
inline RunReport run(const RunConfig& cfg, ModelGateway& gateway,
                     const ProgressHook& hook = {}) {
    validate_config(cfg);
    namespace fs = std::filesystem;
    const long started = gateway.options().clock_ms();

    // fail before any network call if the prompt material is absent
    auto exemplars = exemplars_for_run(cfg, gateway);

    auto records = load_dataset(cfg.dataset, cfg.dataset_path);
    auto sliced = slice(records, cfg.seed, cfg.count, cfg.dataset);

    fs::create_directories(cfg.output_dir);
    const std::string run_id = run_id_of(cfg);
    const fs::path config_path = cfg.output_dir / "config.json";
    const fs::path verdicts_path = cfg.output_dir / "verdicts.jsonl";
    const fs::path report_path = cfg.output_dir / "report.json";

    if (fs::exists(config_path)) {
        std::ifstream in(config_path);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        require(!j.is_discarded() && j.contains("run_id") &&
                    j.at("run_id").get<std::string>() == run_id,
                Errc::mismatched_runs,
                "output directory belongs to a different run config");
    } else {
        nlohmann::json j;
        j["run_id"] = run_id;
        j["config"] = config_to_json(cfg);
        std::ofstream out(config_path, std::ios::binary);
        require(out.good(), Errc::io_error,
                "cannot write " + config_path.string());
        out << j.dump(2) << '\n';
    }

    // resume: verdicts already on disk are final
    std::map<std::string, Verdict> done;
    if (fs::exists(verdicts_path)) {
        std::ifstream in(verdicts_path);
        std::string line;
        while (std::getline(in, line)) {
            if (trim_view(line).empty()) continue;
            Verdict v = verdict_from_json(nlohmann::json::parse(line));
            done.emplace(v.problem_id, std::move(v));
        }
    }

    std::vector<const ProblemRecord*> pending;
    for (const auto& rec : sliced.records) {
        if (!done.count(rec.id)) pending.push_back(&rec);
    }

    std::ofstream appender(verdicts_path, std::ios::binary | std::ios::app);
    require(appender.good(), Errc::io_error,
            "cannot append to " + verdicts_path.string());

    RunReport report;
    report.config = cfg;
    report.run_id = run_id;
    report.total = sliced.records.size();

    size_t emitted = done.size();
    // fan out in slice order, parallelism-sized waves, so the verdict file
    // grows as a prefix of the slice and any interruption resumes cleanly
    for (size_t base = 0; base < pending.size();
         base += static_cast<size_t>(cfg.parallelism)) {
        size_t wave_end = std::min(pending.size(),
                                   base + static_cast<size_t>(cfg.parallelism));
        std::vector<ChatRequest> requests;
        std::vector<std::string> digests;
        for (size_t i = base; i < wave_end; ++i) {
            auto rendered = render_prompt(exemplars, *pending[i],
                                          cfg.template_version);
            std::string text = cfg.restore_people
                                   ? restore_people(rendered.full_text)
                                   : rendered.full_text;
            digests.push_back(sha256_hex(text));
            requests.push_back(make_user_request(cfg.model_id, text,
                                                 cfg.temperature,
                                                 cfg.max_tokens));
        }
        auto outcomes = gateway.complete_batch(requests, cfg.parallelism);
        for (size_t i = base; i < wave_end; ++i) {
            const auto& outcome = outcomes[i - base];
            Verdict v;
            if (outcome.ok()) {
                v = detail::score_verdict(*pending[i], digests[i - base],
                                          *outcome.exchange);
            } else {
                v.problem_id = pending[i]->id;
                v.prompt_digest = digests[i - base];
                v.gold = pending[i]->gold;
                v.error_note = std::string(errc_name(*outcome.error)) + ": " +
                               outcome.error_message;
            }
            appender << verdict_to_json(v).dump() << '\n';
            appender.flush();
            ++emitted;
            if (hook) hook(v, emitted, report.total);
            done.emplace(v.problem_id, std::move(v));
        }
    }

    for (const auto& rec : sliced.records) {
        const Verdict& v = done.at(rec.id);
        if (v.correct) ++report.correct;
        if (v.extract_status != ExtractStatus::ok) ++report.no_answer_count;
        if (!v.error_note.empty()) ++report.error_count;
    }
    report.accuracy =
        report.total == 0
            ? 0.0
            : static_cast<double>(report.correct) /
                  static_cast<double>(report.total);
    report.wall_time_ms = gateway.options().clock_ms() - started;

    {
        std::ofstream out(report_path, std::ios::binary);
        require(out.good(), Errc::io_error,
                "cannot write " + report_path.string());
        out << report_to_json(report).dump(2) << '\n';
    }
    return report;
}

// ---------------------------------------------------------------------------
// Run directory loading and comparison

struct LoadedRun {
    RunReport report;
    std::vector<Verdict> verdicts;
};

inline LoadedRun load_run(const std::filesystem::path& dir) {
    std::ifstream rin(dir / "report.json");
    require(rin.good(), Errc::io_error,
            "no report.json in " + dir.string());
    nlohmann::json rj = nlohmann::json::parse(rin, nullptr, false);
    require(!rj.is_discarded(), Errc::malformed_record,
            "report.json is not valid JSON: " + dir.string());
    LoadedRun out;
    out.report = report_from_json(rj);

    std::ifstream vin(dir / out.report.verdicts_file);
    require(vin.good(), Errc::io_error,
            "missing verdict file in " + dir.string());
    std::string line;
    while (std::getline(vin, line)) {
        if (trim_view(line).empty()) continue;
        out.verdicts.push_back(verdict_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

struct MethodDelta {
    double delta_points = 0.0;  // accuracy_a - accuracy_b, percentage points
    std::vector<std::string> a_only_correct;
    std::vector<std::string> b_only_correct;
};

// Like-for-like comparison over a shared slice: both runs must cover the
// same dataset, seed, count, and the same problem ids.
inline MethodDelta compare(const RunReport& report_a,
                           const RunReport& report_b,
                           const std::vector<Verdict>& verdicts_a,
                           const std::vector<Verdict>& verdicts_b) {
    require(report_a.config.dataset == report_b.config.dataset,
            Errc::mismatched_runs, "datasets differ");
    require(report_a.config.seed == report_b.config.seed,
            Errc::mismatched_runs, "seeds differ");
    require(report_a.config.count == report_b.config.count,
            Errc::mismatched_runs, "counts differ");

    std::map<std::string, bool> a_correct;
    for (const auto& v : verdicts_a) a_correct[v.problem_id] = v.correct;
    std::map<std::string, bool> b_correct;
    for (const auto& v : verdicts_b) b_correct[v.problem_id] = v.correct;
    require(a_correct.size() == b_correct.size(), Errc::mismatched_runs,
            "verdict sets have different sizes");
    for (const auto& [id, _] : a_correct) {
        require(b_correct.count(id) == 1, Errc::mismatched_runs,
                "problem ids differ between runs: " + id);
    }

    MethodDelta delta;
    delta.delta_points =
        (report_a.accuracy - report_b.accuracy) * 100.0;
    for (const auto& [id, a_ok] : a_correct) {
        bool b_ok = b_correct.at(id);
        if (a_ok && !b_ok) delta.a_only_correct.push_back(id);
        if (b_ok && !a_ok) delta.b_only_correct.push_back(id);
    }
    return delta;
}

inline MethodDelta compare(const LoadedRun& a, const LoadedRun& b) {
    return compare(a.report, b.report, a.verdicts, b.verdicts);
}

}  // namespace erp
