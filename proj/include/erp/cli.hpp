#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "erp/error_lab.hpp"
#include "erp/evaluator.hpp"
#include "erp/fixtures.hpp"
#include "erp/http_backend.hpp"

namespace erp::cli {

// Exit codes: 0 clean, 2 completed with per-item failures (drifted
// fixtures, unparseable judge replies, verdicts carrying gateway errors),
// 3 aborted before completion (bad flags, missing files, config errors).
constexpr int kOk = 0;
constexpr int kItemErrors = 2;
constexpr int kAborted = 3;

struct Io {
    std::ostream& out;
    std::ostream& err;
    std::istream& in;
};

// ---------------------------------------------------------------------------
// Flag documentation. The parser is built from this table, and a coverage
// test walks both directions (documented <-> parsed), so an option cannot
// exist without a documented summary or vice versa.

struct FlagDoc {
    const char* subcommand;
    const char* flag;  // "--name", or a bare name for positionals
    const char* summary;
};

inline const std::vector<FlagDoc>& flag_docs() {
    static const std::vector<FlagDoc> docs = {
        {"run", "--config", "JSON config file mirroring the run configuration"},
        {"run", "--dataset", "dataset name: gsm8k, aqua, math, csqa, strategyqa"},
        {"run", "--method", "prompting method: cot, erp, erp_with_categories, auto_erp"},
        {"run", "--model", "model identifier sent to the backend"},
        {"run", "--shots", "exemplars per prompt"},
        {"run", "--seed", "seed for slicing and sampling"},
        {"run", "--count", "number of problems, or 'all'"},
        {"run", "--data", "dataset file (or MATH directory)"},
        {"run", "--exemplars", "exemplar JSON file (question/solution seed file for auto_erp)"},
        {"run", "--template", "prompt template version"},
        {"run", "--temperature", "sampling temperature"},
        {"run", "--max-tokens", "completion token budget"},
        {"run", "--parallelism", "concurrent requests"},
        {"run", "--auto-errors", "error proposals per auto exemplar"},
        {"run", "--restore-people", "render 'people' instead of the shipped exemplars' 'pERPle'"},
        {"run", "--output", "run directory to create (report.json, verdicts.jsonl)"},
        {"run", "--backend", "completion backend: replay or http"},
        {"run", "--script", "replay script (JSONL), required with --backend replay"},
        {"run", "--cache-dir", "response cache directory (empty disables caching)"},
        {"run", "--base-url", "HTTP backend base URL (overrides ERP_BASE_URL)"},
        {"run", "--format", "output format: text or json"},

        {"compare", "dirs", "run directories to load"},
        {"compare", "--format", "output format: text, json, or csv"},

        {"annotate", "--run", "run directory containing report.json and verdicts"},
        {"annotate", "--data", "dataset file the run was evaluated on"},
        {"annotate", "--model", "judge model identifier"},
        {"annotate", "--family", "error family: arithmetic or commonsense (default: the run dataset's family)"},
        {"annotate", "--sample", "incorrect verdicts to sample for judging"},
        {"annotate", "--seed", "seed for sampling"},
        {"annotate", "--backend", "completion backend: replay or http"},
        {"annotate", "--script", "replay script (JSONL), required with --backend replay"},
        {"annotate", "--cache-dir", "response cache directory (empty disables caching)"},
        {"annotate", "--base-url", "HTTP backend base URL (overrides ERP_BASE_URL)"},
        {"annotate", "--allow-math", "permit judging MATH transcripts with the arithmetic categories"},
        {"annotate", "--output", "annotations file to write (default: <run>/annotations.jsonl)"},
        {"annotate", "--validate", "label stored annotations valid/invalid from stdin"},
        {"annotate", "--annotations", "annotations file (JSONL), used with --validate"},
        {"annotate", "--format", "output format: text or json"},

        {"confidence", "--a", "first annotation sample (JSONL with validity labels)"},
        {"confidence", "--b", "second annotation sample (JSONL with validity labels)"},
        {"confidence", "--k", "expected annotations per sample"},
        {"confidence", "--format", "output format: text or json"},

        {"distribution", "--annotations", "annotations file (JSONL)"},
        {"distribution", "--family", "zero-fill counts for this family: arithmetic or commonsense"},
        {"distribution", "--format", "output format: text, json, or csv"},

        {"fixtures", "action", "verify or list"},
        {"fixtures", "--assets", "assets directory holding exemplars/ and prompts/"},
        {"fixtures", "--format", "output format: text or json"},

        {"cache", "action", "stats or clear"},
        {"cache", "--cache-dir", "response cache directory"},
        {"cache", "--format", "output format: text or json"},
    };
    return docs;
}

inline const char* doc(const std::string& sub, const std::string& flag) {
    for (const auto& d : flag_docs()) {
        if (sub == d.subcommand && flag == d.flag) return d.summary;
    }
    throw std::logic_error("undocumented flag: " + sub + " " + flag);
}

inline std::string cli_flags_tsv() {
    std::ostringstream out;
    out << "# subcommand\tflag\tsummary\n";
    for (const auto& d : flag_docs()) {
        out << d.subcommand << '\t' << d.flag << '\t' << d.summary << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Parsed options. Subcommands share fields where the semantics coincide.

struct Options {
    // run
    std::string config_path;
    std::string dataset = "gsm8k";
    std::string method = "erp";
    std::string model;
    int shots = 4;
    uint64_t seed = 0;
    std::string count = "all";
    std::string data_path;
    std::string exemplar_path;
    std::string template_version = "v1";
    double temperature = 0.0;
    int max_tokens = 1024;
    int parallelism = 4;
    int auto_errors = 2;
    bool restore_people = false;
    std::string output;
    // gateway
    std::string backend = "replay";
    std::string script_path;
    std::string cache_dir;
    std::string base_url;
    // compare
    std::vector<std::string> dirs;
    // annotate
    std::string run_dir;
    std::string family;
    int sample = 50;
    bool allow_math = false;
    bool validate = false;
    std::string annotations_path;
    // confidence
    std::string conf_a;
    std::string conf_b;
    int conf_k = 50;
    // fixtures / cache
    std::string action;
    std::string assets_dir = "assets";
    // shared
    std::string format = "text";
};

struct AppState {
    Options o;
    CLI::App app{"Error-reflection prompting benchmark harness", "erp"};
    CLI::App* run = nullptr;
    CLI::App* compare = nullptr;
    CLI::App* annotate = nullptr;
    CLI::App* confidence = nullptr;
    CLI::App* distribution = nullptr;
    CLI::App* fixtures = nullptr;
    CLI::App* cache = nullptr;
    // run flags by config key, for flag/config-file/default precedence
    std::map<std::string, CLI::Option*> run_flags;
};

inline void build_app(AppState& s) {
    Options& o = s.o;
    s.app.require_subcommand(1);

    auto* run = s.app.add_subcommand("run", "evaluate a dataset slice");
    run->add_option("--config", o.config_path, doc("run", "--config"));
    auto& rf = s.run_flags;
    rf["dataset"] = run->add_option("--dataset", o.dataset, doc("run", "--dataset"));
    rf["method"] = run->add_option("--method", o.method, doc("run", "--method"));
    rf["model_id"] = run->add_option("--model", o.model, doc("run", "--model"));
    rf["shots"] = run->add_option("--shots", o.shots, doc("run", "--shots"));
    rf["seed"] = run->add_option("--seed", o.seed, doc("run", "--seed"));
    rf["count"] = run->add_option("--count", o.count, doc("run", "--count"));
    rf["dataset_path"] = run->add_option("--data", o.data_path, doc("run", "--data"));
    rf["exemplar_file"] =
        run->add_option("--exemplars", o.exemplar_path, doc("run", "--exemplars"));
    rf["template_version"] =
        run->add_option("--template", o.template_version, doc("run", "--template"));
    rf["temperature"] =
        run->add_option("--temperature", o.temperature, doc("run", "--temperature"));
    rf["max_tokens"] =
        run->add_option("--max-tokens", o.max_tokens, doc("run", "--max-tokens"));
    rf["parallelism"] =
        run->add_option("--parallelism", o.parallelism, doc("run", "--parallelism"));
    rf["auto_error_count"] =
        run->add_option("--auto-errors", o.auto_errors, doc("run", "--auto-errors"));
    rf["restore_people"] = run->add_flag("--restore-people", o.restore_people,
                                         doc("run", "--restore-people"));
    rf["output_dir"] = run->add_option("--output", o.output, doc("run", "--output"));
    run->add_option("--backend", o.backend, doc("run", "--backend"))
        ->check(CLI::IsMember({"replay", "http"}));
    run->add_option("--script", o.script_path, doc("run", "--script"));
    run->add_option("--cache-dir", o.cache_dir, doc("run", "--cache-dir"));
    run->add_option("--base-url", o.base_url, doc("run", "--base-url"));
    run->add_option("--format", o.format, doc("run", "--format"))
        ->check(CLI::IsMember({"text", "json"}));
    s.run = run;

    auto* cmp = s.app.add_subcommand("compare", "render accuracy tables and deltas");
    cmp->add_option("dirs", o.dirs, doc("compare", "dirs"))->expected(0, 10000);
    cmp->add_option("--format", o.format, doc("compare", "--format"))
        ->check(CLI::IsMember({"text", "json", "csv"}));
    s.compare = cmp;

    auto* ann = s.app.add_subcommand("annotate", "judge sampled errors, or label validity");
    ann->add_option("--run", o.run_dir, doc("annotate", "--run"));
    ann->add_option("--data", o.data_path, doc("annotate", "--data"));
    ann->add_option("--model", o.model, doc("annotate", "--model"));
    ann->add_option("--family", o.family, doc("annotate", "--family"))
        ->check(CLI::IsMember({"arithmetic", "commonsense"}));
    ann->add_option("--sample", o.sample, doc("annotate", "--sample"));
    ann->add_option("--seed", o.seed, doc("annotate", "--seed"));
    ann->add_option("--backend", o.backend, doc("annotate", "--backend"))
        ->check(CLI::IsMember({"replay", "http"}));
    ann->add_option("--script", o.script_path, doc("annotate", "--script"));
    ann->add_option("--cache-dir", o.cache_dir, doc("annotate", "--cache-dir"));
    ann->add_option("--base-url", o.base_url, doc("annotate", "--base-url"));
    ann->add_flag("--allow-math", o.allow_math, doc("annotate", "--allow-math"));
    ann->add_option("--output", o.output, doc("annotate", "--output"));
    ann->add_flag("--validate", o.validate, doc("annotate", "--validate"));
    ann->add_option("--annotations", o.annotations_path,
                    doc("annotate", "--annotations"));
    ann->add_option("--format", o.format, doc("annotate", "--format"))
        ->check(CLI::IsMember({"text", "json"}));
    s.annotate = ann;

    auto* conf = s.app.add_subcommand("confidence", "agreement score for two annotation samples");
    conf->add_option("--a", o.conf_a, doc("confidence", "--a"))->required();
    conf->add_option("--b", o.conf_b, doc("confidence", "--b"))->required();
    conf->add_option("--k", o.conf_k, doc("confidence", "--k"));
    conf->add_option("--format", o.format, doc("confidence", "--format"))
        ->check(CLI::IsMember({"text", "json"}));
    s.confidence = conf;

    auto* dist = s.app.add_subcommand("distribution", "error-category counts for an annotation file");
    dist->add_option("--annotations", o.annotations_path,
                     doc("distribution", "--annotations"))
        ->required();
    dist->add_option("--family", o.family, doc("distribution", "--family"))
        ->check(CLI::IsMember({"arithmetic", "commonsense"}));
    dist->add_option("--format", o.format, doc("distribution", "--format"))
        ->check(CLI::IsMember({"text", "json", "csv"}));
    s.distribution = dist;

    auto* fx = s.app.add_subcommand("fixtures", "verify or list the shipped prompt sets");
    fx->add_option("action", o.action, doc("fixtures", "action"))
        ->required()
        ->check(CLI::IsMember({"verify", "list"}));
    fx->add_option("--assets", o.assets_dir, doc("fixtures", "--assets"));
    fx->add_option("--format", o.format, doc("fixtures", "--format"))
        ->check(CLI::IsMember({"text", "json"}));
    s.fixtures = fx;

    auto* ca = s.app.add_subcommand("cache", "inspect or clear a response cache");
    ca->add_option("action", o.action, doc("cache", "action"))
        ->required()
        ->check(CLI::IsMember({"stats", "clear"}));
    ca->add_option("--cache-dir", o.cache_dir, doc("cache", "--cache-dir"))
        ->required();
    ca->add_option("--format", o.format, doc("cache", "--format"))
        ->check(CLI::IsMember({"text", "json"}));
    s.cache = ca;
}

// Every (subcommand, flag) pair the parser actually accepts; compared both
// ways against flag_docs() in tests.
inline std::vector<std::pair<std::string, std::string>> collect_parser_flags() {
    AppState s;
    build_app(s);
    std::vector<std::pair<std::string, std::string>> out;
    const CLI::App* subs[] = {s.run,          s.compare,  s.annotate,
                              s.confidence,   s.distribution, s.fixtures,
                              s.cache};
    for (const CLI::App* sub : subs) {
        for (const CLI::Option* opt : sub->get_options()) {
            if (opt == sub->get_help_ptr()) continue;
            std::string name = opt->get_positional()
                                   ? opt->get_name(true)
                                   : "--" + opt->get_lnames().front();
            out.emplace_back(sub->get_name(), name);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gateway wiring shared by run and annotate

struct GatewayBundle {
    std::shared_ptr<Backend> backend;
    std::unique_ptr<ModelGateway> gateway;
};

inline GatewayBundle make_cli_gateway(const Options& o) {
    GatewayBundle b;
    if (o.backend == "replay") {
        require(!o.script_path.empty(), Errc::invalid_argument,
                "--script is required with --backend replay");
        b.backend = ReplayBackend::from_file(o.script_path);
    } else {
        std::string base = o.base_url;
        if (base.empty()) {
            const char* env = std::getenv("ERP_BASE_URL");
            if (env != nullptr) base = env;
        }
        require(!base.empty(), Errc::invalid_argument,
                "--base-url or ERP_BASE_URL is required with --backend http");
        const char* key = std::getenv("ERP_API_KEY");
        b.backend = std::make_shared<HttpBackend>(base, key ? key : "");
    }
    GatewayOptions go;
    if (!o.cache_dir.empty()) go.cache_dir = o.cache_dir;
    b.gateway = std::make_unique<ModelGateway>(b.backend, go);
    return b;
}

// ---------------------------------------------------------------------------
// run

namespace detail {

// Overlays one config-file key onto cfg; throws on unknown keys so a typo
// in a config file cannot silently fall back to a default.
inline void apply_config_key(RunConfig& cfg, const std::string& key,
                             const nlohmann::json& value) {
    if (key == "dataset") {
        auto d = parse_dataset(value.get<std::string>());
        require(d.has_value(), Errc::invalid_argument,
                "config file: unknown dataset '" + value.get<std::string>() + "'");
        cfg.dataset = *d;
    } else if (key == "method") {
        auto m = parse_method(value.get<std::string>());
        require(m.has_value(), Errc::invalid_argument,
                "config file: unknown method '" + value.get<std::string>() + "'");
        cfg.method = *m;
    } else if (key == "model_id") {
        cfg.model_id = value.get<std::string>();
    } else if (key == "shots") {
        cfg.shots = value.get<int>();
    } else if (key == "seed") {
        cfg.seed = value.get<uint64_t>();
    } else if (key == "count") {
        if (value.is_string()) {
            require(value.get<std::string>() == "all", Errc::invalid_argument,
                    "config file: count must be a number or 'all'");
            cfg.count = std::nullopt;
        } else {
            cfg.count = value.get<size_t>();
        }
    } else if (key == "dataset_path") {
        cfg.dataset_path = value.get<std::string>();
    } else if (key == "exemplar_file") {
        cfg.exemplar_file = value.get<std::string>();
    } else if (key == "template_version") {
        cfg.template_version = value.get<std::string>();
    } else if (key == "temperature") {
        cfg.temperature = value.get<double>();
    } else if (key == "max_tokens") {
        cfg.max_tokens = value.get<int>();
    } else if (key == "parallelism") {
        cfg.parallelism = value.get<int>();
    } else if (key == "auto_error_count") {
        cfg.auto_error_count = value.get<int>();
    } else if (key == "restore_people") {
        cfg.restore_people = value.get<bool>();
    } else if (key == "output_dir") {
        cfg.output_dir = value.get<std::string>();
    } else {
        throw Error(Errc::invalid_argument, "config file: unknown key '" + key + "'");
    }
}

inline void apply_run_flag(RunConfig& cfg, const Options& o,
                           const std::string& key) {
    if (key == "dataset") {
        auto d = parse_dataset(o.dataset);
        require(d.has_value(), Errc::invalid_argument,
                "--dataset: unknown dataset '" + o.dataset + "'");
        cfg.dataset = *d;
    } else if (key == "method") {
        auto m = parse_method(o.method);
        require(m.has_value(), Errc::invalid_argument,
                "--method: unknown method '" + o.method + "'");
        cfg.method = *m;
    } else if (key == "model_id") {
        cfg.model_id = o.model;
    } else if (key == "shots") {
        cfg.shots = o.shots;
    } else if (key == "seed") {
        cfg.seed = o.seed;
    } else if (key == "count") {
        if (o.count == "all") {
            cfg.count = std::nullopt;
        } else {
            try {
                cfg.count = std::stoull(o.count);
            } catch (const std::exception&) {
                throw Error(Errc::invalid_argument,
                            "--count: expected a number or 'all', got '" +
                                o.count + "'");
            }
        }
    } else if (key == "dataset_path") {
        cfg.dataset_path = o.data_path;
    } else if (key == "exemplar_file") {
        cfg.exemplar_file = o.exemplar_path;
    } else if (key == "template_version") {
        cfg.template_version = o.template_version;
    } else if (key == "temperature") {
        cfg.temperature = o.temperature;
    } else if (key == "max_tokens") {
        cfg.max_tokens = o.max_tokens;
    } else if (key == "parallelism") {
        cfg.parallelism = o.parallelism;
    } else if (key == "auto_error_count") {
        cfg.auto_error_count = o.auto_errors;
    } else if (key == "restore_people") {
        cfg.restore_people = o.restore_people;
    } else if (key == "output_dir") {
        cfg.output_dir = o.output;
    }
}

inline const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = {
        "dataset",        "method",      "model_id",
        "shots",          "seed",        "count",
        "dataset_path",   "exemplar_file", "template_version",
        "temperature",    "max_tokens",  "parallelism",
        "auto_error_count", "restore_people", "output_dir"};
    return keys;
}

inline std::string config_value_string(const RunConfig& cfg,
                                       const std::string& key) {
    nlohmann::json j = config_to_json(cfg);
    const auto& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

}  // namespace detail

// Flags beat the config file, which beats compiled defaults; the resolved
// value and its source are echoed to stderr so a run can be audited later.
inline RunConfig resolve_run_config(const AppState& s, const Io& io) {
    RunConfig cfg;
    std::map<std::string, std::string> source;
    for (const auto& key : detail::run_config_keys()) source[key] = "default";

    if (!s.o.config_path.empty()) {
        std::ifstream in(s.o.config_path);
        require(in.good(), Errc::io_error,
                "--config: cannot open " + s.o.config_path);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        require(!j.is_discarded() && j.is_object(), Errc::invalid_argument,
                "--config: not a JSON object: " + s.o.config_path);
        for (const auto& [key, value] : j.items()) {
            detail::apply_config_key(cfg, key, value);
            source[key] = "config-file";
        }
    }
    for (const auto& key : detail::run_config_keys()) {
        if (s.run_flags.at(key)->count() > 0) {
            detail::apply_run_flag(cfg, s.o, key);
            source[key] = "flag";
        }
    }

    io.err << "precedence: flags > config file > defaults\n";
    for (const auto& key : detail::run_config_keys()) {
        io.err << "  " << key << " = " << detail::config_value_string(cfg, key)
               << "  [" << source[key] << "]\n";
    }
    return cfg;
}

inline int cmd_run(const AppState& s, const Io& io) {
    RunConfig cfg = resolve_run_config(s, io);
    auto bundle = make_cli_gateway(s.o);
    RunReport rep = run(cfg, *bundle.gateway);
    io.err << "run " << rep.run_id << " -> " << cfg.output_dir.string() << "\n";

    char acc[32];
    std::snprintf(acc, sizeof(acc), "%.4f", rep.accuracy);
    if (s.o.format == "json") {
        nlohmann::json j;
        j["dataset"] = dataset_name(cfg.dataset);
        j["method"] = method_name(cfg.method);
        j["model"] = cfg.model_id;
        j["accuracy"] = rep.accuracy;
        j["n"] = rep.total;
        j["correct"] = rep.correct;
        j["no_answer_count"] = rep.no_answer_count;
        j["error_count"] = rep.error_count;
        j["run_id"] = rep.run_id;
        j["run_dir"] = cfg.output_dir.string();
        io.out << j.dump() << "\n";
    } else {
        io.out << dataset_name(cfg.dataset) << ' ' << method_name(cfg.method)
               << ' ' << cfg.model_id << ' ' << acc << ' ' << rep.total
               << "\n";
    }
    return rep.error_count > 0 ? kItemErrors : kOk;
}

// ---------------------------------------------------------------------------
// compare: accuracy matrix over any number of runs, plus flip lists when
// exactly two comparable runs are given

inline int cmd_compare(const AppState& s, const Io& io) {
    std::vector<std::pair<std::string, LoadedRun>> loaded;
    std::vector<std::pair<std::string, std::string>> skipped;
    for (const auto& dir : s.o.dirs) {
        try {
            loaded.emplace_back(dir, load_run(dir));
        } catch (const Error& e) {
            skipped.emplace_back(dir, e.what());
        }
    }

    // last run wins if two runs land on the same (method, dataset) cell
    std::map<std::pair<int, int>, double> cells;
    for (const auto& [dir, lr] : loaded) {
        cells[{static_cast<int>(lr.report.config.method),
               static_cast<int>(lr.report.config.dataset)}] =
            lr.report.accuracy;
    }
    std::vector<int> methods, datasets;
    for (int m = 0; m < 4; ++m) {
        for (int d = 0; d < 5; ++d) {
            if (!cells.count({m, d})) continue;
            if (methods.empty() || methods.back() != m) methods.push_back(m);
            if (std::find(datasets.begin(), datasets.end(), d) ==
                datasets.end()) {
                datasets.push_back(d);
            }
        }
    }
    std::sort(datasets.begin(), datasets.end());

    // per-dataset delta when exactly two methods populate the column
    struct Delta {
        int dataset;
        int method_a;  // earlier method in enum order
        int method_b;
        double points;
    };
    std::vector<Delta> deltas;
    for (int d : datasets) {
        std::vector<int> have;
        for (int m : methods) {
            if (cells.count({m, d})) have.push_back(m);
        }
        if (have.size() == 2) {
            deltas.push_back(
                {d, have[0], have[1],
                 (cells[{have[1], d}] - cells[{have[0], d}]) * 100.0});
        }
    }

    std::optional<MethodDelta> pair;
    std::string pair_note;
    if (loaded.size() == 2) {
        try {
            pair = compare(loaded[0].second, loaded[1].second);
        } catch (const Error& e) {
            pair_note = e.what();
        }
    }

    auto pct = [](double accuracy) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", accuracy * 100.0);
        return std::string(buf);
    };
    auto pts = [](double points) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%+.1f", points);
        return std::string(buf);
    };
    auto mname = [](int m) { return method_name(static_cast<Method>(m)); };
    auto dname = [](int d) { return dataset_name(static_cast<Dataset>(d)); };

    if (s.o.format == "json") {
        nlohmann::json j;
        j["cells"] = nlohmann::json::array();
        for (const auto& [key, accuracy] : cells) {
            j["cells"].push_back({{"method", mname(key.first)},
                                  {"dataset", dname(key.second)},
                                  {"accuracy", accuracy}});
        }
        j["deltas"] = nlohmann::json::array();
        for (const auto& d : deltas) {
            j["deltas"].push_back({{"dataset", dname(d.dataset)},
                                   {"method_a", mname(d.method_a)},
                                   {"method_b", mname(d.method_b)},
                                   {"points", d.points}});
        }
        j["skipped"] = nlohmann::json::array();
        for (const auto& [dir, reason] : skipped) {
            j["skipped"].push_back({{"dir", dir}, {"reason", reason}});
        }
        if (pair.has_value()) {
            j["pair"] = {{"delta_points", pair->delta_points},
                         {"a_only_correct", pair->a_only_correct},
                         {"b_only_correct", pair->b_only_correct}};
        }
        io.out << j.dump() << "\n";
    } else if (s.o.format == "csv") {
        io.out << "row,dataset,value\n";
        for (const auto& [key, accuracy] : cells) {
            io.out << mname(key.first) << ',' << dname(key.second) << ','
                   << pct(accuracy) << "\n";
        }
        for (const auto& d : deltas) {
            io.out << "delta," << dname(d.dataset) << ',' << pts(d.points)
                   << "\n";
        }
        for (const auto& [dir, reason] : skipped) {
            io.out << "skipped," << dir << ",\"" << reason << "\"\n";
        }
    } else {
        for (const auto& [dir, reason] : skipped) {
            io.out << "SKIPPED " << dir << " (" << reason << ")\n";
        }
        if (cells.empty()) {
            io.out << "(no runs)\n";
        } else {
            size_t width = std::string("delta").size();
            for (int m : methods) width = std::max(width, std::strlen(mname(m)));
            auto pad = [&](const std::string& text, size_t w) {
                std::string out = text;
                while (out.size() < w) out.push_back(' ');
                return out;
            };
            io.out << pad("method", width + 2);
            for (int d : datasets) io.out << pad(dname(d), 12);
            io.out << "\n";
            for (int m : methods) {
                io.out << pad(mname(m), width + 2);
                for (int d : datasets) {
                    io.out << pad(cells.count({m, d}) ? pct(cells[{m, d}]) : "-",
                                  12);
                }
                io.out << "\n";
            }
            if (!deltas.empty()) {
                io.out << pad("delta", width + 2);
                for (int d : datasets) {
                    std::string cell = "-";
                    for (const auto& dl : deltas) {
                        if (dl.dataset == d) cell = pts(dl.points);
                    }
                    io.out << pad(cell, 12);
                }
                io.out << "\n";
            }
        }
        if (pair.has_value()) {
            io.out << "delta_points " << pts(pair->delta_points)
                   << " (first - second)\n";
            io.out << "only_first_correct " << pair->a_only_correct.size()
                   << ":";
            for (const auto& id : pair->a_only_correct) io.out << ' ' << id;
            io.out << "\nonly_second_correct " << pair->b_only_correct.size()
                   << ":";
            for (const auto& id : pair->b_only_correct) io.out << ' ' << id;
            io.out << "\n";
        } else if (!pair_note.empty()) {
            io.err << "not comparable: " << pair_note << "\n";
        }
    }
    return skipped.empty() ? kOk : kItemErrors;
}

// ---------------------------------------------------------------------------
// annotate

inline int cmd_annotate_validate(const AppState& s, const Io& io) {
    require(!s.o.annotations_path.empty(), Errc::invalid_argument,
            "--annotations is required with --validate");
    auto annotations = load_annotations(s.o.annotations_path);
    size_t labeled = 0;
    for (size_t i = 0; i < annotations.size(); ++i) {
        auto& a = annotations[i];
        io.out << "[" << (i + 1) << "/" << annotations.size() << "] "
               << a.problem_id << " " << category_info(a.category).name
               << ": " << a.judge_rationale << "\n";
        io.out << "valid? [y/n/s] " << std::flush;
        std::string line;
        if (!std::getline(io.in, line)) break;
        if (line == "y" || line == "Y") {
            a.validity = true;
            ++labeled;
        } else if (line == "n" || line == "N") {
            a.validity = false;
            ++labeled;
        }
    }
    save_annotations(annotations, s.o.annotations_path);
    io.out << "labeled " << labeled << "/" << annotations.size() << " -> "
           << s.o.annotations_path << "\n";
    return kOk;
}

inline int cmd_annotate(const AppState& s, const Io& io) {
    if (s.o.validate) return cmd_annotate_validate(s, io);
    require(!s.o.run_dir.empty(), Errc::invalid_argument, "--run is required");
    require(!s.o.data_path.empty(), Errc::invalid_argument, "--data is required");
    require(!s.o.model.empty(), Errc::invalid_argument, "--model is required");

    LoadedRun lr = load_run(s.o.run_dir);
    std::vector<Verdict> incorrect;
    for (const auto& v : lr.verdicts) {
        if (!v.correct) incorrect.push_back(v);
    }
    require(!incorrect.empty(), Errc::invalid_argument,
            "run has no incorrect verdicts to annotate");
    auto sampled = sample_errors(incorrect, static_cast<size_t>(s.o.sample),
                                 s.o.seed);

    Dataset dataset = lr.report.config.dataset;
    ReasoningFamily family = s.o.family.empty()
                                 ? family_of(dataset)
                                 : (s.o.family == "arithmetic"
                                        ? ReasoningFamily::arithmetic
                                        : ReasoningFamily::commonsense);
    auto records = load_dataset(dataset, s.o.data_path);
    std::map<std::string, const ProblemRecord*> by_id;
    for (const auto& r : records) by_id[r.id] = &r;

    auto bundle = make_cli_gateway(s.o);
    JudgeOptions jo;
    jo.model_id = s.o.model;
    jo.allow_math = s.o.allow_math;

    std::vector<ErrorAnnotation> annotations;
    size_t failures = 0;
    for (const auto& v : sampled) {
        auto it = by_id.find(v.problem_id);
        require(it != by_id.end(), Errc::invalid_argument,
                "problem " + v.problem_id + " is not in --data");
        try {
            annotations.push_back(annotate(v, *it->second, family,
                                           *bundle.gateway, lr.report.run_id,
                                           jo));
        } catch (const Error& e) {
            if (e.code() != Errc::judge_unparseable) throw;
            ++failures;
            io.err << "unparseable judge reply for " << v.problem_id << "\n";
        }
    }
    std::filesystem::path out_path =
        s.o.output.empty()
            ? std::filesystem::path(s.o.run_dir) / "annotations.jsonl"
            : std::filesystem::path(s.o.output);
    save_annotations(annotations, out_path);

    if (s.o.format == "json") {
        nlohmann::json j;
        j["annotated"] = annotations.size();
        j["sampled"] = sampled.size();
        j["failures"] = failures;
        j["run_id"] = lr.report.run_id;
        j["output"] = out_path.string();
        io.out << j.dump() << "\n";
    } else {
        io.out << "annotated " << annotations.size() << "/" << sampled.size()
               << " failures=" << failures << " -> " << out_path.string()
               << "\n";
    }
    return failures > 0 ? kItemErrors : kOk;
}

// ---------------------------------------------------------------------------
// confidence / distribution

inline std::vector<int> validity_bits(const std::filesystem::path& path) {
    auto annotations = load_annotations(path);
    std::vector<int> bits;
    bits.reserve(annotations.size());
    for (size_t i = 0; i < annotations.size(); ++i) {
        require(annotations[i].validity.has_value(), Errc::invalid_argument,
                path.string() + ": annotation " + std::to_string(i + 1) +
                    " has no validity label");
        bits.push_back(*annotations[i].validity ? 1 : 0);
    }
    return bits;
}

inline int cmd_confidence(const AppState& s, const Io& io) {
    auto a = validity_bits(s.o.conf_a);
    auto b = validity_bits(s.o.conf_b);
    double value =
        annotation_confidence(a, b, static_cast<size_t>(s.o.conf_k));
    if (s.o.format == "json") {
        nlohmann::json j;
        j["confidence"] = value;
        j["k"] = s.o.conf_k;
        io.out << j.dump() << "\n";
    } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", value);
        io.out << "confidence " << buf << "\n";
    }
    return kOk;
}

inline int cmd_distribution(const AppState& s, const Io& io) {
    auto annotations = load_annotations(s.o.annotations_path);
    std::optional<ReasoningFamily> family;
    if (!s.o.family.empty()) {
        family = s.o.family == "arithmetic" ? ReasoningFamily::arithmetic
                                            : ReasoningFamily::commonsense;
    }
    auto dist = distribution(annotations, family);
    if (s.o.format == "json") {
        io.out << distribution_to_json(dist).dump() << "\n";
    } else if (s.o.format == "csv") {
        io.out << distribution_to_csv(dist);
    } else {
        io.out << "run " << dist.run_id << " n=" << dist.sample_size << "\n";
        size_t width = 0;
        for (const auto& [id, _] : dist.counts) {
            width = std::max(width,
                             std::string_view(category_info(id).name).size());
        }
        for (const auto& [id, count] : dist.counts) {
            double fraction =
                dist.sample_size == 0
                    ? 0.0
                    : static_cast<double>(count) /
                          static_cast<double>(dist.sample_size);
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%5.1f%%", fraction * 100.0);
            std::string name{category_info(id).name};
            name.resize(width + 2, ' ');
            io.out << name << std::setw(4) << count << "  " << buf << "\n";
        }
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// fixtures / cache

inline int cmd_fixtures(const AppState& s, const Io& io) {
    const std::filesystem::path assets = s.o.assets_dir;
    if (s.o.action == "list") {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& e : fixture_registry()) {
            std::string golden =
                erp::detail::read_file_bytes(assets / e.prompt_file);
            std::string checksum = sha256_hex(golden);
            if (s.o.format == "json") {
                rows.push_back({{"id", e.id},
                                {"checksum", checksum},
                                {"prompt_file", e.prompt_file}});
            } else {
                io.out << e.id << ' ' << checksum << "\n";
            }
        }
        if (s.o.format == "json") io.out << rows.dump() << "\n";
        return kOk;
    }

    auto statuses = verify_fixtures(assets);
    if (s.o.format == "json") {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& st : statuses) {
            nlohmann::json row = {{"id", st.id},
                                  {"ok", st.ok},
                                  {"detail", st.detail},
                                  {"checksum", st.checksum}};
            if (st.first_diff >= 0) row["first_diff_offset"] = st.first_diff;
            rows.push_back(row);
        }
        io.out << rows.dump() << "\n";
    } else {
        for (const auto& st : statuses) {
            if (st.ok) {
                io.out << "OK " << st.id << "\n";
            } else if (st.first_diff >= 0) {
                io.out << "FIXTURE_DRIFT " << st.id << " offset="
                       << st.first_diff << " (" << st.detail << ")\n";
            } else {
                io.out << "FIXTURE_DRIFT " << st.id << " (" << st.detail
                       << ")\n";
            }
        }
    }
    return all_fixtures_ok(statuses) ? kOk : kItemErrors;
}

inline int cmd_cache(const AppState& s, const Io& io) {
    namespace fs = std::filesystem;
    const fs::path dir = s.o.cache_dir;
    std::vector<fs::path> entries;
    if (fs::exists(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                entries.push_back(entry.path());
            }
        }
    }
    if (s.o.action == "stats") {
        uintmax_t bytes = 0;
        for (const auto& p : entries) bytes += fs::file_size(p);
        if (s.o.format == "json") {
            nlohmann::json j;
            j["entries"] = entries.size();
            j["bytes"] = bytes;
            io.out << j.dump() << "\n";
        } else {
            io.out << "entries=" << entries.size() << " bytes=" << bytes
                   << "\n";
        }
    } else {
        for (const auto& p : entries) fs::remove(p);
        if (s.o.format == "json") {
            nlohmann::json j;
            j["cleared"] = entries.size();
            io.out << j.dump() << "\n";
        } else {
            io.out << "cleared " << entries.size() << "\n";
        }
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// dispatch

inline int dispatch(const std::vector<std::string>& args, const Io& io) {
    AppState s;
    build_app(s);
    std::vector<const char*> argv;
    argv.push_back("erp");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        s.app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return s.app.exit(e, io.out, io.err);
    } catch (const CLI::ParseError& e) {
        io.err << "error: " << e.what() << "\n";
        return kAborted;
    }
    try {
        if (s.run->parsed()) return cmd_run(s, io);
        if (s.compare->parsed()) return cmd_compare(s, io);
        if (s.annotate->parsed()) return cmd_annotate(s, io);
        if (s.confidence->parsed()) return cmd_confidence(s, io);
        if (s.distribution->parsed()) return cmd_distribution(s, io);
        if (s.fixtures->parsed()) return cmd_fixtures(s, io);
        if (s.cache->parsed()) return cmd_cache(s, io);
    } catch (const Error& e) {
        io.err << "error: " << e.what() << "\n";
        return kAborted;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return kAborted;
    }
    return kAborted;  // unreachable: require_subcommand(1)
}

inline int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    Io io{std::cout, std::cerr, std::cin};
    return dispatch(args, io);
}

}  // namespace erp::cli
