#include "erp/cli.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace {

using namespace erp;
namespace fs = std::filesystem;

const std::string kData = ERP_TEST_DATA_DIR;
const std::string kAssets = ERP_ASSETS_DIR;
const std::string kCli = ERP_CLI_PATH;

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::path(testing::TempDir()) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    EXPECT_TRUE(in.good()) << p;
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

struct Cmd {
    int exit_code;
    std::string out;
    std::string err;
};

// Runs the installed binary with shell redirection so stdout and stderr can
// be asserted separately; stdin comes from a file to keep it hermetic.
Cmd run_cli(const std::string& args, const std::string& stdin_text = "") {
    static int counter = 0;
    fs::path dir = fresh_dir("cli_io_" + std::to_string(counter++));
    write_file(dir / "in.txt", stdin_text);
    std::string cmd = kCli + " " + args + " <'" + (dir / "in.txt").string() +
                      "' >'" + (dir / "out.txt").string() + "' 2>'" +
                      (dir / "err.txt").string() + "'";
    int rc = std::system(cmd.c_str());
    Cmd result;
    result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    result.out = read_file(dir / "out.txt");
    result.err = read_file(dir / "err.txt");
    return result;
}

// -- replay-script plumbing shared by the run/annotate tests ---------------

RunConfig gsm8k_config(const fs::path& out_dir, const std::string& model) {
    RunConfig cfg;
    cfg.dataset = Dataset::gsm8k;
    cfg.method = Method::erp;
    cfg.model_id = model;
    cfg.shots = 4;
    cfg.seed = 42;
    cfg.count = 4;
    cfg.dataset_path = kData + "/gsm8k_mini.jsonl";
    cfg.exemplar_file = kAssets + "/exemplars/gsm8k_math_erp.json";
    cfg.output_dir = out_dir;
    return cfg;
}

std::string digest_for(const RunConfig& cfg, const ProblemRecord& rec) {
    auto exemplars = load_exemplar_file(cfg.exemplar_file);
    exemplars.resize(cfg.shots);
    auto rendered = render_prompt(exemplars, rec, cfg.template_version);
    return cache_key(make_user_request(cfg.model_id, rendered.full_text,
                                       cfg.temperature, cfg.max_tokens));
}

std::vector<ProblemRecord> sliced_records(const RunConfig& cfg) {
    auto records = load_dataset(cfg.dataset, cfg.dataset_path);
    return slice(records, cfg.seed, cfg.count, cfg.dataset).records;
}

// entries: (match digest or "", response text)
void write_script(
    const fs::path& path,
    const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream out(path);
    for (const auto& [digest, text] : entries) {
        nlohmann::json j;
        if (!digest.empty()) j["match"] = digest;
        j["response_text"] = text;
        out << j.dump() << "\n";
    }
}

// Scripts one correct answer per sliced record, except `wrong` indices.
fs::path script_for(const RunConfig& cfg, const fs::path& dir,
                    const std::set<size_t>& wrong = {}) {
    auto recs = sliced_records(cfg);
    std::vector<std::pair<std::string, std::string>> entries;
    for (size_t i = 0; i < recs.size(); ++i) {
        std::string text = wrong.count(i)
                               ? "I am confident. The answer is 999999."
                               : "Step by step. The answer is " +
                                     recs[i].gold.display() + ".";
        entries.emplace_back(digest_for(cfg, recs[i]), text);
    }
    fs::path p = dir / "script.jsonl";
    write_script(p, entries);
    return p;
}

std::string run_flags_for(const RunConfig& cfg, const fs::path& script,
                          const fs::path& cache_dir) {
    std::string flags =
        "run --dataset gsm8k --method erp --model " + cfg.model_id +
        " --shots 4 --seed 42 --count 4 --data '" +
        cfg.dataset_path.string() + "' --exemplars '" +
        cfg.exemplar_file.string() + "' --output '" +
        cfg.output_dir.string() + "' --backend replay --script '" +
        script.string() + "'";
    if (!cache_dir.empty()) flags += " --cache-dir '" + cache_dir.string() + "'";
    return flags;
}

// ---------------------------------------------------------------------------
// flag coverage

TEST(Flags, DocsAndParserAgreeBothWays) {
    std::set<std::pair<std::string, std::string>> documented;
    for (const auto& d : cli::flag_docs()) {
        documented.insert({d.subcommand, d.flag});
    }
    std::set<std::pair<std::string, std::string>> parsed;
    for (const auto& p : cli::collect_parser_flags()) parsed.insert(p);

    for (const auto& p : parsed) {
        EXPECT_TRUE(documented.count(p))
            << "undocumented option: " << p.first << " " << p.second;
    }
    for (const auto& d : documented) {
        EXPECT_TRUE(parsed.count(d))
            << "documented but not parsed: " << d.first << " " << d.second;
    }
}

TEST(Flags, ShippedTsvMatchesTheRegistry) {
    EXPECT_EQ(read_file(kAssets + "/cli_flags.tsv"), cli::cli_flags_tsv());
}

TEST(Flags, HelpEnumeratesEveryDocumentedFlag) {
    std::map<std::string, std::string> help;
    for (const auto& d : cli::flag_docs()) {
        if (!help.count(d.subcommand)) {
            auto r = run_cli(std::string(d.subcommand) + " --help");
            EXPECT_EQ(r.exit_code, 0) << d.subcommand;
            help[d.subcommand] = r.out;
        }
        EXPECT_NE(help[d.subcommand].find(d.flag), std::string::npos)
            << d.subcommand << " help is missing " << d.flag;
    }
}

TEST(Flags, UnknownFlagIsRejectedNotIgnored) {
    auto r = run_cli("run --frobnicate 1");
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.err.find("--frobnicate"), std::string::npos);
    EXPECT_TRUE(r.out.empty());
}

TEST(Flags, MissingSubcommandAborts) {
    auto r = run_cli("");
    EXPECT_EQ(r.exit_code, 3);
}

// ---------------------------------------------------------------------------
// fixtures

TEST(Fixtures, VerifyPassesOnThePristineTree) {
    auto r = run_cli("fixtures verify --assets '" + kAssets + "'");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    for (const auto& e : fixture_registry()) {
        EXPECT_NE(r.out.find("OK " + e.id), std::string::npos) << r.out;
    }

    auto j = run_cli("fixtures verify --assets '" + kAssets + "' --format json");
    auto rows = nlohmann::json::parse(j.out);
    ASSERT_EQ(rows.size(), 5u);
    for (const auto& row : rows) EXPECT_TRUE(row.at("ok").get<bool>());
}

TEST(Fixtures, ListPrintsIdsAndChecksums) {
    auto r = run_cli("fixtures list --assets '" + kAssets + "'");
    EXPECT_EQ(r.exit_code, 0);
    for (const auto& e : fixture_registry()) {
        std::string checksum =
            sha256_hex(read_file(fs::path(kAssets) / e.prompt_file));
        EXPECT_NE(r.out.find(e.id + " " + checksum), std::string::npos)
            << e.id;
    }
}

TEST(Fixtures, OneByteEditIsReportedWithItsOffset) {
    auto dir = fresh_dir("drifted_assets");
    fs::copy(kAssets, dir, fs::copy_options::recursive |
                               fs::copy_options::overwrite_existing);
    fs::path golden = dir / "prompts" / "v1" / "gsm8k-math-erp.txt";
    std::string bytes = read_file(golden);
    ASSERT_GT(bytes.size(), 100u);
    bytes[100] ^= 0x01;
    write_file(golden, bytes);

    auto r = run_cli("fixtures verify --assets '" + dir.string() + "'");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.out.find("FIXTURE_DRIFT gsm8k-math-erp offset=100"),
              std::string::npos)
        << r.out;
    EXPECT_NE(r.out.find("OK aqua-erp"), std::string::npos);
}

// ---------------------------------------------------------------------------
// run

TEST(Run, EndToEndReplayRunAndWarmRerun) {
    auto dir = fresh_dir("cli_run");
    auto cfg = gsm8k_config(dir / "out", "cli-model");
    auto script = script_for(cfg, dir, {1});
    auto flags = run_flags_for(cfg, script, dir / "cache");

    auto r = run_cli(flags);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(r.out, "gsm8k erp cli-model 0.7500 4\n");
    EXPECT_NE(r.err.find("precedence: flags > config file > defaults"),
              std::string::npos);
    EXPECT_NE(r.err.find("model_id = cli-model  [flag]"), std::string::npos);
    EXPECT_NE(r.err.find("temperature = 0.0  [default]"), std::string::npos);
    ASSERT_TRUE(fs::exists(cfg.output_dir / "report.json"));
    std::string report = read_file(cfg.output_dir / "report.json");

    // warm rerun: resumes from the finished run and rewrites byte-identically
    auto again = run_cli(flags);
    EXPECT_EQ(again.exit_code, 0) << again.err;
    EXPECT_EQ(again.out, r.out);
    EXPECT_EQ(read_file(cfg.output_dir / "report.json"), report);
}

TEST(Run, JsonSummaryCarriesTheRunId) {
    auto dir = fresh_dir("cli_run_json");
    auto cfg = gsm8k_config(dir / "out", "cli-model");
    auto script = script_for(cfg, dir, {1});
    auto r = run_cli(run_flags_for(cfg, script, dir / "cache") +
                     " --format json");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.at("dataset"), "gsm8k");
    EXPECT_EQ(j.at("method"), "erp");
    EXPECT_DOUBLE_EQ(j.at("accuracy").get<double>(), 0.75);
    EXPECT_EQ(j.at("n").get<size_t>(), 4u);
    EXPECT_EQ(j.at("run_id").get<std::string>().size(), 64u);
    EXPECT_EQ(j.at("run_dir"), (dir / "out").string());
}

TEST(Run, FlagsBeatConfigFileBeatsDefaults) {
    auto dir = fresh_dir("cli_run_config");
    auto cfg = gsm8k_config(dir / "out", "flag-model");
    auto script = script_for(cfg, dir);

    nlohmann::json file_cfg;
    file_cfg["dataset"] = "gsm8k";
    file_cfg["model_id"] = "config-model";  // overridden by --model
    file_cfg["seed"] = 42;
    file_cfg["count"] = 4;
    file_cfg["dataset_path"] = cfg.dataset_path.string();
    file_cfg["exemplar_file"] = cfg.exemplar_file.string();
    file_cfg["output_dir"] = cfg.output_dir.string();
    write_file(dir / "cfg.json", file_cfg.dump(2));

    auto r = run_cli("run --config '" + (dir / "cfg.json").string() +
                     "' --model flag-model --backend replay --script '" +
                     script.string() + "'");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(r.out, "gsm8k erp flag-model 1.0000 4\n");
    EXPECT_NE(r.err.find("model_id = flag-model  [flag]"), std::string::npos);
    EXPECT_NE(r.err.find("dataset_path = " + cfg.dataset_path.string() +
                         "  [config-file]"),
              std::string::npos);
    EXPECT_NE(r.err.find("shots = 4  [default]"), std::string::npos);
}

TEST(Run, MissingDataFileAborts) {
    auto dir = fresh_dir("cli_run_missing");
    auto cfg = gsm8k_config(dir / "out", "cli-model");
    cfg.dataset_path = "/nonexistent/never.jsonl";
    auto script = dir / "script.jsonl";
    write_script(script, {{"", "The answer is 1."}});
    auto r = run_cli(run_flags_for(cfg, script, ""));
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.err.find("/nonexistent/never.jsonl"), std::string::npos);
    EXPECT_TRUE(r.out.empty());
}

TEST(Run, UnknownConfigFileKeyAborts) {
    auto dir = fresh_dir("cli_run_badkey");
    write_file(dir / "cfg.json", R"({"frobnicate": 1})");
    auto r = run_cli("run --config '" + (dir / "cfg.json").string() + "'");
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
}

TEST(Run, BareInvocationIsAConfigError) {
    auto dir = fresh_dir("cli_run_bare");
    auto r = run_cli("run");
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.err.find("model_id"), std::string::npos);
}

// ---------------------------------------------------------------------------
// compare

// Two synthetic csqa runs shaped like a real comparison: 1000 problems,
// 661 vs 653 correct, the second run's correct set a subset of the first's.
void write_fake_run(const fs::path& dir, Method method, size_t correct_lo,
                    size_t correct_hi) {
    fs::create_directories(dir);
    RunConfig cfg;
    cfg.dataset = Dataset::csqa;
    cfg.method = method;
    cfg.model_id = "stub-model";
    cfg.seed = 7;
    cfg.count = 1000;
    cfg.dataset_path = "csqa.jsonl";
    cfg.exemplar_file = "csqa.json";
    cfg.output_dir = dir;

    RunReport rep;
    rep.config = cfg;
    rep.run_id = run_id_of(cfg);
    rep.total = 1000;
    rep.correct = correct_hi - correct_lo;
    rep.accuracy = static_cast<double>(rep.correct) / 1000.0;

    std::ofstream verdicts(dir / "verdicts.jsonl");
    for (size_t i = 0; i < 1000; ++i) {
        Verdict v;
        char id[16];
        std::snprintf(id, sizeof(id), "csqa/%04zu", i);
        v.problem_id = id;
        v.prompt_digest = std::string(64, 'a');
        v.transcript = "The answer is (a).";
        v.gold = GoldAnswer::of_choice('A');
        v.correct = i >= correct_lo && i < correct_hi;
        verdicts << verdict_to_json(v).dump() << "\n";
    }
    write_file(dir / "report.json", report_to_json(rep).dump(2) + "\n");
}

TEST(Compare, MatrixDeltaAndFlipLists) {
    auto dir = fresh_dir("cli_compare");
    write_fake_run(dir / "erp", Method::erp, 0, 661);    // 66.1%
    write_fake_run(dir / "cot", Method::cot, 8, 661);    // 65.3%

    auto r = run_cli("compare '" + (dir / "erp").string() + "' '" +
                     (dir / "cot").string() + "'");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("66.1"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("65.3"), std::string::npos);
    EXPECT_NE(r.out.find("+0.8"), std::string::npos);
    EXPECT_NE(r.out.find("delta_points +0.8 (first - second)"),
              std::string::npos);
    EXPECT_NE(r.out.find("only_first_correct 8:"), std::string::npos);
    EXPECT_NE(r.out.find("only_second_correct 0:"), std::string::npos);

    auto csv = run_cli("compare --format csv '" + (dir / "erp").string() +
                       "' '" + (dir / "cot").string() + "'");
    EXPECT_NE(csv.out.find("cot,csqa,65.3"), std::string::npos) << csv.out;
    EXPECT_NE(csv.out.find("erp,csqa,66.1"), std::string::npos);
    EXPECT_NE(csv.out.find("delta,csqa,+0.8"), std::string::npos);

    auto j = run_cli("compare --format json '" + (dir / "erp").string() +
                     "' '" + (dir / "cot").string() + "'");
    auto parsed = nlohmann::json::parse(j.out);
    ASSERT_EQ(parsed.at("deltas").size(), 1u);
    EXPECT_EQ(parsed.at("deltas")[0].at("method_a"), "cot");
    EXPECT_EQ(parsed.at("deltas")[0].at("method_b"), "erp");
    EXPECT_NEAR(parsed.at("deltas")[0].at("points").get<double>(), 0.8, 1e-9);
    EXPECT_EQ(parsed.at("pair").at("a_only_correct").size(), 8u);
}

TEST(Compare, EmptyListAndUnreadableDirs) {
    auto r = run_cli("compare");
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.out, "(no runs)\n");

    auto dir = fresh_dir("cli_compare_skip");
    write_fake_run(dir / "ok", Method::erp, 0, 661);
    auto s = run_cli("compare '" + (dir / "ok").string() + "' '" +
                     (dir / "missing").string() + "'");
    EXPECT_EQ(s.exit_code, 2);
    EXPECT_NE(s.out.find("SKIPPED " + (dir / "missing").string()),
              std::string::npos)
        << s.out;
    EXPECT_NE(s.out.find("66.1"), std::string::npos);
}

// ---------------------------------------------------------------------------
// annotate / confidence / distribution

std::string judge_digest(const ProblemRecord& rec, const Verdict& v,
                         ReasoningFamily family, const std::string& model) {
    std::string prompt = render_meta_prompt(
        "judge_v1", {{"categories", category_menu(family)},
                     {"question", prompt_question(rec)},
                     {"gold", rec.gold.display()},
                     {"answer", v.transcript}});
    return cache_key(make_user_request(model, prompt, 0.0, 256));
}

// A finished gsm8k run directory whose first three problems were missed.
struct FakeJudgeSetup {
    fs::path run_dir;
    std::vector<ProblemRecord> records;
    std::vector<Verdict> verdicts;
    std::string run_id;
};

FakeJudgeSetup fake_incorrect_run(const fs::path& dir) {
    FakeJudgeSetup s;
    s.run_dir = dir / "run";
    fs::create_directories(s.run_dir);
    auto all = load_dataset(Dataset::gsm8k, kData + "/gsm8k_mini.jsonl");
    s.records.assign(all.begin(), all.begin() + 3);

    RunConfig cfg;
    cfg.dataset = Dataset::gsm8k;
    cfg.method = Method::erp;
    cfg.model_id = "eval-model";
    cfg.seed = 1;
    cfg.count = 3;
    cfg.dataset_path = kData + "/gsm8k_mini.jsonl";
    cfg.exemplar_file = "unused.json";
    cfg.output_dir = s.run_dir;
    s.run_id = run_id_of(cfg);

    RunReport rep;
    rep.config = cfg;
    rep.run_id = s.run_id;
    rep.total = 3;
    rep.correct = 0;
    rep.accuracy = 0.0;

    std::ofstream verdicts(s.run_dir / "verdicts.jsonl");
    for (const auto& rec : s.records) {
        Verdict v;
        v.problem_id = rec.id;
        v.prompt_digest = std::string(64, 'b');
        v.transcript = "Let me add everything. The answer is 999999.";
        v.gold = rec.gold;
        v.correct = false;
        verdicts << verdict_to_json(v).dump() << "\n";
        s.verdicts.push_back(v);
    }
    write_file(s.run_dir / "report.json", report_to_json(rep).dump(2) + "\n");
    return s;
}

TEST(Annotate, JudgeFlowWritesAnnotations) {
    auto dir = fresh_dir("cli_annotate");
    auto setup = fake_incorrect_run(dir);

    std::vector<std::pair<std::string, std::string>> entries;
    for (size_t i = 0; i < setup.records.size(); ++i) {
        entries.emplace_back(
            judge_digest(setup.records[i], setup.verdicts[i],
                         ReasoningFamily::arithmetic, "judge-model"),
            "Category: Missed Steps - skipped the subtraction");
    }
    write_script(dir / "judge.jsonl", entries);

    fs::path out_path = dir / "annotations.jsonl";
    auto r = run_cli("annotate --run '" + setup.run_dir.string() +
                     "' --data '" + kData + "/gsm8k_mini.jsonl'" +
                     " --model judge-model --sample 3 --seed 9" +
                     " --backend replay --script '" +
                     (dir / "judge.jsonl").string() + "' --output '" +
                     out_path.string() + "'");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("annotated 3/3 failures=0"), std::string::npos)
        << r.out;

    auto annotations = load_annotations(out_path);
    ASSERT_EQ(annotations.size(), 3u);
    for (const auto& a : annotations) {
        EXPECT_EQ(a.category, ErrorCategoryId::missed_steps);
        EXPECT_EQ(a.run_id, setup.run_id);
    }

    // the CLI distribution view matches the library's render exactly
    auto csv = run_cli("distribution --annotations '" + out_path.string() +
                       "' --format csv");
    EXPECT_EQ(csv.exit_code, 0);
    EXPECT_EQ(csv.out, distribution_to_csv(distribution(annotations)));
    auto text = run_cli("distribution --annotations '" + out_path.string() +
                        "'");
    EXPECT_NE(text.out.find("Missed Steps"), std::string::npos);
    EXPECT_NE(text.out.find("100.0%"), std::string::npos);
}

TEST(Annotate, UnparseableJudgeRepliesExitTwo) {
    auto dir = fresh_dir("cli_annotate_bad");
    auto setup = fake_incorrect_run(dir);
    // two positional replies: the first request and its retry both garbage
    write_script(dir / "judge.jsonl",
                 {{"", "no category here"}, {"", "still nothing"}});

    auto r = run_cli("annotate --run '" + setup.run_dir.string() +
                     "' --data '" + kData + "/gsm8k_mini.jsonl'" +
                     " --model judge-model --sample 1 --seed 9" +
                     " --backend replay --script '" +
                     (dir / "judge.jsonl").string() + "' --output '" +
                     (dir / "out.jsonl").string() + "'");
    EXPECT_EQ(r.exit_code, 2) << r.err;
    EXPECT_NE(r.out.find("annotated 0/1 failures=1"), std::string::npos);
    EXPECT_NE(r.err.find("unparseable"), std::string::npos);
}

TEST(Annotate, ValidityLoopReadsStdin) {
    auto dir = fresh_dir("cli_validate");
    std::vector<ErrorAnnotation> annotations;
    for (int i = 0; i < 2; ++i) {
        ErrorAnnotation a;
        a.problem_id = "p" + std::to_string(i);
        a.run_id = "run-1";
        a.category = ErrorCategoryId::missed_steps;
        a.judge_rationale = "because";
        a.judge_transcript_digest = std::string(64, 'c');
        annotations.push_back(a);
    }
    fs::path path = dir / "annotations.jsonl";
    save_annotations(annotations, path);

    auto r = run_cli("annotate --validate --annotations '" + path.string() +
                         "'",
                     "y\nn\n");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("[1/2] p0 Missed Steps"), std::string::npos);
    EXPECT_NE(r.out.find("valid? [y/n/s]"), std::string::npos);
    EXPECT_NE(r.out.find("labeled 2/2"), std::string::npos);

    auto back = load_annotations(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_TRUE(back[0].validity.value());
    EXPECT_FALSE(back[1].validity.value());
}

TEST(Confidence, CliMatchesTheFormula) {
    auto dir = fresh_dir("cli_confidence");
    auto sample = [&](const std::string& name, std::vector<bool> bits) {
        std::vector<ErrorAnnotation> annotations;
        for (size_t i = 0; i < bits.size(); ++i) {
            ErrorAnnotation a;
            a.problem_id = "p" + std::to_string(i);
            a.run_id = "run-1";
            a.category = ErrorCategoryId::missed_steps;
            a.judge_rationale = "because";
            a.judge_transcript_digest = std::string(64, 'c');
            a.validity = static_cast<bool>(bits[i]);
            annotations.push_back(a);
        }
        fs::path p = dir / name;
        save_annotations(annotations, p);
        return p;
    };
    auto a = sample("a.jsonl", {true, true, false});
    auto b = sample("b.jsonl", {true, true, false});

    auto r = run_cli("confidence --a '" + a.string() + "' --b '" +
                     b.string() + "' --k 3");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(r.out, "confidence 0.6667\n");

    auto j = run_cli("confidence --a '" + a.string() + "' --b '" +
                     b.string() + "' --k 3 --format json");
    auto parsed = nlohmann::json::parse(j.out);
    EXPECT_NEAR(parsed.at("confidence").get<double>(), 2.0 / 3.0, 1e-12);

    // an unlabeled annotation cannot be scored
    std::vector<ErrorAnnotation> unlabeled = load_annotations(a);
    unlabeled[1].validity.reset();
    save_annotations(unlabeled, dir / "c.jsonl");
    auto bad = run_cli("confidence --a '" + a.string() + "' --b '" +
                       (dir / "c.jsonl").string() + "' --k 3");
    EXPECT_EQ(bad.exit_code, 3);
    EXPECT_NE(bad.err.find("validity"), std::string::npos);
}

// ---------------------------------------------------------------------------
// cache

TEST(Cache, StatsAndClear) {
    auto dir = fresh_dir("cli_cache");
    auto cfg = gsm8k_config(dir / "out", "cli-model");
    auto script = script_for(cfg, dir);
    auto r = run_cli(run_flags_for(cfg, script, dir / "cache"));
    ASSERT_EQ(r.exit_code, 0) << r.err;

    auto stats = run_cli("cache stats --cache-dir '" +
                         (dir / "cache").string() + "'");
    EXPECT_EQ(stats.exit_code, 0);
    EXPECT_EQ(stats.out.rfind("entries=4 bytes=", 0), 0u) << stats.out;

    auto cleared = run_cli("cache clear --cache-dir '" +
                           (dir / "cache").string() + "'");
    EXPECT_EQ(cleared.out, "cleared 4\n");

    auto empty = run_cli("cache stats --cache-dir '" +
                         (dir / "cache").string() + "' --format json");
    auto parsed = nlohmann::json::parse(empty.out);
    EXPECT_EQ(parsed.at("entries").get<size_t>(), 0u);
}

}  // namespace
