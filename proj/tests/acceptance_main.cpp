// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// fail. Everything runs offline against the replay backend.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "erp/cli.hpp"

namespace fs = std::filesystem;
using namespace erp;

namespace {

const std::string kData = ERP_TEST_DATA_DIR;
const std::string kAssets = ERP_ASSETS_DIR;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

fs::path scratch_root() {
    static fs::path root = [] {
        fs::path p = fs::temp_directory_path() / "erp_acceptance";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = scratch_root() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    expect(in.good(), "cannot read " + p.string());
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// C1: all five shipped prompt sets re-render byte-for-byte, quickly.

void c1_fixture_fidelity() {
    auto t0 = std::chrono::steady_clock::now();
    auto statuses = verify_fixtures(kAssets);
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    expect(statuses.size() == 5, "expected 5 fixtures, saw " +
                                     std::to_string(statuses.size()));
    for (const auto& st : statuses) {
        expect(st.ok, st.id + ": " + st.detail);
    }
    expect(elapsed < 1000,
           "verification took " + std::to_string(elapsed) + " ms");
}

// ---------------------------------------------------------------------------
// C2: the pinned extraction corpus holds (>= 40 cases, every case exact,
// every rule in the shipped table exercised).

void c2_extraction_corpus() {
    std::ifstream in(kData + "/extraction_corpus.jsonl");
    expect(in.good(), "missing extraction corpus");
    size_t cases = 0;
    std::set<std::string> fired;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        std::string kind_name = j.at("kind").get<std::string>();
        TaskKind kind = kind_name == "numeric"   ? TaskKind::numeric
                        : kind_name == "choice"  ? TaskKind::choice
                        : kind_name == "boolean" ? TaskKind::boolean_answer
                                                 : TaskKind::expression;
        std::string transcript = j.at("transcript").get<std::string>();
        auto result = extract_for_kind(kind, transcript,
                                       j.value("allowed", std::string("ABCDE")));
        ++cases;
        std::string label = "case " + std::to_string(cases);
        if (j.contains("status")) {
            expect(!result.ok() && extract_status_name(result.status) ==
                                       j.at("status").get<std::string>(),
                   label + ": expected status " +
                       j.at("status").get<std::string>());
            continue;
        }
        expect(result.ok(), label + ": extraction failed");
        fired.insert(result.answer->rule_id);
        std::string got;
        const auto& value = result.answer->value;
        switch (kind) {
            case TaskKind::numeric: got = value.numeric.canonical(); break;
            case TaskKind::choice: got = std::string(1, value.choice); break;
            case TaskKind::boolean_answer:
                got = value.boolean ? "yes" : "no";
                break;
            case TaskKind::expression: got = value.expression; break;
        }
        std::string want = j.at("expect").get<std::string>();
        if (kind == TaskKind::numeric) {
            auto w = Decimal::parse(want);
            expect(w.has_value(), label + ": bad pinned value");
            want = w->canonical();
        }
        expect(got == want, label + ": got '" + got + "' want '" + want + "'");
    }
    expect(cases >= 40, "only " + std::to_string(cases) + " pinned cases");
    for (const auto& rule : extraction_rules()) {
        std::string id{rule.id};
        expect(fired.count(id) == 1, "rule never fired: " + id);
    }
}

// ---------------------------------------------------------------------------
// C3: scripted 20-problem run matches a hand count exactly; warm-cache rerun
// makes zero backend calls and reproduces report.json byte for byte.

fs::path synthetic_gsm8k(const fs::path& dir, size_t n) {
    fs::path path = dir / "synthetic_gsm8k.jsonl";
    std::ofstream out(path);
    for (size_t i = 0; i < n; ++i) {
        nlohmann::json j;
        j["question"] = "A bin holds " + std::to_string(i + 2) +
                        " bolts and a second bin holds the same. How many "
                        "bolts are there in total?";
        j["answer"] = "Two bins of " + std::to_string(i + 2) + " make " +
                      std::to_string(2 * (i + 2)) + ".\n#### " +
                      std::to_string(2 * (i + 2));
        out << j.dump() << "\n";
    }
    return path;
}

RunConfig synthetic_config(const fs::path& data, const fs::path& out_dir) {
    RunConfig cfg;
    cfg.dataset = Dataset::gsm8k;
    cfg.method = Method::erp;
    cfg.model_id = "acceptance-model";
    cfg.shots = 4;
    cfg.seed = 7;
    cfg.count = 20;
    cfg.dataset_path = data;
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

std::shared_ptr<ReplayBackend> script_for(const RunConfig& cfg,
                                          const std::set<size_t>& wrong) {
    auto records = load_dataset(cfg.dataset, cfg.dataset_path);
    auto sliced = slice(records, cfg.seed, cfg.count, cfg.dataset).records;
    auto backend = std::make_shared<ReplayBackend>();
    for (size_t i = 0; i < sliced.size(); ++i) {
        std::string text = wrong.count(i)
                               ? "It must be huge. The answer is 424242."
                               : "Doubling works. The answer is " +
                                     sliced[i].gold.display() + ".";
        backend->add_for_digest(digest_for(cfg, sliced[i]), text);
    }
    return backend;
}

void c3_end_to_end_oracle() {
    auto dir = fresh_dir("c3");
    auto data = synthetic_gsm8k(dir, 20);
    const std::set<size_t> wrong = {0, 3, 11, 17};  // hand count: 16 of 20

    auto cfg = synthetic_config(data, dir / "run_a");
    GatewayOptions opts;
    opts.cache_dir = dir / "cache";
    {
        ModelGateway gateway(script_for(cfg, wrong), opts);
        RunReport report = run(cfg, gateway);
        expect(report.total == 20, "total != 20");
        expect(report.correct == 16, "hand count is 16, report says " +
                                         std::to_string(report.correct));
        expect(report.accuracy == 16.0 / 20.0, "accuracy is not exactly 0.8");
    }
    std::string first_report = read_file(dir / "run_a" / "report.json");

    // same slice, fresh directory, warm cache: zero backend calls
    auto cfg_b = synthetic_config(data, dir / "run_b");
    auto idle = std::make_shared<ReplayBackend>();  // no entries scripted
    ModelGateway gateway(idle, opts);
    RunReport rerun = run(cfg_b, gateway);
    expect(idle->calls() == 0, "warm rerun touched the backend " +
                                   std::to_string(idle->calls()) + " times");
    expect(rerun.accuracy == 16.0 / 20.0, "warm rerun accuracy drifted");
    expect(read_file(dir / "run_b" / "report.json") == first_report,
           "warm rerun report is not byte-identical");
}

// ---------------------------------------------------------------------------
// C4: the agreement score reproduces the reference 0.60 score and moves by
// exactly 1/(2k) when any single validity bit flips.

void c4_confidence_formula() {
    std::vector<int> thirty(50, 0);
    for (int i = 0; i < 30; ++i) thirty[i] = 1;
    expect(annotation_confidence(thirty, thirty) == 0.60,
           "30/50 + 30/50 must score exactly 0.60");

    std::mt19937_64 rng(4242);
    const size_t k = 50;
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<int> a(k), b(k);
        for (size_t i = 0; i < k; ++i) a[i] = static_cast<int>(rng() % 2);
        for (size_t i = 0; i < k; ++i) b[i] = static_cast<int>(rng() % 2);
        double before = annotation_confidence(a, b, k);
        size_t at = rng() % (2 * k);
        int& bit = at < k ? a[at] : b[at - k];
        bit = 1 - bit;
        double after = annotation_confidence(a, b, k);
        double want = bit == 1 ? 1.0 / (2.0 * k) : -1.0 / (2.0 * k);
        expect(std::abs((after - before) - want) < 1e-12,
               "single-bit sensitivity violated at iteration " +
                   std::to_string(iter));
        expect(after >= 0.0 && after <= 1.0, "score left [0, 1]");
    }
}

// ---------------------------------------------------------------------------
// C5: distribution() equals a naive counting oracle on random inputs.

void c5_distribution_oracle() {
    std::mt19937_64 rng(99);
    for (int iter = 0; iter < 200; ++iter) {
        auto family = iter % 2 == 0 ? ReasoningFamily::arithmetic
                                    : ReasoningFamily::commonsense;
        auto menu = categories_for(family);
        size_t n = rng() % 80;
        std::vector<ErrorAnnotation> annotations;
        std::map<ErrorCategoryId, size_t> oracle;
        for (size_t i = 0; i < n; ++i) {
            ErrorAnnotation a;
            a.problem_id = "p" + std::to_string(i);
            a.run_id = "run-1";
            a.category = menu[rng() % menu.size()].id;
            a.judge_rationale = "synthetic";
            a.judge_transcript_digest = std::string(64, 'f');
            annotations.push_back(a);
            ++oracle[a.category];
        }
        auto dist = distribution(annotations, family);
        expect(dist.sample_size == n, "sample_size mismatch");
        size_t total = 0;
        for (const auto& [id, count] : dist.counts) {
            size_t want = oracle.count(id) ? oracle.at(id) : 0;
            expect(count == want,
                   "count mismatch at iteration " + std::to_string(iter));
            total += count;
        }
        expect(total == n, "sum(counts) != sample_size");
    }
}

// ---------------------------------------------------------------------------
// C6: slicing and error sampling are stable per seed and move across seeds.

void c6_determinism() {
    std::vector<ProblemRecord> records;
    std::vector<Verdict> verdicts;
    for (int i = 0; i < 100; ++i) {
        ProblemRecord r;
        r.id = "syn/" + std::to_string(i);
        r.dataset = Dataset::gsm8k;
        r.question = "How many is " + std::to_string(i) + "?";
        r.gold = GoldAnswer::of_numeric(*Decimal::parse(std::to_string(i)));
        records.push_back(r);

        Verdict v;
        v.problem_id = r.id;
        v.prompt_digest = std::string(64, 'a');
        v.transcript = "The answer is 0.";
        v.gold = r.gold;
        v.correct = false;
        verdicts.push_back(v);
    }

    auto slice_sig = [&](uint64_t seed) {
        std::string sig;
        for (const auto& r : slice(records, seed, 50, Dataset::gsm8k).records) {
            sig += r.id + "|";
        }
        return sig;
    };
    auto sample_sig = [&](uint64_t seed) {
        std::string sig;
        for (const auto& v : sample_errors(verdicts, 50, seed)) {
            sig += v.problem_id + "|";
        }
        return sig;
    };

    std::set<std::string> slice_sigs, sample_sigs;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        std::string s0 = slice_sig(seed);
        std::string e0 = sample_sig(seed);
        for (int rep = 0; rep < 10; ++rep) {
            expect(slice_sig(seed) == s0,
                   "slice() unstable at seed " + std::to_string(seed));
            expect(sample_sig(seed) == e0,
                   "sample_errors() unstable at seed " + std::to_string(seed));
        }
        slice_sigs.insert(s0);
        sample_sigs.insert(e0);
    }
    expect(slice_sigs.size() >= 9, "slices barely differ across seeds");
    expect(sample_sigs.size() >= 9, "samples barely differ across seeds");
}

// ---------------------------------------------------------------------------
// C7: a run killed after problems {1, 7, 13} and resumed matches the
// uninterrupted run byte for byte.

void c7_resume_equivalence() {
    auto dir = fresh_dir("c7");
    auto data = synthetic_gsm8k(dir, 20);
    const std::set<size_t> wrong = {2, 5};

    // a frozen clock pins the per-verdict latency field, so byte equality
    // of verdicts.jsonl cannot flake on scheduler jitter
    GatewayOptions frozen;
    frozen.clock_ms = [] { return 0L; };
    frozen.sleep_ms = [](long) {};

    // parallelism 1 keeps the verdict stream a prefix of the slice order, so
    // a mid-run kill leaves a cleanly resumable file
    auto baseline_cfg = synthetic_config(data, dir / "baseline");
    baseline_cfg.parallelism = 1;
    {
        ModelGateway gateway(script_for(baseline_cfg, wrong), frozen);
        run(baseline_cfg, gateway);
    }
    std::string baseline_report = read_file(dir / "baseline" / "report.json");
    std::string baseline_verdicts =
        read_file(dir / "baseline" / "verdicts.jsonl");

    for (size_t kill_at : {size_t{1}, size_t{7}, size_t{13}}) {
        auto cfg = synthetic_config(
            data, dir / ("killed_" + std::to_string(kill_at)));
        cfg.parallelism = 1;  // verdict order == slice order while dying
        struct Kill {};
        try {
            ModelGateway gateway(script_for(cfg, wrong), frozen);
            run(cfg, gateway, [&](const Verdict&, size_t done, size_t) {
                if (done == kill_at) throw Kill{};
            });
            throw Failure("kill hook never fired");
        } catch (const Kill&) {
        }
        expect(!fs::exists(cfg.output_dir / "report.json"),
               "killed run still wrote a report");

        ModelGateway gateway(script_for(cfg, wrong), frozen);
        RunReport resumed = run(cfg, gateway);
        expect(resumed.total == 20, "resumed run lost problems");
        expect(read_file(cfg.output_dir / "report.json") == baseline_report,
               "resumed report differs after kill at " +
                   std::to_string(kill_at));
        expect(read_file(cfg.output_dir / "verdicts.jsonl") ==
                   baseline_verdicts,
               "resumed verdicts differ after kill at " +
                   std::to_string(kill_at));
    }
}

// ---------------------------------------------------------------------------
// C8: batch dispatch preserves order and honors the parallelism cap under
// shuffled latencies; retry backoff is non-decreasing.

void c8_gateway_contract() {
    auto backend = std::make_shared<ReplayBackend>();
    std::vector<ChatRequest> requests;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
        auto req = make_user_request("batch-model",
                                     "question " + std::to_string(i));
        requests.push_back(req);
        ReplayBackend::Entry entry;
        entry.match_digest = cache_key(req);
        entry.response_text = "response " + std::to_string(i);
        entry.delay_ms = static_cast<long>(rng() % 8);
        backend->add(entry);
    }
    ModelGateway gateway(backend);
    auto outcomes = gateway.complete_batch(requests, 7);
    expect(outcomes.size() == 100, "lost outcomes");
    for (int i = 0; i < 100; ++i) {
        expect(outcomes[i].exchange.has_value(),
               "slot " + std::to_string(i) + " failed");
        expect(outcomes[i].exchange->response_text ==
                   "response " + std::to_string(i),
               "slot " + std::to_string(i) + " out of order");
    }
    expect(backend->max_in_flight() <= 7,
           "max in-flight " + std::to_string(backend->max_in_flight()) +
               " exceeds parallelism 7");

    RetryPolicy retry;
    for (int attempt = 1; attempt < 10; ++attempt) {
        expect(retry.delay_for_attempt(attempt) <=
                   retry.delay_for_attempt(attempt + 1),
               "backoff decreased at attempt " + std::to_string(attempt));
    }
}

// ---------------------------------------------------------------------------
// C9: compare() is an identity on equal runs, and reproduces the +4.4 point
// AQuA delta from stub reports carrying the reference accuracies.

void c9_compare_identity() {
    auto stub = [](Method method, size_t correct_lo, size_t correct_hi) {
        RunConfig cfg;
        cfg.dataset = Dataset::aqua;
        cfg.method = method;
        cfg.model_id = "stub-model";
        cfg.seed = 1;
        cfg.count = 1000;
        cfg.dataset_path = "aqua.jsonl";
        cfg.exemplar_file = "aqua.json";
        cfg.output_dir = "unused";
        RunReport rep;
        rep.config = cfg;
        rep.run_id = run_id_of(cfg);
        rep.total = 1000;
        rep.correct = correct_hi - correct_lo;
        rep.accuracy = static_cast<double>(rep.correct) / 1000.0;
        std::vector<Verdict> verdicts;
        for (size_t i = 0; i < 1000; ++i) {
            Verdict v;
            v.problem_id = "aqua/" + std::to_string(i);
            v.prompt_digest = std::string(64, 'd');
            v.transcript = "The answer is (a).";
            v.gold = GoldAnswer::of_choice('A');
            v.correct = i >= correct_lo && i < correct_hi;
            verdicts.push_back(v);
        }
        return std::make_pair(rep, verdicts);
    };

    auto [erp_rep, erp_verdicts] = stub(Method::erp, 0, 587);    // 58.7%
    auto [cot_rep, cot_verdicts] = stub(Method::cot, 44, 587);   // 54.3%

    auto self = compare(erp_rep, erp_rep, erp_verdicts, erp_verdicts);
    expect(self.delta_points == 0.0, "self-delta is not exactly zero");
    expect(self.a_only_correct.empty() && self.b_only_correct.empty(),
           "self-compare produced flips");

    auto delta = compare(erp_rep, cot_rep, erp_verdicts, cot_verdicts);
    expect(std::abs(delta.delta_points - 4.4) < 1e-9,
           "expected +4.4 points, got " + std::to_string(delta.delta_points));
    expect(delta.a_only_correct.size() == 44, "flip list size wrong");
    expect(delta.b_only_correct.empty(), "unexpected reverse flips");
}

}  // namespace

int main() {
    struct Criterion {
        const char* tag;
        const char* label;
        std::function<void()> body;
    };
    const std::vector<Criterion> criteria = {
        {"C1", "fixture fidelity (5 prompt sets, byte-exact, < 1 s)",
         c1_fixture_fidelity},
        {"C2", "extraction corpus (>= 40 pinned cases, all exact)",
         c2_extraction_corpus},
        {"C3", "end-to-end oracle (20-problem hand count, warm rerun)",
         c3_end_to_end_oracle},
        {"C4", "confidence formula (0.60 cell, 1/(2k) sensitivity)",
         c4_confidence_formula},
        {"C5", "distribution oracle (200 random annotation sets)",
         c5_distribution_oracle},
        {"C6", "determinism (slice and sample, 10 seeds x 10 repeats)",
         c6_determinism},
        {"C7", "resume equivalence (kill after 1, 7, 13 of 20)",
         c7_resume_equivalence},
        {"C8", "gateway contract (order, in-flight cap, backoff)",
         c8_gateway_contract},
        {"C9", "compare identity (zero self-delta, +4.4 stub delta)",
         c9_compare_identity},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        try {
            c.body();
            std::printf("PASS %s %s\n", c.tag, c.label);
        } catch (const std::exception& e) {
            ++failures;
            std::printf("FAIL %s %s: %s\n", c.tag, c.label, e.what());
        }
    }
    if (failures > 0) {
        std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    }
    return failures == 0 ? 0 : 1;
}
