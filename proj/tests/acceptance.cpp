// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "cdr/eval.hpp"
#include "cdr/extraction.hpp"
#include "cdr/pipeline.hpp"
#include "cdr/rule_executor.hpp"
#include "cdr/selection.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cdr;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
        v = check();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Verdict nexus_truth_table() {
    const auto def = test::bundled("nexus_cspine");
    const auto start = Clock::now();
    int mismatches = 0;
    for (int m = 0; m < 32; ++m) {
        const bool b[5] = {bool(m & 1), bool(m & 2), bool(m & 4), bool(m & 8), bool(m & 16)};
        const Assignment a{{"focal_neurologic_deficit", b[0]},
                           {"midline_tenderness", b[1]},
                           {"altered_consciousness", b[2]},
                           {"intoxication", b[3]},
                           {"distracting_injury", b[4]}};
        const Outcome o = execute_rule(def, a);
        const bool any = m != 0;
        if ((o.label == "imaging recommended") != any || o.is_positive != any ||
            o.label != oracle::nexus(b[0], b[1], b[2], b[3], b[4]))
            ++mismatches;
    }
    const double t = seconds_since(start);
    return {mismatches == 0 && t < 1.0, fmt("32 combinations, %.0f mismatches, %.6f s", mismatches, t)};
}

Verdict oracle_equivalence() {
    const auto nexus = test::bundled("nexus_cspine");
    const auto tbi = test::bundled("pecarn_tbi");
    const auto iai = test::bundled("pecarn_iai");
    long states = 0, mismatches = 0;

    for (int m = 0; m < 32; ++m) {
        auto bit = [&](int i) { return bool(m >> i & 1); };
        const Assignment a{{"focal_neurologic_deficit", bit(0)}, {"midline_tenderness", bit(1)},
                           {"altered_consciousness", bit(2)},    {"intoxication", bit(3)},
                           {"distracting_injury", bit(4)}};
        ++states;
        mismatches += execute_rule(nexus, a).label != oracle::nexus(bit(0), bit(1), bit(2), bit(3), bit(4));
    }
    // Every boolean combination crossed with the whole GCS range 3..15.
    for (std::int64_t gcs = 3; gcs <= 15; ++gcs) {
        for (int m = 0; m < (1 << 10); ++m) {
            auto bit = [&](int i) { return bool(m >> i & 1); };
            const Assignment a{{"age_under_2", bit(0)},
                               {"gcs", gcs},
                               {"altered_mental_status", bit(1)},
                               {"palpable_skull_fracture", bit(2)},
                               {"basilar_skull_fracture_signs", bit(3)},
                               {"scalp_hematoma", bit(4)},
                               {"loss_of_consciousness", bit(5)},
                               {"severe_mechanism", bit(6)},
                               {"not_acting_normally", bit(7)},
                               {"vomiting", bit(8)},
                               {"severe_headache", bit(9)}};
            ++states;
            mismatches += execute_rule(tbi, a).label !=
                          oracle::pecarn_tbi(bit(0), gcs, bit(1), bit(2), bit(3), bit(4), bit(5), bit(6), bit(7),
                                             bit(8), bit(9));
        }
        for (int m = 0; m < (1 << 6); ++m) {
            auto bit = [&](int i) { return bool(m >> i & 1); };
            const Assignment a{{"abdominal_wall_trauma", bit(0)}, {"gcs", gcs},
                               {"abdominal_tenderness", bit(1)},  {"thoracic_wall_trauma", bit(2)},
                               {"abdominal_pain", bit(3)},        {"decreased_breath_sounds", bit(4)},
                               {"vomiting", bit(5)}};
            ++states;
            mismatches +=
                execute_rule(iai, a).label != oracle::pecarn_iai(bit(0), gcs, bit(1), bit(2), bit(3), bit(4), bit(5));
        }
    }
    return {mismatches == 0 && states == 32 + 13 * (1024 + 64),
            std::to_string(states) + " exhaustive states over 3 bundled rules, " + std::to_string(mismatches) +
                " mismatches"};
}

Verdict selector_calibration() {
    const auto start = Clock::now();
    const double alpha = 0.05;
    SelectionConfig config;
    config.alpha = alpha;
    std::mt19937_64 rng(20240501);
    std::normal_distribution<double> d(0.3, 0.05);

    std::vector<std::string> ids;
    for (int i = 0; i < 200; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "c%03d", i);
        ids.push_back(id);
    }
    double false_rate_sum = 0;
    long planted_hits = 0, planted_total = 0;
    for (int profile = 0; profile < 1000; ++profile) {
        std::map<std::string, std::vector<double>> null_scores, planted_scores;
        for (const auto& id : ids) null_scores[id] = {d(rng)};
        planted_scores = null_scores;
        // Three planted applicable CDRs at mu + 6 sigma.
        std::set<std::string> planted;
        while (planted.size() < 3) planted.insert(ids[uniform_index(rng, ids.size())]);
        for (const auto& id : planted) planted_scores[id] = {0.3 + 6 * 0.05};

        false_rate_sum += double(select_from_scores(null_scores, config).selected.size()) / 200.0;
        const auto sel = select_from_scores(planted_scores, config).selected;
        for (const auto& id : planted) planted_hits += std::count(sel.begin(), sel.end(), id);
        planted_total += 3;
    }
    const double rate = false_rate_sum / 1000;
    const double recall = double(planted_hits) / double(planted_total);
    const double t = seconds_since(start);
    const bool ok = rate >= 0.5 * alpha && rate <= 1.5 * alpha && recall >= 0.99 && t < 30;
    return {ok, fmt("false-selection rate %.4f (alpha 0.05), planted recall %.4f, %.2f s", rate, recall, t)};
}

Verdict gaussian_fit() {
    const std::vector<std::vector<double>> vectors{
        {0, 1}, {0.2, 0.4, 0.6, 0.8}, {0.91, 0.13, 0.47, 0.55, 0.02, 0.78, 0.33}, {-3.5, 2.25, 1e-3, 7.125, 0.5}};
    double worst = 0;
    for (const auto& v : vectors) {
        long double mean = 0;
        for (double x : v) mean += x;
        mean /= v.size();
        long double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const long double sd = std::sqrt(ss / (v.size() - 1));
        const auto f = fit_gaussian(v, kDefaultSigmaFloor);
        worst = std::max({worst, double(std::fabs(f.mu - mean)), double(std::fabs(f.sigma - sd))});
    }
    const double floor = 1e-7;
    const auto degenerate = fit_gaussian(std::vector<double>(9, 0.61), floor);
    const bool ok = worst <= 1e-12 && degenerate.sigma == floor && degenerate.mu == 0.61;
    return {ok, fmt("max abs error %.3g on 4 vectors; degenerate sigma %.3g (floor %.3g)", worst, degenerate.sigma,
                    floor)};
}

Verdict metric_oracles() {
    std::mt19937_64 rng(77);
    double worst = 0;
    long count_mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + int(rng() % 15);
        const int n = 1 + int(rng() % 100);
        std::vector<std::string> ids;
        for (int i = 0; i < k; ++i) ids.push_back("cdr" + std::to_string(i));
        auto random_set = [&] {
            CdrSet s;
            const int density = 1 + int(rng() % 4);
            for (const auto& id : ids)
                if (int(rng() % 8) < density) s.insert(id);
            return s;
        };
        std::vector<LabeledNote> gold;
        std::vector<Prediction> pred;
        std::vector<oracle::Note> onotes;
        std::vector<oracle::Answer> oans;
        for (int i = 0; i < n; ++i) {
            LabeledNote g;
            g.note_id = "n" + std::to_string(i);
            const int annotators = 1 + int(rng() % 3);
            for (int a = 0; a < annotators; ++a) g.label_sets.push_back(rng() % 5 == 0 ? CdrSet{} : random_set());
            for (const auto& id : ids)
                if (rng() % 2) g.outcome_labels[id] = rng() % 2;
            Prediction p;
            p.note_id = g.note_id;
            p.selected = rng() % 3 == 0 ? g.label_sets[rng() % g.label_sets.size()] : random_set();
            for (const auto& id : p.selected)
                if (rng() % 5) p.outcome_positive[id] = rng() % 2;
            p.failed = rng() % 20 == 0;

            oracle::Note on{g.note_id, {}, g.outcome_labels};
            for (const auto& ls : g.label_sets) on.label_sets.emplace_back(ls.begin(), ls.end());
            onotes.push_back(std::move(on));
            oans.push_back({p.note_id, {p.selected.begin(), p.selected.end()}, p.outcome_positive, p.failed});
            gold.push_back(std::move(g));
            pred.push_back(std::move(p));
        }
        worst = std::max(worst, std::fabs(ea_accuracy(pred, gold) - oracle::ea(oans, onotes)));
        worst = std::max(worst, std::fabs(f1_score(pred, gold) - oracle::f1(oans, onotes, ids)));
        const auto s = sensitivity_specificity(pred, gold);
        const auto o = oracle::confusion(oans, onotes);
        if (s.sensitivity.has_value() != o.sens().has_value() || s.specificity.has_value() != o.spec().has_value() ||
            long(s.tp) != o.tp || long(s.fn) != o.fn || long(s.tn) != o.tn || long(s.fp) != o.fp)
            ++count_mismatches;
        if (s.sensitivity && o.sens()) worst = std::max(worst, std::fabs(*s.sensitivity - *o.sens()));
        if (s.specificity && o.spec()) worst = std::max(worst, std::fabs(*s.specificity - *o.spec()));
    }
    return {worst <= 1e-12 && count_mismatches == 0,
            fmt("1000 instances, max abs difference %.3g, %.0f confusion mismatches", worst, double(count_mismatches))};
}

Verdict imputation_safety() {
    const auto registry = test::bundled_registry();
    std::ostringstream detail;
    bool ok = true;
    int monotone = 0;
    for (const auto& def : registry->definitions()) {
        const auto m = check_boolean_monotonicity(def);
        const auto ev = impute_negative(parse_extraction("", def), def);
        const Outcome o = execute_rule(def, assignment_of(ev));
        monotone += m.monotone;
        // Required for monotone rules; reported for the rest.
        if (m.monotone && o.is_positive) ok = false;
        if (detail.tellp() > 0) detail << "; ";
        detail << def.id << (m.monotone ? " (monotone)" : " (not monotone: " + m.counterexample + ")") << " -> "
               << o.label;
    }
    ok = ok && monotone > 0;
    return {ok, detail.str()};
}

Verdict golden_run() {
    auto llm = std::make_shared<MockLlmProvider>(
        MockLlmProvider::from_fixture_file(test::fixtures() / "mini" / "llm_fixture.json"));
    const auto dataset = load_dataset(test::fixtures() / "mini" / "dataset.jsonl");
    EvalOptions options;
    options.pipeline.selection.rng_seed = 0;
    const auto report = run_eval(dataset, test::full_registry(), std::make_shared<MockEmbeddingProvider>(), llm, options);
    const std::string produced = strip_timings(to_json(report)).dump(2) + "\n";
    std::ifstream in(test::fixtures() / "mini" / "golden_report.json", std::ios::binary);
    std::ostringstream golden;
    golden << in.rdbuf();
    const bool same = produced == golden.str();
    return {same && report.ea_accuracy == 1.0 && dataset.size() == 20,
            std::string(same ? "byte-identical" : "DIFFERS from golden") + ", EA " + std::to_string(report.ea_accuracy) +
                ", F1 " + std::to_string(report.f1)};
}

Verdict truncation_collapse() {
    const auto registry = test::full_registry();
    MockEmbeddingProvider embedder;
    const auto dataset = load_dataset(test::fixtures() / "mini" / "dataset.jsonl");
    long runs = 0, differing = 0;
    for (const auto& n : dataset) {
        SelectionConfig base;
        base.retention_ratio = 1.0;
        base.num_truncations = 1;
        const auto reference = select_cdrs(n.note, *registry, base, embedder).selected;
        for (int t : {1, 2, 5, 10, 25})
            for (std::uint64_t seed : {0ull, 1ull, 42ull, 987654321ull}) {
                SelectionConfig c = base;
                c.num_truncations = t;
                c.rng_seed = seed;
                ++runs;
                differing += select_cdrs(n.note, *registry, c, embedder).selected != reference;
            }
    }
    return {differing == 0, std::to_string(runs) + " (note, num_truncations, seed) runs at retention 1.0, " +
                                std::to_string(differing) + " differ"};
}

Verdict latency() {
    const auto registry = test::full_registry();
    if (registry->size() != 15) return {false, "expected a 15-CDR registry"};
    std::string note = "A 7-year-old boy fell from the monkey bars at school and hit his head on the ground.";
    const std::string filler[] = {"He", "had", "no", "loss", "of", "consciousness", "but", "vomited", "once",
                                  "and", "complains", "of", "a", "mild", "headache.", "GCS", "15", "on", "arrival."};
    while (split_tokens(note).size() < 250) note += " " + filler[split_tokens(note).size() % std::size(filler)];
    const std::size_t tokens = split_tokens(note).size();

    // Cold pipeline: the CDR embeddings are computed inside the timed call.
    Pipeline pipeline(registry, std::make_shared<MockEmbeddingProvider>(), std::make_shared<MockLlmProvider>());
    const auto start = Clock::now();
    const auto session = pipeline.analyze(note, {});
    const double t = seconds_since(start);
    const bool ok = t < 0.1 && session.status == SessionStatus::Completed;
    return {ok, fmt("%.0f-token note, 15 CDRs, %.2f ms, %.0f CDR(s) selected", double(tokens), t * 1000,
                    double(session.profile.selected.size()))};
}

}  // namespace

int main() {
    report("nexus-truth-table", nexus_truth_table);
    report("rule-engine-oracle-equivalence", oracle_equivalence);
    report("selector-calibration", selector_calibration);
    report("fit-gaussian", gaussian_fit);
    report("metric-oracles", metric_oracles);
    report("negative-imputation-safety", imputation_safety);
    report("deterministic-golden-run", golden_run);
    report("truncation-collapse", truncation_collapse);
    report("end-to-end-latency", latency);
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
