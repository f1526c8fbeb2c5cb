#include <gtest/gtest.h>

#include "cdr/extraction.hpp"
#include "cdr/prompts.hpp"
#include "cdr/rule_executor.hpp"
#include "support.hpp"

using namespace cdr;

namespace {

const std::string kTbiNote =
    "7-year-old fell off monkey bars, hit head. GCS 15. Vomited once. No loss of consciousness.";

}  // namespace

TEST(Prompt, ListsEveryVariableAndEmbedsNote) {
    const auto def = test::bundled("pecarn_tbi");
    const auto p = build_prompt(kTbiNote, def);
    EXPECT_EQ(p.cdr_id, "pecarn_tbi");
    for (const auto& v : def.variables) {
        const std::string line = "- " + v.name + " (" + describe(v.type) + "): " + v.definition;
        EXPECT_NE(p.rendered_text.find(line), std::string::npos) << v.name;
    }
    EXPECT_EQ(prompts::embedded_note(p.rendered_text), kTbiNote);
    EXPECT_EQ(prompts::embedded_cdr_id(p.rendered_text), "pecarn_tbi");
    EXPECT_FALSE(p.system_text.empty());
}

TEST(Prompt, Deterministic) {
    const auto def = test::bundled("nexus_cspine");
    const auto a = build_prompt("neck pain", def);
    const auto b = build_prompt("neck pain", def);
    EXPECT_EQ(a.rendered_text, b.rendered_text);
    EXPECT_EQ(a.system_text, b.system_text);
}

TEST(Prompt, NoteTextIsNotRescanned) {
    const auto def = test::bundled("nexus_cspine");
    const auto p = build_prompt("patient wrote {{cdr_id}} on the form", def);
    EXPECT_EQ(prompts::embedded_note(p.rendered_text), "patient wrote {{cdr_id}} on the form");
}

TEST(Prompt, RenderReplacesOnce) {
    EXPECT_EQ(prompts::render("{{a}} and {{b}}", {{"a", "{{b}}"}, {"b", "x"}}), "{{b}} and x");
}

TEST(Parse, TypicalAnswer) {
    const auto def = test::bundled("pecarn_tbi");
    const auto ev = parse_extraction("gcs: 15\nvomiting: yes\nloss_of_consciousness: no\n", def);
    EXPECT_EQ(ev.cdr_id, "pecarn_tbi");
    EXPECT_EQ(ev.values.at("gcs").value, Value(std::int64_t{15}));
    EXPECT_EQ(ev.values.at("vomiting").value, Value(true));
    EXPECT_EQ(ev.values.at("loss_of_consciousness").value, Value(false));
    for (const auto& [k, v] : ev.values) EXPECT_EQ(v.provenance, Provenance::Extracted);
    EXPECT_EQ(ev.missing.size(), def.variables.size() - 3);
    EXPECT_EQ(ev.missing.front(), "age_under_2");
    EXPECT_TRUE(ev.warnings.empty());
}

TEST(Parse, DecorationsCaseAndRepeats) {
    const auto def = test::bundled("nexus_cspine");
    const auto ev = parse_extraction(
        "Here you go:\n- Intoxication: Yes\n* `midline_tenderness`: no\nmidline_tenderness: present\n", def);
    EXPECT_EQ(ev.values.at("intoxication").value, Value(true));
    EXPECT_EQ(ev.values.at("midline_tenderness").value, Value(true));  // last occurrence wins
    EXPECT_EQ(ev.values.size(), 2u);
    // "Here you go" is reported as an unknown name, not fatal.
    EXPECT_EQ(ev.warnings.size(), 1u);
}

TEST(Parse, UncoercibleBecomesMissingWithWarning) {
    const auto def = test::bundled("pecarn_tbi");
    const auto ev = parse_extraction("gcs: fifteen\nvomiting: maybe\nmystery: 3", def);
    EXPECT_TRUE(ev.values.empty());
    EXPECT_EQ(ev.missing.size(), def.variables.size());
    EXPECT_EQ(ev.warnings.size(), 3u);
}

TEST(Parse, TotalOnGarbage) {
    const auto def = test::bundled("pecarn_tbi");
    for (const char* raw : {"", "\n\n\n", ":::", "gcs:", "\x01\x02\xff: yes", "{\"gcs\": 15}"}) {
        ExtractedVariables ev;
        ASSERT_NO_THROW(ev = parse_extraction(raw, def)) << raw;
        EXPECT_EQ(ev.values.size() + ev.missing.size(), def.variables.size());
    }
}

TEST(Parse, EveryVariableExactlyOnce) {
    const auto registry = test::full_registry();
    std::mt19937_64 rng(1);
    const char* answers[] = {"yes", "no", "14", "3.5", "female", "maybe", ""};
    for (int i = 0; i < 500; ++i) {
        const auto& def = registry->definitions()[std::size_t(i) % registry->size()];
        std::string raw;
        for (const auto& v : def.variables)
            if (rng() % 2) raw += v.name + ": " + answers[rng() % 7] + "\n";
        const auto ev = parse_extraction(raw, def);
        for (const auto& v : def.variables) {
            const bool has = ev.values.count(v.name) > 0;
            const bool miss = std::count(ev.missing.begin(), ev.missing.end(), v.name) > 0;
            EXPECT_NE(has, miss) << def.id << "." << v.name;
            if (has) EXPECT_TRUE(type_checks(ev.values.at(v.name).value, v.type));
        }
    }
}

TEST(Impute, FillsNegativeDefaultsAndIsIdempotent) {
    const auto def = test::bundled("pecarn_tbi");
    const auto ev = parse_extraction("vomiting: yes", def);
    const auto once = impute_negative(ev, def);
    EXPECT_TRUE(once.complete());
    EXPECT_EQ(once.values.size(), def.variables.size());
    EXPECT_EQ(once.values.at("vomiting"), (TypedValue{true, Provenance::Extracted}));
    EXPECT_EQ(once.values.at("gcs"), (TypedValue{std::int64_t{15}, Provenance::Imputed}));
    EXPECT_EQ(once.values.at("scalp_hematoma"), (TypedValue{false, Provenance::Imputed}));
    EXPECT_EQ(impute_negative(once, def), once);
}

TEST(Exclusions, AdultExcludedFromPecarn) {
    const auto def = test::bundled("pecarn_tbi");
    const auto ev = impute_negative(parse_extraction("", def), def);
    NoteMeta adult;
    adult.patient_age_years = 25;
    const auto v = apply_exclusions(ev, adult, def);
    EXPECT_TRUE(v.excluded);
    ASSERT_EQ(v.reasons.size(), 1u);
    EXPECT_NE(v.reasons[0].find("adult"), std::string::npos);

    NoteMeta child;
    child.patient_age_years = 7;
    EXPECT_FALSE(apply_exclusions(ev, child, def).excluded);
    EXPECT_FALSE(apply_exclusions(ev, NoteMeta{}, def).excluded);  // unknown age does not fire
}

TEST(Exclusions, LowGcsUsesExtractedValue) {
    const auto def = test::bundled("pecarn_tbi");
    NoteMeta child;
    child.patient_age_years = 7;
    const auto v = apply_exclusions(parse_extraction("gcs: 12", def), child, def);
    EXPECT_TRUE(v.excluded);
    EXPECT_EQ(v.reasons.size(), 1u);
    EXPECT_FALSE(apply_exclusions(parse_extraction("gcs: 14", def), child, def).excluded);
    // Missing GCS never triggers the exclusion.
    EXPECT_FALSE(apply_exclusions(parse_extraction("", def), child, def).excluded);
}

TEST(Exclusions, NexusHasNone) {
    const auto def = test::bundled("nexus_cspine");
    NoteMeta m;
    m.patient_age_years = 90;
    EXPECT_EQ(apply_exclusions(parse_extraction("", def), m, def), (ExclusionVerdict{"nexus_cspine", false, {}}));
}

TEST(Extract, WithFixtureResponse) {
    const auto def = test::bundled("pecarn_tbi");
    MockLlmProvider llm;
    llm.add_response(kTbiNote, "pecarn_tbi", "gcs: 15\nvomiting: yes\nloss_of_consciousness: no\nage_under_2: no");
    const auto r = extract(kTbiNote, def, llm);
    EXPECT_FALSE(r.error);
    EXPECT_EQ(r.attempts, 1);
    EXPECT_EQ(r.variables.values.size(), 4u);
    EXPECT_GE(r.seconds, 0.0);
    const auto full = impute_negative(r.variables, def);
    EXPECT_EQ(execute_rule(def, assignment_of(full)).label, "observation versus CT");
}

TEST(Extract, RetriesRetryableThenSucceeds) {
    const auto def = test::bundled("nexus_cspine");
    test::ScriptedLlm llm;
    llm.script = [&](const LlmRequest& r) -> std::string {
        EXPECT_EQ(r.temperature, 0.0);
        if (llm.calls == 1) throw ProviderError("503", true);
        return "intoxication: yes";
    };
    const auto r = extract("drunk", def, llm, {2, std::chrono::milliseconds(1)});
    EXPECT_FALSE(r.error);
    EXPECT_EQ(r.attempts, 2);
    EXPECT_EQ(r.variables.values.at("intoxication").value, Value(true));
}

TEST(Extract, NonRetryableFailsFast) {
    const auto def = test::bundled("nexus_cspine");
    test::ScriptedLlm llm;
    llm.script = [](const LlmRequest&) -> std::string { throw ProviderError("HTTP 400", false); };
    const auto r = extract("note", def, llm, {3, std::chrono::milliseconds(1)});
    ASSERT_TRUE(r.error);
    EXPECT_EQ(llm.calls, 1);
    EXPECT_TRUE(r.variables.values.empty());
    EXPECT_EQ(r.variables.missing.size(), def.variables.size());
}

TEST(Extract, RetryableExhaustsAttempts) {
    const auto def = test::bundled("nexus_cspine");
    test::ScriptedLlm llm;
    llm.script = [](const LlmRequest&) -> std::string { throw ProviderError("timeout", true); };
    const auto r = extract("note", def, llm, {3, std::chrono::milliseconds(1)});
    ASSERT_TRUE(r.error);
    EXPECT_EQ(llm.calls, 3);
    EXPECT_EQ(r.attempts, 3);
}

TEST(MockLlm, KeywordFallbackReadsNegation) {
    const auto def = test::bundled("pecarn_tbi");
    MockLlmProvider llm;
    const auto prompt = build_prompt(
        "Child fell. No scalp hematoma. Vomiting twice. GCS of 14. Denies severe headache. Not acting normally.",
        def);
    const auto ev = parse_extraction(llm.complete({prompt.system_text, prompt.rendered_text, 0}), def);
    EXPECT_EQ(ev.values.at("scalp_hematoma").value, Value(false));
    EXPECT_EQ(ev.values.at("vomiting").value, Value(true));
    EXPECT_EQ(ev.values.at("gcs").value, Value(std::int64_t{14}));
    EXPECT_EQ(ev.values.at("severe_headache").value, Value(false));
    EXPECT_FALSE(ev.values.count("loss_of_consciousness"));
}

TEST(MockLlm, NegationStopsAtSentenceBoundary) {
    const auto def = test::bundled("pecarn_tbi");
    MockLlmProvider llm;
    const auto prompt = build_prompt("No fever. Vomiting today.", def);
    const auto ev = parse_extraction(llm.complete({prompt.system_text, prompt.rendered_text, 0}), def);
    EXPECT_EQ(ev.values.at("vomiting").value, Value(true));
}

TEST(MockLlm, FixtureFileLoads) {
    const auto llm = MockLlmProvider::from_fixture_file(test::fixtures() / "mini" / "llm_fixture.json");
    EXPECT_GT(llm.fixture_size(), 10u);
    EXPECT_THROW(MockLlmProvider::from_fixture_file(test::fixtures() / "nope.json"), std::runtime_error);
}
