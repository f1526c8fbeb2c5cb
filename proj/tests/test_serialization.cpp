#include <gtest/gtest.h>

#include "cdr/serialization.hpp"
#include "support.hpp"

using namespace cdr;
using nlohmann::json;

TEST(Serialization, SelectionConfigPartialKeys) {
    const auto c = selection_config_from_json({{"alpha", 0.1}});
    EXPECT_EQ(c.alpha, 0.1);
    EXPECT_EQ(c.num_truncations, SelectionConfig{}.num_truncations);
    EXPECT_EQ(selection_config_from_json(to_json(c)), c);
    EXPECT_THROW(selection_config_from_json({{"beta", 1}}), std::invalid_argument);
    EXPECT_THROW(selection_config_from_json(json::array()), std::invalid_argument);
}

TEST(Serialization, ExtractionAndVerdictRoundTrip) {
    ExtractedVariables ev;
    ev.cdr_id = "pecarn_tbi";
    ev.values["gcs"] = {std::int64_t{14}, Provenance::UserSupplied};
    ev.values["vomiting"] = {true, Provenance::Imputed};
    ev.values["weight"] = {12.5, Provenance::Extracted};
    ev.missing = {"severe_headache"};
    ev.warnings = {"line 2: unknown variable 'x' ignored"};
    EXPECT_EQ(extracted_from_json(json::parse(to_json(ev).dump())), ev);
    // Integer and float spellings survive the trip.
    EXPECT_TRUE(to_json(ev)["values"]["gcs"]["value"].is_number_integer());
    EXPECT_TRUE(to_json(ev)["values"]["weight"]["value"].is_number_float());

    const ExclusionVerdict v{"pecarn_tbi", true, {"adult"}};
    EXPECT_EQ(verdict_from_json(to_json(v)), v);
}

TEST(Serialization, ReportRoundTripAllKinds) {
    ExecutionReport r;
    r.per_cdr.push_back({"a", ResultKind::Outcome, Outcome{"a", "treat", true}, {}, "", "", {}});
    r.per_cdr.push_back({"b", ResultKind::Excluded, std::nullopt, {"adult"}, "", "", {}});
    r.per_cdr.push_back({"c", ResultKind::Error, std::nullopt, {}, "type mismatch", "$.rule.if", {}});
    r.per_cdr.push_back({"d", ResultKind::Pending, std::nullopt, {}, "", "", {"gcs"}});
    r.durations = {{"selection", 0.5}, {"execution", 0.25}};
    EXPECT_EQ(report_from_json(json::parse(to_json(r).dump())), r);
    EXPECT_EQ(r.find("c")->error_path, "$.rule.if");
    EXPECT_EQ(r.find("zzz"), nullptr);
}

TEST(Serialization, StripVolatileIsRecursive) {
    const json j = {{"session_id", "abc"},
                    {"timings", {{"t_tot", 1}}},
                    {"report", {{"durations", {{"selection", 1}}}, {"per_cdr", json::array()}}},
                    {"per_note", {{{"note_id", "n"}, {"seconds", 2}, {"ok", true}}}}};
    const json expected = {{"report", {{"per_cdr", json::array()}}}, {"per_note", {{{"note_id", "n"}, {"ok", true}}}}};
    EXPECT_EQ(strip_volatile(j), expected);
}

TEST(Serialization, SessionRejectsUnknownStatus) {
    AnalysisSession s;
    s.session_id = "ab";
    s.note = "n";
    json j = to_json(s);
    EXPECT_EQ(session_from_json(j), s);
    j["status"] = "sleeping";
    EXPECT_ANY_THROW(session_from_json(j));
}
