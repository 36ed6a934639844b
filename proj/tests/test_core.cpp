#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "carb/core.hpp"
#include "carb/rng.hpp"

using namespace carb;

namespace {

// A benchmark record in the shipped file schema (1 chosen, 3 rejected).
const char* kAtlasRecord = R"({
  "id": "cultural_atlas_66",
  "language": "Chinese",
  "country": "Chinese",
  "prompt": "Which of these claims about etiquette are true?",
  "chosen": ["Tipping is often read as condescending."],
  "chosen_model": ["human_to_GPT-4_translation"],
  "rejected": ["Tipping is a common courtesy.", "Guests always receive parting gifts.", "Generous tipping shows respect."],
  "rejected_model": ["model-a", "model-b", "model-c"],
  "num_correct": 1,
  "num_rejected": 3,
  "total_completions": 4,
  "source": "cultural_atlas",
  "subset": "cultural_commonsense",
  "additional_metadata": {"culture": "Chinese", "category": "etiquette"}
})";

std::string temp_path(const std::string& name) {
    return std::string("core_test_") + name + ".jsonl";
}

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = temp_path(name);
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_bon_sets parses a 4-way record") {
    nlohmann::json rec = nlohmann::json::parse(kAtlasRecord);
    std::string path = write_temp("atlas", "[" + rec.dump() + "]");
    auto sets = load_bon_sets(path, true);
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].id == "cultural_atlas_66");
    CHECK(sets[0].total_completions == 4);
    CHECK(sets[0].num_correct == 1);
    CHECK(sets[0].domain() == DomainLabel::Commonsense);
    CHECK(sets[0].candidates().size() == 4);
    CHECK(sets[0].index_is_chosen(0));
    CHECK_FALSE(sets[0].index_is_chosen(1));
    std::remove(path.c_str());
}

TEST_CASE("empty chosen and rejected fails validation") {
    nlohmann::json rec = nlohmann::json::parse(kAtlasRecord);
    rec["chosen"] = nlohmann::json::array();
    rec["rejected"] = nlohmann::json::array();
    std::string path = write_temp("empty", rec.dump());
    CHECK_THROWS_AS(load_bon_sets(path, true), CountMismatch);

    LoadReport report;
    auto sets = load_bon_sets(path, false, &report);
    CHECK(sets.empty());
    CHECK(report.skipped == 1);
    std::remove(path.c_str());
}

TEST_CASE("count mismatch is rejected") {
    nlohmann::json rec = nlohmann::json::parse(kAtlasRecord);
    rec["num_correct"] = 2;
    std::string path = write_temp("mismatch", rec.dump());
    CHECK_THROWS_AS(load_bon_sets(path, true), CountMismatch);
    std::remove(path.c_str());
}

TEST_CASE("missing field raises MalformedRecord") {
    nlohmann::json rec = nlohmann::json::parse(kAtlasRecord);
    rec.erase("prompt");
    std::string path = write_temp("nofield", rec.dump());
    CHECK_THROWS_AS(load_bon_sets(path, true), MalformedRecord);
    std::remove(path.c_str());
}

TEST_CASE("json-lines and array inputs load identically; 992 records load as 992 sets") {
    nlohmann::json rec = nlohmann::json::parse(kAtlasRecord);
    std::ostringstream lines;
    nlohmann::json array = nlohmann::json::array();
    for (int i = 0; i < 992; ++i) {
        rec["id"] = "item_" + std::to_string(i);
        rec["language"] = "English";
        lines << rec.dump() << "\n";
        array.push_back(rec);
    }
    std::string jsonl = write_temp("lines", lines.str());
    std::string arr = write_temp("array", array.dump());
    auto a = load_bon_sets(jsonl, true);
    auto b = load_bon_sets(arr, true);
    REQUIRE(a.size() == 992);
    REQUIRE(b.size() == 992);
    CHECK(a[991].id == b[991].id);
    std::remove(jsonl.c_str());
    std::remove(arr.c_str());
}

TEST_CASE("round-trip load -> save -> load preserves every field") {
    nlohmann::json rec = nlohmann::json::parse(kAtlasRecord);
    std::string path = write_temp("rt_in", rec.dump());
    auto sets = load_bon_sets(path, true);
    std::string out = temp_path("rt_out");
    save_bon_sets(out, sets);
    auto again = load_bon_sets(out, true);
    REQUIRE(again.size() == 1);
    CHECK(again[0].id == sets[0].id);
    CHECK(again[0].language == sets[0].language);
    CHECK(again[0].country == sets[0].country);
    CHECK(again[0].prompt == sets[0].prompt);
    CHECK(again[0].chosen == sets[0].chosen);
    CHECK(again[0].chosen_model == sets[0].chosen_model);
    CHECK(again[0].rejected == sets[0].rejected);
    CHECK(again[0].rejected_model == sets[0].rejected_model);
    CHECK(again[0].num_correct == sets[0].num_correct);
    CHECK(again[0].source == sets[0].source);
    CHECK(again[0].subset == sets[0].subset);
    CHECK(again[0].additional_metadata == sets[0].additional_metadata);
    std::remove(path.c_str());
    std::remove(out.c_str());
}

TEST_CASE("subset labels map onto the four domains") {
    CHECK(domain_from_subset("cultural_commonsense") == DomainLabel::Commonsense);
    CHECK(domain_from_subset("cultural_value") == DomainLabel::Value);
    CHECK(domain_from_subset("cultural_toxicity") == DomainLabel::Safety);
    CHECK(domain_from_subset("cultural_linguistic") == DomainLabel::Linguistic);
    CHECK(domain_from_subset("cultural_linguistic_translation") == DomainLabel::Linguistic);
    CHECK(domain_from_subset("something_else") == DomainLabel::Unknown);
}

TEST_CASE("weighted_accuracy pools counts across domains") {
    // Oracle: summed correct over summed totals, recomputed inline.
    std::map<DomainLabel, std::pair<int, int>> counts{
        {DomainLabel::Commonsense, {166, 208}},
        {DomainLabel::Value, {96, 192}},
        {DomainLabel::Linguistic, {140, 200}},
        {DomainLabel::Safety, {180, 200}},
    };
    double expected = (166.0 + 96.0 + 140.0 + 180.0) / (208.0 + 192.0 + 200.0 + 200.0);
    CHECK(weighted_accuracy(counts) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(weighted_accuracy(counts) == doctest::Approx(0.7275).epsilon(1e-12));
}

TEST_CASE("weighted_accuracy trivial cases") {
    CHECK(weighted_accuracy({{DomainLabel::Value, {200, 200}},
                             {DomainLabel::Safety, {100, 100}}}) == doctest::Approx(1.0));
    CHECK(weighted_accuracy({{DomainLabel::Value, {50, 200}}}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(weighted_accuracy({}), EmptyInput);
    CHECK_THROWS_AS(weighted_accuracy({{DomainLabel::Value, {0, 0}}}), ZeroTotal);
}

TEST_CASE("weighted_accuracy properties: split invariance and bounds") {
    SplitMix rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        int c1 = static_cast<int>(rng.next_below(100));
        int t1 = c1 + static_cast<int>(rng.next_below(100)) + 1;
        int c2 = static_cast<int>(rng.next_below(100));
        int t2 = c2 + static_cast<int>(rng.next_below(100)) + 1;
        double merged = weighted_accuracy({{DomainLabel::Value, {c1 + c2, t1 + t2}},
                                           {DomainLabel::Safety, {10, 20}}});
        double split = weighted_accuracy({{DomainLabel::Value, {c1, t1}},
                                          {DomainLabel::Commonsense, {c2, t2}},
                                          {DomainLabel::Safety, {10, 20}}});
        CHECK(merged == doctest::Approx(split).epsilon(1e-12));

        double lo = 1.0, hi = 0.0;
        for (auto [c, t] : {std::pair{c1, t1}, {c2, t2}, {10, 20}}) {
            lo = std::min(lo, double(c) / t);
            hi = std::max(hi, double(c) / t);
        }
        CHECK(split >= lo - 1e-12);
        CHECK(split <= hi + 1e-12);
    }
}

TEST_CASE("preference examples validate and round-trip") {
    PreferenceExample e{"q", "a", "b", 'A', std::nullopt, std::nullopt};
    e.validate();
    e.j = 'C';
    CHECK_THROWS_AS(e.validate(), MalformedRecord);

    std::string path = temp_path("pref");
    save_preference_examples(path, {{"prompt", "resp1", "resp2", 'B', "Thai", "Thai"}});
    auto loaded = load_preference_examples(path, true);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].j == 'B');
    CHECK(loaded[0].culture == "Thai");
    std::remove(path.c_str());
}
