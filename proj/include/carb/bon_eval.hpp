#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "carb/core.hpp"
#include "carb/gateway.hpp"
#include "carb/judge.hpp"

namespace carb::bon {

enum class Mode { Classifier, Generative };
enum class ParseFailurePolicy { Incorrect, Exclude };

struct ItemVerdict {
    std::string set_id;
    Mode mode = Mode::Classifier;
    int selected_index = -1;  // original candidate index; -1 when unresolved
    bool correct = false;
    bool errored = false;
    bool parse_failed = false;
    bool tie = false;
    std::vector<double> scores;  // classifier mode, original index order
    std::string trace_text;      // generative mode
    std::uint64_t seed = 0;
};

struct EvalOptions {
    // Strict counts errored items as incorrect; lenient drops them from the
    // denominators and reports the effective N.
    bool strict = true;
    ParseFailurePolicy parse_failure = ParseFailurePolicy::Incorrect;
};

// Scores every candidate with score_scalar and selects the argmax, ties
// broken by lowest original index.
std::pair<std::vector<ItemVerdict>, EvaluationResult> evaluate_classifier(
    Gateway& rm, const std::vector<BoNSet>& sets, const EvalOptions& options = {});

// Builds the judge prompt with a per-item derived shuffle seed, samples one
// judgment at temperature 0, and maps the parsed letter back through the
// recorded permutation.
std::pair<std::vector<ItemVerdict>, EvaluationResult> evaluate_generative(
    Gateway& rm, const std::vector<BoNSet>& sets, std::uint64_t seed,
    const EvalOptions& options = {});

struct LeaderboardRow {
    std::string name;
    double average = 0.0;  // mean of per-language scores
    std::map<std::string, double> per_language;
};

// Rows sorted by cross-language average descending, name ascending on ties.
std::vector<LeaderboardRow> leaderboard(const std::map<std::string, EvaluationResult>& results);

struct BestOfNResult {
    int selected_index = -1;
    std::vector<ScoredSequence> candidates;
    std::vector<double> scores;
};

// Test-time scaling helper: generate n candidates, score each with
// the scorer RM, return the argmax with the full scored list for audit.
BestOfNResult best_of_n_select(Gateway& generator, Gateway& scorer, const std::string& prompt,
                               int n, const SamplingParams& params);

nlohmann::json to_json(const ItemVerdict& v);
nlohmann::json to_json(const EvaluationResult& r);
void write_item_verdicts(const std::string& path, const std::vector<ItemVerdict>& items);
std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows);
std::string leaderboard_table(const std::vector<LeaderboardRow>& rows);

}  // namespace carb::bon
