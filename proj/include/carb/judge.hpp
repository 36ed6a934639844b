#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "carb/core.hpp"
#include "carb/gateway.hpp"

namespace carb::judge {

enum class TaskType { Reasoning, Chat };

// One generated judging sequence plus whatever structure could be parsed
// out of it. Total-function parsing: failures are encoded, not thrown.
struct JudgmentTrace {
    std::string raw_text;
    std::optional<ScoredSequence> tokens;
    std::optional<TaskType> task_type;
    std::optional<std::string> rubric_span;
    std::optional<std::string> eval_span;
    std::optional<char> verdict;  // 'A'..'D', from the final answer tag
    bool parse_ok = false;
};

struct PromptBundle {
    std::string system_prompt;
    std::string user_prompt;
    // candidate_order[position] = original candidate index shown at that
    // letter (position 0 = A).
    std::vector<int> candidate_order;
    std::uint64_t seed = 0;
    std::string template_id;

    // Maps a parsed letter back to the original candidate index.
    int original_index(char letter) const;
};

// Shipped template texts.
const std::string& eval_template_4way();     // template id "carb-eval-4way-v1"
const std::string& rollout_system_prompt();  // template id "rlvr-rollout-v1"

// Deterministic Fisher-Yates driven by a splitmix-style stream; stable
// across platforms, unlike std::shuffle.
std::vector<int> seeded_permutation(int n, std::uint64_t seed);

// Builds the N-way judging prompt for a BoN set. Candidates are shuffled by
// a seeded permutation and the letter mapping is recorded in the bundle.
// Arity above 26 throws WrongArity.
PromptBundle build_eval_prompt(const BoNSet& set, std::uint64_t seed);

// Builds the two-chatbot rollout prompt with Chatbot A = y1, Chatbot B = y2.
PromptBundle build_rollout_prompt(const PreferenceExample& example);

struct VerdictResult {
    std::optional<char> verdict;
    enum class Failure { None, NoPattern, ArityViolation } failure = Failure::None;
    bool ok() const { return verdict.has_value(); }
};

// Extracts the letter inside the last [[X]] occurrence, preferring
// occurrences enclosed in <answer> tags when any exist. Letters beyond the
// arity fail with ArityViolation.
VerdictResult parse_verdict(const std::string& raw, int arity);

JudgmentTrace parse_trace(const std::string& raw);

// The canonical rendering of a verdict, e.g. "<answer>[[A]]</answer>".
std::string render_answer(char verdict);

}  // namespace carb::judge
