#pragma once

#include <string>

#include "carb/core.hpp"
#include "carb/gateway.hpp"
#include "carb/judge.hpp"

namespace carb::rewards {

struct RewardConfig {
    double appr_weight = 1.0;  // lambda
    double appr_clip = 2.0;    // c
    bool treat_parse_failure_as_wrong = true;

    void validate() const;
};

struct RewardBreakdown {
    double r_corr = 0.0;  // in {-1, +1}
    double r_appr = 0.0;
    double combined = 0.0;  // r_corr + lambda * clip(r_appr, -c, +c)
    bool appr_clipped = false;
};

// +1 iff the trace parses and its verdict equals the ground truth; -1
// otherwise.
double reward_correctness(const judge::JudgmentTrace& trace, char ground_truth,
                          const RewardConfig& config = {});

// The conditioning context shared by rollout generation and reward scoring.
std::string rollout_context(const std::string& q, const std::string& y1, const std::string& y2);

// Per-token log-probability improvement the generated reasoning grants the
// ground-truth verdict: the verdict tokens are scored once conditioned on
// the trace's reasoning (with the ground truth substituted into the answer
// tag) and once conditioned on the bare answer scaffold, and the mean
// per-token difference is returned. Throws NoAnswerSpan when the trace has
// no answer tag to substitute into.
double reward_appropriateness(Gateway& gateway, const std::string& q, const std::string& y1,
                              const std::string& y2, const judge::JudgmentTrace& trace,
                              char ground_truth);

// Combined reward. With appr_weight == 0 the gateway is never consulted and
// the result reduces exactly to reward_correctness. A trace with no answer
// span contributes r_appr = 0.
RewardBreakdown reward_total(Gateway* gateway, const PreferenceExample& example,
                             const judge::JudgmentTrace& trace, const RewardConfig& config);

}  // namespace carb::rewards
