#include "carb/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace carb::rewards {

void RewardConfig::validate() const {
    if (appr_weight < 0) throw ConfigError("appr_weight must be >= 0");
    if (appr_clip <= 0) throw ConfigError("appr_clip must be > 0");
}

double reward_correctness(const judge::JudgmentTrace& trace, char ground_truth,
                          const RewardConfig& config) {
    if (!trace.parse_ok || !trace.verdict) {
        // Unparseable output cannot match the ground truth.
        (void)config;
        return -1.0;
    }
    return *trace.verdict == ground_truth ? +1.0 : -1.0;
}

std::string rollout_context(const std::string& q, const std::string& y1, const std::string& y2) {
    PreferenceExample e;
    e.q = q;
    e.y1 = y1;
    e.y2 = y2;
    auto bundle = judge::build_rollout_prompt(e);
    return bundle.system_prompt + "\n\n" + bundle.user_prompt;
}

double reward_appropriateness(Gateway& gateway, const std::string& q, const std::string& y1,
                              const std::string& y2, const judge::JudgmentTrace& trace,
                              char ground_truth) {
    // Everything up to and including the last "<answer>" is the reasoning
    // prefix; edits after the answer span never enter the score.
    size_t pos = trace.raw_text.rfind("<answer>");
    if (pos == std::string::npos)
        throw NoAnswerSpan("trace has no <answer> tag to substitute into");
    std::string reasoning_prefix = trace.raw_text.substr(0, pos + 8);

    std::string context = rollout_context(q, y1, y2);
    std::string target = std::string("[[") + ground_truth + "]]";

    ScoredSequence conditioned =
        gateway.forced_logprob(context + "\n" + reasoning_prefix, target);
    ScoredSequence baseline = gateway.forced_logprob(context + "\n<answer>", target);
    if (conditioned.tokens.empty()) return 0.0;
    double n = static_cast<double>(conditioned.tokens.size());
    return (conditioned.total_logprob - baseline.total_logprob) / n;
}

RewardBreakdown reward_total(Gateway* gateway, const PreferenceExample& example,
                             const judge::JudgmentTrace& trace, const RewardConfig& config) {
    config.validate();
    RewardBreakdown out;
    out.r_corr = reward_correctness(trace, example.j, config);

    if (config.appr_weight > 0.0 && gateway != nullptr) {
        try {
            out.r_appr =
                reward_appropriateness(*gateway, example.q, example.y1, example.y2, trace,
                                       example.j);
        } catch (const NoAnswerSpan&) {
            out.r_appr = 0.0;
        }
    }

    double clipped = std::clamp(out.r_appr, -config.appr_clip, config.appr_clip);
    out.appr_clipped = clipped != out.r_appr;
    out.combined = out.r_corr + config.appr_weight * clipped;
    return out;
}

}  // namespace carb::rewards
