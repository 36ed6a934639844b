#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "carb/core.hpp"
#include "carb/judge.hpp"
#include "carb/rewards.hpp"

namespace carb::grpo {

struct GRPOConfig {
    int group_size = 8;
    double clip_ratio = 0.2;   // epsilon
    double kl_coeff = 0.05;    // beta
    double adv_eps = 1e-4;     // eta
    double lr = 5e-7;
    int steps = 100;
    int batch_size = 4;
    std::uint64_t seed = 0;
    // Retained for config compatibility; GRPO uses group-relative
    // advantages, so this value is never read.
    double gae_lambda = 0.95;

    void validate() const;
};

struct GroupStats {
    std::vector<double> advantages;
    double mu = 0.0;
    double sigma = 0.0;  // population standard deviation
};

// advantages[i] = (rewards[i] - mu) / (sigma + eta). Requires >= 2 rewards.
GroupStats compute_advantages(const std::vector<double>& rewards, double eta);

// k3 estimator: ratio - log(ratio) - 1 with ratio = exp(logp_ref - logp_cur).
// Non-negative, zero iff the log-probs match.
double kl_penalty(double logp_ref, double logp_cur);

// Mean over the group of min(rho*A, clip(rho, 1-eps, 1+eps)*A) - beta*KL,
// with per-trace sequence-level ratios rho = exp(logp_cur - logp_old).
// Maximization sense.
double surrogate_objective(const std::vector<double>& logp_cur,
                           const std::vector<double>& logp_old,
                           const std::vector<double>& logp_ref,
                           const std::vector<double>& advantages, double eps, double beta);

// Mean per-token Shannon entropy in nats over explicit probability vectors.
double policy_entropy(const std::vector<std::vector<double>>& distributions);

struct EntropyEstimate {
    double nats_per_token = 0.0;
    bool approximate = false;  // top-k truncation makes this a lower bound
};

// Lower-bound estimate from top-k token log-probs (endpoint backends).
EntropyEstimate policy_entropy_topk(const std::vector<std::vector<double>>& topk_logprobs);

struct TrainTelemetry {
    int step = 0;
    double mean_reward = 0.0;
    double mean_accuracy = 0.0;
    double mean_response_length = 0.0;  // tokens
    double mean_entropy = 0.0;          // nats per decision token
};

void write_telemetry_csv(const std::string& path, const std::vector<TrainTelemetry>& rows);

// One sampled rollout from a trainable policy.
struct SampledTrace {
    judge::JudgmentTrace trace;
    double logp = 0.0;  // under the (old) policy that sampled it
    int response_length = 0;
    // Probability vectors at the policy's decision points, for entropy.
    std::vector<std::vector<double>> decision_dists;
    // Policy-internal state needed to re-evaluate log-probs later.
    std::vector<int> decisions;
};

// The policy-side contract for the training loop: sampling, log-prob
// re-evaluation under current/old/reference parameters, and a parameter
// ascent step from an accumulated gradient.
class TrainablePolicy {
public:
    virtual ~TrainablePolicy() = default;
    virtual std::vector<SampledTrace> sample(const PreferenceExample& example, int n,
                                             std::uint64_t seed) = 0;
    virtual double logp_current(const PreferenceExample& example,
                                const SampledTrace& trace) const = 0;
    virtual double logp_old(const PreferenceExample& example,
                            const SampledTrace& trace) const = 0;
    virtual double logp_reference(const PreferenceExample& example,
                                  const SampledTrace& trace) const = 0;
    virtual std::vector<double> grad_logp_current(const PreferenceExample& example,
                                                  const SampledTrace& trace) const = 0;
    virtual std::size_t param_count() const = 0;
    virtual void apply_ascent(const std::vector<double>& gradient, double lr) = 0;
    virtual void snapshot_old() = 0;
    virtual void freeze_reference() = 0;
};

using RewardFn = std::function<rewards::RewardBreakdown(const PreferenceExample& example,
                                                        const judge::JudgmentTrace& trace)>;

// Rollout -> reward -> advantage -> ascent loop. The reference policy is
// frozen at entry; the old-policy snapshot refreshes once per outer batch.
// A RewardFailure skips the offending example (logged in telemetry via the
// smaller effective batch); a non-finite objective aborts with
// DivergenceDetected.
std::vector<TrainTelemetry> train(TrainablePolicy& policy,
                                  const std::vector<PreferenceExample>& data,
                                  const RewardFn& reward_fn, const GRPOConfig& config);

}  // namespace carb::grpo
