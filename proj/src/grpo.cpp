#include "carb/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "carb/rng.hpp"

namespace carb::grpo {

void GRPOConfig::validate() const {
    if (group_size < 2) throw ConfigError("group_size must be >= 2");
    if (clip_ratio <= 0 || clip_ratio >= 1) throw ConfigError("clip_ratio must be in (0,1)");
    if (kl_coeff < 0) throw ConfigError("kl_coeff must be >= 0");
    if (adv_eps <= 0) throw ConfigError("adv_eps must be > 0");
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

GroupStats compute_advantages(const std::vector<double>& rewards, double eta) {
    if (rewards.size() < 2)
        throw GroupTooSmall("advantage normalization needs a group of >= 2, got " +
                            std::to_string(rewards.size()));
    if (eta <= 0) throw ConfigError("eta must be > 0");

    GroupStats stats;
    double n = static_cast<double>(rewards.size());
    stats.mu = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : rewards) ss += (r - stats.mu) * (r - stats.mu);
    stats.sigma = std::sqrt(ss / n);  // population form
    stats.advantages.reserve(rewards.size());
    for (double r : rewards) stats.advantages.push_back((r - stats.mu) / (stats.sigma + eta));
    return stats;
}

double kl_penalty(double logp_ref, double logp_cur) {
    if (!std::isfinite(logp_ref) || !std::isfinite(logp_cur))
        throw NonFinite("kl_penalty: non-finite log-prob");
    double log_ratio = logp_ref - logp_cur;
    return std::exp(log_ratio) - log_ratio - 1.0;
}

double surrogate_objective(const std::vector<double>& logp_cur,
                           const std::vector<double>& logp_old,
                           const std::vector<double>& logp_ref,
                           const std::vector<double>& advantages, double eps, double beta) {
    size_t n = logp_cur.size();
    if (logp_old.size() != n || logp_ref.size() != n || advantages.size() != n)
        throw LengthMismatch("surrogate_objective: misaligned inputs");
    if (n == 0) throw LengthMismatch("surrogate_objective: empty group");

    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double rho = std::exp(logp_cur[i] - logp_old[i]);
        double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps);
        double policy_term = std::min(rho * advantages[i], clipped * advantages[i]);
        double kl = beta != 0.0 ? kl_penalty(logp_ref[i], logp_cur[i]) : 0.0;
        sum += policy_term - beta * kl;
    }
    double value = sum / static_cast<double>(n);
    if (!std::isfinite(value)) throw NonFinite("surrogate_objective: non-finite value");
    return value;
}

double policy_entropy(const std::vector<std::vector<double>>& distributions) {
    if (distributions.empty()) throw LogprobsUnsupported("no distributions provided");
    double sum = 0.0;
    for (const auto& dist : distributions) {
        double h = 0.0;
        for (double p : dist)
            if (p > 0) h -= p * std::log(p);
        sum += h;
    }
    return sum / static_cast<double>(distributions.size());
}

EntropyEstimate policy_entropy_topk(const std::vector<std::vector<double>>& topk_logprobs) {
    if (topk_logprobs.empty()) throw LogprobsUnsupported("no top-k log-probs provided");
    double sum = 0.0;
    for (const auto& logps : topk_logprobs) {
        double h = 0.0;
        for (double lp : logps) h -= std::exp(lp) * lp;
        sum += h;
    }
    return {sum / static_cast<double>(topk_logprobs.size()), true};
}

void write_telemetry_csv(const std::string& path, const std::vector<TrainTelemetry>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "step,mean_reward,mean_accuracy,mean_response_length,mean_entropy\n";
    for (const auto& r : rows)
        out << r.step << ',' << r.mean_reward << ',' << r.mean_accuracy << ','
            << r.mean_response_length << ',' << r.mean_entropy << '\n';
}

std::vector<TrainTelemetry> train(TrainablePolicy& policy,
                                  const std::vector<PreferenceExample>& data,
                                  const RewardFn& reward_fn, const GRPOConfig& config) {
    config.validate();
    if (data.empty()) throw EmptyInput("train: no preference examples");

    policy.freeze_reference();
    SplitMix rng(config.seed ^ 0x747261696eULL);

    std::vector<TrainTelemetry> telemetry;
    telemetry.reserve(config.steps);

    for (int step = 0; step < config.steps; ++step) {
        // One outer batch per step; the old policy is the pre-update snapshot.
        policy.snapshot_old();

        std::vector<double> grad(policy.param_count(), 0.0);
        double sum_reward = 0, sum_correct = 0, sum_length = 0, sum_entropy = 0;
        int trace_count = 0;
        int decision_count = 0;
        int skipped = 0;

        std::vector<double> obj_cur, obj_old, obj_ref, obj_adv;

        for (int b = 0; b < config.batch_size; ++b) {
            const PreferenceExample& example = data[rng.next_below(data.size())];
            std::uint64_t sample_seed = rng.next();

            std::vector<SampledTrace> group;
            std::vector<double> rewards;
            try {
                group = policy.sample(example, config.group_size, sample_seed);
                for (const auto& sampled : group)
                    rewards.push_back(reward_fn(example, sampled.trace).combined);
            } catch (const RewardFailure& e) {
                ++skipped;
                std::cerr << "grpo: skipping example after reward failure: " << e.what() << "\n";
                continue;
            }

            GroupStats stats = compute_advantages(rewards, config.adv_eps);

            for (size_t i = 0; i < group.size(); ++i) {
                const SampledTrace& sampled = group[i];
                double lc = policy.logp_current(example, sampled);
                double lo = policy.logp_old(example, sampled);
                double lref = policy.logp_reference(example, sampled);
                double a = stats.advantages[i];

                obj_cur.push_back(lc);
                obj_old.push_back(lo);
                obj_ref.push_back(lref);
                obj_adv.push_back(a);

                // d/d(logp_cur) of the clipped surrogate: rho*A when the
                // unclipped branch is active, 0 when the clip binds.
                double rho = std::exp(lc - lo);
                double clipped = std::clamp(rho, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio);
                double coeff = (rho * a <= clipped * a) ? rho * a : 0.0;
                // d/d(logp_cur) of -beta*KL with KL = r - log r - 1,
                // r = exp(lref - lc): equals -beta*(1 - r).
                double ratio_ref = std::exp(lref - lc);
                coeff -= config.kl_coeff * (1.0 - ratio_ref);

                std::vector<double> g = policy.grad_logp_current(example, sampled);
                for (size_t k = 0; k < grad.size(); ++k) grad[k] += coeff * g[k];

                sum_reward += rewards[i];
                sum_length += sampled.response_length;
                for (const auto& dist : sampled.decision_dists) {
                    double h = 0;
                    for (double p : dist)
                        if (p > 0) h -= p * std::log(p);
                    sum_entropy += h;
                    decision_count++;
                }
                // Accuracy tracks the correctness term only.
                const auto& t = sampled.trace;
                if (t.parse_ok && t.verdict && *t.verdict == example.j) sum_correct += 1.0;
                trace_count++;
            }
        }

        if (trace_count == 0) {
            if (skipped > 0) continue;
            throw EmptyInput("train: empty batch");
        }

        double objective = surrogate_objective(obj_cur, obj_old, obj_ref, obj_adv,
                                               config.clip_ratio, config.kl_coeff);
        if (!std::isfinite(objective)) throw DivergenceDetected("non-finite objective");

        for (auto& g : grad) g /= static_cast<double>(trace_count);
        policy.apply_ascent(grad, config.lr);

        TrainTelemetry row;
        row.step = step;
        row.mean_reward = sum_reward / trace_count;
        row.mean_accuracy = sum_correct / trace_count;
        row.mean_response_length = sum_length / trace_count;
        row.mean_entropy = sum_entropy / std::max(1, decision_count);
        telemetry.push_back(row);
    }
    return telemetry;
}

}  // namespace carb::grpo
