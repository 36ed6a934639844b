#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "carb/gateway.hpp"
#include "carb/grpo.hpp"

namespace carb::grpo {

// A tiny trainable judge for desk-scale verification of the full training
// loop. Prompts carry a "marker:0" / "marker:1" tag that deterministically
// decides the ground-truth verdict; the policy holds a 2x2 verdict logit
// table keyed on the marker plus a 2-way scaffold-style choice (a detailed
// rubric scaffold vs. a terse one). Both choices are sampled categorically,
// so log-probs, gradients, and per-decision entropies are exact.
class ToyJudgePolicy : public TrainablePolicy {
public:
    explicit ToyJudgePolicy(std::uint64_t seed = 0);

    std::vector<SampledTrace> sample(const PreferenceExample& example, int n,
                                     std::uint64_t seed) override;
    double logp_current(const PreferenceExample& example, const SampledTrace& t) const override;
    double logp_old(const PreferenceExample& example, const SampledTrace& t) const override;
    double logp_reference(const PreferenceExample& example, const SampledTrace& t) const override;
    std::vector<double> grad_logp_current(const PreferenceExample& example,
                                          const SampledTrace& t) const override;
    std::size_t param_count() const override { return 6; }
    void apply_ascent(const std::vector<double>& gradient, double lr) override;
    void snapshot_old() override;
    void freeze_reference() override;

    // Judgment accuracy under greedy decoding, averaged over both markers.
    double greedy_accuracy() const;

    static int marker_of(const PreferenceExample& example);
    static const char* scaffold_text(int variant);  // 0 = detailed, 1 = terse

private:
    struct Params {
        // [marker][verdict] logits followed by [scaffold variant] logits.
        std::array<std::array<double, 2>, 2> verdict{};
        std::array<double, 2> scaffold{};
    };

    static std::array<double, 2> softmax2(const std::array<double, 2>& logits);
    double logp_under(const Params& p, const PreferenceExample& example,
                      const SampledTrace& t) const;

    Params current_;
    Params old_;
    Params reference_;
};

// Synthetic preference examples whose ground truth follows the prompt
// marker: marker 0 -> 'A', marker 1 -> 'B'.
std::vector<PreferenceExample> make_toy_dataset(int n, std::uint64_t seed);

// Backend whose forced log-probs reward reasoning that includes a justified
// rubric: the verdict token scores -0.2 per token after a detailed scaffold,
// -0.7 after a terse one, and -1.0 with no reasoning at all.
class ToyRewardBackend : public Backend {
public:
    BackendKind kind() const override { return BackendKind::Generative; }
    double score_scalar(const std::string&, const std::string&) override;
    std::vector<ScoredSequence> generate(const std::string&, const SamplingParams&, int) override;
    ScoredSequence forced_logprob(const std::string& context, const std::string& target) override;
    std::vector<double> embed(const std::string&) override;
};

}  // namespace carb::grpo
