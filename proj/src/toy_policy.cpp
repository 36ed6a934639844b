#include "carb/toy_policy.hpp"

#include <cmath>
#include <sstream>

#include "carb/rng.hpp"

namespace carb::grpo {

namespace {

constexpr const char* kDetailedScaffold =
    "<type>Chat</type>\n"
    "<rubric>1 Cultural fit 50% 2 Accuracy 30% 3 Clarity 20% "
    "<justify>cultural fit dominates because the client asks about local practice</justify>"
    "</rubric>\n"
    "<eval><summary_A>response A summarized</summary_A> "
    "<summary_B>response B summarized</summary_B></eval>\n";

constexpr const char* kTerseScaffold = "<eval>quick comparison</eval>\n";

int count_tokens(const std::string& text) {
    std::istringstream in(text);
    std::string tok;
    int n = 0;
    while (in >> tok) ++n;
    return n;
}

}  // namespace

ToyJudgePolicy::ToyJudgePolicy(std::uint64_t seed) {
    // Start near-uniform with a tiny seeded tilt so accuracy begins at ~0.5.
    SplitMix rng(seed ^ 0x746f79ULL);
    for (auto& row : current_.verdict)
        for (auto& logit : row) logit = 0.01 * (rng.next_unit() - 0.5);
    for (auto& logit : current_.scaffold) logit = 0.01 * (rng.next_unit() - 0.5);
    old_ = current_;
    reference_ = current_;
}

int ToyJudgePolicy::marker_of(const PreferenceExample& example) {
    if (example.q.find("marker:1") != std::string::npos) return 1;
    return 0;
}

const char* ToyJudgePolicy::scaffold_text(int variant) {
    return variant == 0 ? kDetailedScaffold : kTerseScaffold;
}

std::array<double, 2> ToyJudgePolicy::softmax2(const std::array<double, 2>& logits) {
    double m = std::max(logits[0], logits[1]);
    double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

std::vector<SampledTrace> ToyJudgePolicy::sample(const PreferenceExample& example, int n,
                                                 std::uint64_t seed) {
    int marker = marker_of(example);
    auto p_verdict = softmax2(current_.verdict[marker]);
    auto p_scaffold = softmax2(current_.scaffold);

    SplitMix rng(seed);
    std::vector<SampledTrace> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        int s = rng.next_unit() < p_scaffold[0] ? 0 : 1;
        int v = rng.next_unit() < p_verdict[0] ? 0 : 1;
        char letter = v == 0 ? 'A' : 'B';

        SampledTrace t;
        std::string text = std::string(scaffold_text(s)) + judge::render_answer(letter);
        t.trace = judge::parse_trace(text);
        t.decisions = {s, v};
        t.logp = std::log(p_scaffold[s]) + std::log(p_verdict[v]);
        t.decision_dists = {{p_scaffold[0], p_scaffold[1]}, {p_verdict[0], p_verdict[1]}};
        t.response_length = count_tokens(text);
        out.push_back(std::move(t));
    }
    return out;
}

double ToyJudgePolicy::logp_under(const Params& p, const PreferenceExample& example,
                                  const SampledTrace& t) const {
    int marker = marker_of(example);
    auto pv = softmax2(p.verdict[marker]);
    auto ps = softmax2(p.scaffold);
    return std::log(ps[t.decisions[0]]) + std::log(pv[t.decisions[1]]);
}

double ToyJudgePolicy::logp_current(const PreferenceExample& e, const SampledTrace& t) const {
    return logp_under(current_, e, t);
}
double ToyJudgePolicy::logp_old(const PreferenceExample& e, const SampledTrace& t) const {
    return logp_under(old_, e, t);
}
double ToyJudgePolicy::logp_reference(const PreferenceExample& e, const SampledTrace& t) const {
    return logp_under(reference_, e, t);
}

std::vector<double> ToyJudgePolicy::grad_logp_current(const PreferenceExample& example,
                                                      const SampledTrace& t) const {
    // Parameter order: verdict[0][0..1], verdict[1][0..1], scaffold[0..1].
    int marker = marker_of(example);
    auto pv = softmax2(current_.verdict[marker]);
    auto ps = softmax2(current_.scaffold);
    std::vector<double> g(6, 0.0);
    for (int k = 0; k < 2; ++k) {
        g[2 * marker + k] = (k == t.decisions[1] ? 1.0 : 0.0) - pv[k];
        g[4 + k] = (k == t.decisions[0] ? 1.0 : 0.0) - ps[k];
    }
    return g;
}

void ToyJudgePolicy::apply_ascent(const std::vector<double>& gradient, double lr) {
    if (gradient.size() != 6) throw LengthMismatch("toy policy expects 6 gradient entries");
    current_.verdict[0][0] += lr * gradient[0];
    current_.verdict[0][1] += lr * gradient[1];
    current_.verdict[1][0] += lr * gradient[2];
    current_.verdict[1][1] += lr * gradient[3];
    current_.scaffold[0] += lr * gradient[4];
    current_.scaffold[1] += lr * gradient[5];
}

void ToyJudgePolicy::snapshot_old() { old_ = current_; }
void ToyJudgePolicy::freeze_reference() { reference_ = current_; }

double ToyJudgePolicy::greedy_accuracy() const {
    // Marker m's correct verdict index equals m.
    double correct = 0;
    for (int m = 0; m < 2; ++m) {
        auto pv = softmax2(current_.verdict[m]);
        int greedy = pv[0] >= pv[1] ? 0 : 1;
        if (greedy == m) correct += 1.0;
    }
    return correct / 2.0;
}

std::vector<PreferenceExample> make_toy_dataset(int n, std::uint64_t seed) {
    SplitMix rng(seed ^ 0x64617461ULL);
    std::vector<PreferenceExample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        int marker = static_cast<int>(rng.next_below(2));
        PreferenceExample e;
        e.q = "Which greeting suits the situation? marker:" + std::to_string(marker) +
              " case:" + std::to_string(i);
        e.y1 = "A formal bow with both hands presented.";
        e.y2 = "A casual wave and a first-name greeting.";
        e.j = marker == 0 ? 'A' : 'B';
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// ToyRewardBackend

double ToyRewardBackend::score_scalar(const std::string&, const std::string&) {
    throw NotAClassifier("toy reward backend is generative");
}

std::vector<ScoredSequence> ToyRewardBackend::generate(const std::string&, const SamplingParams&,
                                                       int) {
    throw LogprobsUnsupported("toy reward backend only supports forced scoring");
}

ScoredSequence ToyRewardBackend::forced_logprob(const std::string& context,
                                                const std::string& target) {
    // Key on phrases unique to the two scaffolds; anything else is the
    // reasoning-free baseline pass.
    double per_token;
    if (context.find("cultural fit dominates") != std::string::npos)
        per_token = -0.2;
    else if (context.find("quick comparison") != std::string::npos)
        per_token = -0.7;
    else
        per_token = -1.0;

    ScoredSequence seq;
    seq.tokens = MockBackend::tokenize(target);
    for (size_t i = 0; i < seq.tokens.size(); ++i) seq.token_logprobs.push_back(per_token);
    seq.total_logprob = per_token * static_cast<double>(seq.tokens.size());
    return seq;
}

std::vector<double> ToyRewardBackend::embed(const std::string&) {
    throw LogprobsUnsupported("toy reward backend does not embed");
}

}  // namespace carb::grpo
