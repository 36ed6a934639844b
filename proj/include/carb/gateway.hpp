#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <condition_variable>
#include <string>
#include <vector>

#include "carb/errors.hpp"

namespace carb {

// A token sequence with per-token natural-log probabilities.
struct ScoredSequence {
    std::vector<std::string> tokens;
    std::vector<double> token_logprobs;
    double total_logprob = 0.0;

    std::string text() const;
};

struct SamplingParams {
    double temperature = 1.0;
    double top_p = 0.95;
    int max_tokens = 2048;
    std::uint64_t seed = 42;
    double repetition_penalty = 1.0;

    void validate() const;
};

enum class BackendKind { Classifier, Generative };

// One model backend. All probability quantities are natural logs; the
// backend owns tokenization.
class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendKind kind() const = 0;
    virtual double score_scalar(const std::string& prompt, const std::string& response) = 0;
    virtual std::vector<ScoredSequence> generate(const std::string& prompt,
                                                 const SamplingParams& params, int n) = 0;
    virtual ScoredSequence forced_logprob(const std::string& context,
                                          const std::string& target) = 0;
    virtual std::vector<double> embed(const std::string& text) = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    double initial_backoff_s = 0.5;
};

// Wraps a backend with kind checks, bounded retries with exponential
// backoff, and an in-flight request limiter.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<Backend> backend, RetryPolicy retry = {},
                     int max_in_flight = 8);

    BackendKind kind() const { return backend_->kind(); }

    double score_scalar(const std::string& prompt, const std::string& response);
    std::vector<ScoredSequence> generate(const std::string& prompt, const SamplingParams& params,
                                         int n);
    ScoredSequence forced_logprob(const std::string& context, const std::string& target);
    std::vector<double> embed(const std::string& text);

private:
    template <typename F>
    auto with_retry(F&& call) -> decltype(call());

    std::shared_ptr<Backend> backend_;
    RetryPolicy retry_;
    int max_in_flight_;
    int in_flight_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
};

double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v);

// Deterministic backend for tests and desk-scale runs: configured lookup
// tables with a seeded hash fallback for anything not in a table.
class MockBackend : public Backend {
public:
    explicit MockBackend(std::uint64_t seed = 0, BackendKind kind = BackendKind::Generative)
        : seed_(seed), kind_(kind) {}

    BackendKind kind() const override { return kind_; }

    double score_scalar(const std::string& prompt, const std::string& response) override;
    std::vector<ScoredSequence> generate(const std::string& prompt, const SamplingParams& params,
                                         int n) override;
    ScoredSequence forced_logprob(const std::string& context, const std::string& target) override;
    std::vector<double> embed(const std::string& text) override;

    void set_score(const std::string& prompt, const std::string& response, double score);
    void set_completion(const std::string& prompt, const std::string& completion);
    void set_completions(const std::string& prompt, const std::vector<std::string>& completions);
    // Per-token log-probs for an exact (context, target) pair. The override
    // defines the tokenization, so its length may differ from the target's
    // whitespace token count.
    void set_forced_logprobs(const std::string& context, const std::string& target,
                             const std::vector<double>& logprobs);
    void set_embedding(const std::string& text, const std::vector<double>& v);

    static std::vector<std::string> tokenize(const std::string& text);

private:
    double token_logprob(const std::vector<std::string>& prefix, const std::string& token) const;

    std::uint64_t seed_;
    BackendKind kind_;
    std::map<std::string, double> score_table_;
    std::map<std::string, std::vector<std::string>> completion_table_;
    std::map<std::string, std::vector<double>> forced_table_;
    std::map<std::string, std::vector<double>> embed_table_;
};

// Backend that always fails; exercises the retry/unavailable path.
class UnreachableBackend : public Backend {
public:
    explicit UnreachableBackend(BackendKind kind = BackendKind::Classifier) : kind_(kind) {}
    BackendKind kind() const override { return kind_; }
    double score_scalar(const std::string&, const std::string&) override;
    std::vector<ScoredSequence> generate(const std::string&, const SamplingParams&, int) override;
    ScoredSequence forced_logprob(const std::string&, const std::string&) override;
    std::vector<double> embed(const std::string&) override;
    int calls = 0;

private:
    BackendKind kind_;
};

// JSON-over-HTTP backend. Endpoints: POST /v1/score, /v1/generate,
// /v1/logprob, /v1/embed; bearer auth token read from the environment.
class HttpBackend : public Backend {
public:
    HttpBackend(std::string base_url, BackendKind kind, std::string token_env = "");
    ~HttpBackend() override;

    BackendKind kind() const override { return kind_; }
    double score_scalar(const std::string& prompt, const std::string& response) override;
    std::vector<ScoredSequence> generate(const std::string& prompt, const SamplingParams& params,
                                         int n) override;
    ScoredSequence forced_logprob(const std::string& context, const std::string& target) override;
    std::vector<double> embed(const std::string& text) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    BackendKind kind_;
};

struct BackendConfig {
    std::string name;
    BackendKind kind = BackendKind::Generative;
    std::string url = "mock";  // "mock", "mock:<seed>", or an http(s) URL
    std::string token_env;     // defaults to CARB_BACKEND_<NAME>_TOKEN
    int concurrency = 8;
};

// Builds a gateway from a config entry.
std::shared_ptr<Gateway> make_gateway(const BackendConfig& config, RetryPolicy retry = {});

}  // namespace carb
