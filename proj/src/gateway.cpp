#include "carb/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace carb {

using nlohmann::json;

std::string ScoredSequence::text() const {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

void SamplingParams::validate() const {
    if (temperature < 0) throw ConfigError("temperature must be >= 0");
    if (top_p <= 0 || top_p > 1) throw ConfigError("top_p must be in (0,1]");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<Backend> backend, RetryPolicy retry, int max_in_flight)
    : backend_(std::move(backend)), retry_(retry), max_in_flight_(max_in_flight) {
    if (max_in_flight_ < 1) max_in_flight_ = 1;
}

namespace {
struct InFlightSlot {
    InFlightSlot(std::mutex& mu, std::condition_variable& cv, int& count, int limit)
        : mu_(mu), cv_(cv), count_(count) {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return count_ < limit; });
        ++count_;
    }
    ~InFlightSlot() {
        {
            std::lock_guard lk(mu_);
            --count_;
        }
        cv_.notify_one();
    }
    std::mutex& mu_;
    std::condition_variable& cv_;
    int& count_;
};
}  // namespace

template <typename F>
auto Gateway::with_retry(F&& call) -> decltype(call()) {
    InFlightSlot slot(mu_, cv_, in_flight_, max_in_flight_);
    double backoff = retry_.initial_backoff_s;
    for (int attempt = 1;; ++attempt) {
        try {
            return call();
        } catch (const BackendUnavailable&) {
            if (attempt >= retry_.max_attempts) throw;
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= 2;
        }
    }
}

double Gateway::score_scalar(const std::string& prompt, const std::string& response) {
    if (backend_->kind() != BackendKind::Classifier)
        throw NotAClassifier("score_scalar requires a classifier backend");
    return with_retry([&] { return backend_->score_scalar(prompt, response); });
}

std::vector<ScoredSequence> Gateway::generate(const std::string& prompt,
                                              const SamplingParams& params, int n) {
    if (n < 1) throw ConfigError("generate: n must be >= 1");
    params.validate();
    return with_retry([&] { return backend_->generate(prompt, params, n); });
}

ScoredSequence Gateway::forced_logprob(const std::string& context, const std::string& target) {
    return with_retry([&] { return backend_->forced_logprob(context, target); });
}

std::vector<double> Gateway::embed(const std::string& text) {
    return with_retry([&] { return backend_->embed(text); });
}

double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size())
        throw DimensionMismatch("cosine_similarity: " + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()));
    double dot = 0, nu = 0, nv = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0 || nv == 0) throw ZeroVector("cosine_similarity: zero-norm input");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// ---------------------------------------------------------------------------
// MockBackend

namespace {

constexpr char kSep = '\x1f';

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

double unit_from_hash(std::uint64_t h) {
    return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
}

const std::vector<std::string>& mock_vocab() {
    static const std::vector<std::string> v = {"alpha", "beta",  "gamma", "delta",
                                               "omega", "sigma", "kappa", "theta"};
    return v;
}

}  // namespace

std::vector<std::string> MockBackend::tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double MockBackend::token_logprob(const std::vector<std::string>& prefix,
                                  const std::string& token) const {
    std::uint64_t h = mix(seed_, 0x7065722d746f6bULL);
    for (const auto& t : prefix) h = mix(h, fnv1a(t));
    h = mix(h, fnv1a(token));
    // Map into [-3.0, -0.05].
    return -0.05 - 2.95 * unit_from_hash(h);
}

double MockBackend::score_scalar(const std::string& prompt, const std::string& response) {
    auto it = score_table_.find(prompt + kSep + response);
    if (it != score_table_.end()) return it->second;
    // Fallback: uniform [0,1) keyed on (seed, prompt, response).
    return unit_from_hash(mix(seed_, fnv1a(prompt + kSep + response)));
}

std::vector<ScoredSequence> MockBackend::generate(const std::string& prompt,
                                                  const SamplingParams& params, int n) {
    if (n < 1) throw ConfigError("generate: n must be >= 1");
    std::vector<ScoredSequence> out;
    auto canned = completion_table_.find(prompt);
    for (int i = 0; i < n; ++i) {
        std::string text;
        if (canned != completion_table_.end()) {
            const auto& options = canned->second;
            // Greedy decoding always picks the first canned completion.
            size_t pick = (params.temperature == 0.0)
                              ? 0
                              : (mix(mix(seed_, params.seed), static_cast<std::uint64_t>(i)) %
                                 options.size());
            text = options[pick];
        } else {
            std::uint64_t h = mix(mix(seed_, fnv1a(prompt)), params.seed);
            if (params.temperature != 0.0) h = mix(h, static_cast<std::uint64_t>(i + 1));
            const auto& vocab = mock_vocab();
            int len = std::min(params.max_tokens, 4 + static_cast<int>(h % 5));
            std::vector<std::string> toks;
            for (int t = 0; t < len; ++t) {
                h = mix(h, static_cast<std::uint64_t>(t + 1));
                toks.push_back(vocab[h % vocab.size()]);
            }
            std::string joined;
            for (size_t t = 0; t < toks.size(); ++t) {
                if (t) joined += ' ';
                joined += toks[t];
            }
            text = joined;
        }
        out.push_back(forced_logprob(prompt, text));
    }
    return out;
}

ScoredSequence MockBackend::forced_logprob(const std::string& context, const std::string& target) {
    ScoredSequence seq;
    seq.tokens = tokenize(target);

    auto it = forced_table_.find(context + kSep + target);
    if (it != forced_table_.end()) {
        // The override defines the tokenization; a real backend may split
        // the target into more pieces than whitespace does.
        seq.token_logprobs = it->second;
        if (seq.token_logprobs.size() != seq.tokens.size()) {
            seq.tokens.clear();
            for (size_t i = 0; i < seq.token_logprobs.size(); ++i)
                seq.tokens.push_back("<piece" + std::to_string(i) + ">");
        }
    } else {
        std::vector<std::string> prefix = tokenize(context);
        for (const auto& tok : seq.tokens) {
            seq.token_logprobs.push_back(token_logprob(prefix, tok));
            prefix.push_back(tok);
        }
    }
    seq.total_logprob = std::accumulate(seq.token_logprobs.begin(), seq.token_logprobs.end(), 0.0);
    return seq;
}

std::vector<double> MockBackend::embed(const std::string& text) {
    auto it = embed_table_.find(text);
    if (it != embed_table_.end()) return it->second;
    std::uint64_t h = mix(seed_, fnv1a(text));
    std::vector<double> v(16);
    double norm = 0;
    for (auto& x : v) {
        h = mix(h, 0x656d626564ULL);
        x = 2.0 * unit_from_hash(h) - 1.0;
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

void MockBackend::set_score(const std::string& prompt, const std::string& response, double score) {
    score_table_[prompt + kSep + response] = score;
}
void MockBackend::set_completion(const std::string& prompt, const std::string& completion) {
    completion_table_[prompt] = {completion};
}
void MockBackend::set_completions(const std::string& prompt,
                                  const std::vector<std::string>& completions) {
    completion_table_[prompt] = completions;
}
void MockBackend::set_forced_logprobs(const std::string& context, const std::string& target,
                                      const std::vector<double>& logprobs) {
    forced_table_[context + kSep + target] = logprobs;
}
void MockBackend::set_embedding(const std::string& text, const std::vector<double>& v) {
    embed_table_[text] = v;
}

// ---------------------------------------------------------------------------
// UnreachableBackend

double UnreachableBackend::score_scalar(const std::string&, const std::string&) {
    ++calls;
    throw BackendUnavailable("unreachable backend");
}
std::vector<ScoredSequence> UnreachableBackend::generate(const std::string&, const SamplingParams&,
                                                         int) {
    ++calls;
    throw BackendUnavailable("unreachable backend");
}
ScoredSequence UnreachableBackend::forced_logprob(const std::string&, const std::string&) {
    ++calls;
    throw BackendUnavailable("unreachable backend");
}
std::vector<double> UnreachableBackend::embed(const std::string&) {
    ++calls;
    throw BackendUnavailable("unreachable backend");
}

// ---------------------------------------------------------------------------
// HttpBackend

struct HttpBackend::Impl {
    std::string host;
    std::string token;

    json post(const std::string& path, const json& body) {
        httplib::Client client(host);
        client.set_connection_timeout(10);
        client.set_read_timeout(120);
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) throw BackendUnavailable("no response from " + host + path);
        if (res->status >= 500) throw BackendUnavailable(host + path + " returned " +
                                                         std::to_string(res->status));
        if (res->status != 200)
            throw Error(host + path + " returned " + std::to_string(res->status) + ": " +
                        res->body);
        return json::parse(res->body);
    }
};

HttpBackend::HttpBackend(std::string base_url, BackendKind kind, std::string token_env)
    : impl_(std::make_unique<Impl>()), kind_(kind) {
    impl_->host = std::move(base_url);
    if (!token_env.empty()) {
        if (const char* tok = std::getenv(token_env.c_str())) impl_->token = tok;
    }
}

HttpBackend::~HttpBackend() = default;

double HttpBackend::score_scalar(const std::string& prompt, const std::string& response) {
    json body = {{"prompt", prompt}, {"response", response}};
    return impl_->post("/v1/score", body).at("score").get<double>();
}

namespace {
ScoredSequence sequence_from_json(const json& rec) {
    ScoredSequence seq;
    seq.tokens = rec.at("tokens").get<std::vector<std::string>>();
    seq.token_logprobs = rec.at("token_logprobs").get<std::vector<double>>();
    if (seq.tokens.size() != seq.token_logprobs.size())
        throw Error("backend returned misaligned tokens/token_logprobs");
    seq.total_logprob = std::accumulate(seq.token_logprobs.begin(), seq.token_logprobs.end(), 0.0);
    return seq;
}
}  // namespace

std::vector<ScoredSequence> HttpBackend::generate(const std::string& prompt,
                                                  const SamplingParams& params, int n) {
    json body = {{"prompt", prompt},
                 {"n", n},
                 {"temperature", params.temperature},
                 {"top_p", params.top_p},
                 {"max_tokens", params.max_tokens},
                 {"seed", params.seed},
                 {"repetition_penalty", params.repetition_penalty}};
    json res = impl_->post("/v1/generate", body);
    if (!res.contains("completions")) throw LogprobsUnsupported("backend lacks /v1/generate");
    std::vector<ScoredSequence> out;
    for (const auto& rec : res.at("completions")) out.push_back(sequence_from_json(rec));
    return out;
}

ScoredSequence HttpBackend::forced_logprob(const std::string& context, const std::string& target) {
    json body = {{"context", context}, {"target", target}};
    json res = impl_->post("/v1/logprob", body);
    if (!res.contains("tokens")) throw LogprobsUnsupported("backend lacks /v1/logprob");
    return sequence_from_json(res);
}

std::vector<double> HttpBackend::embed(const std::string& text) {
    json body = {{"text", text}};
    return impl_->post("/v1/embed", body).at("embedding").get<std::vector<double>>();
}

// ---------------------------------------------------------------------------

std::shared_ptr<Gateway> make_gateway(const BackendConfig& config, RetryPolicy retry) {
    std::shared_ptr<Backend> backend;
    if (config.url == "mock" || config.url.rfind("mock:", 0) == 0) {
        std::uint64_t seed = 0;
        if (config.url.size() > 5) seed = std::stoull(config.url.substr(5));
        backend = std::make_shared<MockBackend>(seed, config.kind);
    } else {
        std::string token_env = config.token_env;
        if (token_env.empty()) {
            std::string upper = config.name;
            std::transform(upper.begin(), upper.end(), upper.begin(),
                           [](unsigned char c) { return std::toupper(c); });
            token_env = "CARB_BACKEND_" + upper + "_TOKEN";
        }
        backend = std::make_shared<HttpBackend>(config.url, config.kind, token_env);
    }
    return std::make_shared<Gateway>(std::move(backend), retry, config.concurrency);
}

}  // namespace carb
