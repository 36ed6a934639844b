#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "carb/core.hpp"
#include "carb/gateway.hpp"

namespace carb::pipeline {

struct RatedResponse {
    std::string text;
    double rating = 0.0;  // human quality rating on a 1-10 scale
    std::string model;

    void validate() const;
};

struct PipelineThresholds {
    double chosen_sim_min = 0.75;
    double rejected_sim_max = 0.85;
    double chosen_rating_min = 8.0;
    double rejected_window = 2.5;
    int max_chosen_per_query = 3;

    void validate() const;
};

struct SimilarityCheck {
    bool pass = false;
    double similarity = 0.0;
};

// Pass iff cosine similarity to the reference is >= chosen_sim_min (inclusive).
SimilarityCheck validate_chosen(Gateway& embedder, const std::string& candidate,
                                const std::string& reference, const PipelineThresholds& thresholds);

struct RetainedCandidate {
    std::string text;
    double similarity = 0.0;
};

// Drops candidates that are too similar (>= rejected_sim_max) to the matched
// cultural reference; the rest are retained with similarities recorded.
std::vector<RetainedCandidate> filter_rejected(Gateway& embedder,
                                               const std::vector<std::string>& candidates,
                                               const std::string& matched_reference,
                                               const PipelineThresholds& thresholds);

// Chosen pool: ratings >= chosen_rating_min, seeded-sampled down to
// max_chosen_per_query. Rejected pool: ratings below the minimum chosen
// rating m but within rejected_window of it. One pair per (chosen, rejected)
// combination; empty pools emit nothing.
std::vector<PreferenceExample> build_preference_pairs(const std::string& query,
                                                      const std::vector<RatedResponse>& responses,
                                                      const PipelineThresholds& thresholds,
                                                      std::uint64_t seed);

struct BoNMetadata {
    std::string id;
    std::string language;
    std::string source;
    std::string subset;
    std::vector<std::string> chosen_model;
    std::vector<std::string> rejected_model;
};

BoNSet assemble_bon(const std::string& prompt, const std::vector<std::string>& chosen,
                    const std::vector<std::string>& rejected, const BoNMetadata& metadata);

// Input row for the build-data command: one query with rated responses.
struct RatedQuery {
    std::string query;
    std::vector<RatedResponse> responses;
};

std::vector<RatedQuery> load_rated_queries(const std::string& path);

}  // namespace carb::pipeline
