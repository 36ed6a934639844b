#include "carb/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "carb/rng.hpp"

namespace carb::pipeline {

using nlohmann::json;

void RatedResponse::validate() const {
    if (rating < 1.0 || rating > 10.0)
        throw MalformedRecord("rating " + std::to_string(rating) + " outside [1,10]");
}

void PipelineThresholds::validate() const {
    if (chosen_sim_min <= 0 || chosen_sim_min >= 1)
        throw ConfigError("chosen_sim_min must be in (0,1)");
    if (rejected_window <= 0) throw ConfigError("rejected_window must be > 0");
    if (max_chosen_per_query < 1) throw ConfigError("max_chosen_per_query must be >= 1");
    // A rejected-similarity cap at or below the chosen gate would retain
    // rejected candidates more reference-like than passing chosen ones.
    if (rejected_sim_max <= chosen_sim_min)
        throw ConfigError("rejected_sim_max must exceed chosen_sim_min");
}

SimilarityCheck validate_chosen(Gateway& embedder, const std::string& candidate,
                                const std::string& reference,
                                const PipelineThresholds& thresholds) {
    thresholds.validate();
    double sim = cosine_similarity(embedder.embed(candidate), embedder.embed(reference));
    return {sim >= thresholds.chosen_sim_min, sim};
}

std::vector<RetainedCandidate> filter_rejected(Gateway& embedder,
                                               const std::vector<std::string>& candidates,
                                               const std::string& matched_reference,
                                               const PipelineThresholds& thresholds) {
    thresholds.validate();
    std::vector<double> ref = embedder.embed(matched_reference);
    std::vector<RetainedCandidate> retained;
    for (const auto& candidate : candidates) {
        double sim = cosine_similarity(embedder.embed(candidate), ref);
        if (sim < thresholds.rejected_sim_max) retained.push_back({candidate, sim});
    }
    return retained;
}

std::vector<PreferenceExample> build_preference_pairs(const std::string& query,
                                                      const std::vector<RatedResponse>& responses,
                                                      const PipelineThresholds& thresholds,
                                                      std::uint64_t seed) {
    thresholds.validate();
    for (const auto& r : responses) r.validate();

    std::vector<RatedResponse> sorted = responses;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.rating > b.rating; });

    std::vector<RatedResponse> chosen_pool;
    for (const auto& r : sorted)
        if (r.rating >= thresholds.chosen_rating_min) chosen_pool.push_back(r);
    if (chosen_pool.empty()) return {};

    SplitMix rng(seed ^ 0x7061697273ULL);
    while (static_cast<int>(chosen_pool.size()) > thresholds.max_chosen_per_query)
        chosen_pool.erase(chosen_pool.begin() +
                          static_cast<long>(rng.next_below(chosen_pool.size())));

    double min_chosen = chosen_pool.back().rating;
    for (const auto& r : chosen_pool) min_chosen = std::min(min_chosen, r.rating);

    std::vector<RatedResponse> rejected_pool;
    for (const auto& r : sorted)
        if (r.rating < min_chosen && min_chosen - r.rating <= thresholds.rejected_window)
            rejected_pool.push_back(r);
    if (rejected_pool.empty()) return {};

    std::vector<PreferenceExample> out;
    for (const auto& chosen : chosen_pool) {
        for (const auto& rejected : rejected_pool) {
            PreferenceExample e;
            e.q = query;
            // Seeded position flip so the preferred response is not always A.
            if (rng.next_below(2) == 0) {
                e.y1 = chosen.text;
                e.y2 = rejected.text;
                e.j = 'A';
            } else {
                e.y1 = rejected.text;
                e.y2 = chosen.text;
                e.j = 'B';
            }
            out.push_back(std::move(e));
        }
    }
    return out;
}

BoNSet assemble_bon(const std::string& prompt, const std::vector<std::string>& chosen,
                    const std::vector<std::string>& rejected, const BoNMetadata& metadata) {
    if (chosen.empty() || rejected.empty())
        throw EmptyPool("assemble_bon needs at least one chosen and one rejected completion");
    BoNSet set;
    set.id = metadata.id;
    set.language = metadata.language;
    set.prompt = prompt;
    set.chosen = chosen;
    set.chosen_model = metadata.chosen_model;
    set.rejected = rejected;
    set.rejected_model = metadata.rejected_model;
    set.num_correct = static_cast<int>(chosen.size());
    set.num_rejected = static_cast<int>(rejected.size());
    set.total_completions = set.num_correct + set.num_rejected;
    set.source = metadata.source;
    set.subset = metadata.subset;
    set.validate();
    return set;
}

std::vector<RatedQuery> load_rated_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<RatedQuery> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec = json::parse(line);
        RatedQuery q;
        q.query = rec.at("query").get<std::string>();
        for (const auto& r : rec.at("responses")) {
            RatedResponse response;
            response.text = r.at("text").get<std::string>();
            response.rating = r.at("rating").get<double>();
            if (r.contains("model")) response.model = r.at("model").get<std::string>();
            response.validate();
            q.responses.push_back(std::move(response));
        }
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace carb::pipeline
