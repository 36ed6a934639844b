#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "carb/gateway.hpp"

namespace carb::robustness {

// CC changes the cultural concept itself (causal); RC strips cultural
// labels, CL switches the response language, RP rephrases — all spurious.
enum class PerturbationKind { CC, RC, CL, RP };

std::string to_string(PerturbationKind k);
PerturbationKind kind_from_string(const std::string& s);
bool is_causal(PerturbationKind k);

enum class Provenance { Fixture, Generated };

struct PerturbedPair {
    std::string original;
    std::string perturbed;
    PerturbationKind kind = PerturbationKind::CC;
    Provenance provenance = Provenance::Fixture;
    std::optional<std::string> language_from;  // CL only
    std::optional<std::string> language_to;    // CL only

    void validate() const;
};

struct KindStats {
    double mean_delta = 0.0;
    double std_delta = 0.0;
    int count = 0;
};

enum class SensitivityMode { Absolute, Relative };

struct SensitivityReport {
    std::map<PerturbationKind, KindStats> per_kind;
    SensitivityMode mode = SensitivityMode::Absolute;
    int errored_pairs = 0;
};

// Classifier RMs: delta = |score(prompt, perturbed) - score(prompt, original)|.
SensitivityReport sensitivity_classifier(Gateway& rm,
                                         const std::vector<std::pair<std::string, PerturbedPair>>& pairs);

// Generative RMs: m = length-normalized total log-prob of the response given
// the prompt; delta = (m_perturbed - m_original) / |m_original|.
SensitivityReport sensitivity_generative(Gateway& rm,
                                         const std::vector<std::pair<std::string, PerturbedPair>>& pairs);

// One prompt with its same-language response and translations of it.
struct ConsistencyItem {
    std::string prompt;
    std::string baseline_response;
    std::string baseline_language;
    std::map<std::string, std::string> translations;  // language -> response
};

struct ConsistencyScore {
    std::string rm_name;
    std::string prompt_language;
    std::map<std::string, double> per_language;  // e^{-k|delta|} means
    double aggregate = 0.0;
    double k = 1.0;
    bool degenerate = false;  // all raw scores identical; deltas all zero
};

// Scores every response, z-standardizes the raw scores over the whole batch,
// and aggregates e^{-k|delta|} per target language where delta is the
// standardized translated-minus-baseline score gap.
ConsistencyScore consistency(Gateway& rm, const std::vector<ConsistencyItem>& items, double k,
                             const std::string& rm_name = "", const std::string& prompt_language = "");

std::vector<std::pair<std::string, PerturbedPair>> load_perturbation_pairs(
    const std::string& path);
nlohmann::json to_json(const SensitivityReport& report);
nlohmann::json to_json(const ConsistencyScore& score);

}  // namespace carb::robustness
