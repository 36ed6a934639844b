#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "carb/errors.hpp"

namespace carb {

// The four benchmark domains. Benchmark files carry "cultural_*" subset
// strings; Unknown is the lenient-mode quarantine bucket for labels we do
// not recognize (excluded from weighted averages).
enum class DomainLabel { Commonsense, Value, Safety, Linguistic, Unknown };

std::string to_string(DomainLabel d);
DomainLabel domain_from_subset(const std::string& subset);

// One Best-of-N evaluation item: a prompt with one or more chosen (winning)
// completions and a pool of rejected ones, plus culture/language metadata.
struct BoNSet {
    std::string id;
    std::string language;
    std::optional<std::string> country;
    std::string prompt;
    std::vector<std::string> chosen;
    std::vector<std::string> chosen_model;
    std::vector<std::string> rejected;
    std::vector<std::string> rejected_model;
    int num_correct = 0;
    int num_rejected = 0;
    int total_completions = 0;
    std::string source;
    std::string subset;
    nlohmann::json additional_metadata = nlohmann::json::object();

    DomainLabel domain() const { return domain_from_subset(subset); }

    // All candidates in original index order: chosen first, then rejected.
    std::vector<std::string> candidates() const;
    bool index_is_chosen(int idx) const { return idx >= 0 && idx < num_correct; }

    // Throws MalformedRecord / CountMismatch on invariant violations.
    void validate() const;
};

// One training tuple (q, y1, y2, j) with j naming the preferred response.
struct PreferenceExample {
    std::string q;
    std::string y1;
    std::string y2;
    char j = 'A';  // 'A' or 'B'
    std::optional<std::string> culture;
    std::optional<std::string> language;

    void validate() const;
};

struct DomainStats {
    double accuracy = 0.0;
    int count = 0;
};

struct EvaluationResult {
    std::map<DomainLabel, DomainStats> per_domain;
    double weighted_average = 0.0;
    // Per-language breakdown mirrors the top-level aggregation.
    struct LanguageStats {
        std::map<DomainLabel, DomainStats> per_domain;
        double weighted_average = 0.0;
        int count = 0;
    };
    std::map<std::string, LanguageStats> per_language;
    int errored_items = 0;
    int parse_failures = 0;
};

// Count-weighted mean of per-domain accuracies: sum(correct) / sum(total).
// Throws EmptyInput when the map is empty, ZeroTotal when any total is 0.
double weighted_accuracy(const std::map<DomainLabel, std::pair<int, int>>& by_domain);

struct LoadReport {
    int loaded = 0;
    int skipped = 0;
    std::vector<std::string> messages;
};

// Accepts either a JSON array or JSON-lines. In strict mode the first bad
// record throws; lenient mode skips it and records a message.
std::vector<BoNSet> load_bon_sets(const std::string& path, bool strict,
                                  LoadReport* report = nullptr);
void save_bon_sets(const std::string& path, const std::vector<BoNSet>& sets);

std::vector<PreferenceExample> load_preference_examples(const std::string& path, bool strict,
                                                        LoadReport* report = nullptr);
void save_preference_examples(const std::string& path,
                              const std::vector<PreferenceExample>& examples);

}  // namespace carb
