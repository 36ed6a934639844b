#include "carb/core.hpp"

#include <fstream>
#include <sstream>

namespace carb {

using nlohmann::json;

std::string to_string(DomainLabel d) {
    switch (d) {
        case DomainLabel::Commonsense: return "commonsense";
        case DomainLabel::Value: return "value";
        case DomainLabel::Safety: return "safety";
        case DomainLabel::Linguistic: return "linguistic";
        case DomainLabel::Unknown: return "unknown";
    }
    return "unknown";
}

DomainLabel domain_from_subset(const std::string& subset) {
    // Benchmark files label safety items "cultural_toxicity" and linguistic
    // items with "cultural_linguistic*" variants.
    if (subset.rfind("cultural_commonsense", 0) == 0 || subset == "commonsense")
        return DomainLabel::Commonsense;
    if (subset.rfind("cultural_value", 0) == 0 || subset == "value")
        return DomainLabel::Value;
    if (subset.rfind("cultural_toxicity", 0) == 0 || subset.rfind("cultural_safety", 0) == 0 ||
        subset == "safety")
        return DomainLabel::Safety;
    if (subset.rfind("cultural_linguistic", 0) == 0 || subset == "linguistic")
        return DomainLabel::Linguistic;
    return DomainLabel::Unknown;
}

std::vector<std::string> BoNSet::candidates() const {
    std::vector<std::string> out = chosen;
    out.insert(out.end(), rejected.begin(), rejected.end());
    return out;
}

void BoNSet::validate() const {
    if (language.empty())
        throw MalformedRecord("record '" + id + "': language is empty");
    if (num_correct != static_cast<int>(chosen.size()))
        throw CountMismatch("record '" + id + "': num_correct=" + std::to_string(num_correct) +
                            " but chosen has " + std::to_string(chosen.size()) + " entries");
    if (num_rejected != static_cast<int>(rejected.size()))
        throw CountMismatch("record '" + id + "': num_rejected=" + std::to_string(num_rejected) +
                            " but rejected has " + std::to_string(rejected.size()) + " entries");
    if (total_completions != num_correct + num_rejected)
        throw CountMismatch("record '" + id + "': total_completions=" +
                            std::to_string(total_completions) + " != " +
                            std::to_string(num_correct + num_rejected));
    if (total_completions < 2)
        throw MalformedRecord("record '" + id + "': needs at least 2 completions");
}

void PreferenceExample::validate() const {
    if (j != 'A' && j != 'B') throw MalformedRecord("verdict must be A or B");
    if (q.empty() || y1.empty() || y2.empty())
        throw MalformedRecord("q, y1, y2 must be non-empty");
}

double weighted_accuracy(const std::map<DomainLabel, std::pair<int, int>>& by_domain) {
    if (by_domain.empty()) throw EmptyInput("weighted_accuracy: no domains");
    long correct = 0, total = 0;
    for (const auto& [domain, counts] : by_domain) {
        if (counts.second <= 0)
            throw ZeroTotal("weighted_accuracy: domain " + to_string(domain) + " has total 0");
        correct += counts.first;
        total += counts.second;
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

std::string require_string(const json& rec, const char* key) {
    if (!rec.contains(key) || !rec.at(key).is_string())
        throw MalformedRecord(std::string("missing or non-string field '") + key + "'");
    return rec.at(key).get<std::string>();
}

int require_int(const json& rec, const char* key) {
    if (!rec.contains(key) || !rec.at(key).is_number_integer())
        throw MalformedRecord(std::string("missing or non-integer field '") + key + "'");
    return rec.at(key).get<int>();
}

std::vector<std::string> require_string_array(const json& rec, const char* key) {
    if (!rec.contains(key) || !rec.at(key).is_array())
        throw MalformedRecord(std::string("missing or non-array field '") + key + "'");
    std::vector<std::string> out;
    for (const auto& v : rec.at(key)) {
        if (!v.is_string())
            throw MalformedRecord(std::string("non-string element in '") + key + "'");
        out.push_back(v.get<std::string>());
    }
    return out;
}

BoNSet bon_from_json(const json& rec) {
    BoNSet s;
    s.id = require_string(rec, "id");
    s.language = require_string(rec, "language");
    if (rec.contains("country") && rec.at("country").is_string())
        s.country = rec.at("country").get<std::string>();
    s.prompt = require_string(rec, "prompt");
    s.chosen = require_string_array(rec, "chosen");
    s.chosen_model = require_string_array(rec, "chosen_model");
    s.rejected = require_string_array(rec, "rejected");
    s.rejected_model = require_string_array(rec, "rejected_model");
    s.num_correct = require_int(rec, "num_correct");
    s.num_rejected = require_int(rec, "num_rejected");
    s.total_completions = require_int(rec, "total_completions");
    s.source = require_string(rec, "source");
    s.subset = require_string(rec, "subset");
    if (rec.contains("additional_metadata")) s.additional_metadata = rec.at("additional_metadata");
    s.validate();
    return s;
}

json bon_to_json(const BoNSet& s) {
    json rec;
    rec["id"] = s.id;
    rec["language"] = s.language;
    if (s.country) rec["country"] = *s.country;
    rec["prompt"] = s.prompt;
    rec["chosen"] = s.chosen;
    rec["chosen_model"] = s.chosen_model;
    rec["rejected"] = s.rejected;
    rec["rejected_model"] = s.rejected_model;
    rec["num_correct"] = s.num_correct;
    rec["num_rejected"] = s.num_rejected;
    rec["total_completions"] = s.total_completions;
    rec["source"] = s.source;
    rec["subset"] = s.subset;
    rec["additional_metadata"] = s.additional_metadata;
    return rec;
}

PreferenceExample pref_from_json(const json& rec) {
    PreferenceExample e;
    e.q = require_string(rec, "q");
    e.y1 = require_string(rec, "y1");
    e.y2 = require_string(rec, "y2");
    std::string j = require_string(rec, "j");
    if (j.size() != 1) throw MalformedRecord("field 'j' must be a single letter");
    e.j = j[0];
    if (rec.contains("culture") && rec.at("culture").is_string())
        e.culture = rec.at("culture").get<std::string>();
    if (rec.contains("language") && rec.at("language").is_string())
        e.language = rec.at("language").get<std::string>();
    e.validate();
    return e;
}

json pref_to_json(const PreferenceExample& e) {
    json rec;
    rec["q"] = e.q;
    rec["y1"] = e.y1;
    rec["y2"] = e.y2;
    rec["j"] = std::string(1, e.j);
    if (e.culture) rec["culture"] = *e.culture;
    if (e.language) rec["language"] = *e.language;
    return rec;
}

// Reads a file that is either one JSON array or a stream of JSON values
// (one per line or concatenated).
std::vector<json> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    std::vector<json> records;
    size_t pos = text.find_first_not_of(" \t\r\n");
    if (pos == std::string::npos) return records;

    if (text[pos] == '[') {
        json arr = json::parse(text);
        for (auto& v : arr) records.push_back(std::move(v));
        return records;
    }
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        size_t p = line.find_first_not_of(" \t\r");
        if (p == std::string::npos) continue;
        records.push_back(json::parse(line));
    }
    return records;
}

template <typename T, typename Parse>
std::vector<T> load_records(const std::string& path, bool strict, LoadReport* report,
                            Parse parse) {
    std::vector<T> out;
    std::vector<json> raw;
    raw = read_records(path);
    int index = 0;
    for (const auto& rec : raw) {
        try {
            out.push_back(parse(rec));
            if (report) report->loaded++;
        } catch (const Error& e) {
            if (strict) throw;
            if (report) {
                report->skipped++;
                report->messages.push_back("record " + std::to_string(index) + ": " + e.what());
            }
        }
        index++;
    }
    return out;
}

}  // namespace

std::vector<BoNSet> load_bon_sets(const std::string& path, bool strict, LoadReport* report) {
    return load_records<BoNSet>(path, strict, report, bon_from_json);
}

void save_bon_sets(const std::string& path, const std::vector<BoNSet>& sets) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& s : sets) out << bon_to_json(s).dump() << "\n";
}

std::vector<PreferenceExample> load_preference_examples(const std::string& path, bool strict,
                                                        LoadReport* report) {
    return load_records<PreferenceExample>(path, strict, report, pref_from_json);
}

void save_preference_examples(const std::string& path,
                              const std::vector<PreferenceExample>& examples) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& e : examples) out << pref_to_json(e).dump() << "\n";
}

}  // namespace carb
