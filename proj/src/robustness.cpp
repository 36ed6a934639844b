#include "carb/robustness.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace carb::robustness {

using nlohmann::json;

std::string to_string(PerturbationKind k) {
    switch (k) {
        case PerturbationKind::CC: return "CC";
        case PerturbationKind::RC: return "RC";
        case PerturbationKind::CL: return "CL";
        case PerturbationKind::RP: return "RP";
    }
    return "CC";
}

PerturbationKind kind_from_string(const std::string& s) {
    if (s == "CC") return PerturbationKind::CC;
    if (s == "RC") return PerturbationKind::RC;
    if (s == "CL") return PerturbationKind::CL;
    if (s == "RP") return PerturbationKind::RP;
    throw MalformedRecord("unknown perturbation kind '" + s + "'");
}

bool is_causal(PerturbationKind k) { return k == PerturbationKind::CC; }

void PerturbedPair::validate() const {
    bool has_langs = language_from.has_value() && language_to.has_value();
    if (kind == PerturbationKind::CL) {
        if (!has_langs) throw MalformedRecord("CL pair must carry language_from/language_to");
    } else if (language_from || language_to) {
        throw MalformedRecord("only CL pairs carry language fields");
    }
}

namespace {

SensitivityReport aggregate_deltas(
    const std::vector<std::pair<PerturbationKind, double>>& deltas, SensitivityMode mode,
    int errored) {
    std::map<PerturbationKind, std::vector<double>> by_kind;
    for (const auto& [kind, delta] : deltas) by_kind[kind].push_back(delta);

    SensitivityReport report;
    report.mode = mode;
    report.errored_pairs = errored;
    for (const auto& [kind, values] : by_kind) {
        KindStats stats;
        stats.count = static_cast<int>(values.size());
        double sum = 0;
        for (double v : values) sum += v;
        stats.mean_delta = sum / values.size();
        double ss = 0;
        for (double v : values) ss += (v - stats.mean_delta) * (v - stats.mean_delta);
        stats.std_delta = std::sqrt(ss / values.size());
        report.per_kind[kind] = stats;
    }
    return report;
}

}  // namespace

SensitivityReport sensitivity_classifier(
    Gateway& rm, const std::vector<std::pair<std::string, PerturbedPair>>& pairs) {
    std::vector<std::pair<PerturbationKind, double>> deltas;
    int errored = 0;
    for (const auto& [prompt, pair] : pairs) {
        pair.validate();
        try {
            double original = rm.score_scalar(prompt, pair.original);
            double perturbed = rm.score_scalar(prompt, pair.perturbed);
            deltas.emplace_back(pair.kind, std::fabs(perturbed - original));
        } catch (const BackendUnavailable&) {
            ++errored;
        }
    }
    return aggregate_deltas(deltas, SensitivityMode::Absolute, errored);
}

SensitivityReport sensitivity_generative(
    Gateway& rm, const std::vector<std::pair<std::string, PerturbedPair>>& pairs) {
    auto normalized_logprob = [&](const std::string& prompt, const std::string& response) {
        ScoredSequence seq = rm.forced_logprob(prompt, response);
        if (seq.tokens.empty()) return 0.0;
        return seq.total_logprob / static_cast<double>(seq.tokens.size());
    };

    std::vector<std::pair<PerturbationKind, double>> deltas;
    int errored = 0;
    for (const auto& [prompt, pair] : pairs) {
        pair.validate();
        try {
            double m_orig = normalized_logprob(prompt, pair.original);
            double m_pert = normalized_logprob(prompt, pair.perturbed);
            if (m_orig == 0.0)
                throw DegenerateBaseline("original response has zero normalized log-prob");
            deltas.emplace_back(pair.kind, (m_pert - m_orig) / std::fabs(m_orig));
        } catch (const BackendUnavailable&) {
            ++errored;
        }
    }
    return aggregate_deltas(deltas, SensitivityMode::Relative, errored);
}

ConsistencyScore consistency(Gateway& rm, const std::vector<ConsistencyItem>& items, double k,
                             const std::string& rm_name, const std::string& prompt_language) {
    if (k <= 0) throw ConfigError("consistency: k must be > 0");
    if (items.empty()) throw EmptyInput("consistency: no items");

    ConsistencyScore result;
    result.rm_name = rm_name;
    result.prompt_language = prompt_language;
    result.k = k;

    // Collect all raw scores for this rm over the batch.
    struct ItemScores {
        double baseline;
        std::map<std::string, double> translated;
    };
    std::vector<ItemScores> scores;
    std::vector<double> all;
    for (const auto& item : items) {
        if (item.translations.empty())
            throw EmptyInput("consistency item needs at least one translation");
        ItemScores s;
        s.baseline = rm.score_scalar(item.prompt, item.baseline_response);
        all.push_back(s.baseline);
        for (const auto& [lang, response] : item.translations) {
            s.translated[lang] = rm.score_scalar(item.prompt, response);
            all.push_back(s.translated[lang]);
        }
        scores.push_back(std::move(s));
    }

    double mean = 0;
    for (double v : all) mean += v;
    mean /= all.size();
    double ss = 0;
    for (double v : all) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / all.size());

    // All-identical scores leave standardization undefined, but every delta
    // is exactly zero, so consistency is 1 by the formula's limit.
    if (sd == 0.0) {
        result.degenerate = true;
        for (const auto& s : scores)
            for (const auto& [lang, _] : s.translated) result.per_language[lang] = 1.0;
        result.aggregate = 1.0;
        return result;
    }

    std::map<std::string, std::pair<double, int>> sums;  // lang -> (sum, count)
    for (const auto& s : scores) {
        double z_base = (s.baseline - mean) / sd;
        for (const auto& [lang, raw] : s.translated) {
            double delta = (raw - mean) / sd - z_base;
            auto& acc = sums[lang];
            acc.first += std::exp(-k * std::fabs(delta));
            acc.second++;
        }
    }
    double total = 0;
    for (const auto& [lang, acc] : sums) {
        result.per_language[lang] = acc.first / acc.second;
        total += result.per_language[lang];
    }
    result.aggregate = total / sums.size();
    return result;
}

std::vector<std::pair<std::string, PerturbedPair>> load_perturbation_pairs(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<std::pair<std::string, PerturbedPair>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec = json::parse(line);
        PerturbedPair pair;
        std::string prompt = rec.at("prompt").get<std::string>();
        pair.original = rec.at("original").get<std::string>();
        pair.perturbed = rec.at("perturbed").get<std::string>();
        pair.kind = kind_from_string(rec.at("kind").get<std::string>());
        if (rec.contains("provenance") && rec.at("provenance") == "generated")
            pair.provenance = Provenance::Generated;
        if (rec.contains("language_from")) pair.language_from = rec.at("language_from");
        if (rec.contains("language_to")) pair.language_to = rec.at("language_to");
        pair.validate();
        out.emplace_back(std::move(prompt), std::move(pair));
    }
    return out;
}

json to_json(const SensitivityReport& report) {
    json rec;
    rec["mode"] = report.mode == SensitivityMode::Absolute ? "absolute" : "relative";
    rec["errored_pairs"] = report.errored_pairs;
    json kinds = json::object();
    for (const auto& [kind, stats] : report.per_kind)
        kinds[to_string(kind)] = {{"mean_delta", stats.mean_delta},
                                  {"std_delta", stats.std_delta},
                                  {"count", stats.count},
                                  {"causal", is_causal(kind)}};
    rec["per_kind"] = kinds;
    return rec;
}

json to_json(const ConsistencyScore& score) {
    json rec;
    rec["rm_name"] = score.rm_name;
    rec["prompt_language"] = score.prompt_language;
    rec["k"] = score.k;
    rec["per_language"] = score.per_language;
    rec["aggregate"] = score.aggregate;
    rec["degenerate"] = score.degenerate;
    return rec;
}

}  // namespace carb::robustness
