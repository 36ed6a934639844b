#include "carb/bon_eval.hpp"

#include <algorithm>
#include <iomanip>
#include <fstream>
#include <sstream>

namespace carb::bon {

using nlohmann::json;

namespace {

std::uint64_t item_seed(std::uint64_t base, const std::string& id) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : id) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return base ^ h;
}

struct Tally {
    int correct = 0;
    int total = 0;
};

class Aggregator {
public:
    void add(const BoNSet& set, bool correct) {
        DomainLabel d = set.domain();
        auto& t = by_domain_[d];
        t.total++;
        if (correct) t.correct++;
        auto& lt = by_language_[set.language][d];
        lt.total++;
        if (correct) lt.correct++;
    }

    EvaluationResult finish(int errored, int parse_failures) const {
        EvaluationResult r;
        long correct = 0, total = 0;
        for (const auto& [d, t] : by_domain_) {
            r.per_domain[d] = {t.total ? static_cast<double>(t.correct) / t.total : 0.0, t.total};
            if (d != DomainLabel::Unknown) {
                correct += t.correct;
                total += t.total;
            }
        }
        r.weighted_average = total ? static_cast<double>(correct) / total : 0.0;
        for (const auto& [lang, domains] : by_language_) {
            EvaluationResult::LanguageStats ls;
            long lc = 0, lt = 0;
            for (const auto& [d, t] : domains) {
                ls.per_domain[d] = {t.total ? static_cast<double>(t.correct) / t.total : 0.0,
                                    t.total};
                if (d != DomainLabel::Unknown) {
                    lc += t.correct;
                    lt += t.total;
                }
            }
            ls.weighted_average = lt ? static_cast<double>(lc) / lt : 0.0;
            ls.count = static_cast<int>(lt);
            r.per_language[lang] = std::move(ls);
        }
        r.errored_items = errored;
        r.parse_failures = parse_failures;
        return r;
    }

private:
    std::map<DomainLabel, Tally> by_domain_;
    std::map<std::string, std::map<DomainLabel, Tally>> by_language_;
};

}  // namespace

std::pair<std::vector<ItemVerdict>, EvaluationResult> evaluate_classifier(
    Gateway& rm, const std::vector<BoNSet>& sets, const EvalOptions& options) {
    std::vector<ItemVerdict> items;
    items.reserve(sets.size());
    Aggregator agg;
    int errored = 0;

    for (const auto& set : sets) {
        ItemVerdict v;
        v.set_id = set.id;
        v.mode = Mode::Classifier;
        try {
            auto candidates = set.candidates();
            v.scores.reserve(candidates.size());
            for (const auto& c : candidates) v.scores.push_back(rm.score_scalar(set.prompt, c));
            int best = 0;
            for (int i = 1; i < static_cast<int>(v.scores.size()); ++i)
                if (v.scores[i] > v.scores[best]) best = i;
            v.tie = std::count(v.scores.begin(), v.scores.end(), v.scores[best]) > 1;
            v.selected_index = best;
            v.correct = set.index_is_chosen(best);
        } catch (const BackendUnavailable&) {
            v.errored = true;
            ++errored;
        }
        if (!v.errored || options.strict) agg.add(set, v.correct && !v.errored);
        items.push_back(std::move(v));
    }
    return {std::move(items), agg.finish(errored, 0)};
}

std::pair<std::vector<ItemVerdict>, EvaluationResult> evaluate_generative(
    Gateway& rm, const std::vector<BoNSet>& sets, std::uint64_t seed,
    const EvalOptions& options) {
    std::vector<ItemVerdict> items;
    items.reserve(sets.size());
    Aggregator agg;
    int errored = 0, parse_failures = 0;

    for (const auto& set : sets) {
        ItemVerdict v;
        v.set_id = set.id;
        v.mode = Mode::Generative;
        v.seed = item_seed(seed, set.id);
        bool counted = true;
        try {
            auto bundle = judge::build_eval_prompt(set, v.seed);
            SamplingParams params;
            params.temperature = 0.0;
            params.seed = v.seed;
            auto traces = rm.generate(bundle.system_prompt + "\n\n" + bundle.user_prompt, params, 1);
            v.trace_text = traces.front().text();
            auto verdict = judge::parse_verdict(v.trace_text, set.total_completions);
            if (verdict.ok()) {
                v.selected_index = bundle.original_index(*verdict.verdict);
                v.correct = set.index_is_chosen(v.selected_index);
            } else {
                v.parse_failed = true;
                ++parse_failures;
                if (options.parse_failure == ParseFailurePolicy::Exclude) counted = false;
            }
        } catch (const BackendUnavailable&) {
            v.errored = true;
            ++errored;
            counted = options.strict;
        }
        if (counted) agg.add(set, v.correct && !v.errored && !v.parse_failed);
        items.push_back(std::move(v));
    }
    return {std::move(items), agg.finish(errored, parse_failures)};
}

std::vector<LeaderboardRow> leaderboard(const std::map<std::string, EvaluationResult>& results) {
    if (results.empty()) throw EmptyInput("leaderboard: no results");
    std::vector<LeaderboardRow> rows;
    for (const auto& [name, result] : results) {
        LeaderboardRow row;
        row.name = name;
        if (result.per_language.empty()) {
            row.average = result.weighted_average;
        } else {
            double sum = 0;
            for (const auto& [lang, stats] : result.per_language) {
                row.per_language[lang] = stats.weighted_average;
                sum += stats.weighted_average;
            }
            row.average = sum / static_cast<double>(result.per_language.size());
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.average != b.average) return a.average > b.average;
        return a.name < b.name;
    });
    return rows;
}

BestOfNResult best_of_n_select(Gateway& generator, Gateway& scorer, const std::string& prompt,
                               int n, const SamplingParams& params) {
    if (n < 1) throw ConfigError("best_of_n_select: n must be >= 1");
    BestOfNResult result;
    result.candidates = generator.generate(prompt, params, n);
    for (const auto& c : result.candidates)
        result.scores.push_back(scorer.score_scalar(prompt, c.text()));
    int best = 0;
    for (int i = 1; i < static_cast<int>(result.scores.size()); ++i)
        if (result.scores[i] > result.scores[best]) best = i;
    result.selected_index = best;
    return result;
}

json to_json(const ItemVerdict& v) {
    json rec;
    rec["set_id"] = v.set_id;
    rec["mode"] = v.mode == Mode::Classifier ? "classifier" : "generative";
    rec["selected_index"] = v.selected_index;
    rec["correct"] = v.correct;
    rec["errored"] = v.errored;
    rec["parse_failed"] = v.parse_failed;
    rec["tie"] = v.tie;
    if (!v.scores.empty()) rec["scores"] = v.scores;
    if (!v.trace_text.empty()) rec["trace_text"] = v.trace_text;
    rec["seed"] = v.seed;
    return rec;
}

json to_json(const EvaluationResult& r) {
    json rec;
    json domains = json::object();
    for (const auto& [d, stats] : r.per_domain)
        domains[to_string(d)] = {{"accuracy", stats.accuracy}, {"count", stats.count}};
    rec["per_domain"] = domains;
    rec["weighted_average"] = r.weighted_average;
    json langs = json::object();
    for (const auto& [lang, stats] : r.per_language) {
        json ld = json::object();
        for (const auto& [d, s] : stats.per_domain)
            ld[to_string(d)] = {{"accuracy", s.accuracy}, {"count", s.count}};
        langs[lang] = {{"per_domain", ld},
                       {"weighted_average", stats.weighted_average},
                       {"count", stats.count}};
    }
    rec["per_language"] = langs;
    rec["errored_items"] = r.errored_items;
    rec["parse_failures"] = r.parse_failures;
    return rec;
}

void write_item_verdicts(const std::string& path, const std::vector<ItemVerdict>& items) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& v : items) out << to_json(v).dump() << "\n";
}

std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows) {
    // Union of language columns, sorted for stable output.
    std::vector<std::string> langs;
    for (const auto& row : rows)
        for (const auto& [lang, _] : row.per_language)
            if (std::find(langs.begin(), langs.end(), lang) == langs.end()) langs.push_back(lang);
    std::sort(langs.begin(), langs.end());

    std::ostringstream out;
    out << "rank,name,average";
    for (const auto& lang : langs) out << ',' << lang;
    out << '\n';
    int rank = 1;
    for (const auto& row : rows) {
        out << rank++ << ',' << row.name << ',' << std::setprecision(10) << row.average;
        for (const auto& lang : langs) {
            auto it = row.per_language.find(lang);
            out << ',';
            if (it != row.per_language.end()) out << it->second;
        }
        out << '\n';
    }
    return out.str();
}

std::string leaderboard_table(const std::vector<LeaderboardRow>& rows) {
    size_t width = 4;
    for (const auto& row : rows) width = std::max(width, row.name.size());
    std::ostringstream out;
    out << std::left << std::setw(6) << "rank" << std::setw(static_cast<int>(width) + 2) << "name"
        << "average\n";
    int rank = 1;
    for (const auto& row : rows)
        out << std::left << std::setw(6) << rank++ << std::setw(static_cast<int>(width) + 2)
            << row.name << std::fixed << std::setprecision(4) << row.average << '\n';
    return out.str();
}

}  // namespace carb::bon
