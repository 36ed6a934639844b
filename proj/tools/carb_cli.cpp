// carb: culture-aware reward-model evaluation, robustness analysis, and
// RLVR training at desk scale.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "carb/bon_eval.hpp"
#include "carb/core.hpp"
#include "carb/gateway.hpp"
#include "carb/grpo.hpp"
#include "carb/manifest.hpp"
#include "carb/pipeline.hpp"
#include "carb/robustness.hpp"
#include "carb/stats.hpp"
#include "carb/toy_policy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;

carb::BackendConfig backend_config(const std::string& rm, const std::string& mode,
                                   const std::string& name) {
    carb::BackendConfig cfg;
    cfg.name = name;
    cfg.url = rm;
    cfg.kind = mode == "classifier" ? carb::BackendKind::Classifier
                                    : carb::BackendKind::Generative;
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw carb::Error("cannot write " + path);
    out << text;
}

// Minimal static SVG bar chart; one bar per (label, value in [0,1]).
std::string svg_bars(const std::string& title,
                     const std::vector<std::pair<std::string, double>>& bars) {
    const int bar_w = 60, gap = 20, h = 260, base = 220;
    int w = gap + static_cast<int>(bars.size()) * (bar_w + gap);
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << std::max(w, 320) << "' height='"
        << h << "'>\n";
    svg << "<text x='10' y='20' font-size='14'>" << title << "</text>\n";
    int x = gap;
    for (const auto& [label, value] : bars) {
        int bh = static_cast<int>(value * 170);
        svg << "<rect x='" << x << "' y='" << base - bh << "' width='" << bar_w << "' height='"
            << bh << "' fill='#4878b0'/>\n";
        svg << "<text x='" << x << "' y='" << base + 16 << "' font-size='11'>" << label
            << "</text>\n";
        svg << "<text x='" << x << "' y='" << base - bh - 4 << "' font-size='11'>" << value
            << "</text>\n";
        x += bar_w + gap;
    }
    svg << "</svg>\n";
    return svg.str();
}

struct CommonOutputs {
    fs::path dir;
    explicit CommonOutputs(const std::string& out) : dir(out) { fs::create_directories(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int cmd_evaluate(const std::string& data, const std::string& rm, const std::string& mode,
                 std::uint64_t seed, const std::string& out, bool strict, bool plots) {
    CommonOutputs outputs(out);
    carb::RunManifest manifest;
    manifest.command = "evaluate";
    manifest.started_at = carb::timestamp_utc();
    manifest.config = {{"data", data}, {"rm", rm},         {"mode", mode},
                       {"seed", seed}, {"strict", strict}, {"plots", plots}};
    manifest.seeds = {{"eval_seed", seed}};
    manifest.backends = {rm};
    manifest.toolkit_version = carb::toolkit_version();

    if (!fs::exists(data)) throw carb::ConfigError("data file not found: " + data);
    carb::LoadReport report;
    auto sets = carb::load_bon_sets(data, strict, &report);
    auto gateway = carb::make_gateway(backend_config(rm, mode, "rm"));

    carb::bon::EvalOptions options;
    options.strict = strict;
    std::vector<carb::bon::ItemVerdict> items;
    carb::EvaluationResult result;
    if (mode == "classifier")
        std::tie(items, result) = carb::bon::evaluate_classifier(*gateway, sets, options);
    else
        std::tie(items, result) = carb::bon::evaluate_generative(*gateway, sets, seed, options);

    carb::bon::write_item_verdicts(outputs.path("items.jsonl"), items);
    json summary = carb::bon::to_json(result);
    summary["loaded"] = report.loaded;
    summary["skipped"] = report.skipped;
    write_text(outputs.path("summary.json"), summary.dump(2) + "\n");

    std::map<std::string, carb::EvaluationResult> table{{"rm", result}};
    auto rows = carb::bon::leaderboard(table);
    write_text(outputs.path("leaderboard.csv"), carb::bon::leaderboard_csv(rows));
    std::cout << carb::bon::leaderboard_table(rows);
    std::cout << "weighted accuracy: " << result.weighted_average << "\n";

    manifest.output_paths = {outputs.path("items.jsonl"), outputs.path("summary.json"),
                             outputs.path("leaderboard.csv")};
    if (plots) {
        std::vector<std::pair<std::string, double>> bars;
        for (const auto& [d, stats] : result.per_domain)
            bars.emplace_back(carb::to_string(d), stats.accuracy);
        write_text(outputs.path("accuracy_by_domain.svg"), svg_bars("accuracy by domain", bars));
        manifest.output_paths.push_back(outputs.path("accuracy_by_domain.svg"));
    }
    manifest.finished_at = carb::timestamp_utc();
    manifest.write(outputs.path("manifest.jsonl"));
    return kExitOk;
}

int cmd_robustness(const std::string& pairs_path, const std::string& rm, const std::string& metric,
                   const std::string& out, bool plots) {
    CommonOutputs outputs(out);
    carb::RunManifest manifest;
    manifest.command = "robustness";
    manifest.started_at = carb::timestamp_utc();
    manifest.config = {{"pairs", pairs_path}, {"rm", rm}, {"metric", metric}, {"plots", plots}};
    manifest.backends = {rm};
    manifest.toolkit_version = carb::toolkit_version();

    if (!fs::exists(pairs_path)) throw carb::ConfigError("pairs file not found: " + pairs_path);
    auto pairs = carb::robustness::load_perturbation_pairs(pairs_path);
    std::string mode = metric == "absolute" ? "classifier" : "generative";
    auto gateway = carb::make_gateway(backend_config(rm, mode, "rm"));

    carb::robustness::SensitivityReport report =
        metric == "absolute" ? carb::robustness::sensitivity_classifier(*gateway, pairs)
                             : carb::robustness::sensitivity_generative(*gateway, pairs);

    write_text(outputs.path("sensitivity.json"), carb::robustness::to_json(report).dump(2) + "\n");
    manifest.output_paths = {outputs.path("sensitivity.json")};
    if (plots) {
        std::vector<std::pair<std::string, double>> bars;
        double max_abs = 1e-12;
        for (const auto& [kind, stats] : report.per_kind)
            max_abs = std::max(max_abs, std::fabs(stats.mean_delta));
        for (const auto& [kind, stats] : report.per_kind)
            bars.emplace_back(carb::robustness::to_string(kind),
                              std::fabs(stats.mean_delta) / max_abs);
        write_text(outputs.path("sensitivity.svg"),
                   svg_bars("mean |delta| by perturbation kind (normalized)", bars));
        manifest.output_paths.push_back(outputs.path("sensitivity.svg"));
    }
    manifest.finished_at = carb::timestamp_utc();
    manifest.write(outputs.path("manifest.jsonl"));
    return kExitOk;
}

int cmd_consistency(const std::string& items_path, const std::string& rm, double k,
                    const std::string& out) {
    CommonOutputs outputs(out);
    carb::RunManifest manifest;
    manifest.command = "consistency";
    manifest.started_at = carb::timestamp_utc();
    manifest.config = {{"items", items_path}, {"rm", rm}, {"k", k}};
    manifest.backends = {rm};
    manifest.toolkit_version = carb::toolkit_version();

    if (!fs::exists(items_path)) throw carb::ConfigError("items file not found: " + items_path);
    std::ifstream in(items_path);
    std::vector<carb::robustness::ConsistencyItem> items;
    std::string line;
    std::string prompt_language;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec = json::parse(line);
        carb::robustness::ConsistencyItem item;
        item.prompt = rec.at("prompt").get<std::string>();
        item.baseline_response = rec.at("baseline_response").get<std::string>();
        item.baseline_language = rec.value("baseline_language", "");
        prompt_language = item.baseline_language;
        for (const auto& [lang, text] : rec.at("translations").items())
            item.translations[lang] = text.get<std::string>();
        items.push_back(std::move(item));
    }

    auto gateway = carb::make_gateway(backend_config(rm, "classifier", "rm"));
    auto score = carb::robustness::consistency(*gateway, items, k, rm, prompt_language);
    write_text(outputs.path("consistency.json"), carb::robustness::to_json(score).dump(2) + "\n");
    std::cout << "aggregate consistency: " << score.aggregate << "\n";

    manifest.output_paths = {outputs.path("consistency.json")};
    manifest.finished_at = carb::timestamp_utc();
    manifest.write(outputs.path("manifest.jsonl"));
    return kExitOk;
}

int cmd_correlate(const std::string& rankings_path, const std::string& out) {
    CommonOutputs outputs(out);
    carb::RunManifest manifest;
    manifest.command = "correlate";
    manifest.started_at = carb::timestamp_utc();
    manifest.config = {{"rankings", rankings_path}};
    manifest.toolkit_version = carb::toolkit_version();

    if (!fs::exists(rankings_path))
        throw carb::ConfigError("rankings file not found: " + rankings_path);
    std::ifstream in(rankings_path);
    json rec = json::parse(in);
    carb::stats::RankingPair pair;
    pair.labels = rec.at("labels").get<std::vector<std::string>>();
    pair.r_align = rec.at("r_align").get<std::vector<double>>();
    pair.r_rb = rec.at("r_rb").get<std::vector<double>>();

    auto report = carb::stats::correlation_report(pair);
    write_text(outputs.path("correlation.json"),
               carb::stats::to_json(report, pair).dump(2) + "\n");
    std::cout << "spearman rho: " << report.spearman.rho << "  r^2: " << report.ols.r_squared
              << "  p: " << report.ols.p_value << "\n";

    manifest.output_paths = {outputs.path("correlation.json")};
    manifest.finished_at = carb::timestamp_utc();
    manifest.write(outputs.path("manifest.jsonl"));
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data,
              const std::string& telemetry_out) {
    std::map<std::string, std::string> cfg;
    if (!config_path.empty()) cfg = carb::parse_config_file(config_path);
    auto get = [&](const std::string& key, double fallback) {
        auto it = cfg.find("train." + key);
        if (it == cfg.end()) it = cfg.find(key);
        return it == cfg.end() ? fallback : std::stod(it->second);
    };

    carb::grpo::GRPOConfig grpo_cfg;
    grpo_cfg.group_size = static_cast<int>(get("group_size", 8));
    grpo_cfg.clip_ratio = get("clip_ratio", 0.2);
    grpo_cfg.kl_coeff = get("kl_coeff", 0.05);
    grpo_cfg.adv_eps = get("adv_eps", 1e-4);
    grpo_cfg.lr = get("lr", 0.5);
    grpo_cfg.steps = static_cast<int>(get("steps", 500));
    grpo_cfg.batch_size = static_cast<int>(get("batch_size", 4));
    grpo_cfg.seed = static_cast<std::uint64_t>(get("seed", 0));

    carb::rewards::RewardConfig reward_cfg;
    reward_cfg.appr_weight = get("appr_weight", 1.0);
    reward_cfg.appr_clip = get("appr_clip", 2.0);

    std::vector<carb::PreferenceExample> examples;
    if (data.rfind("toy", 0) == 0) {
        int n = 256;
        if (data.size() > 4 && data[3] == ':') n = std::stoi(data.substr(4));
        examples = carb::grpo::make_toy_dataset(n, grpo_cfg.seed);
    } else {
        if (!fs::exists(data)) throw carb::ConfigError("data file not found: " + data);
        examples = carb::load_preference_examples(data, true);
    }

    carb::grpo::ToyJudgePolicy policy(grpo_cfg.seed);
    auto backend = std::make_shared<carb::grpo::ToyRewardBackend>();
    carb::Gateway gateway(backend);
    carb::grpo::RewardFn reward_fn = [&](const carb::PreferenceExample& example,
                                         const carb::judge::JudgmentTrace& trace) {
        return carb::rewards::reward_total(&gateway, example, trace, reward_cfg);
    };

    auto telemetry = carb::grpo::train(policy, examples, reward_fn, grpo_cfg);
    carb::grpo::write_telemetry_csv(telemetry_out, telemetry);

    carb::RunManifest manifest;
    manifest.command = "train";
    manifest.started_at = manifest.finished_at = carb::timestamp_utc();
    manifest.config = {{"config", config_path}, {"data", data},
                       {"group_size", grpo_cfg.group_size}, {"clip_ratio", grpo_cfg.clip_ratio},
                       {"kl_coeff", grpo_cfg.kl_coeff},     {"adv_eps", grpo_cfg.adv_eps},
                       {"lr", grpo_cfg.lr},                 {"steps", grpo_cfg.steps},
                       {"batch_size", grpo_cfg.batch_size}, {"appr_weight", reward_cfg.appr_weight},
                       {"appr_clip", reward_cfg.appr_clip}};
    manifest.seeds = {{"seed", grpo_cfg.seed}};
    manifest.toolkit_version = carb::toolkit_version();
    manifest.output_paths = {telemetry_out};
    manifest.write(telemetry_out + ".manifest.jsonl");

    if (!telemetry.empty()) {
        const auto& last = telemetry.back();
        std::cout << "final step " << last.step << ": reward " << last.mean_reward << " accuracy "
                  << last.mean_accuracy << " entropy " << last.mean_entropy << "\n";
        std::cout << "greedy accuracy: " << policy.greedy_accuracy() << "\n";
    }
    return kExitOk;
}

int cmd_build_data(const std::string& rated_path, const std::string& thresholds_path,
                   std::uint64_t seed, const std::string& out) {
    CommonOutputs outputs(out);
    carb::pipeline::PipelineThresholds thresholds;
    if (!thresholds_path.empty()) {
        auto cfg = carb::parse_config_file(thresholds_path);
        auto get = [&](const std::string& key, double fallback) {
            auto it = cfg.find("pipeline." + key);
            if (it == cfg.end()) it = cfg.find(key);
            return it == cfg.end() ? fallback : std::stod(it->second);
        };
        thresholds.chosen_sim_min = get("chosen_sim_min", thresholds.chosen_sim_min);
        thresholds.rejected_sim_max = get("rejected_sim_max", thresholds.rejected_sim_max);
        thresholds.chosen_rating_min = get("chosen_rating_min", thresholds.chosen_rating_min);
        thresholds.rejected_window = get("rejected_window", thresholds.rejected_window);
        thresholds.max_chosen_per_query =
            static_cast<int>(get("max_chosen_per_query", thresholds.max_chosen_per_query));
    }
    thresholds.validate();

    if (!fs::exists(rated_path)) throw carb::ConfigError("rated file not found: " + rated_path);
    auto queries = carb::pipeline::load_rated_queries(rated_path);

    std::vector<carb::PreferenceExample> pairs;
    for (const auto& q : queries) {
        auto built = carb::pipeline::build_preference_pairs(q.query, q.responses, thresholds, seed);
        pairs.insert(pairs.end(), built.begin(), built.end());
    }
    carb::save_preference_examples(outputs.path("preference_pairs.jsonl"), pairs);
    std::cout << "built " << pairs.size() << " preference pairs from " << queries.size()
              << " queries\n";

    carb::RunManifest manifest;
    manifest.command = "build-data";
    manifest.started_at = manifest.finished_at = carb::timestamp_utc();
    manifest.config = {{"rated", rated_path},
                       {"chosen_sim_min", thresholds.chosen_sim_min},
                       {"rejected_sim_max", thresholds.rejected_sim_max},
                       {"chosen_rating_min", thresholds.chosen_rating_min},
                       {"rejected_window", thresholds.rejected_window},
                       {"max_chosen_per_query", thresholds.max_chosen_per_query}};
    manifest.seeds = {{"seed", seed}};
    manifest.toolkit_version = carb::toolkit_version();
    manifest.output_paths = {outputs.path("preference_pairs.jsonl")};
    manifest.write(outputs.path("manifest.jsonl"));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"culture-aware reward-model toolkit"};
    app.require_subcommand(1);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "run a reward model over BoN sets");
    std::string ev_data, ev_rm = "mock:0", ev_mode = "classifier", ev_out = "eval_out";
    std::uint64_t ev_seed = 42;
    bool ev_lenient = false, ev_plots = false;
    evaluate->add_option("--data", ev_data, "BoN sets (JSON array or JSON-lines)")->required();
    evaluate->add_option("--rm", ev_rm, "backend: mock[:seed] or http(s) URL");
    evaluate->add_option("--mode", ev_mode)->check(CLI::IsMember({"classifier", "generative"}));
    evaluate->add_option("--seed", ev_seed);
    evaluate->add_option("--out", ev_out);
    evaluate->add_flag("--lenient", ev_lenient, "skip bad records / errored items");
    evaluate->add_flag("--plots", ev_plots);

    // robustness
    auto* robustness = app.add_subcommand("robustness", "perturbation sensitivity analysis");
    std::string rb_pairs, rb_rm = "mock:0", rb_metric = "absolute", rb_out = "robustness_out";
    bool rb_plots = false;
    robustness->add_option("--pairs", rb_pairs, "perturbed pairs JSON-lines")->required();
    robustness->add_option("--rm", rb_rm);
    robustness->add_option("--metric", rb_metric)->check(CLI::IsMember({"absolute", "relative"}));
    robustness->add_option("--out", rb_out);
    robustness->add_flag("--plots", rb_plots);

    // consistency
    auto* consistency = app.add_subcommand("consistency", "cross-lingual consistency score");
    std::string cs_items, cs_rm = "mock:0", cs_out = "consistency_out";
    double cs_k = 1.0;
    consistency->add_option("--items", cs_items, "consistency items JSON-lines")->required();
    consistency->add_option("--rm", cs_rm);
    consistency->add_option("--k", cs_k, "decay temperature factor");
    consistency->add_option("--out", cs_out);

    // correlate
    auto* correlate = app.add_subcommand("correlate", "benchmark-vs-downstream correlation");
    std::string cr_rankings, cr_out = "correlate_out";
    correlate->add_option("--rankings", cr_rankings, "rankings JSON file")->required();
    correlate->add_option("--out", cr_out);

    // train
    auto* train = app.add_subcommand("train", "GRPO training on the built-in toy judge");
    std::string tr_config, tr_data = "toy:256", tr_out = "telemetry.csv";
    train->add_option("--config", tr_config, "key = value config file");
    train->add_option("--data", tr_data, "preference JSON-lines, or toy[:N]");
    train->add_option("--telemetry-out", tr_out);

    // build-data
    auto* build = app.add_subcommand("build-data", "rated responses -> preference pairs");
    std::string bd_rated, bd_thresholds, bd_out = "build_out";
    std::uint64_t bd_seed = 0;
    build->add_option("--rated", bd_rated, "rated queries JSON-lines")->required();
    build->add_option("--thresholds", bd_thresholds, "thresholds config file");
    build->add_option("--seed", bd_seed);
    build->add_option("--out", bd_out);

    try {
        app.parse(argc, argv);
        if (*evaluate)
            return cmd_evaluate(ev_data, ev_rm, ev_mode, ev_seed, ev_out, !ev_lenient, ev_plots);
        if (*robustness) return cmd_robustness(rb_pairs, rb_rm, rb_metric, rb_out, rb_plots);
        if (*consistency) return cmd_consistency(cs_items, cs_rm, cs_k, cs_out);
        if (*correlate) return cmd_correlate(cr_rankings, cr_out);
        if (*train) return cmd_train(tr_config, tr_data, tr_out);
        if (*build) return cmd_build_data(bd_rated, bd_thresholds, bd_seed, bd_out);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    } catch (const carb::BackendUnavailable& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return kExitBackend;
    } catch (const carb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
