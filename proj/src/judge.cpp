#include "carb/judge.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace carb::judge {

namespace {

const char* kNumberWords[] = {"zero", "one",  "two", "three", "four", "five",
                              "six",  "seven", "eight", "nine", "ten"};

std::string number_word(int n) {
    if (n >= 0 && n <= 10) return kNumberWords[n];
    return std::to_string(n);
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

const std::string& eval_template_4way() {
    static const std::string t =
        "Please act as an impartial judge and evaluate the quality of the responses provided "
        "by four AI assistants to the user question displayed below. The question provided is "
        "in {language}. You should choose the assistant that follows the user's instructions "
        "and answers the user's question best. Your evaluation should consider features such "
        "as the helpfulness, relevance, accuracy, depth, creativity, and level of detail of "
        "their responses. Also, make sure that the assistant responses are in {language}. "
        "More importantly, assess whether each response demonstrates appropriate cultural "
        "awareness for {culture}, including cultural commonsense knowledge, values, norms, "
        "ethical standards, cultural sensitivity, safety, biases, and linguistic nuances. "
        "Begin your evaluation by comparing the four responses and provide a short "
        "explanation. Avoid any position biases and ensure that the order in which the "
        "responses were presented does not influence your decision. Do not allow the length "
        "of the responses to influence your evaluation. Do not favor certain names of the "
        "assistants. Be as objective as possible. After providing your explanation, output "
        "your final verdict by strictly following this format: \"[[A]]\" if assistant A is "
        "best, \"[[B]]\" if assistant B is best, \"[[C]]\" if assistant C is best, and "
        "\"[[D]]\" if assistant D is best.";
    return t;
}

const std::string& rollout_system_prompt() {
    static const std::string t =
        "Please act as an impartial judge and evaluate the quality of the responses provided "
        "by two AI Chatbots to the Client's question displayed below.\n"
        "\n"
        "First, classify the task into one of two categories: <type>Reasoning</type> or "
        "<type>Chat</type>.\n"
        "\n"
        "* Use <type>Reasoning</type> for tasks that involve math, coding, or require domain "
        "knowledge, multi-step inference, logical deduction, or combining information to "
        "reach a conclusion.\n"
        "\n"
        "* Use <type>Chat</type> for tasks that involve open-ended or factual conversation, "
        "stylistic rewrites, safety questions, cultural sensitivity, or general helpfulness "
        "requests without deep reasoning.\n"
        "\n"
        "If the task is Reasoning:\n"
        "\n"
        "1. Solve the Client's question yourself and present your final answer within "
        "<solution>...</solution> tags.\n"
        "\n"
        "2. Evaluate the two Chatbot responses based on correctness, completeness, and "
        "reasoning quality, referencing your own solution.\n"
        "\n"
        "3. Include your evaluation inside <eval>...</eval> tags, quoting or summarizing the "
        "Chatbots using the following tags:\n"
        "\n"
        "   * <quote_A>...</quote_A> for direct quotes from Chatbot A\n"
        "\n"
        "   * <summary_A>...</summary_A> for paraphrases of Chatbot A\n"
        "\n"
        "   * <quote_B>...</quote_B> for direct quotes from Chatbot B\n"
        "\n"
        "   * <summary_B>...</summary_B> for paraphrases of Chatbot B\n"
        "\n"
        "4. End with your final judgment in the format: <answer>[[A]]</answer> or "
        "<answer>[[B]]</answer>\n"
        "\n"
        "If the task is Chat:\n"
        "\n"
        "1. Generate evaluation criteria (rubric) tailored to the Client's question and "
        "context, enclosed in <rubric>...</rubric> tags.\n"
        "\n"
        "2. Ensure the rubric includes not only clarity, relevance, tone, and helpfulness, "
        "but also **cultural awareness, fairness, and preference-sensitive judgment** where "
        "applicable.\n"
        "\n"
        "3. Assign weights to each rubric item based on their relative importance.\n"
        "\n"
        "4. Inside <rubric>, include a <justify>...</justify> section explaining why you "
        "chose those rubric criteria and weights, with explicit mention of cultural "
        "sensitivity and audience appropriateness if relevant.\n"
        "\n"
        "5. Compare both Chatbot responses according to the rubric.\n"
        "\n"
        "6. Provide your evaluation inside <eval>...</eval> tags, using <quote_A>, "
        "<summary_A>, <quote_B>, and <summary_B> as described above.\n"
        "\n"
        "7. End with your final judgment in the format: <answer>[[A]]</answer> or "
        "<answer>[[B]]</answer>\n"
        "\n"
        "Important Notes:\n"
        "\n"
        "* Be objective and base your evaluation only on the content of the responses.\n"
        "\n"
        "* Do not let response order, length, or Chatbot names affect your judgment.\n"
        "\n"
        "* When applicable, prioritize fairness, inclusivity, and cultural awareness in the "
        "Chat evaluation.\n"
        "\n"
        "* Follow the response format strictly depending on the task type.\n"
        "\n"
        "Your output must follow one of the two formats below:\n"
        "\n"
        "For Reasoning: <type>Reasoning</type>\n"
        "\n"
        "<solution> your own solution for the problem </solution>\n"
        "\n"
        "<eval>\n"
        "\n"
        "  include direct comparisons supported by <quote_A>...</quote_A> or "
        "<summary_A>...</summary_A>, and <quote_B>...</quote_B>, or "
        "<summary_B>...</summary_B>\n"
        "\n"
        "</eval>\n"
        "\n"
        "<answer>[[A/B]]</answer>\n"
        "\n"
        "For Chat: <type>Chat</type>\n"
        "\n"
        "<rubric>\n"
        "\n"
        "  detailed rubric items including clarity, relevance, tone, helpfulness, and (if "
        "applicable) cultural awareness and preference sensitivity\n"
        "\n"
        "  <justify> justification for the rubric </justify>\n"
        "\n"
        "</rubric>\n"
        "\n"
        "<eval>\n"
        "\n"
        "  include direct comparisons supported by <quote_A>...</quote_A> or "
        "<summary_A>...</summary_A>, and <quote_B>...</quote_B>, or "
        "<summary_B>...</summary_B> tags\n"
        "\n"
        "</eval>\n"
        "\n"
        "<answer>[[A/B]]</answer>";
    return t;
}

std::vector<int> seeded_permutation(int n, std::uint64_t seed) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::uint64_t state = seed;
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

int PromptBundle::original_index(char letter) const {
    int pos = letter - 'A';
    if (pos < 0 || pos >= static_cast<int>(candidate_order.size()))
        throw WrongArity(std::string("letter ") + letter + " outside candidate order");
    return candidate_order[pos];
}

PromptBundle build_eval_prompt(const BoNSet& set, std::uint64_t seed) {
    int n = set.total_completions;
    if (n < 2 || n > 26) throw WrongArity("eval prompt supports 2..26 candidates, got " +
                                          std::to_string(n));

    PromptBundle bundle;
    bundle.seed = seed;
    bundle.candidate_order = seeded_permutation(n, seed);

    std::string culture = set.additional_metadata.contains("culture") &&
                                  set.additional_metadata["culture"].is_string()
                              ? set.additional_metadata["culture"].get<std::string>()
                              : (set.country ? *set.country : set.language);

    if (n == 4) {
        bundle.template_id = "carb-eval-4way-v1";
        bundle.system_prompt = replace_all(
            replace_all(eval_template_4way(), "{language}", set.language), "{culture}", culture);
    } else {
        // Generalized arity: same instructions with the count and verdict
        // format rewritten for n letters.
        bundle.template_id = "carb-eval-nway-v1";
        std::string t = eval_template_4way();
        t = replace_all(t, "four AI assistants", number_word(n) + " AI assistants");
        t = replace_all(t, "comparing the four responses",
                        "comparing the " + number_word(n) + " responses");
        std::ostringstream format;
        for (int i = 0; i < n; ++i) {
            char letter = static_cast<char>('A' + i);
            if (i) format << (i + 1 == n ? ", and " : ", ");
            format << "\"[[" << letter << "]]\" if assistant " << letter << " is best";
        }
        format << ".";
        size_t pos = t.find("\"[[A]]\"");
        t = t.substr(0, pos) + format.str();
        t = replace_all(t, "{language}", set.language);
        t = replace_all(t, "{culture}", culture);
        bundle.system_prompt = t;
    }

    auto candidates = set.candidates();
    std::ostringstream user;
    user << "[User Question]\n" << set.prompt << "\n";
    for (int pos = 0; pos < n; ++pos) {
        char letter = static_cast<char>('A' + pos);
        user << "\n[The Start of Assistant " << letter << "'s Answer]\n"
             << candidates[bundle.candidate_order[pos]] << "\n[The End of Assistant " << letter
             << "'s Answer]\n";
    }
    bundle.user_prompt = user.str();
    return bundle;
}

PromptBundle build_rollout_prompt(const PreferenceExample& example) {
    PromptBundle bundle;
    bundle.template_id = "rlvr-rollout-v1";
    bundle.system_prompt = rollout_system_prompt();
    bundle.candidate_order = {0, 1};
    std::ostringstream user;
    user << "[Client Question]\n" << example.q << "\n"
         << "\n[The Start of Chatbot A's Response]\n" << example.y1
         << "\n[The End of Chatbot A's Response]\n"
         << "\n[The Start of Chatbot B's Response]\n" << example.y2
         << "\n[The End of Chatbot B's Response]\n";
    bundle.user_prompt = user.str();
    return bundle;
}

namespace {

struct Match {
    size_t pos;
    char letter;
};

std::vector<Match> find_bracket_verdicts(const std::string& raw) {
    std::vector<Match> out;
    size_t pos = 0;
    while ((pos = raw.find("[[", pos)) != std::string::npos) {
        if (pos + 4 < raw.size() && raw[pos + 3] == ']' && raw[pos + 4] == ']' &&
            raw[pos + 2] >= 'A' && raw[pos + 2] <= 'Z') {
            out.push_back({pos, raw[pos + 2]});
            pos += 5;
        } else {
            pos += 2;
        }
    }
    return out;
}

std::optional<std::string> span_between(const std::string& raw, const std::string& open,
                                        const std::string& close) {
    size_t a = raw.find(open);
    if (a == std::string::npos) return std::nullopt;
    a += open.size();
    size_t b = raw.find(close, a);
    if (b == std::string::npos) return std::nullopt;
    return raw.substr(a, b - a);
}

}  // namespace

VerdictResult parse_verdict(const std::string& raw, int arity) {
    auto matches = find_bracket_verdicts(raw);

    // Prefer matches that sit inside <answer>...</answer>.
    std::vector<Match> in_answer;
    size_t pos = 0;
    while ((pos = raw.find("<answer>", pos)) != std::string::npos) {
        size_t start = pos + 8;
        size_t end = raw.find("</answer>", start);
        if (end == std::string::npos) end = raw.size();
        for (const auto& m : matches)
            if (m.pos >= start && m.pos < end) in_answer.push_back(m);
        pos = start;
    }
    const std::vector<Match>& pool = in_answer.empty() ? matches : in_answer;

    VerdictResult result;
    if (pool.empty()) {
        result.failure = VerdictResult::Failure::NoPattern;
        return result;
    }
    char letter = pool.back().letter;
    if (letter - 'A' >= arity) {
        result.failure = VerdictResult::Failure::ArityViolation;
        return result;
    }
    result.verdict = letter;
    return result;
}

JudgmentTrace parse_trace(const std::string& raw) {
    JudgmentTrace trace;
    trace.raw_text = raw;

    if (auto type_span = span_between(raw, "<type>", "</type>")) {
        if (*type_span == "Reasoning") trace.task_type = TaskType::Reasoning;
        else if (*type_span == "Chat") trace.task_type = TaskType::Chat;
    }
    trace.rubric_span = span_between(raw, "<rubric>", "</rubric>");
    trace.eval_span = span_between(raw, "<eval>", "</eval>");

    auto verdict = parse_verdict(raw, 4);
    if (verdict.ok()) {
        trace.verdict = verdict.verdict;
        trace.parse_ok = true;
    }
    return trace;
}

std::string render_answer(char verdict) {
    return std::string("<answer>[[") + verdict + "]]</answer>";
}

}  // namespace carb::judge
