#include "vtp/verbalize.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "vtp/error.hpp"
#include "vtp/metrics.hpp"

namespace vtp {

nlohmann::json RuleTable::to_json() const {
    nlohmann::json rule_arr = nlohmann::json::array();
    for (const Rule& r : rules) {
        nlohmann::json rj{{"label", r.label}, {"patterns", r.patterns}};
        if (!r.negated_label.empty()) rj["negated_label"] = r.negated_label;
        rule_arr.push_back(rj);
    }
    return {{"task", task},
            {"schema", schema},
            {"rules", rule_arr},
            {"negation_tokens", negation_tokens},
            {"negation_window", negation_window}};
}

RuleTable RuleTable::from_json(const nlohmann::json& j) {
    RuleTable t;
    t.task = j.value("task", std::string());
    t.schema = j.at("schema").get<std::vector<std::string>>();
    if (t.schema.empty()) throw InvalidInput("verbalizer: empty schema");
    for (const auto& rj : j.at("rules")) {
        Rule r;
        r.label = rj.at("label").get<std::string>();
        r.patterns = rj.at("patterns").get<std::vector<std::string>>();
        r.negated_label = rj.value("negated_label", std::string());
        if (std::find(t.schema.begin(), t.schema.end(), r.label) == t.schema.end())
            throw InvalidInput("verbalizer: rule label outside schema");
        t.rules.push_back(std::move(r));
    }
    t.negation_tokens = j.value("negation_tokens", std::vector<std::string>());
    t.negation_window = j.value("negation_window", size_t(3));
    return t;
}

RuleTable RuleTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("verbalizer: cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw InvalidInput("verbalizer: bad JSON in " + path.string());
    return from_json(j);
}

static const std::vector<std::string>& default_negations() {
    static const std::vector<std::string> kNeg = {
        "not",  "no",    "never",  "cannot", "without", "isn",    "aren",
        "wasn", "weren", "don",    "doesn",  "didn",    "hasn",   "haven",
        "hadn", "won",   "wouldn", "couldn", "shouldn", "unable", "fails"};
    return kNeg;
}

RuleTable RuleTable::builtin(Task task) {
    RuleTable t;
    t.task = to_string(task);
    t.negation_tokens = default_negations();
    switch (task) {
    case Task::CVSA:
        t.schema = {"achieved", "not_achieved"};
        t.rules = {{"achieved",
                    {"achieved", "is met", "are met", "criterion met", "satisfied",
                     "fulfilled", "yes"},
                    "not_achieved"},
                   {"not_achieved",
                    {"not achieved", "not met", "unmet", "unsatisfied", "failed"},
                    ""}};
        break;
    case Task::DFA:
        t.schema = {"present", "absent"};
        t.rules = {{"present",
                    {"present", "observed", "identified", "visible", "difficulty found",
                     "adhesions", "yes"},
                    "absent"},
                   {"absent", {"absent", "no difficulty", "none", "unremarkable"}, ""}};
        break;
    case Task::AEA:
        t.schema = {"event", "no_event"};
        t.rules = {{"event",
                    {"bleeding", "injury", "adverse event", "perforation", "burn",
                     "complication"},
                    "no_event"},
                   {"no_event", {"no adverse", "uneventful", "no complication"}, ""}};
        break;
    case Task::SPA:
        t.schema = {"proficient", "not_proficient"};
        t.rules = {{"proficient",
                    {"proficient", "skilled", "competent", "good technique", "expert"},
                    "not_proficient"},
                   {"not_proficient",
                    {"not proficient", "poor technique", "novice", "unskilled",
                     "inadequate"},
                    ""}};
        break;
    default:
        throw InvalidInput("verbalizer: no builtin table for task " + to_string(task));
    }
    return t;
}

namespace {

// Occurrences of the pattern token sequence inside the answer tokens.
std::vector<size_t> find_pattern(const TokenList& tokens, const TokenList& pattern) {
    std::vector<size_t> hits;
    if (pattern.empty() || tokens.size() < pattern.size()) return hits;
    for (size_t i = 0; i + pattern.size() <= tokens.size(); ++i) {
        bool ok = true;
        for (size_t k = 0; k < pattern.size(); ++k)
            if (tokens[i + k] != pattern[k]) {
                ok = false;
                break;
            }
        if (ok) hits.push_back(i);
    }
    return hits;
}

} // namespace

VerbalizedLabel verbalize(const std::string& record_id, const std::string& answer,
                          const RuleTable& table, LabelClient* client) {
    if (table.schema.empty()) throw InvalidInput("verbalize: empty schema");

    VerbalizedLabel out;
    out.record_id = record_id;

    TokenList tokens = tokenize_simple(answer);
    std::set<std::string> votes;
    for (const RuleTable::Rule& rule : table.rules) {
        for (const std::string& phrase : rule.patterns) {
            TokenList pattern = tokenize_simple(phrase);
            for (size_t pos : find_pattern(tokens, pattern)) {
                size_t lo = pos > table.negation_window ? pos - table.negation_window : 0;
                bool negated = false;
                for (size_t i = lo; i < pos && !negated; ++i)
                    negated = std::find(table.negation_tokens.begin(),
                                        table.negation_tokens.end(),
                                        tokens[i]) != table.negation_tokens.end();
                if (!negated)
                    votes.insert(rule.label);
                else if (!rule.negated_label.empty())
                    votes.insert(rule.negated_label);
            }
        }
    }

    if (votes.size() == 1) {
        out.label = *votes.begin();
        out.source = VerbalizedLabel::Source::rule;
        return out;
    }

    if (client != nullptr) {
        try {
            std::optional<std::string> label = client->classify(answer, table.schema);
            if (label && std::find(table.schema.begin(), table.schema.end(), *label) !=
                             table.schema.end()) {
                out.label = *label;
                out.source = VerbalizedLabel::Source::external_judge;
                return out;
            }
            if (!label) out.warning = "external verbalizer returned no label";
        } catch (const std::exception& e) {
            out.warning = std::string("external verbalizer failed: ") + e.what();
        }
    }
    out.label = kAbstain;
    return out;
}

double f1_from_pr(double precision, double recall) {
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

nlohmann::json ClassificationReport::to_json() const {
    nlohmann::json classes;
    for (const auto& [label, st] : per_class)
        classes[label] = {{"support", st.support},
                          {"predicted", st.predicted},
                          {"true_positive", st.true_positive},
                          {"precision", st.precision},
                          {"recall", st.recall},
                          {"f1", st.f1}};
    return {{"total", total},
            {"answered", answered},
            {"answer_rate", answer_rate},
            {"balanced_accuracy", balanced_accuracy},
            {"macro_f1", macro_f1},
            {"ref_unverbalized", ref_unverbalized},
            {"per_class", classes}};
}

ClassificationReport classification_metrics(
    const std::vector<std::pair<VerbalizedLabel, VerbalizedLabel>>& pred_ref,
    const std::vector<std::string>& schema) {
    if (schema.empty()) throw InvalidInput("classification: empty schema");

    ClassificationReport report;
    for (const std::string& label : schema) report.per_class[label] = ClassStats{};

    for (const auto& [pred, ref] : pred_ref) {
        if (ref.abstained()) {
            ++report.ref_unverbalized;
            continue;
        }
        auto ref_it = report.per_class.find(ref.label);
        if (ref_it == report.per_class.end())
            throw InvalidInput("classification: reference label outside schema");
        ++report.total;
        if (pred.abstained()) continue; // counted against the rate, not the score
        ++report.answered;
        ++ref_it->second.support;
        auto pred_it = report.per_class.find(pred.label);
        if (pred_it == report.per_class.end())
            throw InvalidInput("classification: predicted label outside schema");
        ++pred_it->second.predicted;
        if (pred.label == ref.label) ++ref_it->second.true_positive;
    }

    report.answer_rate =
        report.total == 0 ? 0.0 : double(report.answered) / double(report.total);

    double recall_sum = 0.0, f1_sum = 0.0;
    size_t recall_classes = 0;
    for (auto& [label, st] : report.per_class) {
        st.precision = st.predicted == 0
                           ? 0.0
                           : double(st.true_positive) / double(st.predicted);
        st.recall = st.support == 0 ? 0.0 : double(st.true_positive) / double(st.support);
        st.f1 = f1_from_pr(st.precision, st.recall);
        if (st.support > 0) {
            recall_sum += st.recall;
            ++recall_classes;
        }
        f1_sum += st.f1;
    }
    report.balanced_accuracy =
        recall_classes == 0 ? 0.0 : recall_sum / double(recall_classes);
    report.macro_f1 = f1_sum / double(schema.size());
    return report;
}

} // namespace vtp
