#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtp/curriculum.hpp"

namespace vtp {

inline constexpr const char* kAbstain = "ABSTAIN";

/// Keyword/negation table mapping free-text answers to task labels.
/// Editable data files under data/verbalizer/ mirror the builtins.
struct RuleTable {
    struct Rule {
        std::string label;
        std::vector<std::string> patterns; // phrases, tokenized on load
        std::string negated_label;         // label when a negation precedes
    };

    std::string task;
    std::vector<std::string> schema;
    std::vector<Rule> rules;
    std::vector<std::string> negation_tokens;
    size_t negation_window = 3;

    nlohmann::json to_json() const;
    static RuleTable from_json(const nlohmann::json& j);
    static RuleTable load(const std::filesystem::path& path);
    /// Built-in tables for the classification tasks (CVSA, DFA, AEA, SPA).
    static RuleTable builtin(Task task);
};

struct VerbalizedLabel {
    enum class Source { rule, external_judge };

    std::string record_id;
    std::string label = kAbstain;
    Source source = Source::rule;
    std::string warning; // set when an external client failed

    bool abstained() const { return label == kAbstain; }
};

/// Optional external fallback for answers the rules cannot settle.
class LabelClient {
  public:
    virtual ~LabelClient() = default;
    virtual std::optional<std::string> classify(const std::string& answer,
                                                const std::vector<std::string>& schema) = 0;
};

/// Rule pass first; if inconclusive and a client is configured, ask it;
/// otherwise ABSTAIN. Client failures degrade to ABSTAIN with a warning.
VerbalizedLabel verbalize(const std::string& record_id, const std::string& answer,
                          const RuleTable& table, LabelClient* client = nullptr);

struct ClassStats {
    size_t support = 0; // reference count
    size_t predicted = 0;
    size_t true_positive = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// ABSTAIN predictions are excluded from the confusion counts but count
/// against the answer rate; records whose reference failed to verbalize are
/// excluded entirely and reported separately. bAcc averages recall over
/// classes with support; macro-F1 averages over the full schema.
struct ClassificationReport {
    size_t total = 0;    // records with a verbalized reference
    size_t answered = 0; // non-ABSTAIN predictions among them
    double answer_rate = 0.0;
    double balanced_accuracy = 0.0;
    double macro_f1 = 0.0;
    size_t ref_unverbalized = 0;
    std::map<std::string, ClassStats> per_class;

    nlohmann::json to_json() const;
};

double f1_from_pr(double precision, double recall);

ClassificationReport classification_metrics(
    const std::vector<std::pair<VerbalizedLabel, VerbalizedLabel>>& pred_ref,
    const std::vector<std::string>& schema);

} // namespace vtp
