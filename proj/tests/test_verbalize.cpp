#include <doctest.h>

#include "vtp/error.hpp"
#include "vtp/verbalize.hpp"

using namespace vtp;

namespace {

VerbalizedLabel label_of(const std::string& text) {
    VerbalizedLabel v;
    v.record_id = "r";
    v.label = text;
    return v;
}

class FixedClient : public LabelClient {
  public:
    explicit FixedClient(std::optional<std::string> reply, bool throws = false)
        : reply_(std::move(reply)), throws_(throws) {}
    std::optional<std::string> classify(const std::string&,
                                        const std::vector<std::string>&) override {
        if (throws_) throw std::runtime_error("connection refused");
        ++calls;
        return reply_;
    }
    int calls = 0;

  private:
    std::optional<std::string> reply_;
    bool throws_;
};

} // namespace

TEST_CASE("cvsa rules label an affirmative answer") {
    RuleTable table = RuleTable::builtin(Task::CVSA);
    VerbalizedLabel v =
        verbalize("r1", "Yes, the criterion is achieved because both structures "
                        "are clearly exposed.",
                  table);
    CHECK(v.label == "achieved");
    CHECK(v.source == VerbalizedLabel::Source::rule);
}

TEST_CASE("an unclear answer abstains") {
    RuleTable table = RuleTable::builtin(Task::CVSA);
    VerbalizedLabel v = verbalize("r2", "It is unclear.", table);
    CHECK(v.label == kAbstain);
    CHECK(v.abstained());
}

TEST_CASE("negation scope flips the label") {
    RuleTable table = RuleTable::builtin(Task::CVSA);
    VerbalizedLabel v =
        verbalize("r3", "The critical view is not achieved in this clip.", table);
    CHECK(v.label == "not_achieved");
}

TEST_CASE("conflicting votes abstain rather than guess") {
    RuleTable table = RuleTable::builtin(Task::CVSA);
    VerbalizedLabel v = verbalize(
        "r4", "The first criterion is achieved but the second is not achieved.", table);
    CHECK(v.label == kAbstain);
}

TEST_CASE("the external client resolves inconclusive answers") {
    RuleTable table = RuleTable::builtin(Task::CVSA);
    FixedClient client(std::string("achieved"));
    VerbalizedLabel v = verbalize("r5", "Hard to say from this view.", table, &client);
    CHECK(v.label == "achieved");
    CHECK(v.source == VerbalizedLabel::Source::external_judge);
    CHECK(client.calls == 1);
}

TEST_CASE("client answers outside the schema are discarded") {
    RuleTable table = RuleTable::builtin(Task::CVSA);
    FixedClient client(std::string("banana"));
    VerbalizedLabel v = verbalize("r6", "Hard to say.", table, &client);
    CHECK(v.label == kAbstain);
}

TEST_CASE("client transport failure degrades to abstain with a warning") {
    RuleTable table = RuleTable::builtin(Task::CVSA);
    FixedClient client(std::nullopt, /*throws=*/true);
    VerbalizedLabel v = verbalize("r7", "Hard to say.", table, &client);
    CHECK(v.label == kAbstain);
    CHECK(!v.warning.empty());
}

TEST_CASE("rule tables round trip through json") {
    RuleTable table = RuleTable::builtin(Task::DFA);
    RuleTable back = RuleTable::from_json(table.to_json());
    CHECK(back.schema == table.schema);
    CHECK(back.rules.size() == table.rules.size());
    CHECK(back.negation_tokens == table.negation_tokens);
    VerbalizedLabel v = verbalize("r8", "Dense adhesions are present.", back);
    CHECK(v.label == "present");
}

TEST_CASE("rule tables reject labels outside the schema") {
    nlohmann::json j{{"schema", {"a"}},
                     {"rules", {{{"label", "b"}, {"patterns", {"b"}}}}}};
    CHECK_THROWS_AS(RuleTable::from_json(j), InvalidInput);
}

TEST_CASE("perfect balanced predictions score one with full answer rate") {
    std::vector<std::pair<VerbalizedLabel, VerbalizedLabel>> pairs;
    for (int i = 0; i < 5; ++i) pairs.emplace_back(label_of("a"), label_of("a"));
    for (int i = 0; i < 5; ++i) pairs.emplace_back(label_of("b"), label_of("b"));
    ClassificationReport r = classification_metrics(pairs, {"a", "b"});
    CHECK(r.balanced_accuracy == doctest::Approx(1.0));
    CHECK(r.macro_f1 == doctest::Approx(1.0));
    CHECK(r.answer_rate == doctest::Approx(1.0));
}

TEST_CASE("balanced accuracy is the mean of sensitivity and specificity") {
    // positive class: 10 refs, 8 recalled; negative class: 10 refs, 5 recalled
    std::vector<std::pair<VerbalizedLabel, VerbalizedLabel>> pairs;
    for (int i = 0; i < 8; ++i) pairs.emplace_back(label_of("pos"), label_of("pos"));
    for (int i = 0; i < 2; ++i) pairs.emplace_back(label_of("neg"), label_of("pos"));
    for (int i = 0; i < 5; ++i) pairs.emplace_back(label_of("neg"), label_of("neg"));
    for (int i = 0; i < 5; ++i) pairs.emplace_back(label_of("pos"), label_of("neg"));
    ClassificationReport r = classification_metrics(pairs, {"pos", "neg"});
    CHECK(r.per_class["pos"].recall == doctest::Approx(0.8));
    CHECK(r.per_class["neg"].recall == doctest::Approx(0.5));
    CHECK(r.balanced_accuracy == doctest::Approx(0.65).epsilon(1e-12));
}

TEST_CASE("macro f1 averages the per-class harmonic means") {
    // class A: P=0.5, R=1.0 -> F1 = 2/3; class B perfect -> F1 = 1
    CHECK(f1_from_pr(0.5, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(f1_from_pr(1.0, 1.0) == doctest::Approx(1.0));
    CHECK((f1_from_pr(0.5, 1.0) + f1_from_pr(1.0, 1.0)) / 2.0 ==
          doctest::Approx(5.0 / 6.0).epsilon(1e-12));

    // realized with a third class absorbing the false positive
    std::vector<std::pair<VerbalizedLabel, VerbalizedLabel>> pairs;
    pairs.emplace_back(label_of("a"), label_of("a"));
    pairs.emplace_back(label_of("a"), label_of("c"));
    pairs.emplace_back(label_of("b"), label_of("b"));
    ClassificationReport r = classification_metrics(pairs, {"a", "b", "c"});
    CHECK(r.per_class["a"].precision == doctest::Approx(0.5));
    CHECK(r.per_class["a"].recall == doctest::Approx(1.0));
    CHECK(r.per_class["a"].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.per_class["b"].f1 == doctest::Approx(1.0));
    CHECK(r.per_class["c"].f1 == doctest::Approx(0.0));
    CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 1.0 + 0.0) / 3.0).epsilon(1e-12));
}

TEST_CASE("abstentions hit the answer rate but not the score") {
    std::vector<std::pair<VerbalizedLabel, VerbalizedLabel>> pairs;
    pairs.emplace_back(label_of("a"), label_of("a"));
    pairs.emplace_back(label_of(kAbstain), label_of("a"));
    pairs.emplace_back(label_of("b"), label_of("b"));
    pairs.emplace_back(label_of(kAbstain), label_of("b"));
    ClassificationReport r = classification_metrics(pairs, {"a", "b"});
    CHECK(r.total == 4);
    CHECK(r.answered == 2);
    CHECK(r.answer_rate == doctest::Approx(0.5));
    CHECK(r.balanced_accuracy == doctest::Approx(1.0));
    CHECK(r.macro_f1 == doctest::Approx(1.0));
    // answer_rate * total equals the non-abstain count exactly
    CHECK(r.answer_rate * double(r.total) == doctest::Approx(2.0));
}

TEST_CASE("classification is record-order invariant and label-renaming covariant") {
    std::vector<std::pair<VerbalizedLabel, VerbalizedLabel>> pairs;
    for (int i = 0; i < 6; ++i) pairs.emplace_back(label_of("x"), label_of("x"));
    for (int i = 0; i < 3; ++i) pairs.emplace_back(label_of("y"), label_of("x"));
    for (int i = 0; i < 4; ++i) pairs.emplace_back(label_of("y"), label_of("y"));
    ClassificationReport base = classification_metrics(pairs, {"x", "y"});

    std::reverse(pairs.begin(), pairs.end());
    ClassificationReport shuffled = classification_metrics(pairs, {"x", "y"});
    CHECK(shuffled.balanced_accuracy == base.balanced_accuracy);
    CHECK(shuffled.macro_f1 == base.macro_f1);
    CHECK(shuffled.answer_rate == base.answer_rate);

    // renaming every label consistently leaves the scores unchanged
    std::vector<std::pair<VerbalizedLabel, VerbalizedLabel>> renamed;
    for (auto& [pred, ref] : pairs) {
        auto swap_label = [](VerbalizedLabel v) {
            v.label = v.label == "x" ? "u" : "v";
            return v;
        };
        renamed.emplace_back(swap_label(pred), swap_label(ref));
    }
    ClassificationReport covariant = classification_metrics(renamed, {"u", "v"});
    CHECK(covariant.balanced_accuracy == base.balanced_accuracy);
    CHECK(covariant.macro_f1 == base.macro_f1);
}

TEST_CASE("unverbalizable references are excluded and reported") {
    std::vector<std::pair<VerbalizedLabel, VerbalizedLabel>> pairs;
    pairs.emplace_back(label_of("a"), label_of("a"));
    pairs.emplace_back(label_of("a"), label_of(kAbstain));
    ClassificationReport r = classification_metrics(pairs, {"a", "b"});
    CHECK(r.total == 1);
    CHECK(r.ref_unverbalized == 1);
    CHECK(r.answer_rate == doctest::Approx(1.0));
}
