#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "vtp/curriculum.hpp"
#include "vtp/error.hpp"
#include "vtp/rng.hpp"

using namespace vtp;

namespace {

QARecord make_record(const std::string& id, Task task) {
    QARecord r;
    r.id = id;
    r.video_ref = "vid_" + id;
    r.question = "q";
    r.answer = "a";
    r.task = task;
    return r;
}

std::vector<QARecord> manifest_with_sizes(size_t n1, size_t n2, size_t n3) {
    std::vector<QARecord> m;
    const Task stage1[] = {Task::TP, Task::AP, Task::ASP};
    const Task stage2[] = {Task::CVSA, Task::DFA, Task::AEA, Task::SPA};
    const Task stage3[] = {Task::SSD, Task::ARR, Task::CA, Task::IP};
    for (size_t i = 0; i < n1; ++i)
        m.push_back(make_record("p" + std::to_string(i), stage1[i % 3]));
    for (size_t i = 0; i < n2; ++i)
        m.push_back(make_record("a" + std::to_string(i), stage2[i % 4]));
    for (size_t i = 0; i < n3; ++i)
        m.push_back(make_record("r" + std::to_string(i), stage3[i % 4]));
    return m;
}

} // namespace

TEST_CASE("tasks map onto their hierarchy stages") {
    CHECK(stage_of(Task::CVSA) == 2); // assessment
    CHECK(stage_of(Task::TP) == 1);   // perception
    CHECK(stage_of(Task::IP) == 3);   // reasoning
}

TEST_CASE("one record per task partitions into sizes 3, 4, 4") {
    std::vector<QARecord> manifest;
    for (Task t : {Task::TP, Task::AP, Task::ASP, Task::CVSA, Task::DFA, Task::AEA,
                   Task::SPA, Task::SSD, Task::ARR, Task::CA, Task::IP})
        manifest.push_back(make_record(to_string(t), t));
    StagePartition parts = partition_by_stage(manifest);
    CHECK(parts.stage(1).size() == 3);
    CHECK(parts.stage(2).size() == 4);
    CHECK(parts.stage(3).size() == 4);
}

TEST_CASE("partition covers the manifest disjointly") {
    std::vector<QARecord> manifest = manifest_with_sizes(13, 17, 9);
    StagePartition parts = partition_by_stage(manifest);
    std::set<std::string> seen;
    size_t total = 0;
    for (int k = 1; k <= 3; ++k)
        for (const QARecord& r : parts.stage(k)) {
            seen.insert(r.id);
            ++total;
        }
    CHECK(total == manifest.size());
    CHECK(seen.size() == manifest.size());
}

TEST_CASE("manifest parsing rejects unknown task tags") {
    std::istringstream in(
        R"({"id":"x","task":"TP","subset":"endoscapes","split":"train"})"
        "\n"
        R"({"id":"y","task":"NOPE"})"
        "\n");
    CHECK_THROWS_AS(parse_manifest_lines(in), InvalidInput);
}

TEST_CASE("manifest round trips through jsonl") {
    std::vector<QARecord> manifest = manifest_with_sizes(2, 2, 2);
    manifest[0].subset = Subset::endoscapes;
    manifest[0].split = Split::test;
    manifest[0].duration_s = 12.5;
    std::ostringstream out;
    for (const QARecord& r : manifest) out << r.to_json().dump() << '\n';
    std::istringstream in(out.str());
    std::vector<QARecord> back = parse_manifest_lines(in);
    REQUIRE(back.size() == manifest.size());
    CHECK(back[0].id == manifest[0].id);
    CHECK(back[0].subset == Subset::endoscapes);
    CHECK(back[0].split == Split::test);
    CHECK(back[0].duration_s == 12.5);
}

TEST_CASE("stage two effective set takes a quarter of perception and all assessment") {
    std::vector<QARecord> manifest = manifest_with_sizes(1000, 500, 100);
    StagePartition parts = partition_by_stage(manifest);
    LambdaMatrix lambda;
    lambda.set(2, 1, 0.25);
    StagePlan plan = effective_set(2, parts, lambda, 7);
    CHECK(plan.counts[0] == 250);
    CHECK(plan.counts[1] == 500);
    CHECK(plan.total() == 750);
    CHECK(plan.ordered_ids.size() == 750);
}

TEST_CASE("stage one effective set is exactly the perception partition") {
    std::vector<QARecord> manifest = manifest_with_sizes(40, 25, 10);
    StagePartition parts = partition_by_stage(manifest);
    StagePlan plan = effective_set(1, parts, LambdaMatrix::defaults(), 3);
    CHECK(plan.counts[0] == 40);
    CHECK(plan.counts[1] == 0);
    CHECK(plan.counts[2] == 0);
    std::set<std::string> got(plan.ordered_ids.begin(), plan.ordered_ids.end());
    CHECK(got.size() == 40);
    for (const QARecord& r : parts.stage(1)) CHECK(got.count(r.id) == 1);
}

TEST_CASE("stage three counts follow round(lambda * size) and reruns repeat") {
    std::vector<QARecord> manifest = manifest_with_sizes(1000, 500, 800);
    StagePartition parts = partition_by_stage(manifest);
    LambdaMatrix lambda;
    lambda.set(3, 1, 0.1);
    lambda.set(3, 2, 0.5);
    StagePlan plan = effective_set(3, parts, lambda, 11);
    CHECK(plan.counts[0] == 100);
    CHECK(plan.counts[1] == 250);
    CHECK(plan.counts[2] == 800);

    StagePlan again = effective_set(3, parts, lambda, 11);
    CHECK(plan.ordered_ids == again.ordered_ids);
    for (int j = 0; j < 3; ++j) CHECK(plan.ids_by_source[j] == again.ids_by_source[j]);

    StagePlan other = effective_set(3, parts, lambda, 12);
    CHECK(plan.ordered_ids != other.ordered_ids);
}

TEST_CASE("sampling is without replacement from the right source") {
    std::vector<QARecord> manifest = manifest_with_sizes(60, 30, 20);
    StagePartition parts = partition_by_stage(manifest);
    LambdaMatrix lambda;
    lambda.set(2, 1, 0.5);
    StagePlan plan = effective_set(2, parts, lambda, 21);
    std::set<std::string> sample(plan.ids_by_source[0].begin(),
                                 plan.ids_by_source[0].end());
    CHECK(sample.size() == plan.ids_by_source[0].size()); // no duplicates
    std::set<std::string> source;
    for (const QARecord& r : parts.stage(1)) source.insert(r.id);
    for (const std::string& id : sample) CHECK(source.count(id) == 1);
    // stage-k data is fully used
    CHECK(plan.ids_by_source[1].size() == 30);
}

TEST_CASE("diagonal lambda entries must be one") {
    LambdaMatrix lambda;
    lambda.values[1][1] = 0.9;
    std::vector<QARecord> manifest = manifest_with_sizes(5, 5, 5);
    StagePartition parts = partition_by_stage(manifest);
    CHECK_THROWS_AS(effective_set(2, parts, lambda, 0), InvalidInput);
    CHECK_THROWS_AS(lambda.validate(), InvalidInput);
}

TEST_CASE("lambda matrix round trips through json") {
    LambdaMatrix lambda;
    lambda.set(2, 1, 0.4);
    lambda.set(3, 1, 0.05);
    lambda.set(3, 2, 0.6);
    LambdaMatrix back = LambdaMatrix::from_json(lambda.to_json());
    CHECK(back.at(2, 1) == 0.4);
    CHECK(back.at(3, 1) == 0.05);
    CHECK(back.at(3, 2) == 0.6);
    CHECK(back.at(1, 1) == 1.0);
}

TEST_CASE("effective set sizes obey the rounding law on random manifests") {
    SplitMix64 g(31);
    for (int trial = 0; trial < 30; ++trial) {
        size_t n1 = 1 + g.next_below(300);
        size_t n2 = 1 + g.next_below(300);
        size_t n3 = 1 + g.next_below(300);
        std::vector<QARecord> manifest = manifest_with_sizes(n1, n2, n3);
        StagePartition parts = partition_by_stage(manifest);
        LambdaMatrix lambda;
        lambda.set(2, 1, 0.01 + 0.99 * g.next_double());
        lambda.set(3, 1, 0.01 + 0.99 * g.next_double());
        lambda.set(3, 2, 0.01 + 0.99 * g.next_double());
        for (int k = 1; k <= 3; ++k) {
            StagePlan plan = effective_set(k, parts, lambda, trial);
            size_t expect = 0;
            const size_t sizes[] = {n1, n2, n3};
            for (int j = 1; j <= k; ++j)
                expect += round_count(lambda.at(k, j) * double(sizes[j - 1]));
            CHECK(plan.total() == expect);
            CHECK(plan.ordered_ids.size() == expect);
        }
    }
}

TEST_CASE("budget validation passes exact totals and flags excess") {
    std::vector<QARecord> manifest = manifest_with_sizes(100, 100, 100);
    StagePartition parts = partition_by_stage(manifest);
    LambdaMatrix lambda = LambdaMatrix::defaults();
    std::array<StagePlan, 3> plans{effective_set(1, parts, lambda, 1),
                                   effective_set(2, parts, lambda, 1),
                                   effective_set(3, parts, lambda, 1)};
    size_t total = plans[0].total() + plans[1].total() + plans[2].total();

    BudgetReport pass_report = validate_budget(plans, total, 0);
    CHECK(pass_report.pass);
    CHECK(pass_report.excess == 0);

    BudgetReport fail_report = validate_budget(plans, total - 50, 0);
    CHECK(!fail_report.pass);
    CHECK(fail_report.excess == 50);
}

TEST_CASE("suggested rescale solves the linear budget equation") {
    std::vector<QARecord> manifest = manifest_with_sizes(400, 200, 100);
    StagePartition parts = partition_by_stage(manifest);
    LambdaMatrix lambda;
    lambda.set(2, 1, 0.5);
    lambda.set(3, 1, 0.25);
    lambda.set(3, 2, 0.5);
    std::array<StagePlan, 3> plans{effective_set(1, parts, lambda, 2),
                                   effective_set(2, parts, lambda, 2),
                                   effective_set(3, parts, lambda, 2)};
    // current total: 400 + (200+200) + (100+100+100) = 1100; fixed part 700
    CHECK(plans[0].total() + plans[1].total() + plans[2].total() == 1100);
    size_t baseline = 900;
    BudgetReport report = validate_budget(plans, baseline, 0);
    CHECK(!report.pass);
    // fixed + scale * earlier = baseline  =>  700 + s * 400 = 900
    CHECK(report.suggested_scale == doctest::Approx(0.5).epsilon(1e-12));

    // applying the suggestion lands on the baseline
    std::array<StagePlan, 3> rescaled{effective_set(1, parts, report.suggested, 2),
                                      effective_set(2, parts, report.suggested, 2),
                                      effective_set(3, parts, report.suggested, 2)};
    size_t new_total = rescaled[0].total() + rescaled[1].total() + rescaled[2].total();
    CHECK(new_total == baseline);

    BudgetReport infeasible = validate_budget(plans, 600, 0);
    CHECK(!infeasible.feasible);
}

TEST_CASE("stage plan sidecar records counts, seed and lambda") {
    std::vector<QARecord> manifest = manifest_with_sizes(10, 10, 10);
    StagePartition parts = partition_by_stage(manifest);
    LambdaMatrix lambda = LambdaMatrix::defaults();
    StagePlan plan = effective_set(2, parts, lambda, 77);
    nlohmann::json j = plan.sidecar_json(lambda);
    CHECK(j["stage"] == 2);
    CHECK(j["seed"] == 77);
    CHECK(j["counts"]["2"] == 10);
    CHECK(j["source_sizes"]["1"] == 10);
    CHECK(j["schema_version"] == 1);
}
