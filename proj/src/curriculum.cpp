#include "vtp/curriculum.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>

#include "vtp/error.hpp"
#include "vtp/rng.hpp"

namespace vtp {

namespace {
const char* kTaskNames[] = {"TP",  "AP",  "ASP", "CVSA", "DFA", "AEA",
                            "SPA", "SSD", "ARR", "CA",   "IP"};
}

std::string to_string(Task t) { return kTaskNames[size_t(t)]; }

Task task_from_string(const std::string& s) {
    for (size_t i = 0; i < std::size(kTaskNames); ++i)
        if (s == kTaskNames[i]) return Task(i);
    throw InvalidInput("manifest: unknown task tag '" + s + "'");
}

std::string to_string(Subset s) {
    switch (s) {
    case Subset::cholect50_caption: return "cholect50_caption";
    case Subset::endoscapes: return "endoscapes";
    case Subset::cholescore: return "cholescore";
    }
    return "cholect50_caption";
}

Subset subset_from_string(const std::string& s) {
    if (s == "cholect50_caption") return Subset::cholect50_caption;
    if (s == "endoscapes") return Subset::endoscapes;
    if (s == "cholescore") return Subset::cholescore;
    throw InvalidInput("manifest: unknown subset '" + s + "'");
}

std::string to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw InvalidInput("manifest: unknown split '" + s + "'");
}

int stage_of(Task t) {
    switch (t) {
    case Task::TP:
    case Task::AP:
    case Task::ASP: return 1;
    case Task::CVSA:
    case Task::DFA:
    case Task::AEA:
    case Task::SPA: return 2;
    case Task::SSD:
    case Task::ARR:
    case Task::CA:
    case Task::IP: return 3;
    }
    return 1;
}

nlohmann::json QARecord::to_json() const {
    return {{"id", id},
            {"video_ref", video_ref},
            {"question", question},
            {"answer", answer},
            {"task", to_string(task)},
            {"subset", to_string(subset)},
            {"split", to_string(split)},
            {"duration_s", duration_s}};
}

QARecord QARecord::from_json(const nlohmann::json& j) {
    QARecord r;
    r.id = j.at("id").get<std::string>();
    r.video_ref = j.value("video_ref", std::string());
    r.question = j.value("question", std::string());
    r.answer = j.value("answer", std::string());
    r.task = task_from_string(j.at("task").get<std::string>());
    r.subset = subset_from_string(j.value("subset", "cholect50_caption"));
    r.split = split_from_string(j.value("split", "train"));
    r.duration_s = j.value("duration_s", 0.0);
    if (r.duration_s < 0.0) throw InvalidInput("manifest: negative duration");
    return r;
}

std::vector<QARecord> parse_manifest_lines(std::istream& in) {
    std::vector<QARecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw InvalidInput("manifest: bad JSON at line " + std::to_string(line_no));
        records.push_back(QARecord::from_json(j));
    }
    return records;
}

std::vector<QARecord> parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("manifest: cannot open " + path.string());
    return parse_manifest_lines(in);
}

void write_manifest(const std::vector<QARecord>& records,
                    const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("manifest: cannot open for writing " + path.string());
    for (const QARecord& r : records) out << r.to_json().dump() << '\n';
}

StagePartition partition_by_stage(const std::vector<QARecord>& manifest) {
    StagePartition parts;
    for (const QARecord& r : manifest)
        parts.stages[size_t(stage_of(r.task) - 1)].push_back(r);
    return parts;
}

void LambdaMatrix::validate() const {
    for (int k = 1; k <= 3; ++k) {
        if (at(k, k) != 1.0)
            throw InvalidInput("lambda: diagonal entries must equal 1.0");
        for (int j = 1; j < k; ++j)
            if (!(at(k, j) > 0.0) || at(k, j) > 1.0)
                throw InvalidInput("lambda: rates must lie in (0,1]");
    }
}

nlohmann::json LambdaMatrix::to_json() const {
    nlohmann::json j;
    for (int k = 2; k <= 3; ++k) {
        nlohmann::json row;
        for (int jj = 1; jj < k; ++jj) row[std::to_string(jj)] = at(k, jj);
        j[std::to_string(k)] = row;
    }
    return j;
}

LambdaMatrix LambdaMatrix::from_json(const nlohmann::json& j) {
    LambdaMatrix m = LambdaMatrix::defaults();
    for (int k = 1; k <= 3; ++k) {
        auto it = j.find(std::to_string(k));
        if (it == j.end()) continue;
        for (int jj = 1; jj <= k; ++jj) {
            auto jt = it->find(std::to_string(jj));
            if (jt != it->end()) m.set(k, jj, jt->get<double>());
        }
    }
    m.validate();
    return m;
}

size_t round_count(double x) { return size_t(std::floor(x + 0.5)); }

nlohmann::json StagePlan::sidecar_json(const LambdaMatrix& lambda) const {
    nlohmann::json counts_j, sizes_j;
    for (int j = 1; j <= stage; ++j) {
        counts_j[std::to_string(j)] = counts[size_t(j - 1)];
        sizes_j[std::to_string(j)] = source_sizes[size_t(j - 1)];
    }
    return {{"schema_version", 1},
            {"stage", stage},
            {"seed", seed},
            {"lambda", lambda.to_json()},
            {"counts", counts_j},
            {"source_sizes", sizes_j},
            {"total", total()}};
}

StagePlan effective_set(int stage, const StagePartition& partitions,
                        const LambdaMatrix& lambda, uint64_t seed) {
    if (stage < 1 || stage > 3) throw InvalidInput("effective_set: stage must be 1..3");
    lambda.validate();

    StagePlan plan;
    plan.stage = stage;
    plan.seed = seed;
    for (int j = 1; j <= stage; ++j) {
        const auto& source = partitions.stage(j);
        plan.source_sizes[size_t(j - 1)] = source.size();
        size_t want = round_count(lambda.at(stage, j) * double(source.size()));

        std::vector<size_t> order(source.size());
        std::iota(order.begin(), order.end(), 0);
        SplitMix64 g(derive_seed(seed, uint64_t(stage) * 16 + uint64_t(j)));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[g.next_below(i)]);

        auto& ids = plan.ids_by_source[size_t(j - 1)];
        ids.reserve(want);
        for (size_t i = 0; i < want; ++i) ids.push_back(source[order[i]].id);
        plan.counts[size_t(j - 1)] = want;
    }

    for (int j = 1; j <= stage; ++j)
        plan.ordered_ids.insert(plan.ordered_ids.end(),
                                plan.ids_by_source[size_t(j - 1)].begin(),
                                plan.ids_by_source[size_t(j - 1)].end());
    SplitMix64 g(derive_seed(seed, 0x0DDE));
    for (size_t i = plan.ordered_ids.size(); i > 1; --i)
        std::swap(plan.ordered_ids[i - 1], plan.ordered_ids[g.next_below(i)]);
    return plan;
}

nlohmann::json BudgetReport::to_json() const {
    return {{"pass", pass},
            {"total", total},
            {"baseline", baseline},
            {"tolerance", tolerance},
            {"excess", excess},
            {"feasible", feasible},
            {"suggested_scale", suggested_scale},
            {"suggested_lambda", suggested.to_json()}};
}

BudgetReport validate_budget(const std::array<StagePlan, 3>& plans,
                             size_t baseline_total, size_t tolerance) {
    BudgetReport report;
    report.baseline = baseline_total;
    report.tolerance = tolerance;
    for (const StagePlan& plan : plans) report.total += plan.total();
    report.excess = long(report.total) - long(baseline_total);
    report.pass = size_t(std::llabs(report.excess)) <= tolerance;

    // Budget equation: fixed + scale * earlier = baseline, where `fixed` is
    // the current-stage (lambda = 1) portion and `earlier` the rest.
    double fixed = 0.0, earlier = 0.0;
    for (const StagePlan& plan : plans) {
        for (int j = 1; j <= plan.stage; ++j) {
            if (j == plan.stage)
                fixed += double(plan.counts[size_t(j - 1)]);
            else
                earlier += double(plan.counts[size_t(j - 1)]);
        }
    }
    report.suggested = LambdaMatrix::defaults();
    for (int k = 1; k <= 3; ++k) {
        const StagePlan& plan = plans[size_t(k - 1)];
        for (int j = 1; j < k; ++j) {
            double rate = plan.source_sizes[size_t(j - 1)] == 0
                              ? 0.0
                              : double(plan.counts[size_t(j - 1)]) /
                                    double(plan.source_sizes[size_t(j - 1)]);
            report.suggested.set(k, j, rate);
        }
    }
    if (double(baseline_total) < fixed) {
        report.feasible = false;
        report.suggested_scale = 0.0;
        return report;
    }
    if (earlier > 0.0) {
        report.suggested_scale = (double(baseline_total) - fixed) / earlier;
        for (int k = 2; k <= 3; ++k)
            for (int j = 1; j < k; ++j) {
                double v = report.suggested.at(k, j) * report.suggested_scale;
                report.suggested.set(k, j, std::min(v, 1.0));
            }
    }
    return report;
}

} // namespace vtp
