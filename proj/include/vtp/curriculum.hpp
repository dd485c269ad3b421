#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace vtp {

/// QA task tags. Stages: perception {TP, AP, ASP}, assessment
/// {CVSA, DFA, AEA, SPA}, reasoning {SSD, ARR, CA, IP}.
enum class Task { TP, AP, ASP, CVSA, DFA, AEA, SPA, SSD, ARR, CA, IP };
enum class Subset { cholect50_caption, endoscapes, cholescore };
enum class Split { train, val, test };

std::string to_string(Task t);
Task task_from_string(const std::string& s); // InvalidInput on unknown
std::string to_string(Subset s);
Subset subset_from_string(const std::string& s);
std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// 1 = perception, 2 = assessment, 3 = reasoning.
int stage_of(Task t);

struct QARecord {
    std::string id;
    std::string video_ref;
    std::string question;
    std::string answer;
    Task task = Task::TP;
    Subset subset = Subset::cholect50_caption;
    Split split = Split::train;
    double duration_s = 0.0;

    nlohmann::json to_json() const;
    static QARecord from_json(const nlohmann::json& j);
};

std::vector<QARecord> parse_manifest(const std::filesystem::path& path);
std::vector<QARecord> parse_manifest_lines(std::istream& in);
void write_manifest(const std::vector<QARecord>& records,
                    const std::filesystem::path& path);

struct StagePartition {
    std::array<std::vector<QARecord>, 3> stages; // [0]=perception .. [2]=reasoning

    const std::vector<QARecord>& stage(int k) const { return stages.at(size_t(k - 1)); }
};

/// Exhaustive disjoint partition by task hierarchy level.
StagePartition partition_by_stage(const std::vector<QARecord>& manifest);

/// Sampling rates lambda[k][j] for stage-k training over stage-j data,
/// j <= k, each in (0,1]. The diagonal is pinned at 1.0.
struct LambdaMatrix {
    double values[3][3] = {{1.0, 0.0, 0.0}, {0.3, 1.0, 0.0}, {0.15, 0.3, 1.0}};

    double at(int k, int j) const { return values[k - 1][j - 1]; }
    void set(int k, int j, double v) { values[k - 1][j - 1] = v; }
    void validate() const; // InvalidInput on bad range or diagonal != 1
    static LambdaMatrix defaults() { return LambdaMatrix{}; }
    nlohmann::json to_json() const;
    static LambdaMatrix from_json(const nlohmann::json& j);
};

/// round-half-up, used for every sample count.
size_t round_count(double x);

/// Stage-k effective training set: all of stage k plus seeded uniform
/// samples (without replacement) of round(lambda * |D_j|) from each earlier
/// stage j. The emitted order is a seeded shuffle of the union.
struct StagePlan {
    int stage = 1;
    std::array<std::vector<std::string>, 3> ids_by_source;
    std::array<size_t, 3> counts{0, 0, 0};
    std::array<size_t, 3> source_sizes{0, 0, 0};
    uint64_t seed = 0;
    std::vector<std::string> ordered_ids;

    size_t total() const { return counts[0] + counts[1] + counts[2]; }
    nlohmann::json sidecar_json(const LambdaMatrix& lambda) const;
};

StagePlan effective_set(int stage, const StagePartition& partitions,
                        const LambdaMatrix& lambda, uint64_t seed);

/// Report-only budget check: flags when the three stage totals deviate from
/// the baseline by more than the tolerance and solves the linear budget
/// equation for a proportional rescale of the earlier-stage rates.
struct BudgetReport {
    bool pass = false;
    size_t total = 0;
    size_t baseline = 0;
    size_t tolerance = 0;
    long excess = 0;
    bool feasible = true;       // false when baseline < sum of current-stage sets
    double suggested_scale = 1.0;
    LambdaMatrix suggested;

    nlohmann::json to_json() const;
};

BudgetReport validate_budget(const std::array<StagePlan, 3>& plans,
                             size_t baseline_total, size_t tolerance);

} // namespace vtp
