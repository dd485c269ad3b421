#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace vtp {

struct Prediction {
    std::string id;
    std::string question;
    std::string answer;
    std::vector<std::string> references;
    std::string task;

    nlohmann::json to_json() const;
    static Prediction from_json(const nlohmann::json& j); // InvalidInput on no reference
};

std::vector<Prediction> parse_predictions(const std::filesystem::path& path);
void write_predictions(const std::vector<Prediction>& preds,
                       const std::filesystem::path& path);

/// HTTP judge endpoint. The bearer token, if any, comes from the
/// environment variable named by `token_env`.
struct JudgeConfig {
    std::string endpoint; // e.g. http://localhost:8080/v1/chat/completions
    std::string model;
    std::string judge_id;                  // defaults to model
    std::string token_env = "JUDGE_API_TOKEN";
    size_t max_retries = 3;
    int backoff_base_ms = 100;
    size_t concurrency = 2;
    int min_interval_ms = 0; // rate limit between request starts
    double timeout_s = 30.0;
    std::string prompt_template; // {question} {reference} {candidate}
};

/// One correctness/relevance/linguistic-quality triple per (record, judge),
/// each on the 0-100 scale. Raw response kept for audit.
struct JudgeScore {
    std::string record_id;
    std::string judge_id;
    int correctness = 0;
    int relevance = 0;
    int linguistic = 0;
    std::string raw_response;

    nlohmann::json to_json() const;
};

struct JudgeOutcome {
    std::optional<JudgeScore> score;
    std::string error; // set when the record was skipped
};

std::string render_judge_prompt(const Prediction& pred, const JudgeConfig& config);

/// Single request with retries; a malformed response after retries yields a
/// skipped outcome rather than an exception.
JudgeOutcome judge_request(const Prediction& pred, const JudgeConfig& config);

struct JudgeBatchResult {
    std::vector<JudgeScore> scores;
    std::vector<std::pair<std::string, std::string>> skipped; // (id, reason)

    nlohmann::json to_json() const;
};

/// Runs the batch under the configured concurrency cap; results are keyed
/// by record, so completion order never matters.
JudgeBatchResult judge_batch(const std::vector<Prediction>& preds,
                             const JudgeConfig& config);

/// Mid-ranks (1 = best) of the given scores, higher scores ranking first.
std::vector<double> rank_scores(const std::vector<double>& scores);

} // namespace vtp
