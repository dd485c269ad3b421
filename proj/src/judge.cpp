#include "vtp/judge.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <httplib.h>

#include "vtp/error.hpp"

namespace vtp {

nlohmann::json Prediction::to_json() const {
    return {{"id", id},
            {"question", question},
            {"answer", answer},
            {"references", references},
            {"task", task}};
}

Prediction Prediction::from_json(const nlohmann::json& j) {
    Prediction p;
    p.id = j.at("id").get<std::string>();
    p.question = j.value("question", std::string());
    p.answer = j.value("answer", std::string());
    p.references = j.at("references").get<std::vector<std::string>>();
    p.task = j.value("task", std::string());
    if (p.references.empty())
        throw InvalidInput("prediction " + p.id + ": at least one reference required");
    return p;
}

std::vector<Prediction> parse_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("predictions: cannot open " + path.string());
    std::vector<Prediction> preds;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw InvalidInput("predictions: bad JSON at line " + std::to_string(line_no));
        preds.push_back(Prediction::from_json(j));
    }
    return preds;
}

void write_predictions(const std::vector<Prediction>& preds,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("predictions: cannot open for writing " + path.string());
    for (const Prediction& p : preds) out << p.to_json().dump() << '\n';
}

nlohmann::json JudgeScore::to_json() const {
    return {{"record_id", record_id},
            {"judge_id", judge_id},
            {"CR", correctness},
            {"RL", relevance},
            {"LG", linguistic}};
}

nlohmann::json JudgeBatchResult::to_json() const {
    nlohmann::json score_arr = nlohmann::json::array();
    for (const JudgeScore& s : scores) score_arr.push_back(s.to_json());
    nlohmann::json skip_arr = nlohmann::json::array();
    for (const auto& [id, reason] : skipped)
        skip_arr.push_back({{"record_id", id}, {"reason", reason}});
    return {{"scores", score_arr}, {"skipped", skip_arr}};
}

static const char* kDefaultPrompt =
    "You are grading an answer to a surgical video question against a "
    "reference answer.\n"
    "Question: {question}\n"
    "Reference answer: {reference}\n"
    "Candidate answer: {candidate}\n"
    "Score the candidate for correctness (CR: clinical accuracy and factual "
    "validity), relevance (RL: appropriateness to the question), and "
    "linguistic quality (LG: coherence and terminology), each an integer "
    "from 0 to 100.\n"
    "Respond with exactly one JSON object of the form "
    "{\"CR\": <int>, \"RL\": <int>, \"LG\": <int>}.";

std::string render_judge_prompt(const Prediction& pred, const JudgeConfig& config) {
    std::string prompt =
        config.prompt_template.empty() ? kDefaultPrompt : config.prompt_template;
    auto substitute = [&prompt](const std::string& key, const std::string& value) {
        size_t pos;
        while ((pos = prompt.find(key)) != std::string::npos)
            prompt.replace(pos, key.size(), value);
    };
    substitute("{question}", pred.question);
    substitute("{reference}", pred.references.front());
    substitute("{candidate}", pred.answer);
    return prompt;
}

namespace {

struct ParsedUrl {
    std::string base; // scheme://host:port
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw InvalidInput("judge: endpoint must be an http(s) URL");
    size_t path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.base = url;
        out.path = "/";
    } else {
        out.base = url.substr(0, path_start);
        out.path = url.substr(path_start);
    }
    return out;
}

// Accepts either a bare {"CR":..,"RL":..,"LG":..} object or an OpenAI-style
// envelope whose message content embeds one.
std::optional<JudgeScore> parse_scores(const std::string& body) {
    auto extract_triple = [](const nlohmann::json& j) -> std::optional<JudgeScore> {
        if (!j.is_object() || !j.contains("CR") || !j.contains("RL") || !j.contains("LG"))
            return std::nullopt;
        if (!j["CR"].is_number_integer() || !j["RL"].is_number_integer() ||
            !j["LG"].is_number_integer())
            return std::nullopt;
        JudgeScore s;
        s.correctness = j["CR"].get<int>();
        s.relevance = j["RL"].get<int>();
        s.linguistic = j["LG"].get<int>();
        auto in_range = [](int v) { return v >= 0 && v <= 100; };
        if (!in_range(s.correctness) || !in_range(s.relevance) || !in_range(s.linguistic))
            return std::nullopt;
        return s;
    };

    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (!j.is_discarded()) {
        if (auto direct = extract_triple(j)) return direct;
        if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
            const auto& msg = j["choices"][0];
            if (msg.contains("message") && msg["message"].contains("content")) {
                std::string content = msg["message"]["content"].get<std::string>();
                size_t open = content.find('{');
                if (open != std::string::npos) {
                    size_t close = content.rfind('}');
                    if (close != std::string::npos && close > open) {
                        nlohmann::json inner = nlohmann::json::parse(
                            content.substr(open, close - open + 1), nullptr, false);
                        if (!inner.is_discarded()) return extract_triple(inner);
                    }
                }
            }
        }
    }
    return std::nullopt;
}

} // namespace

JudgeOutcome judge_request(const Prediction& pred, const JudgeConfig& config) {
    JudgeOutcome outcome;
    ParsedUrl url;
    try {
        url = parse_url(config.endpoint);
    } catch (const InvalidInput& e) {
        outcome.error = e.what();
        return outcome;
    }

    nlohmann::json body{{"model", config.model},
                        {"messages", nlohmann::json::array(
                                         {{{"role", "user"},
                                           {"content", render_judge_prompt(pred, config)}}})}};
    httplib::Headers headers;
    if (const char* token = std::getenv(config.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    std::string last_error = "no attempt made";
    for (size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(
                config.backoff_base_ms * (1 << (attempt - 1))));
        httplib::Client client(url.base);
        client.set_connection_timeout(int(config.timeout_s), 0);
        client.set_read_timeout(int(config.timeout_s), 0);
        auto res = client.Post(url.path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        if (auto parsed = parse_scores(res->body)) {
            parsed->record_id = pred.id;
            parsed->judge_id = config.judge_id.empty() ? config.model : config.judge_id;
            parsed->raw_response = res->body;
            outcome.score = std::move(parsed);
            return outcome;
        }
        last_error = "malformed response body";
    }
    outcome.error = last_error;
    return outcome;
}

JudgeBatchResult judge_batch(const std::vector<Prediction>& preds,
                             const JudgeConfig& config) {
    std::vector<JudgeOutcome> outcomes(preds.size());
    std::atomic<size_t> cursor{0};
    std::mutex rate_mutex;
    auto last_start = std::chrono::steady_clock::now() -
                      std::chrono::milliseconds(config.min_interval_ms);

    auto worker = [&] {
        for (;;) {
            size_t i = cursor.fetch_add(1);
            if (i >= preds.size()) return;
            if (config.min_interval_ms > 0) {
                std::unique_lock lock(rate_mutex);
                auto next_ok =
                    last_start + std::chrono::milliseconds(config.min_interval_ms);
                auto now = std::chrono::steady_clock::now();
                if (now < next_ok) {
                    lock.unlock();
                    std::this_thread::sleep_for(next_ok - now);
                    lock.lock();
                }
                last_start = std::chrono::steady_clock::now();
            }
            outcomes[i] = judge_request(preds[i], config);
        }
    };

    size_t n_threads = std::max<size_t>(1, std::min(config.concurrency, preds.size()));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    JudgeBatchResult result;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (outcomes[i].score)
            result.scores.push_back(std::move(*outcomes[i].score));
        else
            result.skipped.emplace_back(preds[i].id, outcomes[i].error);
    }
    return result;
}

std::vector<double> rank_scores(const std::vector<double>& scores) {
    size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double mid = (double(i + 1) + double(j)) / 2.0;
        for (size_t k = i; k < j; ++k) ranks[order[k]] = mid;
        i = j;
    }
    return ranks;
}

} // namespace vtp
