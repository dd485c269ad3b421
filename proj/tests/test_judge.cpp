#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "vtp/error.hpp"
#include "vtp/judge.hpp"
#include "vtp/metrics.hpp"

using namespace vtp;

namespace {

struct MockJudge {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> bad_hits{0};

    MockJudge() {
        server.Post("/direct", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"CR":80,"RL":90,"LG":85})", "application/json");
        });
        server.Post("/openai", [](const httplib::Request&, httplib::Response& res) {
            nlohmann::json body{
                {"choices",
                 {{{"message",
                    {{"content", "Here are the scores: {\"CR\": 70, \"RL\": 60, "
                                 "\"LG\": 75} as requested."}}}}}}};
            res.set_content(body.dump(), "application/json");
        });
        server.Post("/prose", [this](const httplib::Request&, httplib::Response& res) {
            ++bad_hits;
            res.set_content("I would rate this answer quite highly overall.",
                            "text/plain");
        });
        server.Post("/mixed", [](const httplib::Request& req, httplib::Response& res) {
            if (req.body.find("good answer") != std::string::npos)
                res.set_content(R"({"CR":55,"RL":65,"LG":45})", "application/json");
            else
                res.set_content("no scores here", "text/plain");
        });
        server.Post("/auth", [](const httplib::Request& req, httplib::Response& res) {
            auto it = req.headers.find("Authorization");
            if (it == req.headers.end() || it->second != "Bearer test-token-123") {
                res.status = 401;
                return;
            }
            res.set_content(R"({"CR":1,"RL":2,"LG":3})", "application/json");
        });
        server.Post("/range", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"CR":150,"RL":90,"LG":85})", "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~MockJudge() {
        server.stop();
        thread.join();
    }

    JudgeConfig config(const std::string& path) const {
        JudgeConfig cfg;
        cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + path;
        cfg.model = "mock-judge";
        cfg.backoff_base_ms = 1;
        return cfg;
    }
};

Prediction make_pred(const std::string& id, const std::string& answer) {
    Prediction p;
    p.id = id;
    p.question = "Is the critical view achieved?";
    p.answer = answer;
    p.references = {"Yes, the criterion is achieved."};
    p.task = "CVSA";
    return p;
}

} // namespace

TEST_CASE("well-formed direct responses parse into scores") {
    MockJudge mock;
    JudgeOutcome out = judge_request(make_pred("r1", "answer"), mock.config("/direct"));
    REQUIRE(out.score.has_value());
    CHECK(out.score->correctness == 80);
    CHECK(out.score->relevance == 90);
    CHECK(out.score->linguistic == 85);
    CHECK(out.score->record_id == "r1");
    CHECK(!out.score->raw_response.empty());
}

TEST_CASE("openai-style envelopes are unwrapped") {
    MockJudge mock;
    JudgeOutcome out = judge_request(make_pred("r2", "answer"), mock.config("/openai"));
    REQUIRE(out.score.has_value());
    CHECK(out.score->correctness == 70);
    CHECK(out.score->relevance == 60);
    CHECK(out.score->linguistic == 75);
}

TEST_CASE("prose responses are retried then skipped") {
    MockJudge mock;
    JudgeConfig cfg = mock.config("/prose");
    cfg.max_retries = 3;
    JudgeOutcome out = judge_request(make_pred("r3", "answer"), cfg);
    CHECK(!out.score.has_value());
    CHECK(out.error == "malformed response body");
    CHECK(mock.bad_hits.load() == 4); // initial attempt plus three retries
}

TEST_CASE("out-of-range scores are rejected as malformed") {
    MockJudge mock;
    JudgeConfig cfg = mock.config("/range");
    cfg.max_retries = 0;
    JudgeOutcome out = judge_request(make_pred("r4", "answer"), cfg);
    CHECK(!out.score.has_value());
}

TEST_CASE("an unreachable endpoint is a skip, not a crash") {
    JudgeConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1/unused"; // nothing listens on port 1
    cfg.model = "mock";
    cfg.max_retries = 0;
    cfg.backoff_base_ms = 1;
    cfg.timeout_s = 1;
    JudgeOutcome out = judge_request(make_pred("r5", "answer"), cfg);
    CHECK(!out.score.has_value());
    CHECK(!out.error.empty());
}

TEST_CASE("a batch with malformed records keeps the good ones") {
    MockJudge mock;
    JudgeConfig cfg = mock.config("/mixed");
    cfg.max_retries = 1;
    cfg.concurrency = 3;
    std::vector<Prediction> preds;
    for (int i = 0; i < 3; ++i)
        preds.push_back(make_pred("good" + std::to_string(i), "a good answer"));
    for (int i = 0; i < 2; ++i)
        preds.push_back(make_pred("bad" + std::to_string(i), "something else"));
    JudgeBatchResult result = judge_batch(preds, cfg);
    CHECK(result.scores.size() == 3);
    CHECK(result.skipped.size() == 2);
    for (const JudgeScore& s : result.scores) CHECK(s.correctness == 55);
    for (const auto& [id, reason] : result.skipped) {
        CHECK(id.substr(0, 3) == "bad");
        CHECK(!reason.empty());
    }
}

TEST_CASE("the bearer token comes from the configured environment variable") {
    MockJudge mock;
    setenv("JUDGE_API_TOKEN", "test-token-123", 1);
    JudgeConfig cfg = mock.config("/auth");
    cfg.max_retries = 0;
    JudgeOutcome ok = judge_request(make_pred("r6", "answer"), cfg);
    CHECK(ok.score.has_value());

    setenv("JUDGE_API_TOKEN", "wrong", 1);
    JudgeOutcome denied = judge_request(make_pred("r7", "answer"), cfg);
    CHECK(!denied.score.has_value());
    unsetenv("JUDGE_API_TOKEN");
}

TEST_CASE("prompt rendering substitutes question, reference and candidate") {
    Prediction p = make_pred("r8", "The view is fully achieved.");
    JudgeConfig cfg;
    std::string prompt = render_judge_prompt(p, cfg);
    CHECK(prompt.find(p.question) != std::string::npos);
    CHECK(prompt.find(p.references.front()) != std::string::npos);
    CHECK(prompt.find(p.answer) != std::string::npos);
    CHECK(prompt.find("{question}") == std::string::npos);
}

TEST_CASE("judges with identical score orderings agree perfectly") {
    // three models scored by two judges with the same ordering
    std::vector<double> judge_a{82.0, 61.0, 45.0};
    std::vector<double> judge_b{90.0, 70.0, 10.0};
    std::vector<std::vector<double>> rankings{rank_scores(judge_a),
                                              rank_scores(judge_b)};
    CHECK(kendall_w(rankings) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("predictions parse from jsonl and require references") {
    auto dir = std::filesystem::temp_directory_path() / "vtp_judge_test";
    std::filesystem::create_directories(dir);
    {
        std::vector<Prediction> preds{make_pred("a", "x"), make_pred("b", "y")};
        write_predictions(preds, dir / "preds.jsonl");
    }
    std::vector<Prediction> back = parse_predictions(dir / "preds.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == "a");
    CHECK(back[1].answer == "y");

    nlohmann::json no_refs{{"id", "x"}, {"answer", "a"},
                           {"references", nlohmann::json::array()}};
    CHECK_THROWS_AS(Prediction::from_json(no_refs), InvalidInput);
}
