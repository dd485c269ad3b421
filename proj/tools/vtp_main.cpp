// vtp: video token pyramid toolkit
//
// Subcommands: pipeline run, pyramid inspect, selection visualize,
// schedule build, eval overlap|classify|judge, gradcheck.
// Exit codes: 0 ok, 1 operational failure, 2 usage error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "vtp/curriculum.hpp"
#include "vtp/error.hpp"
#include "vtp/gradcheck.hpp"
#include "vtp/judge.hpp"
#include "vtp/metrics.hpp"
#include "vtp/pipeline.hpp"
#include "vtp/pyramid.hpp"
#include "vtp/rng.hpp"
#include "vtp/tensor.hpp"
#include "vtp/verbalize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Thrown for problems the user can fix on the command line (missing files,
// bad flag values); maps to exit code 2 before any output is written.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_readable(const fs::path& path, const std::string& what) {
    std::ifstream probe(path);
    if (!probe)
        throw UsageError(what + " not readable: " + path.string());
}

json load_json_file(const fs::path& path, const std::string& what) {
    require_readable(path, what);
    std::ifstream in(path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw UsageError(what + " is not valid JSON: " + path.string());
    return j;
}

void write_json_file(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw vtp::InvalidInput("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// run configuration: defaults < config file < explicit flags

struct RunConfig {
    size_t frames = 64;        // T
    size_t top_k = 10;         // k
    double temperature = 0.2;  // tau
    size_t stride = 2;         // p
    size_t token_dim = 16;     // D
    vtp::EncoderSpec encoder{vtp::EncoderKind::synthetic_hash, 16, 16, 0, ""};
    std::vector<size_t> projector_dims; // defaults to {D_V, D, D}
    std::string projector_path;
    uint64_t projector_seed = 1;
    size_t vocab = 256;
    std::string table_path;
    uint64_t table_seed = 2;
    uint64_t separator_seed = 3;
    uint64_t seed = 0;
    vtp::SelectionMode mode = vtp::SelectionMode::infer_deterministic;
    bool rope_one_based = false;

    void load(const json& j) {
        frames = j.value("frames", frames);
        top_k = j.value("top_k", top_k);
        temperature = j.value("temperature", temperature);
        stride = j.value("stride", stride);
        token_dim = j.value("token_dim", token_dim);
        if (j.contains("encoder")) encoder = vtp::EncoderSpec::from_json(j["encoder"]);
        if (j.contains("projector")) {
            const json& p = j["projector"];
            projector_path = p.value("path", std::string());
            if (p.contains("layers"))
                projector_dims = p["layers"].get<std::vector<size_t>>();
            projector_seed = p.value("seed", projector_seed);
        }
        if (j.contains("embedding_table")) {
            const json& t = j["embedding_table"];
            table_path = t.value("path", std::string());
            vocab = t.value("vocab", vocab);
            table_seed = t.value("seed", table_seed);
        }
        separator_seed = j.value("separator_seed", separator_seed);
        seed = j.value("seed", seed);
        if (j.contains("mode"))
            mode = vtp::selection_mode_from_string(j["mode"].get<std::string>());
        rope_one_based = j.value("rope_one_based", rope_one_based);
    }

    void validate() const {
        if (frames == 0 || top_k == 0 || top_k > frames)
            throw UsageError("config: need 1 <= top_k <= frames");
        if (!(temperature > 0.0)) throw UsageError("config: temperature must be positive");
        if (stride == 0) throw UsageError("config: stride must be positive");
        if (token_dim == 0 || token_dim % 2 != 0)
            throw UsageError("config: token_dim must be positive and even");
        encoder.validate();
    }

    json echo() const {
        return {{"frames", frames},
                {"top_k", top_k},
                {"temperature", temperature},
                {"stride", stride},
                {"token_dim", token_dim},
                {"encoder", encoder.to_json()},
                {"separator_seed", separator_seed},
                {"seed", seed},
                {"mode", vtp::to_string(mode)},
                {"rope_one_based", rope_one_based}};
    }
};

vtp::ProjectorWeights resolve_projector(const RunConfig& config) {
    if (!config.projector_path.empty())
        return vtp::ProjectorWeights::from_json(
            load_json_file(config.projector_path, "projector weights"));
    std::vector<size_t> dims = config.projector_dims;
    if (dims.empty())
        dims = {config.encoder.embed_dim, config.token_dim, config.token_dim};
    return vtp::ProjectorWeights::random(dims, config.projector_seed);
}

vtp::Tensor resolve_table(const RunConfig& config) {
    if (!config.table_path.empty()) {
        vtp::Tensor table = vtp::read_tnsr(config.table_path);
        if (table.rank() != 2 || table.dim(1) != config.token_dim)
            throw vtp::InvalidInput("embedding table shape does not match token_dim");
        return table;
    }
    vtp::SplitMix64 g(vtp::derive_seed(config.table_seed, 0xE8B));
    std::vector<float> data(config.vocab * config.token_dim);
    double scale = 1.0 / std::sqrt(double(config.token_dim));
    for (float& v : data) v = float(g.next_gaussian() * scale);
    return vtp::Tensor({config.vocab, config.token_dim}, std::move(data));
}

// ---------------------------------------------------------------------------
// pipeline run

struct TextInput {
    std::vector<size_t> token_ids;
    std::vector<bool> question_mask;
};

TextInput load_text(const fs::path& path) {
    json j = load_json_file(path, "text input");
    TextInput text;
    if (!j.contains("token_ids"))
        throw UsageError("text input: missing token_ids");
    text.token_ids = j["token_ids"].get<std::vector<size_t>>();
    if (j.contains("question_mask")) {
        text.question_mask = j["question_mask"].get<std::vector<bool>>();
        if (text.question_mask.size() != text.token_ids.size())
            throw UsageError("text input: question_mask length mismatch");
    } else {
        size_t question_len = j.value("question_len", text.token_ids.size());
        if (question_len > text.token_ids.size())
            throw UsageError("text input: question_len exceeds token count");
        text.question_mask.assign(text.token_ids.size(), false);
        for (size_t i = 0; i < question_len; ++i) text.question_mask[i] = true;
    }
    return text;
}

json tags_to_json(const std::vector<vtp::TokenTag>& tags) {
    json arr = json::array();
    for (const vtp::TokenTag& tag : tags) {
        json t{{"kind", vtp::to_string(tag.kind)}};
        if (tag.kind == vtp::TokenKind::spatial) {
            t["frame"] = tag.frame;
            t["patch"] = tag.patch;
        } else if (tag.kind == vtp::TokenKind::temporal) {
            t["frame"] = tag.frame;
        }
        arr.push_back(t);
    }
    return arr;
}

json selected_ranks_json(const vtp::SelectionResult& selection,
                         const std::vector<float>& gamma,
                         const std::vector<size_t>& source_indices) {
    // rank 1 = highest probability, ties to the lower frame index
    std::vector<size_t> by_prob(selection.selected);
    std::stable_sort(by_prob.begin(), by_prob.end(), [&](size_t a, size_t b) {
        if (selection.probs[a] != selection.probs[b])
            return selection.probs[a] > selection.probs[b];
        return a < b;
    });
    json arr = json::array();
    for (size_t rank = 0; rank < by_prob.size(); ++rank) {
        size_t frame = by_prob[rank];
        arr.push_back({{"rank", rank + 1},
                       {"frame", frame},
                       {"source_index", source_indices[frame]},
                       {"s", selection.probs[frame]},
                       {"gamma", gamma[frame]}});
    }
    return arr;
}

int cmd_pipeline_run(const std::string& config_path, const std::string& frames_path,
                     const std::string& text_path, const std::string& out_dir,
                     const std::map<std::string, std::string>& overrides) {
    RunConfig config;
    if (!config_path.empty()) config.load(load_json_file(config_path, "config"));
    for (const auto& [key, value] : overrides) {
        if (key == "frames") config.frames = std::stoull(value);
        else if (key == "top_k") config.top_k = std::stoull(value);
        else if (key == "temperature") config.temperature = std::stod(value);
        else if (key == "stride") config.stride = std::stoull(value);
        else if (key == "seed") config.seed = std::stoull(value);
        else if (key == "mode") config.mode = vtp::selection_mode_from_string(value);
    }
    config.validate();
    require_readable(frames_path, "frames input");
    require_readable(text_path, "text input");
    TextInput text = load_text(text_path);

    // all inputs validated as readable; only now touch the output directory
    vtp::Tensor source = vtp::read_tnsr(frames_path);
    vtp::FrameSamplePlan plan = vtp::uniform_sample(source.dim(0), config.frames);

    vtp::Tensor token_grid; // T x M x D_V
    if (config.encoder.kind == vtp::EncoderKind::external_file) {
        if (source.rank() != 3)
            throw vtp::InvalidInput("external features must have shape T x M x D_V");
        vtp::EncoderSpec spec = config.encoder;
        spec.feature_path = frames_path;
        vtp::Tensor features = vtp::load_features(spec);
        token_grid = vtp::apply_sample_plan(features, plan);
    } else {
        if (source.rank() != 4)
            throw vtp::InvalidInput("raw frames must have shape L x C x W x H");
        vtp::Tensor sampled = vtp::apply_sample_plan(source, plan);
        token_grid = vtp::encode_frames(sampled, config.encoder);
    }

    vtp::ProjectorWeights projector = resolve_projector(config);
    vtp::Tensor projected = vtp::project(token_grid, projector);
    vtp::Tensor pooled = vtp::spatial_pool(projected, config.stride);

    vtp::Tensor table = resolve_table(config);
    vtp::Tensor embedded = vtp::embed_text(text.token_ids, table);
    vtp::Tensor encoded_text = vtp::apply_rope(embedded, config.rope_one_based);

    vtp::PyramidConfig pyr;
    pyr.top_k = config.top_k;
    pyr.temperature = config.temperature;
    pyr.mode = config.mode;
    pyr.seed = config.seed;
    pyr.separators = vtp::make_separators(pooled.dim(2), config.separator_seed);
    vtp::PyramidOutputs outputs =
        vtp::build_memory_pyramid(pooled, encoded_text, text.question_mask, pyr);

    fs::create_directories(out_dir);
    vtp::write_tnsr(outputs.pyramid.tokens, fs::path(out_dir) / "pyramid.tnsr");

    auto census = outputs.pyramid.census();
    size_t grid_side = size_t(std::lround(std::sqrt(double(pooled.dim(1)))));
    json report{
        {"schema_version", 1},
        {"config", config.echo()},
        {"dims",
         {{"T", pooled.dim(0)},
          {"N_V", pooled.dim(1)},
          {"N_G", grid_side},
          {"D", pooled.dim(2)},
          {"k", config.top_k}}},
        {"sample_plan", plan.to_json()},
        {"gamma", outputs.attention.gamma},
        {"selection", outputs.selection.to_json()},
        {"selected_ranks",
         selected_ranks_json(outputs.selection, outputs.attention.gamma, plan.indices)},
        {"token_counts",
         {{"spatial", census.spatial},
          {"grid_sep", census.grid_sep},
          {"temporal", census.temporal},
          {"frame_sep", census.frame_sep},
          {"total", outputs.pyramid.tags.size()}}},
        {"tags", tags_to_json(outputs.pyramid.tags)}};
    write_json_file(report, fs::path(out_dir) / "report.json");
    std::cout << "wrote " << (fs::path(out_dir) / "pyramid.tnsr").string() << " and "
              << (fs::path(out_dir) / "report.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// pyramid inspect / selection visualize

int cmd_pyramid_inspect(const std::string& report_path, const std::string& pyramid_path,
                        const std::string& dump_tokens) {
    json report = load_json_file(report_path, "report");
    json out{{"schema_version", 1},
             {"token_counts", report.at("token_counts")},
             {"selected_ranks", report.at("selected_ranks")},
             {"s", report.at("selection").at("probs")},
             {"gamma", report.at("gamma")}};

    const json& dims = report.at("dims");
    size_t k = dims.at("k"), nv = dims.at("N_V"), ng = dims.at("N_G"),
           frames = dims.at("T");
    size_t expected = k * nv + k * ng + 2 * frames - 1;
    size_t actual = report.at("token_counts").at("total");
    if (!pyramid_path.empty()) {
        vtp::Tensor tokens = vtp::read_tnsr(pyramid_path);
        actual = tokens.dim(0);
        if (!dump_tokens.empty()) vtp::write_tnsr(tokens, dump_tokens);
    }
    out["length_law"] = {{"expected", expected},
                         {"actual", actual},
                         {"holds", expected == actual}};
    std::cout << out.dump(2) << "\n";
    return expected == actual ? kExitOk : kExitFailure;
}

int cmd_selection_visualize(const std::string& report_path, const std::string& format) {
    json report = load_json_file(report_path, "report");
    const json& gamma = report.at("gamma");
    const json& probs = report.at("selection").at("probs");
    const json& plan = report.at("sample_plan").at("indices");
    std::map<size_t, size_t> rank_of;
    for (const json& row : report.at("selected_ranks"))
        rank_of[row.at("frame").get<size_t>()] = row.at("rank").get<size_t>();

    json rows = json::array();
    for (size_t t = 0; t < gamma.size(); ++t) {
        json row{{"index", t},
                 {"timestamp", plan.at(t)},
                 {"gamma", gamma.at(t)},
                 {"s", probs.at(t)}};
        if (auto it = rank_of.find(t); it != rank_of.end()) row["rank"] = it->second;
        rows.push_back(row);
    }
    if (format == "json") {
        std::cout << rows.dump(2) << "\n";
        return kExitOk;
    }
    std::cout << "frame  source  gamma        s            rank\n";
    for (const json& row : rows) {
        char line[128];
        std::snprintf(line, sizeof line, "%5zu  %6zu  %-11.6g  %-11.6g  %s\n",
                      row.at("index").get<size_t>(), row.at("timestamp").get<size_t>(),
                      row.at("gamma").get<double>(), row.at("s").get<double>(),
                      row.contains("rank")
                          ? std::to_string(row.at("rank").get<size_t>()).c_str()
                          : "-");
        std::cout << line;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// schedule build

int cmd_schedule_build(const std::string& manifest_path, const std::string& lambda_path,
                       uint64_t seed, const std::string& out_dir, long baseline,
                       size_t tolerance) {
    require_readable(manifest_path, "manifest");
    vtp::LambdaMatrix lambda = vtp::LambdaMatrix::defaults();
    if (!lambda_path.empty())
        lambda = vtp::LambdaMatrix::from_json(load_json_file(lambda_path, "lambda"));

    std::vector<vtp::QARecord> manifest = vtp::parse_manifest(manifest_path);
    vtp::StagePartition parts = vtp::partition_by_stage(manifest);

    fs::create_directories(out_dir);
    std::array<vtp::StagePlan, 3> plans;
    for (int k = 1; k <= 3; ++k) {
        plans[size_t(k - 1)] = vtp::effective_set(k, parts, lambda, seed);
        const vtp::StagePlan& plan = plans[size_t(k - 1)];
        fs::path ids_path = fs::path(out_dir) / ("stage" + std::to_string(k) + ".jsonl");
        std::ofstream ids(ids_path);
        if (!ids) throw vtp::InvalidInput("cannot write " + ids_path.string());
        for (const std::string& id : plan.ordered_ids) ids << json(id).dump() << '\n';
        write_json_file(plan.sidecar_json(lambda),
                        fs::path(out_dir) / ("stage" + std::to_string(k) + ".meta.json"));
    }
    if (baseline >= 0) {
        vtp::BudgetReport budget =
            vtp::validate_budget(plans, size_t(baseline), tolerance);
        write_json_file(budget.to_json(), fs::path(out_dir) / "budget.json");
    }
    std::cout << "wrote stage plans to " << out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval overlap / classify / judge

json overlap_block(double b, double m, double r, double c) {
    return {{"BLEU", b}, {"METEOR", m}, {"ROUGE_L", r}, {"CIDEr", c}};
}

int cmd_eval_overlap(const std::string& pred_path, const std::string& out_path,
                     const std::string& smoothing_name) {
    require_readable(pred_path, "predictions");
    vtp::BleuSmoothing smoothing = smoothing_name == "none"
                                       ? vtp::BleuSmoothing::none
                                       : vtp::BleuSmoothing::add_one;

    std::vector<vtp::Prediction> preds = vtp::parse_predictions(pred_path);
    if (preds.empty()) throw vtp::InvalidInput("predictions file is empty");
    std::sort(preds.begin(), preds.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });

    std::vector<vtp::TokenList> hyps;
    std::vector<std::vector<vtp::TokenList>> refs;
    for (const vtp::Prediction& p : preds) {
        hyps.push_back(vtp::tokenize_simple(p.answer));
        std::vector<vtp::TokenList> rr;
        for (const std::string& r : p.references) rr.push_back(vtp::tokenize_simple(r));
        refs.push_back(std::move(rr));
    }
    std::vector<double> cider_scores = vtp::cider(hyps, refs);

    struct Accum {
        double bleu = 0, meteor = 0, rouge = 0, cider = 0;
        size_t n = 0;
    };
    std::map<std::string, Accum> by_task;
    json per_record = json::array();
    for (size_t i = 0; i < preds.size(); ++i) {
        double b = vtp::bleu(hyps[i], refs[i], 4, smoothing).score;
        double m = 0.0, r = 0.0;
        for (const vtp::TokenList& ref : refs[i]) {
            m = std::max(m, vtp::meteor_lite(hyps[i], ref));
            r = std::max(r, vtp::rouge_l(hyps[i], ref));
        }
        per_record.push_back({{"id", preds[i].id},
                              {"task", preds[i].task},
                              {"scores", overlap_block(b, m, r, cider_scores[i])}});
        Accum& acc = by_task[preds[i].task.empty() ? "untagged" : preds[i].task];
        acc.bleu += b;
        acc.meteor += m;
        acc.rouge += r;
        acc.cider += cider_scores[i];
        ++acc.n;
    }

    json per_task;
    Accum macro;
    for (const auto& [task, acc] : by_task) {
        per_task[task] = overlap_block(acc.bleu / double(acc.n), acc.meteor / double(acc.n),
                                       acc.rouge / double(acc.n), acc.cider / double(acc.n));
        per_task[task]["count"] = acc.n;
        macro.bleu += acc.bleu / double(acc.n);
        macro.meteor += acc.meteor / double(acc.n);
        macro.rouge += acc.rouge / double(acc.n);
        macro.cider += acc.cider / double(acc.n);
        ++macro.n;
    }
    json report{
        {"schema_version", 1},
        {"metric_config",
         {{"bleu_max_n", 4},
          {"bleu_smoothing", smoothing_name},
          {"rouge_beta", 1.0},
          {"meteor", "meteor-lite: exact + Porter stems, no synonym resource"},
          {"cider", "CIDEr-D, sigma=6, scale 0-10"}}},
        {"per_task", per_task},
        {"macro", overlap_block(macro.bleu / double(macro.n), macro.meteor / double(macro.n),
                                macro.rouge / double(macro.n), macro.cider / double(macro.n))},
        {"per_record", per_record}};
    if (out_path.empty())
        std::cout << report.dump(2) << "\n";
    else
        write_json_file(report, out_path);
    return kExitOk;
}

int cmd_eval_classify(const std::string& pred_path, const std::string& task_name,
                      const std::string& rules_path, const std::string& out_path) {
    require_readable(pred_path, "predictions");
    vtp::RuleTable table = rules_path.empty()
                               ? vtp::RuleTable::builtin(vtp::task_from_string(task_name))
                               : vtp::RuleTable::load(rules_path);

    std::vector<vtp::Prediction> preds = vtp::parse_predictions(pred_path);
    std::sort(preds.begin(), preds.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    std::vector<std::pair<vtp::VerbalizedLabel, vtp::VerbalizedLabel>> pairs;
    for (const vtp::Prediction& p : preds)
        pairs.emplace_back(vtp::verbalize(p.id, p.answer, table),
                           vtp::verbalize(p.id, p.references.front(), table));
    vtp::ClassificationReport metrics = vtp::classification_metrics(pairs, table.schema);

    std::string primary = task_name == "CVSA" ? "balanced_accuracy" : "macro_f1";
    json report{{"schema_version", 1},
                {"task", task_name},
                {"schema", table.schema},
                {"primary_metric", primary},
                {"metrics", metrics.to_json()}};
    if (out_path.empty())
        std::cout << report.dump(2) << "\n";
    else
        write_json_file(report, out_path);
    return kExitOk;
}

int cmd_eval_judge(const std::string& pred_path, vtp::JudgeConfig config,
                   const std::string& out_path) {
    require_readable(pred_path, "predictions");
    std::vector<vtp::Prediction> preds = vtp::parse_predictions(pred_path);
    vtp::JudgeBatchResult result = vtp::judge_batch(preds, config);

    std::sort(result.scores.begin(), result.scores.end(),
              [](const auto& a, const auto& b) { return a.record_id < b.record_id; });
    std::sort(result.skipped.begin(), result.skipped.end());
    double cr = 0, rl = 0, lg = 0;
    for (const vtp::JudgeScore& s : result.scores) {
        cr += s.correctness;
        rl += s.relevance;
        lg += s.linguistic;
    }
    size_t n = result.scores.size();
    json report{{"schema_version", 1},
                {"judge", {{"endpoint", config.endpoint}, {"model", config.model}}},
                {"aggregates",
                 {{"CR", n ? cr / double(n) : 0.0},
                  {"RL", n ? rl / double(n) : 0.0},
                  {"LG", n ? lg / double(n) : 0.0},
                  {"scored", n},
                  {"skipped", result.skipped.size()}}},
                {"results", result.to_json()}};
    if (out_path.empty())
        std::cout << report.dump(2) << "\n";
    else
        write_json_file(report, out_path);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

int cmd_gradcheck(const std::string& fragment, size_t probes, double eps, double tol,
                  uint64_t seed) {
    namespace gc = vtp::gradcheck;
    std::vector<gc::Fragment> fragments;
    if (fragment == "all") {
        fragments = gc::all_fragments();
    } else {
        try {
            fragments.push_back(gc::fragment_from_name(fragment));
        } catch (const vtp::InvalidInput& e) {
            throw UsageError(e.what());
        }
    }
    bool all_pass = true;
    json reports = json::array();
    for (gc::Fragment f : fragments) {
        gc::DiffReport report = gc::check_path(f, probes, eps, tol, seed);
        all_pass = all_pass && report.pass;
        reports.push_back(report.to_json());
    }
    std::cout << (fragments.size() == 1 ? reports[0].dump(2) : reports.dump(2)) << "\n";
    return all_pass ? kExitOk : kExitFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vtp: text-guided video token pyramid toolkit"};
    app.require_subcommand(1);

    // pipeline run
    auto* pipeline = app.add_subcommand("pipeline", "feature pipeline commands");
    auto* run = pipeline->add_subcommand("run", "build a memory pyramid from inputs");
    std::string run_config, run_frames, run_text, run_out = "out";
    std::map<std::string, std::string> run_overrides;
    run->add_option("--config", run_config, "JSON run config (flags override it)");
    run->add_option("--frames", run_frames,
                    "frames .tnsr (L x C x W x H) or features (T' x M x D_V)")
        ->required();
    run->add_option("--text", run_text,
                    "text JSON: token_ids + question_len or question_mask")
        ->required();
    run->add_option("--out", run_out, "output directory");
    for (const char* key : {"frames", "top_k", "temperature", "stride", "seed", "mode"}) {
        std::string name = std::string("--set-") + key;
        run->add_option_function<std::string>(
            name,
            [&run_overrides, key](const std::string& v) { run_overrides[key] = v; },
            std::string("override config ") + key);
    }

    // pyramid inspect
    auto* pyramid = app.add_subcommand("pyramid", "pyramid artifact commands");
    auto* inspect = pyramid->add_subcommand("inspect", "report token counts and ranks");
    std::string inspect_report, inspect_pyramid, inspect_dump;
    inspect->add_option("--report", inspect_report, "report.json from pipeline run")
        ->required();
    inspect->add_option("--pyramid", inspect_pyramid, "pyramid.tnsr to re-census");
    inspect->add_option("--dump-tokens", inspect_dump, "write the token payload here");

    // selection visualize
    auto* selection = app.add_subcommand("selection", "frame selection commands");
    auto* visualize = selection->add_subcommand("visualize", "per-frame rank table");
    std::string vis_report, vis_format = "text";
    visualize->add_option("--report", vis_report, "report.json from pipeline run")
        ->required();
    visualize->add_option("--format", vis_format, "text or json")
        ->check(CLI::IsMember({"text", "json"}));

    // schedule build
    auto* schedule = app.add_subcommand("schedule", "curriculum scheduler commands");
    auto* build = schedule->add_subcommand("build", "materialize stage plans");
    std::string sched_manifest, sched_lambda, sched_out = "out";
    uint64_t sched_seed = 0;
    long sched_baseline = -1;
    size_t sched_tolerance = 0;
    build->add_option("--manifest", sched_manifest, "QA manifest JSONL")->required();
    build->add_option("--lambda", sched_lambda, "lambda matrix JSON");
    build->add_option("--seed", sched_seed, "sampling seed");
    build->add_option("--out", sched_out, "output directory");
    build->add_option("--baseline", sched_baseline,
                      "budget baseline total (enables budget.json)");
    build->add_option("--tolerance", sched_tolerance, "allowed budget deviation");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluation commands");
    auto* overlap = eval->add_subcommand("overlap", "BLEU/METEOR/ROUGE-L/CIDEr");
    std::string ov_pred, ov_out, ov_smoothing = "add_one";
    overlap->add_option("--pred", ov_pred, "predictions JSONL")->required();
    overlap->add_option("--out", ov_out, "report JSON path (stdout if omitted)");
    overlap->add_option("--smoothing", ov_smoothing, "BLEU smoothing: none or add_one")
        ->check(CLI::IsMember({"none", "add_one"}));

    auto* classify =
        eval->add_subcommand("classify", "verbalizer + classification metrics");
    std::string cl_pred, cl_task = "CVSA", cl_rules, cl_out;
    classify->add_option("--pred", cl_pred, "predictions JSONL")->required();
    classify->add_option("--task", cl_task, "task tag (selects the builtin rule table)");
    classify->add_option("--rules", cl_rules, "rule table JSON (overrides builtin)");
    classify->add_option("--out", cl_out, "report JSON path (stdout if omitted)");

    auto* judge = eval->add_subcommand("judge", "LLM-judge scoring over HTTP");
    std::string j_pred, j_out;
    vtp::JudgeConfig judge_config;
    judge->add_option("--pred", j_pred, "predictions JSONL")->required();
    judge->add_option("--endpoint", judge_config.endpoint, "judge endpoint URL")
        ->required();
    judge->add_option("--model", judge_config.model, "judge model name")->required();
    judge->add_option("--concurrency", judge_config.concurrency,
                      "request concurrency cap");
    judge->add_option("--retries", judge_config.max_retries, "max retries per record");
    judge->add_option("--interval-ms", judge_config.min_interval_ms,
                      "minimum ms between request starts");
    judge->add_option("--out", j_out, "report JSON path (stdout if omitted)");

    // gradcheck
    auto* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference gradient checks");
    std::string gc_fragment = "all";
    size_t gc_probes = 64;
    double gc_eps = 1e-4, gc_tol = 1e-3;
    uint64_t gc_seed = 0;
    gradcheck->add_option("--fragment", gc_fragment,
                          "fragment name or 'all': similarity-chain, gumbel-soft, "
                          "beta-renorm, gamma-renorm, temporal-pool, reweight, "
                          "projector, full-soft-path");
    gradcheck->add_option("--probes", gc_probes, "probe count");
    gradcheck->add_option("--eps", gc_eps, "central-difference step");
    gradcheck->add_option("--tol", gc_tol, "relative tolerance");
    gradcheck->add_option("--seed", gc_seed, "instance seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (run->parsed())
            return cmd_pipeline_run(run_config, run_frames, run_text, run_out,
                                    run_overrides);
        if (inspect->parsed())
            return cmd_pyramid_inspect(inspect_report, inspect_pyramid, inspect_dump);
        if (visualize->parsed()) return cmd_selection_visualize(vis_report, vis_format);
        if (build->parsed())
            return cmd_schedule_build(sched_manifest, sched_lambda, sched_seed, sched_out,
                                      sched_baseline, sched_tolerance);
        if (overlap->parsed()) return cmd_eval_overlap(ov_pred, ov_out, ov_smoothing);
        if (classify->parsed())
            return cmd_eval_classify(cl_pred, cl_task, cl_rules, cl_out);
        if (judge->parsed()) return cmd_eval_judge(j_pred, judge_config, j_out);
        if (gradcheck->parsed())
            return cmd_gradcheck(gc_fragment, gc_probes, gc_eps, gc_tol, gc_seed);
        std::cerr << json{{"error", "no subcommand"}}.dump() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return kExitFailure;
    }
}
