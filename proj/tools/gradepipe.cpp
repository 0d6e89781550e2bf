#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "gradepipe/http_backend.hpp"
#include "gradepipe/pipeline.hpp"
#include "gradepipe/review_server.hpp"

#ifndef GRADEPIPE_TEMPLATE_DIR
#define GRADEPIPE_TEMPLATE_DIR "templates"
#endif

namespace gp = gradepipe;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::string templates_dir = GRADEPIPE_TEMPLATE_DIR;
  std::optional<int> parallelism;
  std::optional<int> max_retries;
  std::optional<std::string> model;
};

struct BackendOpts {
  std::string kind = "replay";
  std::string replay_dir;
  std::string record_dir;
  std::string call_log;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file (temperature, parallelism, thresholds, grid, withhold)");
  cmd->add_option("--templates", c.templates_dir, "Prompt/message template directory")->capture_default_str();
}

void add_backend(CLI::App* cmd, Common& c, BackendOpts& b) {
  cmd->add_option("--backend", b.kind, "Model backend")->check(CLI::IsMember({"live", "replay"}))->capture_default_str();
  cmd->add_option("--replay-dir", b.replay_dir, "Replay fixture directory (replay backend)");
  cmd->add_option("--record-dir", b.record_dir, "Also store every response here as a replay fixture");
  cmd->add_option("--model", c.model, "Model id (overrides config model_id)");
  cmd->add_option("--parallelism", c.parallelism, "Maximum in-flight backend calls (default 8)");
  cmd->add_option("--max-retries", c.max_retries, "Retries for transport errors and malformed output (default 2)");
  cmd->add_option("--call-log", b.call_log, "Append one JSON line per backend attempt to this file");
}

gp::PipelineConfig load_config(const Common& c) {
  gp::PipelineConfig cfg = c.config_path.empty() ? gp::PipelineConfig{} : gp::load_config(c.config_path);
  if (c.parallelism) {
    if (*c.parallelism < 1) throw gp::ValidationError("--parallelism must be >= 1");
    cfg.parallelism = *c.parallelism;
  }
  if (c.max_retries) {
    if (*c.max_retries < 0) throw gp::ValidationError("--max-retries must be >= 0");
    cfg.max_retries = *c.max_retries;
  }
  if (c.model) cfg.model_id = *c.model;
  return cfg;
}

struct BackendStack {
  std::unique_ptr<gp::Backend> base;
  std::unique_ptr<gp::Backend> recorder;
  std::unique_ptr<gp::CallLog> log;

  gp::Backend& backend() { return recorder ? *recorder : *base; }
};

BackendStack make_backend(const BackendOpts& o, const gp::PipelineConfig& cfg) {
  BackendStack s;
  if (o.kind == "replay") {
    if (o.replay_dir.empty()) throw gp::ValidationError("--replay-dir is required with --backend replay");
    if (!fs::is_directory(o.replay_dir)) throw gp::IoError("replay directory not found: " + o.replay_dir);
    s.base = std::make_unique<gp::ReplayBackend>(o.replay_dir, cfg.model_id);
  } else {
    s.base = std::make_unique<gp::HttpBackend>(gp::http_config_from_env(cfg.model_id));
  }
  if (!o.record_dir.empty()) s.recorder = std::make_unique<gp::RecordingBackend>(*s.base, o.record_dir);
  if (!o.call_log.empty()) s.log = std::make_unique<gp::CallLog>(o.call_log);
  return s;
}

void print_error(const std::string& category, const std::string& code, const std::string& message) {
  std::cerr << gp::json{{"error", {{"category", category}, {"code", code}, {"message", message}}}}.dump() << "\n";
}

std::string category_name(gp::ErrorCategory c) {
  switch (c) {
    case gp::ErrorCategory::Validation: return "Validation";
    case gp::ErrorCategory::Backend: return "Backend";
    case gp::ErrorCategory::Io: return "Io";
  }
  return "?";
}

gp::ReviewServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradepipe: rubric-based grading of handwritten math solutions"};
  app.require_subcommand(1);

  Common common;
  BackendOpts backend_opts;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a manifest, link TA scores and apply exclusions");
  std::string manifest, ta, exclusions, out;
  ingest->add_option("--manifest", manifest, "Batch manifest (JSON)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--ta", ta, "TA score export (CSV: test_code,quiz_id,question_id,score)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--exclusions", exclusions, "Exclusion policy (JSON)")->check(CLI::ExistingFile);
  ingest->add_option("--out", out, "Batch state directory")->required();

  // transcribe
  auto* transcribe = app.add_subcommand("transcribe", "Transcribe every pending region to markup");
  std::string batch_dir;
  transcribe->add_option("--batch", batch_dir, "Batch state directory")->required();
  add_common(transcribe, common);
  add_backend(transcribe, common, backend_opts);

  // grade
  auto* grade = app.add_subcommand("grade", "Grade transcribed submissions against their rubrics");
  std::string mode = "dual+stabilized", results_out, single_rubric = "flexible";
  int runs = 3;
  grade->add_option("--batch", batch_dir, "Batch state directory")->required();
  grade->add_option("--mode", mode, "Grading mode")
      ->check(CLI::IsMember({"dual", "stabilized", "dual+stabilized"}))
      ->capture_default_str();
  grade->add_option("--runs", runs, "Runs per rubric for stabilized modes (>= 2; ignored by dual)")->capture_default_str();
  grade->add_option("--rubric", single_rubric, "Rubric used by --mode stabilized")
      ->check(CLI::IsMember({"flexible", "fixed"}))
      ->capture_default_str();
  grade->add_option("--out", results_out, "Results file (default <batch>/results.jsonl)");
  add_common(grade, common);
  add_backend(grade, common, backend_opts);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Agreement statistics and report tables");
  std::string results_in, verdicts, compare, survey;
  analyze->add_option("--results", results_in, "Results file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--ta", ta, "TA score export (CSV)")->required()->check(CLI::ExistingFile);
  analyze->add_option("--verdicts", verdicts, "Reviewer verdict table (CSV)")->check(CLI::ExistingFile);
  analyze->add_option("--compare", compare, "Second model's results file for cross-model deltas")->check(CLI::ExistingFile);
  analyze->add_option("--survey", survey, "Survey counts (CSV: group,n,<items...>)")->check(CLI::ExistingFile);
  analyze->add_option("--out", out, "Report directory")->required();
  add_common(analyze, common);

  // message
  auto* message = app.add_subcommand("message", "Render one feedback message per student");
  std::string roster;
  message->add_option("--results", results_in, "Results file")->required()->check(CLI::ExistingFile);
  message->add_option("--roster", roster, "Roster (CSV: test_code,name)")->check(CLI::ExistingFile);
  message->add_option("--out", out, "Messages directory")->required();
  add_common(message, common);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the review service over flagged results");
  int port = 8787;
  std::string host = "127.0.0.1", state_dir = "state", ui_dir;
  serve->add_option("--results", results_in, "Results file")->required()->check(CLI::ExistingFile);
  serve->add_option("--batch", batch_dir, "Batch state directory (adds transcriptions, rubrics, images)");
  serve->add_option("--port", port, "Listen port")->capture_default_str();
  serve->add_option("--host", host, "Listen address")->capture_default_str();
  serve->add_option("--state", state_dir, "Directory holding verdicts.jsonl")->capture_default_str();
  serve->add_option("--ui", ui_dir, "Static UI directory mounted at /ui")->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (ingest->parsed()) {
      const auto s = gp::pipeline::run_ingest(manifest, ta, exclusions.empty() ? std::nullopt : std::optional<fs::path>(exclusions), out);
      std::cout << "ingest: " << s.included << " regions included, " << s.excluded << " excluded\n";
    } else if (transcribe->parsed()) {
      const auto cfg = load_config(common);
      const auto templates = gp::TemplateSet::load(common.templates_dir);
      auto stack = make_backend(backend_opts, cfg);
      const auto s = gp::pipeline::run_transcribe(batch_dir, stack.backend(), cfg, templates, stack.log.get());
      std::cout << "transcribe: " << s.done << " transcribed, " << s.skipped << " already done\n";
    } else if (grade->parsed()) {
      const auto cfg = load_config(common);
      gp::pipeline::GradeOptions opts;
      opts.mode = gp::pipeline::grade_mode_from_string(mode);
      opts.runs = runs;
      opts.single_rubric = single_rubric == "fixed" ? gp::RubricKind::Fixed : gp::RubricKind::Flexible;
      gp::pipeline::validate(opts);
      const auto templates = gp::TemplateSet::load(common.templates_dir);
      auto stack = make_backend(backend_opts, cfg);
      const fs::path target = results_out.empty() ? fs::path(batch_dir) / "results.jsonl" : fs::path(results_out);
      const auto results = gp::pipeline::run_grade(batch_dir, target, stack.backend(), cfg, templates, opts, stack.log.get());
      std::size_t flagged = 0;
      for (const auto& r : results) flagged += r.outcome.flags.empty() ? 0 : 1;
      std::cout << "grade: " << results.size() << " results (" << flagged << " flagged) -> " << target.string() << "\n";
    } else if (analyze->parsed()) {
      const auto cfg = load_config(common);
      gp::pipeline::AnalyzeInputs in;
      in.results = results_in;
      in.ta = ta;
      if (!verdicts.empty()) in.verdicts = verdicts;
      if (!compare.empty()) in.compare = compare;
      if (!survey.empty()) in.survey = survey;
      in.out_dir = out;
      gp::pipeline::run_analyze(in, cfg);
      std::cout << "analyze: report written to " << out << "\n";
    } else if (message->parsed()) {
      const auto cfg = load_config(common);
      const auto templates = gp::TemplateSet::load(common.templates_dir);
      const auto n = gp::pipeline::run_message(results_in, roster.empty() ? std::nullopt : std::optional<fs::path>(roster), out, cfg, templates);
      std::cout << "message: " << n << " messages written to " << out << "\n";
    } else if (serve->parsed()) {
      gp::ReviewStore store(fs::path(state_dir) / "verdicts.jsonl");
      const auto results = gp::load_results(results_in);
      gp::ContextProvider context;
      if (!batch_dir.empty()) {
        context = gp::pipeline::batch_context(gp::pipeline::load_batch_state(batch_dir),
                                              gp::pipeline::load_transcriptions(batch_dir));
      }
      const auto added = store.enqueue_flagged(results, {}, context);
      gp::ReviewServerOptions opts;
      opts.token = gp::review_token_from_env();
      if (!ui_dir.empty()) opts.ui_dir = ui_dir;
      gp::ReviewServer server(store, opts);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serve: " << added << " new items queued; listening on http://" << host << ":" << port << std::endl;
      if (!server.listen(host, port)) throw gp::IoError("cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const gp::Error& e) {
    print_error(category_name(e.category()), e.code(), e.what());
    return gp::exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    print_error("Io", "IoError", e.what());
    return 4;
  } catch (const std::exception& e) {
    print_error("Internal", "InternalError", e.what());
    return 1;
  }
  return 0;
}
