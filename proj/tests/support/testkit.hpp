#pragma once

#include <sys/wait.h>

#include <array>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "gradepipe/pipeline.hpp"

namespace testkit {

namespace fs = std::filesystem;
using namespace gradepipe;

inline fs::path fixture_dir() { return fs::path(GRADEPIPE_FIXTURE_DIR); }

inline const TemplateSet& templates() {
  static const TemplateSet t = TemplateSet::load(GRADEPIPE_TEMPLATE_DIR);
  return t;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("gradepipe_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

/// Backend whose responses come from a callback. Counts calls.
class ScriptedBackend : public Backend {
 public:
  using Fn = std::function<std::string(const PromptBundle&)>;
  explicit ScriptedBackend(Fn complete, Fn transcribe = {}) : complete_(std::move(complete)), transcribe_(std::move(transcribe)) {}

  std::string transcribe(const std::string&, const PromptBundle& b) override {
    ++calls;
    if (!transcribe_) throw BackendError("no transcription script");
    return transcribe_(b);
  }
  std::string complete(const PromptBundle& b) override {
    ++calls;
    return complete_(b);
  }
  std::string model_id() const override { return "scripted"; }

  std::atomic<int> calls{0};

 private:
  Fn complete_, transcribe_;
};

inline std::string scored(std::int64_t tenths, const std::string& feedback) {
  return json{{"score", score_to_json(Score::from_tenths(tenths, 1))}, {"feedback", feedback}}.dump();
}

inline Score pts(std::int64_t tenths) { return Score::from_tenths(tenths, 1); }

constexpr const char* kFlexBody = "Award full credit for any valid argument. (marker: flexible)";
constexpr const char* kFixedBody = "1. Setup (1.0 pt).\n2. Result (2.0 pts).";

inline QuestionSpec question(std::int64_t max_tenths = 30, std::string id = "q1") {
  return {id, "Compute the value of the expression.", "Reference working.", "4/243", pts(max_tenths),
          {id + "-flexible", id + "-fixed"}};
}

inline RubricSpec flexible_rubric(const QuestionSpec& q) {
  return {q.question_id + "-flexible", q.question_id, RubricKind::Flexible, kFlexBody, {}, q.max_points, false};
}

inline RubricSpec fixed_rubric(const QuestionSpec& q) {
  return {q.question_id + "-fixed", q.question_id, RubricKind::Fixed, kFixedBody, {}, q.max_points, false};
}

inline GradeContext grade_context() {
  PipelineConfig cfg;
  cfg.max_retries = 0;
  return pipeline::make_grade_context(cfg, templates(), kDefaultGridTenths);
}

inline bool is_flexible(const PromptBundle& b) { return b.user_message.find("(marker: flexible)") != std::string::npos; }

inline GradeRun run(int index, std::int64_t tenths, const std::string& rubric = "q1-flexible") {
  GradeRun r;
  r.run_index = index;
  r.rubric_id = rubric;
  r.model_id = "m";
  r.score = pts(tenths);
  r.feedback = "run " + std::to_string(index);
  return r;
}

inline ResultRecord result(const std::string& code, const std::string& qid, int qindex, std::int64_t score,
                           std::int64_t max, std::vector<Flag> flags = {}) {
  ResultRecord r;
  r.test_code = code;
  r.quiz_id = "quiz1";
  r.question_id = qid;
  r.question_index = qindex;
  r.max_points = pts(max);
  r.outcome.selected_score = pts(score);
  r.outcome.selected_feedback = "Feedback for " + code + " " + qid + ".";
  r.outcome.selected_rubric_id = qid + "-flexible";
  r.outcome.selection_rule = SelectionRule::SingleRun;
  r.outcome.flags = std::move(flags);
  GradeRun g = run(0, score, qid + "-flexible");
  r.outcome.runs.push_back(g);
  return r;
}

/// Writes a small manifest with one question and the given codes into dir.
inline fs::path small_manifest(const fs::path& dir, const std::vector<std::string>& codes, const std::string& quiz = "quiz1") {
  const QuestionSpec q = question();
  write_file(dir / "rubrics" / "q1-flexible.json", rubric_to_json(flexible_rubric(q)).dump());
  write_file(dir / "rubrics" / "q1-fixed.json", rubric_to_json(fixed_rubric(q)).dump());
  json regions = json::array();
  for (const auto& c : codes) {
    for (const char* kind : {"Solution", "FinalAnswer"}) {
      const std::string ref = "img/" + c + "_" + kind + ".png";
      write_file(dir / ref, "image bytes for " + c + " " + kind);
      regions.push_back({{"test_code", c}, {"question_id", "q1"}, {"kind", kind}, {"image_ref", ref}});
    }
  }
  json doc{{"quiz_id", quiz}, {"section_id", "S1"}, {"questions", {detail::question_to_json(q)}}, {"regions", regions}};
  write_file(dir / "manifest.json", doc.dump(2));
  return dir / "manifest.json";
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline CommandResult run_command(const std::string& command) {
  CommandResult r;
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed: " + command);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

/// Runs ingest, transcribe, grade, analyze and message over the committed
/// batch fixture into work. Returns the first failing step's result, or the
/// last step's on success.
inline CommandResult run_fixture_pipeline(const fs::path& cli, const fs::path& work) {
  const fs::path f = fixture_dir() / "batch57";
  const std::string exe = quoted(cli);
  const std::string cfg = " --config " + quoted(f / "config.json");
  const std::string replay = " --backend replay --replay-dir " + quoted(f / "replay");
  const fs::path batch = work / "batch";
  const std::vector<std::string> steps = {
      exe + " ingest --manifest " + quoted(f / "manifest.json") + " --ta " + quoted(f / "ta_scores.csv") +
          " --exclusions " + quoted(f / "exclusions.json") + " --out " + quoted(batch),
      exe + " transcribe --batch " + quoted(batch) + cfg + replay,
      exe + " grade --batch " + quoted(batch) + cfg + replay,
      exe + " analyze --results " + quoted(batch / "results.jsonl") + " --ta " + quoted(f / "ta_scores.csv") +
          " --verdicts " + quoted(f / "verdicts.csv") + cfg + " --out " + quoted(work / "report"),
      exe + " message --results " + quoted(batch / "results.jsonl") + " --roster " + quoted(f / "roster.csv") + cfg +
          " --out " + quoted(work / "messages"),
  };
  CommandResult last;
  for (const auto& step : steps) {
    last = run_command(step);
    if (last.exit_code != 0) {
      last.output = step + "\n" + last.output;
      return last;
    }
  }
  return last;
}

/// Relative path -> contents for every regular file under root.
inline std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return out;
}

}  // namespace testkit
