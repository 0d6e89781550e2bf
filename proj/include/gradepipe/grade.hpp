#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gradepipe/backend.hpp"
#include "gradepipe/prompting.hpp"

namespace gradepipe {

struct GradeRun {
  int run_index = 0;
  std::string rubric_id;
  std::string model_id;
  Score score;
  std::string feedback;
  std::string bundle_hash;  // empty for short-circuited blank regions
  std::string template_version;
};

enum class SelectionRule { SingleRun, MaxRule, ClosestToMean };

inline std::string to_string(SelectionRule r) {
  switch (r) {
    case SelectionRule::SingleRun: return "SingleRun";
    case SelectionRule::MaxRule: return "MaxRule";
    case SelectionRule::ClosestToMean: return "ClosestToMean";
  }
  return "?";
}

inline SelectionRule selection_rule_from_string(std::string_view s) {
  if (s == "SingleRun") return SelectionRule::SingleRun;
  if (s == "MaxRule") return SelectionRule::MaxRule;
  if (s == "ClosestToMean") return SelectionRule::ClosestToMean;
  throw ParseError("unknown selection rule '" + std::string(s) + "'");
}

enum class FlagKind { FullCreditSplit, CorrectAnswerUnderCredited, HighVariance, OffGridScore, OcrSuspect };

inline std::string to_string(FlagKind k) {
  switch (k) {
    case FlagKind::FullCreditSplit: return "FullCreditSplit";
    case FlagKind::CorrectAnswerUnderCredited: return "CorrectAnswerUnderCredited";
    case FlagKind::HighVariance: return "HighVariance";
    case FlagKind::OffGridScore: return "OffGridScore";
    case FlagKind::OcrSuspect: return "OcrSuspect";
  }
  return "?";
}

inline FlagKind flag_kind_from_string(std::string_view s) {
  for (auto k : {FlagKind::FullCreditSplit, FlagKind::CorrectAnswerUnderCredited, FlagKind::HighVariance,
                 FlagKind::OffGridScore, FlagKind::OcrSuspect}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("unknown flag '" + std::string(s) + "'");
}

struct Flag {
  FlagKind kind = FlagKind::FullCreditSplit;
  double sigma_tenths = 0.0;  // HighVariance only

  friend bool operator==(const Flag& a, const Flag& b) { return a.kind == b.kind; }
};

/// Flags are a set keyed by kind, kept in enum order.
inline void add_flag(std::vector<Flag>& flags, Flag f) {
  auto it = std::find_if(flags.begin(), flags.end(), [&](const Flag& x) { return x.kind == f.kind; });
  if (it != flags.end()) {
    it->sigma_tenths = std::max(it->sigma_tenths, f.sigma_tenths);
    return;
  }
  flags.push_back(f);
  std::sort(flags.begin(), flags.end(),
            [](const Flag& a, const Flag& b) { return static_cast<int>(a.kind) < static_cast<int>(b.kind); });
}

inline bool has_flag(const std::vector<Flag>& flags, FlagKind k) {
  return std::any_of(flags.begin(), flags.end(), [&](const Flag& f) { return f.kind == k; });
}

struct GradeOutcome {
  Score selected_score;
  std::string selected_feedback;
  std::string selected_rubric_id;
  SelectionRule selection_rule = SelectionRule::SingleRun;
  std::vector<GradeRun> runs;
  std::vector<Flag> flags;
};

struct GradeContext {
  const TemplateSet* templates = nullptr;
  GradingPromptOptions prompt;
  RetryPolicy retry;
  CallLog* log = nullptr;
};

inline constexpr const char* kNoWorkFeedback = "No work detected.";

inline GradeRun grade_once(const std::string& transcription, const std::string& final_answer_text,
                           const QuestionSpec& question, const RubricSpec& rubric, Backend& backend,
                           const GradeContext& ctx, int run_index = 0) {
  if (rubric.question_id != question.question_id) {
    throw RubricQuestionMismatch("rubric " + rubric.rubric_id + " does not belong to " + question.question_id);
  }
  if (rubric.review_required) throw ValidationError("rubric " + rubric.rubric_id + " is a draft awaiting review");
  GradeRun run;
  run.run_index = run_index;
  run.rubric_id = rubric.rubric_id;
  run.model_id = backend.model_id();
  run.template_version = ctx.templates->version();
  if (trim(transcription).empty()) {
    run.score = Score::from_tenths(0, ctx.prompt.grid_tenths);
    run.feedback = kNoWorkFeedback;
    return run;
  }
  PromptBundle bundle = build_grading_prompt(transcription, final_answer_text, question, rubric, *ctx.templates,
                                             ctx.prompt);
  bundle.sample_index = run_index;
  run.bundle_hash = bundle_hash(bundle);
  const std::string text = complete_with_retry(backend, bundle, ctx.retry, ctx.log);
  auto parsed = parse_scored_feedback(text, question.max_points, ctx.prompt.grid_tenths);
  run.score = parsed.score;
  run.feedback = std::move(parsed.feedback);
  return run;
}

inline GradeOutcome single_run_outcome(GradeRun run) {
  GradeOutcome o;
  o.selected_score = run.score;
  o.selected_feedback = run.feedback;
  o.selected_rubric_id = run.rubric_id;
  o.selection_rule = SelectionRule::SingleRun;
  o.runs.push_back(std::move(run));
  return o;
}

/// Higher score wins with its feedback; on a tie the flexible side wins.
inline GradeOutcome max_rule(const GradeOutcome& flexible, const GradeOutcome& fixed) {
  const GradeOutcome& pick = fixed.selected_score > flexible.selected_score ? fixed : flexible;
  GradeOutcome o;
  o.selected_score = pick.selected_score;
  o.selected_feedback = pick.selected_feedback;
  o.selected_rubric_id = pick.selected_rubric_id;
  o.selection_rule = SelectionRule::MaxRule;
  o.runs = flexible.runs;
  o.runs.insert(o.runs.end(), fixed.runs.begin(), fixed.runs.end());
  for (const auto& f : flexible.flags) add_flag(o.flags, f);
  for (const auto& f : fixed.flags) add_flag(o.flags, f);
  return o;
}

/// Trim, case-fold, collapse whitespace, strip trailing punctuation.
inline std::string normalize_final_answer(std::string_view s) {
  std::string out = collapse_whitespace(to_lower_ascii(trim(s)));
  while (!out.empty() && std::string_view(".,;:!?").find(out.back()) != std::string_view::npos) out.pop_back();
  return trim(out);
}

struct FlagConfig {
  std::int64_t high_variance_tenths = 5;
  std::int64_t grid_tenths = kDefaultGridTenths;
};

/// Population standard deviation of run scores, in tenths.
inline double run_sigma_tenths(std::span<const GradeRun> runs) {
  if (runs.empty()) return 0.0;
  const auto k = static_cast<std::int64_t>(runs.size());
  std::int64_t s = 0, ss = 0;
  for (const auto& r : runs) {
    s += r.score.tenths();
    ss += r.score.tenths() * r.score.tenths();
  }
  return std::sqrt(static_cast<double>(k * ss - s * s)) / static_cast<double>(k);
}

inline std::vector<Flag> detect_flags(const GradeOutcome& outcome, const QuestionSpec& question,
                                      const std::string& final_answer_text, const FlagConfig& config = {}) {
  std::vector<Flag> flags;
  std::map<std::string, std::vector<GradeRun>> groups;
  for (const auto& r : outcome.runs) groups[r.rubric_id].push_back(r);

  for (const auto& [rubric_id, runs] : groups) {
    if (runs.size() < 2) continue;
    const auto full = std::count_if(runs.begin(), runs.end(), [&](const GradeRun& r) { return r.score == question.max_points; });
    if (full == 1) add_flag(flags, {FlagKind::FullCreditSplit, 0.0});
    // sigma >= t  <=>  k*ss - s^2 >= (t*k)^2, all integers.
    const auto k = static_cast<std::int64_t>(runs.size());
    std::int64_t s = 0, ss = 0;
    for (const auto& r : runs) {
      s += r.score.tenths();
      ss += r.score.tenths() * r.score.tenths();
    }
    const std::int64_t lhs = k * ss - s * s;
    const std::int64_t rhs = config.high_variance_tenths * k * config.high_variance_tenths * k;
    if (lhs >= rhs && lhs > 0) add_flag(flags, {FlagKind::HighVariance, run_sigma_tenths(runs)});
  }

  const std::string fa = normalize_final_answer(final_answer_text);
  if (!fa.empty() && fa == normalize_final_answer(question.reference_final_answer) &&
      outcome.selected_score < question.max_points) {
    add_flag(flags, {FlagKind::CorrectAnswerUnderCredited, 0.0});
  }
  for (const auto& r : outcome.runs) {
    if (r.score.tenths() % config.grid_tenths != 0) {
      add_flag(flags, {FlagKind::OffGridScore, 0.0});
      break;
    }
  }
  return flags;
}

struct DualRubrics {
  const RubricSpec& flexible;
  const RubricSpec& fixed;
};

inline void check_dual(const DualRubrics& rubrics) {
  if (rubrics.flexible.kind != RubricKind::Flexible) throw ValidationError(rubrics.flexible.rubric_id + " is not Flexible");
  if (rubrics.fixed.kind != RubricKind::Fixed) throw ValidationError(rubrics.fixed.rubric_id + " is not Fixed");
}

/// Two independent calls, one per rubric, combined by the max-rule. Either
/// call failing fails the whole outcome.
inline GradeOutcome grade_dual(const std::string& transcription, const std::string& final_answer_text,
                               const QuestionSpec& question, const DualRubrics& rubrics, Backend& backend,
                               const GradeContext& ctx, const FlagConfig& flags = {}) {
  check_dual(rubrics);
  auto flex = grade_once(transcription, final_answer_text, question, rubrics.flexible, backend, ctx);
  auto fixed = grade_once(transcription, final_answer_text, question, rubrics.fixed, backend, ctx);
  GradeOutcome o = max_rule(single_run_outcome(std::move(flex)), single_run_outcome(std::move(fixed)));
  o.flags = detect_flags(o, question, final_answer_text, flags);
  return o;
}

/// Picks the run whose score is closest to the exact run mean; ties go to the
/// lowest run_index. Never emits the mean itself.
inline GradeOutcome stabilize(std::span<const GradeRun> runs) {
  if (runs.empty()) throw EmptyRuns("stabilize needs at least one run");
  for (const auto& r : runs) {
    if (r.rubric_id != runs.front().rubric_id) throw MixedRubrics("runs mix rubrics " + runs.front().rubric_id + " and " + r.rubric_id);
  }
  // |s - S/k| compared as |k*s - S| to stay exact.
  const auto k = static_cast<std::int64_t>(runs.size());
  std::int64_t sum = 0;
  for (const auto& r : runs) sum += r.score.tenths();
  const GradeRun* best = nullptr;
  std::int64_t best_dist = 0;
  for (const auto& r : runs) {
    const std::int64_t dist = std::llabs(k * r.score.tenths() - sum);
    if (!best || dist < best_dist || (dist == best_dist && r.run_index < best->run_index)) {
      best = &r;
      best_dist = dist;
    }
  }
  GradeOutcome o;
  o.selected_score = best->score;
  o.selected_feedback = best->feedback;
  o.selected_rubric_id = best->rubric_id;
  o.selection_rule = SelectionRule::ClosestToMean;
  o.runs.assign(runs.begin(), runs.end());
  return o;
}

inline GradeOutcome stabilize(std::span<const GradeRun> runs, const QuestionSpec& question,
                              const std::string& final_answer_text, const FlagConfig& config = {}) {
  GradeOutcome o = stabilize(runs);
  o.flags = detect_flags(o, question, final_answer_text, config);
  return o;
}

inline std::vector<GradeRun> grade_repeated(const std::string& transcription, const std::string& final_answer_text,
                                            const QuestionSpec& question, const RubricSpec& rubric, Backend& backend,
                                            const GradeContext& ctx, int k) {
  std::vector<GradeRun> runs;
  runs.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) runs.push_back(grade_once(transcription, final_answer_text, question, rubric, backend, ctx, i));
  return runs;
}

/// Per-rubric stabilization first, then the max-rule across the two
/// stabilized results.
inline GradeOutcome grade_dual_stabilized(const std::string& transcription, const std::string& final_answer_text,
                                          const QuestionSpec& question, const DualRubrics& rubrics, Backend& backend,
                                          const GradeContext& ctx, int k, const FlagConfig& flags = {}) {
  check_dual(rubrics);
  auto flex_runs = grade_repeated(transcription, final_answer_text, question, rubrics.flexible, backend, ctx, k);
  auto fixed_runs = grade_repeated(transcription, final_answer_text, question, rubrics.fixed, backend, ctx, k);
  GradeOutcome o = max_rule(stabilize(flex_runs), stabilize(fixed_runs));
  o.flags = detect_flags(o, question, final_answer_text, flags);
  return o;
}

}  // namespace gradepipe
