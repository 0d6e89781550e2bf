#pragma once

#include <regex>
#include <string>
#include <vector>

#include "gradepipe/backend.hpp"
#include "gradepipe/bundle.hpp"
#include "gradepipe/core.hpp"
#include "gradepipe/rubric.hpp"
#include "gradepipe/templates.hpp"

namespace gradepipe {

inline PromptBundle build_ocr_prompt(const QuestionSpec& question, RegionKind kind, const TemplateSet& templates) {
  if (trim(question.statement).empty()) throw EmptyStatement("question " + question.question_id + " has no statement");
  PromptBundle b;
  b.user_message = templates.render(kind == RegionKind::Solution ? "ocr_solution" : "ocr_final",
                                    {{"statement", question.statement}});
  b.temperature = 0.0;
  b.response_contract = ResponseContract::FreeText;
  return b;
}

/// The stock grading principles, in order.
inline std::vector<std::string> default_principles(const TemplateSet& templates) {
  std::vector<std::string> out;
  for (auto& line : split(templates.raw("system_principles"), '\n')) {
    if (!trim(line).empty()) out.push_back(trim(line));
  }
  return out;
}

inline std::string build_system_message(const std::vector<std::string>& principles, const TemplateSet& templates) {
  if (principles.empty()) throw ValidationError("system message needs at least one principle");
  std::string list;
  for (std::size_t i = 0; i < principles.size(); ++i) {
    if (i) list.push_back('\n');
    list += std::to_string(i + 1) + ". " + principles[i];
  }
  return templates.render("system", {{"principles", list}});
}

struct GradingPromptOptions {
  std::string system_message;
  double temperature = 0.0;
  std::optional<std::string> temperature_audit;
  bool ocr_leniency = true;
  std::int64_t grid_tenths = kDefaultGridTenths;
};

inline PromptBundle build_grading_prompt(const std::string& transcription, const std::string& final_answer_text,
                                         const QuestionSpec& question, const RubricSpec& rubric,
                                         const TemplateSet& templates, const GradingPromptOptions& options) {
  if (rubric.question_id != question.question_id) {
    throw RubricQuestionMismatch("rubric " + rubric.rubric_id + " is for " + rubric.question_id + ", not " +
                                 question.question_id);
  }
  if (trim(transcription).empty()) throw ValidationError("blank transcription must short-circuit before prompting");
  if ((options.temperature < 0.0 || options.temperature > 0.1) && !options.temperature_audit) {
    throw ValidationError("grading temperature " + format_temperature(options.temperature) +
                          " outside [0.0, 0.1] without an audit marker");
  }
  if (options.temperature < 0.0 || options.temperature > 1.0) throw ValidationError("temperature outside [0, 1]");

  std::vector<std::string> guidance = rubric.guidance_blocks;
  if (options.ocr_leniency) {
    const std::string& lenient = templates.raw("guidance_ocr_leniency");
    if (std::find(guidance.begin(), guidance.end(), lenient) == guidance.end()) guidance.push_back(lenient);
  }
  std::string guidance_text;
  for (std::size_t i = 0; i < guidance.size(); ++i) {
    if (i) guidance_text += "\n\n";
    guidance_text += guidance[i];
  }
  const std::string blank = "(blank)";
  PromptBundle b;
  b.system_message = options.system_message;
  b.user_message = templates.render(
      "grade", {{"statement", question.statement},
                {"reference_solution", question.reference_solution},
                {"reference_final_answer", question.reference_final_answer},
                {"rubric_kind", to_string(rubric.kind)},
                {"rubric_body", rubric.body},
                {"guidance", guidance_text.empty() ? "(none)" : guidance_text},
                {"solution_text", transcription},
                {"final_answer_text", trim(final_answer_text).empty() ? blank : final_answer_text},
                {"max_points", render_decimal(question.max_points)},
                {"grid", render_decimal(Score::from_tenths(options.grid_tenths))}});
  b.temperature = options.temperature;
  b.temperature_audit = options.temperature_audit;
  b.response_contract = ResponseContract::ScoredFeedback;
  return b;
}

/// Sum of "(1.0 pt)" / "(2 pts)" annotations in a point-map rubric body.
inline std::optional<Score> point_breakdown_total(const std::string& body) {
  static const std::regex kPoints(R"(\((\d+(?:\.\d)?)\s*pts?\.?\))", std::regex::icase);
  std::int64_t total = 0;
  bool any = false;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), kPoints); it != std::sregex_iterator(); ++it) {
    total += score_from_decimal((*it)[1].str()).tenths();
    any = true;
  }
  if (!any) return std::nullopt;
  return Score::from_tenths(total);
}

/// Asks the backend for a new rubric modeled on a curated exemplar of the same
/// problem type. The result is marked review_required.
inline RubricSpec draft_rubric(const QuestionSpec& question, const RubricSpec& exemplar, Backend& backend,
                               const TemplateSet& templates, const RetryPolicy& retry = {}, CallLog* log = nullptr) {
  PromptBundle b;
  b.user_message = templates.render("draft_rubric", {{"rubric_kind", to_string(exemplar.kind)},
                                                     {"max_points", render_decimal(question.max_points)},
                                                     {"statement", question.statement},
                                                     {"reference_solution", question.reference_solution},
                                                     {"exemplar_body", exemplar.body}});
  b.response_contract = ResponseContract::FreeText;
  const std::string text = complete_with_retry(backend, b, retry, log);
  if (trim(text).empty()) throw MalformedDraft("backend returned an empty rubric");

  RubricSpec draft;
  draft.rubric_id = question.question_id + "-" + to_lower_ascii(to_string(exemplar.kind)) + "-draft";
  draft.question_id = question.question_id;
  draft.kind = exemplar.kind;
  draft.body = text;
  draft.guidance_blocks = exemplar.guidance_blocks;
  draft.max_points = question.max_points;
  draft.review_required = true;
  if (draft.kind == RubricKind::Fixed) {
    const auto total = point_breakdown_total(text);
    if (!total) throw MalformedDraft("fixed rubric draft has no point breakdown");
    if (*total != question.max_points) {
      throw MalformedDraft("fixed rubric draft totals " + render_decimal(*total) + " points, expected " +
                           render_decimal(question.max_points));
    }
  }
  return draft;
}

}  // namespace gradepipe
