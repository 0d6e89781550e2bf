#pragma once

#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "gradepipe/config.hpp"
#include "gradepipe/ingest.hpp"
#include "gradepipe/messaging.hpp"
#include "gradepipe/parallel.hpp"
#include "gradepipe/report.hpp"
#include "gradepipe/results.hpp"
#include "gradepipe/review.hpp"

// Command implementations behind the CLI. Each reads only its declared inputs
// and writes only its declared outputs, so every command can be re-run.

namespace gradepipe::pipeline {

namespace fs = std::filesystem;

inline fs::path batch_state_path(const fs::path& dir) { return dir / "batch.json"; }
inline fs::path transcriptions_path(const fs::path& dir) { return dir / "transcriptions.json"; }

inline Batch load_batch_state(const fs::path& dir) {
  const auto p = batch_state_path(dir);
  if (!fs::exists(p)) throw IoError("no batch state at " + p.string() + " (run ingest first)");
  return batch_from_json(parse_json(read_file(p), p.string()));
}

inline void save_batch_state(const fs::path& dir, const Batch& b) {
  write_file(batch_state_path(dir), batch_to_json(b).dump(2) + "\n");
}

// ingest

struct IngestSummary {
  std::size_t included = 0;
  std::size_t excluded = 0;
};

/// Manifest exclusions, then the policy, then TA linking; the first reason
/// recorded for a region is the one kept.
inline IngestSummary run_ingest(const fs::path& manifest, const fs::path& ta_csv,
                                const std::optional<fs::path>& exclusions, const fs::path& out_dir) {
  Batch b = load_manifest(manifest);
  if (exclusions) {
    const ExclusionPolicy policy = load_exclusion_policy(*exclusions);
    for (auto& r : b.records) {
      if (auto reason = match_policy(policy, r)) exclude(r, *reason);
    }
  }
  b = link_ta_scores(std::move(b), load_ta_export(ta_csv));
  std::vector<Exclusion> excluded;
  IngestSummary s;
  for (const auto& r : b.records) {
    if (r.status == RegionStatus::Excluded) {
      excluded.push_back({r, *r.exclusion});
      ++s.excluded;
    } else {
      ++s.included;
    }
  }
  save_batch_state(out_dir, b);
  write_file(out_dir / "exclusions.tsv", format_exclusion_ledger(excluded));
  return s;
}

// transcribe

struct Transcriptions {
  std::string template_version;
  std::map<std::string, std::string> texts;  // region_key -> markup
};

inline Transcriptions load_transcriptions(const fs::path& dir) {
  Transcriptions t;
  const auto p = transcriptions_path(dir);
  if (!fs::exists(p)) return t;
  const json j = parse_json(read_file(p), p.string());
  t.template_version = j.value("template_version", "");
  t.texts = j.value("regions", std::map<std::string, std::string>{});
  return t;
}

inline void save_transcriptions(const fs::path& dir, const Transcriptions& t, const std::string& model_id,
                                const std::string& cfg_hash) {
  json j{{"template_version", t.template_version},
         {"config_hash", cfg_hash},
         {"model_id", model_id},
         {"regions", t.texts}};
  write_file(transcriptions_path(dir), j.dump(2) + "\n");
}

struct StageSummary {
  std::size_t done = 0;
  std::size_t skipped = 0;
};

/// Transcribes every non-excluded region that has no transcription yet.
/// Progress is saved before any failure is rethrown, so a re-run resumes.
inline StageSummary run_transcribe(const fs::path& batch_dir, Backend& backend, const PipelineConfig& cfg,
                                   const TemplateSet& templates, CallLog* log = nullptr) {
  Batch b = load_batch_state(batch_dir);
  Transcriptions t = load_transcriptions(batch_dir);
  if (!t.template_version.empty() && t.template_version != templates.version()) {
    // Prompts changed; earlier transcriptions no longer match them.
    t.texts.clear();
    for (auto& r : b.records) {
      if (r.status != RegionStatus::Excluded) r.status = RegionStatus::Pending;
    }
  }
  t.template_version = templates.version();

  std::vector<std::size_t> todo;
  StageSummary s;
  for (std::size_t i = 0; i < b.records.size(); ++i) {
    const auto& r = b.records[i];
    if (r.status == RegionStatus::Excluded) continue;
    if (r.status != RegionStatus::Pending && t.texts.count(region_key(r))) {
      ++s.skipped;
      continue;
    }
    todo.push_back(i);
  }

  std::vector<std::optional<std::string>> out(todo.size());
  const RetryPolicy retry{cfg.max_retries, {}};
  std::exception_ptr failure;
  try {
    parallel_for(todo.size(), static_cast<std::size_t>(cfg.parallelism), [&](std::size_t k) {
      const auto& r = b.records[todo[k]];
      const PromptBundle bundle = build_ocr_prompt(b.question(r.question_id), r.kind, templates);
      const auto image = b.resolve_image(r);
      if (!fs::exists(image)) throw IoError("image not found: " + image.string());
      out[k] = transcribe_with_retry(backend, image.string(), bundle, retry, log);
    });
  } catch (...) {
    failure = std::current_exception();
  }
  for (std::size_t k = 0; k < todo.size(); ++k) {
    if (!out[k]) continue;
    auto& r = b.records[todo[k]];
    t.texts[region_key(r)] = *out[k];
    if (r.status == RegionStatus::Pending) advance(r, RegionStatus::Transcribed);
    ++s.done;
  }
  save_transcriptions(batch_dir, t, backend.model_id(), config_hash(cfg));
  save_batch_state(batch_dir, b);
  if (failure) std::rethrow_exception(failure);
  return s;
}

// grade

enum class GradeMode { Dual, Stabilized, DualStabilized };

inline std::string to_string(GradeMode m) {
  switch (m) {
    case GradeMode::Dual: return "dual";
    case GradeMode::Stabilized: return "stabilized";
    case GradeMode::DualStabilized: return "dual+stabilized";
  }
  return "?";
}

inline GradeMode grade_mode_from_string(std::string_view s) {
  if (s == "dual") return GradeMode::Dual;
  if (s == "stabilized") return GradeMode::Stabilized;
  if (s == "dual+stabilized") return GradeMode::DualStabilized;
  throw ValidationError("unknown grading mode '" + std::string(s) + "'");
}

struct GradeOptions {
  GradeMode mode = GradeMode::DualStabilized;
  int runs = 3;
  RubricKind single_rubric = RubricKind::Flexible;  // which rubric "stabilized" uses
};

inline void validate(const GradeOptions& o) {
  if (o.mode != GradeMode::Dual && o.runs < 2) {
    throw ValidationError("mode " + to_string(o.mode) + " needs --runs >= 2 (got " + std::to_string(o.runs) + ")");
  }
  if (o.runs < 1) throw ValidationError("--runs must be >= 1");
}

/// Hash recorded on every result: the pipeline config plus grading options.
inline std::string grade_config_hash(const PipelineConfig& cfg, const GradeOptions& o) {
  json j = config_to_json(cfg);
  j.erase("parallelism");
  j["mode"] = to_string(o.mode);
  j["runs"] = o.mode == GradeMode::Dual ? 1 : o.runs;
  if (o.mode == GradeMode::Stabilized) j["single_rubric"] = to_string(o.single_rubric);
  return "sha256:" + sha256_hex(j.dump()).substr(0, 16);
}

struct GradingUnit {
  std::string test_code;
  std::string quiz_id;
  std::string question_id;
  std::size_t question_index = 0;
  std::vector<std::size_t> record_indices;
  std::string solution_text;
  std::string final_answer_text;
};

inline std::string unit_key(const std::string& test_code, const std::string& question_id) {
  return test_code + "|" + question_id;
}

/// One unit per (submission, question) whose solution region is included.
/// An excluded or missing final-answer region grades as blank.
inline std::vector<GradingUnit> grading_units(const Batch& b, const Transcriptions& t) {
  std::map<std::pair<std::string, std::string>, GradingUnit> units;
  std::vector<std::pair<std::string, std::string>> order;
  for (std::size_t i = 0; i < b.records.size(); ++i) {
    const auto& r = b.records[i];
    const auto key = std::make_pair(r.submission.test_code, r.question_id);
    auto [it, inserted] = units.try_emplace(key);
    if (inserted) {
      order.push_back(key);
      it->second.test_code = r.submission.test_code;
      it->second.quiz_id = r.submission.quiz_id;
      it->second.question_id = r.question_id;
      it->second.question_index = b.question_index(r.question_id);
    }
    if (r.status == RegionStatus::Excluded) continue;
    auto tx = t.texts.find(region_key(r));
    if (r.status == RegionStatus::Pending || tx == t.texts.end()) {
      throw ValidationError("region (" + r.submission.test_code + ", " + r.question_id + ", " + to_string(r.kind) +
                            ") is not transcribed; run transcribe first");
    }
    it->second.record_indices.push_back(i);
    (r.kind == RegionKind::Solution ? it->second.solution_text : it->second.final_answer_text) = tx->second;
  }
  std::vector<GradingUnit> out;
  for (const auto& key : order) {
    auto& u = units.at(key);
    const bool has_solution = std::any_of(u.record_indices.begin(), u.record_indices.end(), [&](std::size_t i) {
      return b.records[i].kind == RegionKind::Solution;
    });
    if (has_solution) out.push_back(std::move(u));
  }
  return out;
}

inline const RubricSpec& rubric_of_kind(const Batch& b, const QuestionSpec& q, RubricKind kind) {
  for (const auto& id : q.rubric_ids) {
    const auto& r = b.rubrics.at(id);
    if (r.kind == kind) return r;
  }
  throw ValidationError("question " + q.question_id + " has no " + to_string(kind) + " rubric");
}

inline GradeContext make_grade_context(const PipelineConfig& cfg, const TemplateSet& templates, std::int64_t grid,
                                       CallLog* log = nullptr) {
  GradeContext ctx;
  ctx.templates = &templates;
  ctx.prompt.system_message = build_system_message(default_principles(templates), templates);
  ctx.prompt.temperature = cfg.temperature;
  ctx.prompt.temperature_audit = cfg.temperature_audit;
  ctx.prompt.ocr_leniency = cfg.ocr_leniency;
  ctx.prompt.grid_tenths = grid;
  ctx.retry = RetryPolicy{cfg.max_retries, {}};
  ctx.log = log;
  return ctx;
}

inline bool result_less(const ResultRecord& a, const ResultRecord& b) {
  return std::tie(a.test_code, a.question_index) < std::tie(b.test_code, b.question_index);
}

/// Grades every unit not already present in `out_path` under the same
/// template version and config hash, then rewrites the file in sorted order.
inline std::vector<ResultRecord> run_grade(const fs::path& batch_dir, const fs::path& out_path, Backend& backend,
                                           const PipelineConfig& cfg, const TemplateSet& templates,
                                           const GradeOptions& options, CallLog* log = nullptr) {
  validate(options);
  Batch b = load_batch_state(batch_dir);
  const Transcriptions t = load_transcriptions(batch_dir);
  const auto units = grading_units(b, t);
  const std::int64_t grid = cfg.grid_tenths.value_or(b.grid_tenths);
  const std::string tv = templates.version();
  const std::string ch = grade_config_hash(cfg, options);

  std::map<std::string, ResultRecord> previous;
  if (fs::exists(out_path)) {
    for (auto& r : load_results(out_path)) {
      if (r.template_version == tv && r.config_hash == ch) previous.emplace(unit_key(r.test_code, r.question_id), r);
    }
  }

  const GradeContext ctx = make_grade_context(cfg, templates, grid, log);
  const FlagConfig flag_cfg{cfg.high_variance_tenths, grid};

  std::vector<std::optional<ResultRecord>> out(units.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < units.size(); ++i) {
    auto it = previous.find(unit_key(units[i].test_code, units[i].question_id));
    if (it != previous.end()) out[i] = it->second;
    else todo.push_back(i);
  }

  std::exception_ptr failure;
  try {
    parallel_for(todo.size(), static_cast<std::size_t>(cfg.parallelism), [&](std::size_t k) {
      const GradingUnit& u = units[todo[k]];
      const QuestionSpec& q = b.question(u.question_id);
      GradeOutcome o;
      switch (options.mode) {
        case GradeMode::Dual: {
          const DualRubrics d{rubric_of_kind(b, q, RubricKind::Flexible), rubric_of_kind(b, q, RubricKind::Fixed)};
          o = grade_dual(u.solution_text, u.final_answer_text, q, d, backend, ctx, flag_cfg);
          break;
        }
        case GradeMode::Stabilized: {
          const auto runs = grade_repeated(u.solution_text, u.final_answer_text, q,
                                           rubric_of_kind(b, q, options.single_rubric), backend, ctx, options.runs);
          o = stabilize(runs, q, u.final_answer_text, flag_cfg);
          break;
        }
        case GradeMode::DualStabilized: {
          const DualRubrics d{rubric_of_kind(b, q, RubricKind::Flexible), rubric_of_kind(b, q, RubricKind::Fixed)};
          o = grade_dual_stabilized(u.solution_text, u.final_answer_text, q, d, backend, ctx, options.runs, flag_cfg);
          break;
        }
      }
      // A blank solution next to a written final answer usually means the
      // solution crop or its transcription went wrong.
      if (trim(u.solution_text).empty() && !trim(u.final_answer_text).empty()) {
        add_flag(o.flags, {FlagKind::OcrSuspect, 0.0});
      }
      ResultRecord r;
      r.test_code = u.test_code;
      r.quiz_id = u.quiz_id;
      r.question_id = u.question_id;
      r.question_index = static_cast<int>(u.question_index);
      r.max_points = q.max_points;
      r.outcome = std::move(o);
      r.template_version = tv;
      r.config_hash = ch;
      out[todo[k]] = std::move(r);
    });
  } catch (...) {
    failure = std::current_exception();
  }

  std::vector<ResultRecord> results;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (!out[i]) continue;
    results.push_back(*out[i]);
    for (auto idx : units[i].record_indices) {
      if (b.records[idx].status == RegionStatus::Transcribed) advance(b.records[idx], RegionStatus::Graded);
    }
  }
  std::sort(results.begin(), results.end(), result_less);
  write_file(out_path, format_results(results));
  save_batch_state(batch_dir, b);
  if (failure) std::rethrow_exception(failure);
  return results;
}

// analyze

/// template_version / config_hash of a results set: a string when uniform,
/// an array when mixed.
inline json provenance_field(const std::vector<ResultRecord>& results, std::string ResultRecord::*field) {
  std::set<std::string> values;
  for (const auto& r : results) values.insert(r.*field);
  if (values.size() == 1) return *values.begin();
  return json(values);
}

inline json provenance_header(const std::vector<ResultRecord>& results) {
  return json{{"template_version", provenance_field(results, &ResultRecord::template_version)},
              {"config_hash", provenance_field(results, &ResultRecord::config_hash)}};
}

/// Run scores grouped per (submission, question, rubric): one "question"
/// in the stability sense.
inline std::map<std::string, std::vector<Score>> runs_by_item(const std::vector<ResultRecord>& results) {
  std::map<std::string, std::vector<Score>> out;
  for (const auto& r : results) {
    std::vector<GradeRun> runs = r.outcome.runs;
    std::sort(runs.begin(), runs.end(), [](const GradeRun& a, const GradeRun& b) {
      return std::tie(a.rubric_id, a.run_index) < std::tie(b.rubric_id, b.run_index);
    });
    for (const auto& run : runs) out[r.test_code + "|" + r.question_id + "|" + run.rubric_id].push_back(run.score);
  }
  return out;
}

inline std::string results_model_id(const std::vector<ResultRecord>& results) {
  for (const auto& r : results) {
    for (const auto& run : r.outcome.runs) return run.model_id;
  }
  return "";
}

struct AnalyzeInputs {
  fs::path results;
  fs::path ta;
  std::optional<fs::path> verdicts;
  std::optional<fs::path> compare;
  std::optional<fs::path> survey;
  fs::path out_dir;
};

inline json unavailable(const json& header, const std::string& reason) {
  json j = header;
  j["available"] = false;
  j["reason"] = reason;
  return j;
}

inline void run_analyze(const AnalyzeInputs& in, const PipelineConfig& cfg) {
  const auto results = load_results(in.results);
  if (results.empty()) throw EmptyInput("results file " + in.results.string() + " has no records");
  const json header = provenance_header(results);

  std::map<std::tuple<std::string, std::string, std::string>, Score> ta;
  for (const auto& t : load_ta_export(in.ta)) ta.emplace(std::make_tuple(normalize_test_code(t.test_code), t.quiz_id, t.question_id), t.ta_score);
  std::vector<GapRecord> gaps;
  std::int64_t unmatched = 0;
  for (const auto& r : results) {
    auto it = ta.find({normalize_test_code(r.test_code), r.quiz_id, r.question_id});
    if (it == ta.end()) {
      ++unmatched;
      continue;
    }
    gaps.push_back(make_gap_record(r.test_code, r.quiz_id, r.question_id, r.outcome.selected_score, it->second));
  }

  std::map<std::string, std::int64_t> flag_counts;
  for (const auto& r : results) {
    for (const auto& f : r.outcome.flags) ++flag_counts[to_string(f.kind)];
  }
  json summary = header;
  summary["n_results"] = results.size();
  summary["n_linked"] = gaps.size();
  summary["n_unmatched"] = unmatched;
  summary["within_tenths"] = cfg.within_tenths;
  summary["flag_counts"] = flag_counts;
  summary["overall"] =
      gaps.empty() ? json{{"available", false}} : summary_to_json(summarize_gaps(gaps, cfg.within_tenths));
  write_file(in.out_dir / "summary.json", summary.dump(2) + "\n");

  write_file(in.out_dir / "quiz_table.csv", gaps.empty() ? format_quiz_table_csv({}) : format_quiz_table_csv(quiz_table(gaps)));
  std::vector<std::int64_t> gap_values;
  for (const auto& g : gaps) gap_values.push_back(g.gap_tenths);
  write_file(in.out_dir / "histogram_gap.csv", format_histogram_csv(histogram(gap_values, cfg.histogram_bin_tenths)));

  const auto runs = runs_by_item(results);
  json stab;
  try {
    stab = header;
    stab["available"] = true;
    stab.update(stability_to_json(stability(runs, results_model_id(results))));
  } catch (const Error& e) {
    stab = unavailable(header, e.what());
  }
  write_file(in.out_dir / "stability.json", stab.dump(2) + "\n");

  json cross;
  if (in.compare) {
    const auto other = load_results(*in.compare);
    cross = header;
    cross["available"] = true;
    cross["model_a"] = results_model_id(results);
    cross["model_b"] = results_model_id(other);
    cross.update(cross_model_to_json(cross_model(runs, runs_by_item(other))));
  } else {
    cross = unavailable(header, "no --compare results given");
  }
  write_file(in.out_dir / "cross_model.json", cross.dump(2) + "\n");

  if (in.verdicts) {
    const auto verdicts = parse_verdicts_csv(read_file(*in.verdicts));
    json v = header;
    v.update(verdicts_to_json(verdict_distribution(verdicts)));
    write_file(in.out_dir / "verdicts.json", v.dump(2) + "\n");
    std::map<std::pair<std::string, std::string>, Score> ai;
    for (const auto& r : results) ai.emplace(std::make_pair(normalize_test_code(r.test_code), r.question_id), r.outcome.selected_score);
    std::vector<std::int64_t> diffs;
    for (const auto& rec : verdicts) {
      auto it = ai.find({normalize_test_code(rec.test_code), rec.question_id});
      if (it != ai.end()) diffs.push_back(score_gap(rec.reviewer_score, it->second));
    }
    write_file(in.out_dir / "histogram_reviewer_diff.csv", format_histogram_csv(histogram(diffs, cfg.histogram_bin_tenths)));
  }

  if (in.survey) write_file(in.out_dir / "survey.csv", render_survey_table(read_file(*in.survey)));

  // CSV files cannot carry the provenance inline; it lives here with their digests.
  json files = json::object();
  for (const auto& entry : fs::directory_iterator(in.out_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name != "provenance.json") files[name] = sha256_hex(read_file(entry.path()));
  }
  json prov = header;
  prov["files"] = files;
  write_file(in.out_dir / "provenance.json", prov.dump(2) + "\n");
}

// message

inline std::size_t run_message(const fs::path& results_path, const std::optional<fs::path>& roster_path,
                               const fs::path& out_dir, const PipelineConfig& cfg, const TemplateSet& templates) {
  const auto results = load_results(results_path);
  std::map<std::string, std::string> roster;
  if (roster_path) roster = parse_roster(read_file(*roster_path));
  export_messages(results, roster, cfg.message_policy(), templates, out_dir);
  json files = json::object();
  std::set<std::string> students;
  for (const auto& r : results) students.insert(r.test_code);
  for (const auto& code : students) {
    const auto name = message_file_name(code);
    files[name] = sha256_hex(read_file(out_dir / name));
  }
  files["index.csv"] = sha256_hex(read_file(out_dir / "index.csv"));
  json prov = results.empty() ? json::object() : provenance_header(results);
  prov["message_template_version"] = templates.version();
  prov["message_config_hash"] = config_hash(cfg);
  prov["files"] = files;
  write_file(out_dir / "provenance.json", prov.dump(2) + "\n");
  return students.size();
}

// serve

/// Review-item context from the batch state: transcriptions, rubric bodies
/// and resolved image paths.
inline ContextProvider batch_context(const Batch& b, const Transcriptions& t) {
  return [b, t](const ResultRecord& r) {
    ItemContext c;
    for (const auto& rec : b.records) {
      if (rec.submission.test_code != r.test_code || rec.question_id != r.question_id) continue;
      auto tx = t.texts.find(region_key(rec));
      const std::string text = tx == t.texts.end() ? "" : tx->second;
      (rec.kind == RegionKind::Solution ? c.transcription : c.final_answer_text) = text;
      c.image_refs.push_back(b.resolve_image(rec).string());
    }
    for (const auto& id : b.question(r.question_id).rubric_ids) c.rubric_bodies[id] = b.rubrics.at(id).body;
    return c;
  };
}

}  // namespace gradepipe::pipeline
