#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gradepipe/core.hpp"
#include "gradepipe/csv.hpp"
#include "gradepipe/json_io.hpp"
#include "gradepipe/rubric.hpp"

namespace gradepipe {

enum class RegionStatus { Pending, Transcribed, Graded, Excluded };

enum class ExclusionReason {
  SegmentationFailure,
  ScanQuality,
  UnmatchedTestCode,
  MissingTAExport,
  FirstQuizPolicy,
  SectionArtifact,
  ReviewerUnavailable,
};

inline std::string to_string(RegionStatus s) {
  switch (s) {
    case RegionStatus::Pending: return "Pending";
    case RegionStatus::Transcribed: return "Transcribed";
    case RegionStatus::Graded: return "Graded";
    case RegionStatus::Excluded: return "Excluded";
  }
  return "?";
}

inline RegionStatus region_status_from_string(std::string_view s) {
  if (s == "Pending") return RegionStatus::Pending;
  if (s == "Transcribed") return RegionStatus::Transcribed;
  if (s == "Graded") return RegionStatus::Graded;
  if (s == "Excluded") return RegionStatus::Excluded;
  throw ParseError("unknown region status '" + std::string(s) + "'");
}

inline std::string to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::SegmentationFailure: return "SegmentationFailure";
    case ExclusionReason::ScanQuality: return "ScanQuality";
    case ExclusionReason::UnmatchedTestCode: return "UnmatchedTestCode";
    case ExclusionReason::MissingTAExport: return "MissingTAExport";
    case ExclusionReason::FirstQuizPolicy: return "FirstQuizPolicy";
    case ExclusionReason::SectionArtifact: return "SectionArtifact";
    case ExclusionReason::ReviewerUnavailable: return "ReviewerUnavailable";
  }
  return "?";
}

inline ExclusionReason exclusion_reason_from_string(std::string_view s) {
  for (auto r : {ExclusionReason::SegmentationFailure, ExclusionReason::ScanQuality,
                 ExclusionReason::UnmatchedTestCode, ExclusionReason::MissingTAExport,
                 ExclusionReason::FirstQuizPolicy, ExclusionReason::SectionArtifact,
                 ExclusionReason::ReviewerUnavailable}) {
    if (to_string(r) == s) return r;
  }
  throw ParseError("unknown exclusion reason '" + std::string(s) + "'");
}

struct RegionRecord {
  SubmissionId submission;
  std::string question_id;
  RegionKind kind = RegionKind::Solution;
  std::string image_ref;
  RegionStatus status = RegionStatus::Pending;
  std::optional<ExclusionReason> exclusion;
  std::optional<Score> ta_score;
};

/// Forward-only lifecycle: Pending -> Transcribed -> Graded. Excluded is
/// terminal and reachable from anywhere via exclude().
inline void advance(RegionRecord& r, RegionStatus next) {
  if (next == RegionStatus::Excluded) throw ValidationError("use exclude() to exclude a region");
  if (r.status == RegionStatus::Excluded) throw ValidationError("region is excluded");
  if (static_cast<int>(next) < static_cast<int>(r.status)) {
    throw ValidationError("status may not regress from " + to_string(r.status) + " to " + to_string(next));
  }
  r.status = next;
}

inline void exclude(RegionRecord& r, ExclusionReason reason) {
  if (r.status == RegionStatus::Excluded) return;  // first reason wins
  r.status = RegionStatus::Excluded;
  r.exclusion = reason;
}

struct TAScoreRecord {
  std::string test_code;
  std::string quiz_id;
  std::string question_id;
  Score ta_score;
};

struct Batch {
  std::string quiz_id;
  std::string section_id;
  std::int64_t grid_tenths = kDefaultGridTenths;
  std::filesystem::path base_dir;  // image_refs resolve against this
  std::vector<QuestionSpec> questions;
  std::map<std::string, RubricSpec> rubrics;
  std::vector<RegionRecord> records;

  const QuestionSpec& question(const std::string& id) const {
    for (const auto& q : questions) {
      if (q.question_id == id) return q;
    }
    throw ValidationError("unknown question '" + id + "'");
  }

  std::size_t question_index(const std::string& id) const {
    for (std::size_t i = 0; i < questions.size(); ++i) {
      if (questions[i].question_id == id) return i;
    }
    throw ValidationError("unknown question '" + id + "'");
  }

  std::filesystem::path resolve_image(const RegionRecord& r) const {
    std::filesystem::path p(r.image_ref);
    return p.is_absolute() ? p : base_dir / p;
  }
};

/// Key for (submission, question, kind) uniqueness and map lookups.
inline std::string region_key(const RegionRecord& r) {
  return r.submission.test_code + "|" + r.question_id + "|" + to_string(r.kind);
}

namespace detail {

inline QuestionSpec question_from_json(const json& j) {
  QuestionSpec q;
  q.question_id = j.at("question_id").get<std::string>();
  q.statement = j.value("statement", "");
  q.reference_solution = j.value("reference_solution", "");
  q.reference_final_answer = j.value("reference_final_answer", "");
  q.max_points = score_from_json(j.at("max_points"));
  q.rubric_ids = j.at("rubric_ids").get<std::vector<std::string>>();
  validate(q);
  return q;
}

inline json question_to_json(const QuestionSpec& q) {
  return json{{"question_id", q.question_id},
              {"statement", q.statement},
              {"reference_solution", q.reference_solution},
              {"reference_final_answer", q.reference_final_answer},
              {"max_points", score_to_json(q.max_points)},
              {"rubric_ids", q.rubric_ids}};
}

}  // namespace detail

/// Parses a manifest document. Rubric files are looked up as
/// <rubric_dir>/<rubric_id>.json relative to base_dir.
inline Batch parse_manifest(const json& doc, const std::filesystem::path& base_dir) {
  Batch batch;
  batch.base_dir = base_dir;
  try {
    batch.quiz_id = doc.at("quiz_id").get<std::string>();
    batch.section_id = doc.value("section_id", "");
    if (doc.contains("grid")) batch.grid_tenths = grid_from_json(doc.at("grid"));
    for (const auto& jq : doc.value("questions", json::array())) {
      batch.questions.push_back(detail::question_from_json(jq));
    }
    std::set<std::string> qids;
    for (const auto& q : batch.questions) {
      if (!qids.insert(q.question_id).second) throw ManifestParseError("duplicate question " + q.question_id);
    }

    const std::filesystem::path rubric_dir = base_dir / doc.value("rubric_dir", "rubrics");
    for (const auto& q : batch.questions) {
      for (const auto& rid : q.rubric_ids) {
        const auto path = rubric_dir / (rid + ".json");
        if (!std::filesystem::exists(path)) {
          throw DanglingRubric("rubric '" + rid + "' for question " + q.question_id + " has no file at " + path.string());
        }
        RubricSpec r = load_rubric(path);
        if (r.rubric_id != rid) throw ManifestParseError("rubric file " + path.string() + " declares id " + r.rubric_id);
        if (r.question_id != q.question_id) {
          throw ManifestParseError("rubric " + rid + " belongs to " + r.question_id + ", not " + q.question_id);
        }
        batch.rubrics.emplace(rid, std::move(r));
      }
      std::set<RubricKind> kinds;
      for (const auto& rid : q.rubric_ids) {
        if (!kinds.insert(batch.rubrics.at(rid).kind).second) {
          throw ManifestParseError("question " + q.question_id + " has two " + to_string(batch.rubrics.at(rid).kind) +
                                   " rubrics");
        }
      }
    }

    std::set<std::string> seen;
    for (const auto& jr : doc.value("regions", json::array())) {
      RegionRecord r;
      r.submission.test_code = jr.at("test_code").get<std::string>();
      r.submission.quiz_id = batch.quiz_id;
      r.submission.section_id = jr.value("section_id", batch.section_id);
      r.question_id = jr.at("question_id").get<std::string>();
      r.kind = region_kind_from_string(jr.at("kind").get<std::string>());
      r.image_ref = jr.at("image_ref").get<std::string>();
      if (trim(r.submission.test_code).empty()) throw ManifestParseError("region with empty test_code");
      if (!qids.count(r.question_id)) throw ManifestParseError("region references unknown question " + r.question_id);
      if (jr.contains("exclude")) exclude(r, exclusion_reason_from_string(jr.at("exclude").get<std::string>()));
      // Uniqueness is on the normalized code: " A1 " and "a1" are the same student.
      const std::string key = normalize_test_code(r.submission.test_code) + "|" + r.question_id + "|" + to_string(r.kind);
      if (!seen.insert(key).second) {
        throw DuplicateRegion("region repeated: (" + r.submission.test_code + ", " + r.question_id + ", " +
                              to_string(r.kind) + ")");
      }
      batch.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ManifestParseError(std::string("manifest: ") + e.what());
  } catch (const ParseError& e) {
    throw ManifestParseError(std::string("manifest: ") + e.what());
  } catch (const ValidationError& e) {
    throw ManifestParseError(std::string("manifest: ") + e.what());
  }
  return batch;
}

inline Batch load_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ManifestParseError(path.string() + ": " + e.what());
  }
  return parse_manifest(doc, std::filesystem::absolute(path).parent_path());
}

inline std::vector<TAScoreRecord> parse_ta_export(std::string_view text) {
  csv::Table table(text, {"test_code", "quiz_id", "question_id", "score"});
  std::vector<TAScoreRecord> out;
  out.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    TAScoreRecord r;
    r.test_code = table.at(i, "test_code");
    r.quiz_id = trim(table.at(i, "quiz_id"));
    r.question_id = trim(table.at(i, "question_id"));
    r.ta_score = score_from_decimal(table.at(i, "score"));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<TAScoreRecord> load_ta_export(const std::filesystem::path& path) {
  return parse_ta_export(read_file(path));
}

/// Joins TA scores by (normalized test code, quiz, question). Link failures
/// become exclusions; the only error is a TA score above the question max.
inline Batch link_ta_scores(Batch batch, const std::vector<TAScoreRecord>& ta_export) {
  std::map<std::tuple<std::string, std::string, std::string>, Score> scores;
  std::set<std::pair<std::string, std::string>> exported_questions;
  for (const auto& t : ta_export) {
    auto key = std::make_tuple(normalize_test_code(t.test_code), t.quiz_id, t.question_id);
    auto [it, inserted] = scores.emplace(key, t.ta_score);
    if (!inserted && it->second != t.ta_score) {
      throw ValidationError("conflicting TA scores for (" + t.test_code + ", " + t.quiz_id + ", " + t.question_id + ")");
    }
    exported_questions.emplace(t.quiz_id, t.question_id);
  }
  for (auto& r : batch.records) {
    if (r.status == RegionStatus::Excluded) continue;
    if (!exported_questions.count({r.submission.quiz_id, r.question_id})) {
      exclude(r, ExclusionReason::MissingTAExport);
      continue;
    }
    auto it = scores.find({normalize_test_code(r.submission.test_code), r.submission.quiz_id, r.question_id});
    if (it == scores.end()) {
      exclude(r, ExclusionReason::UnmatchedTestCode);
      continue;
    }
    const auto& q = batch.question(r.question_id);
    if (it->second > q.max_points) {
      throw ValidationError("TA score " + render_decimal(it->second) + " exceeds max " + render_decimal(q.max_points) +
                            " for (" + r.submission.test_code + ", " + r.question_id + ")");
    }
    r.ta_score = it->second;
  }
  return batch;
}

enum class PolicyField { QuizId, SectionId, TestCode, QuestionId, Kind };

struct ExclusionRule {
  PolicyField field = PolicyField::QuizId;
  std::set<std::string> values;
  ExclusionReason reason = ExclusionReason::FirstQuizPolicy;
};

/// Score-blind by construction: rules can only name fields from the
/// allowlist above.
struct ExclusionPolicy {
  std::vector<ExclusionRule> rules;
};

/// {"rules": [{"field": "quiz_id", "in": ["Q1"], "reason": "FirstQuizPolicy"}]}
/// Any key or field naming a score is rejected with PolicyReferencesScores.
inline ExclusionPolicy parse_exclusion_policy(const json& doc) {
  auto mentions_score = [](std::string_view s) { return to_lower_ascii(s).find("score") != std::string::npos; };
  auto check_keys = [&](const json& obj) {
    if (!obj.is_object()) return;
    for (const auto& [k, v] : obj.items()) {
      if (mentions_score(k)) throw PolicyReferencesScores("exclusion policy references score field '" + k + "'");
    }
  };
  ExclusionPolicy policy;
  try {
    check_keys(doc);
    for (const auto& jr : doc.value("rules", json::array())) {
      check_keys(jr);
      const auto field = jr.at("field").get<std::string>();
      if (mentions_score(field)) throw PolicyReferencesScores("exclusion policy references score field '" + field + "'");
      ExclusionRule rule;
      if (field == "quiz_id") rule.field = PolicyField::QuizId;
      else if (field == "section_id") rule.field = PolicyField::SectionId;
      else if (field == "test_code") rule.field = PolicyField::TestCode;
      else if (field == "question_id") rule.field = PolicyField::QuestionId;
      else if (field == "kind") rule.field = PolicyField::Kind;
      else throw ParseError("exclusion policy: field '" + field + "' is not allowed");
      for (const auto& v : jr.at("in")) rule.values.insert(v.get<std::string>());
      rule.reason = exclusion_reason_from_string(jr.at("reason").get<std::string>());
      if (rule.reason == ExclusionReason::UnmatchedTestCode || rule.reason == ExclusionReason::MissingTAExport) {
        throw ParseError("exclusion policy: reason " + to_string(rule.reason) + " is assigned by TA linking only");
      }
      if (rule.field == PolicyField::TestCode) {
        std::set<std::string> normalized;
        for (const auto& v : rule.values) normalized.insert(normalize_test_code(v));
        rule.values = std::move(normalized);
      }
      policy.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("exclusion policy: ") + e.what());
  }
  return policy;
}

inline ExclusionPolicy load_exclusion_policy(const std::filesystem::path& path) {
  return parse_exclusion_policy(parse_json(read_file(path), path.string()));
}

inline std::optional<ExclusionReason> match_policy(const ExclusionPolicy& policy, const RegionRecord& r) {
  for (const auto& rule : policy.rules) {
    std::string value;
    switch (rule.field) {
      case PolicyField::QuizId: value = r.submission.quiz_id; break;
      case PolicyField::SectionId: value = r.submission.section_id; break;
      case PolicyField::TestCode: value = normalize_test_code(r.submission.test_code); break;
      case PolicyField::QuestionId: value = r.question_id; break;
      case PolicyField::Kind: value = to_string(r.kind); break;
    }
    if (rule.values.count(value)) return rule.reason;
  }
  return std::nullopt;
}

struct Exclusion {
  RegionRecord record;
  ExclusionReason reason;
};

struct Partition {
  Batch included;
  std::vector<Exclusion> excluded;
};

/// Splits already-excluded records out of a batch, preserving order.
inline Partition partition_excluded(Batch batch) {
  Partition p;
  std::vector<RegionRecord> records = std::move(batch.records);
  p.included = std::move(batch);
  p.included.records.clear();
  for (auto& r : records) {
    if (r.status == RegionStatus::Excluded) {
      const auto reason = *r.exclusion;
      p.excluded.push_back({std::move(r), reason});
    } else {
      p.included.records.push_back(std::move(r));
    }
  }
  return p;
}

/// Applies the policy, then partitions. |included| + |excluded| == |batch|.
inline Partition apply_exclusions(Batch batch, const ExclusionPolicy& policy) {
  for (auto& r : batch.records) {
    if (auto reason = match_policy(policy, r)) exclude(r, *reason);
  }
  return partition_excluded(std::move(batch));
}

/// One tab-separated line per excluded (test_code, question_id, reason);
/// the two regions of one question collapse to a single line.
inline std::string format_exclusion_ledger(const std::vector<Exclusion>& excluded) {
  std::string out;
  std::set<std::string> seen;
  for (const auto& e : excluded) {
    std::string line = e.record.submission.test_code + "\t" + e.record.question_id + "\t" + to_string(e.reason) + "\n";
    if (seen.insert(line).second) out += line;
  }
  return out;
}

// Batch state persistence (batch.json in the batch directory).

inline json batch_to_json(const Batch& b) {
  json j;
  j["quiz_id"] = b.quiz_id;
  j["section_id"] = b.section_id;
  j["grid_tenths"] = b.grid_tenths;
  j["base_dir"] = b.base_dir.string();
  j["questions"] = json::array();
  for (const auto& q : b.questions) j["questions"].push_back(detail::question_to_json(q));
  j["rubrics"] = json::array();
  for (const auto& [id, r] : b.rubrics) j["rubrics"].push_back(rubric_to_json(r));
  j["records"] = json::array();
  for (const auto& r : b.records) {
    json jr{{"test_code", r.submission.test_code},
            {"quiz_id", r.submission.quiz_id},
            {"section_id", r.submission.section_id},
            {"question_id", r.question_id},
            {"kind", to_string(r.kind)},
            {"image_ref", r.image_ref},
            {"status", to_string(r.status)}};
    if (r.exclusion) jr["exclusion"] = to_string(*r.exclusion);
    if (r.ta_score) jr["ta_score"] = score_to_json(*r.ta_score);
    j["records"].push_back(std::move(jr));
  }
  return j;
}

inline Batch batch_from_json(const json& j) {
  try {
    Batch b;
    b.quiz_id = j.at("quiz_id").get<std::string>();
    b.section_id = j.at("section_id").get<std::string>();
    b.grid_tenths = j.at("grid_tenths").get<std::int64_t>();
    b.base_dir = j.at("base_dir").get<std::string>();
    for (const auto& jq : j.at("questions")) b.questions.push_back(detail::question_from_json(jq));
    for (const auto& jr : j.at("rubrics")) {
      auto r = rubric_from_json(jr);
      b.rubrics.emplace(r.rubric_id, std::move(r));
    }
    for (const auto& jr : j.at("records")) {
      RegionRecord r;
      r.submission = {jr.at("test_code").get<std::string>(), jr.at("quiz_id").get<std::string>(),
                      jr.at("section_id").get<std::string>()};
      r.question_id = jr.at("question_id").get<std::string>();
      r.kind = region_kind_from_string(jr.at("kind").get<std::string>());
      r.image_ref = jr.at("image_ref").get<std::string>();
      r.status = region_status_from_string(jr.at("status").get<std::string>());
      if (jr.contains("exclusion")) r.exclusion = exclusion_reason_from_string(jr.at("exclusion").get<std::string>());
      if (jr.contains("ta_score")) r.ta_score = score_from_json(jr.at("ta_score"), b.grid_tenths);
      b.records.push_back(std::move(r));
    }
    return b;
  } catch (const json::exception& e) {
    throw ParseError(std::string("batch state: ") + e.what());
  }
}

}  // namespace gradepipe
