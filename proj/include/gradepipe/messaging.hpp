#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gradepipe/csv.hpp"
#include "gradepipe/results.hpp"
#include "gradepipe/templates.hpp"

namespace gradepipe {

struct MessagePolicy {
  bool withhold_flagged = true;
  std::set<FlagKind> withhold_flags = {FlagKind::FullCreditSplit, FlagKind::CorrectAnswerUnderCredited,
                                       FlagKind::HighVariance, FlagKind::OffGridScore, FlagKind::OcrSuspect};
};

struct MessageSection {
  std::string question_id;
  int number = 0;
  Score points;
  std::string evaluation;
  bool pending_review = false;
};

struct StudentMessage {
  std::string test_code;
  std::string salutation_name;
  std::vector<MessageSection> per_question;
  Score total;  // sum of displayed points only
  bool provisional = false;
  std::string disclaimer;
};

inline bool withheld(const GradeOutcome& o, const MessagePolicy& policy) {
  if (!policy.withhold_flagged) return false;
  return std::any_of(o.flags.begin(), o.flags.end(), [&](const Flag& f) { return policy.withhold_flags.count(f.kind); });
}

inline StudentMessage render_message(std::vector<ResultRecord> outcomes, const std::string& roster_name,
                                     const MessagePolicy& policy, const TemplateSet& templates) {
  std::set<std::string> seen;
  for (const auto& r : outcomes) {
    if (!seen.insert(r.question_id).second) throw DuplicateQuestion("question " + r.question_id + " appears twice");
  }
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const ResultRecord& a, const ResultRecord& b) { return a.question_index < b.question_index; });
  StudentMessage m;
  m.test_code = outcomes.empty() ? "" : outcomes.front().test_code;
  m.salutation_name = trim(roster_name).empty() ? "Student" : trim(roster_name);
  m.disclaimer = templates.raw("message_disclaimer");
  std::int64_t total = 0;
  for (const auto& r : outcomes) {
    MessageSection s;
    s.question_id = r.question_id;
    s.number = r.question_index + 1;
    if (withheld(r.outcome, policy)) {
      s.pending_review = true;
      m.provisional = true;
    } else {
      s.points = r.outcome.selected_score;
      s.evaluation = r.outcome.selected_feedback;
      total += s.points.tenths();
    }
    m.per_question.push_back(std::move(s));
  }
  m.total = Score::from_tenths(total);
  return m;
}

inline std::string format_message(const StudentMessage& m, const TemplateSet& templates) {
  std::string sections;
  for (const auto& s : m.per_question) {
    if (s.pending_review) {
      sections += templates.render("message_pending", {{"number", std::to_string(s.number)}});
    } else {
      sections += templates.render("message_section", {{"number", std::to_string(s.number)},
                                                       {"points", render_decimal(s.points)},
                                                       {"evaluation", s.evaluation}});
    }
    sections += "\n\n";
  }
  std::string total = render_decimal(m.total);
  if (m.provisional) total += " (provisional; some questions are pending human review)";
  return templates.render("message", {{"salutation_name", m.salutation_name},
                                      {"sections", sections},
                                      {"total", total},
                                      {"disclaimer", m.disclaimer}}) +
         "\n";
}

/// Roster CSV: test_code,name. Keys are normalized test codes.
inline std::map<std::string, std::string> parse_roster(std::string_view text) {
  csv::Table t(text, {"test_code", "name"});
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < t.size(); ++i) out[normalize_test_code(t.at(i, "test_code"))] = trim(t.at(i, "name"));
  return out;
}

/// Test codes are student-chosen; keep file names to a safe alphabet.
inline std::string message_file_name(std::string_view test_code) {
  std::string out;
  for (char c : trim(test_code)) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return (out.empty() ? std::string("_") : out) + ".txt";
}

/// Writes <dir>/<test_code>.txt per student plus <dir>/index.csv. Delivery is
/// left to whatever consumes the directory.
inline void export_messages(const std::vector<ResultRecord>& results, const std::map<std::string, std::string>& roster,
                            const MessagePolicy& policy, const TemplateSet& templates,
                            const std::filesystem::path& dir) {
  std::map<std::string, std::vector<ResultRecord>> by_student;
  for (const auto& r : results) by_student[r.test_code].push_back(r);
  std::string index = "test_code,file,total,provisional_flag\n";
  for (const auto& [code, records] : by_student) {
    auto it = roster.find(normalize_test_code(code));
    const StudentMessage m = render_message(records, it == roster.end() ? "" : it->second, policy, templates);
    const std::string file = message_file_name(code);
    write_file(dir / file, format_message(m, templates));
    index += csv::format_row({code, file, render_decimal(m.total), m.provisional ? "true" : "false"});
  }
  write_file(dir / "index.csv", index);
}

}  // namespace gradepipe
