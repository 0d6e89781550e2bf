#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gradepipe/core.hpp"
#include "gradepipe/csv.hpp"

namespace gradepipe {

// Agreement statistics. Inputs are fixed-point tenths; every count-based
// statistic (zero sigma, zero delta, within-1) is decided on exact integers
// and only the reported means/deviations are converted to points.

struct GapRecord {
  std::string test_code;
  std::string quiz_id;
  std::string question_id;
  Score ai_score;
  Score ta_score;
  std::int64_t gap_tenths = 0;
};

inline GapRecord make_gap_record(std::string test_code, std::string quiz_id, std::string question_id, Score ai,
                                 Score ta) {
  return {std::move(test_code), std::move(quiz_id), std::move(question_id), ai, ta, score_gap(ai, ta)};
}

struct SummaryStats {
  std::int64_t n = 0;
  double mean_gap = 0.0;  // points
  double std_gap = 0.0;   // points, population
  double mae = 0.0;       // points
  double within1_pct = 0.0;
};

/// |gap| <= threshold counts as "within"; default threshold is 1.0 pt inclusive.
inline SummaryStats summarize_gap_values(std::span<const std::int64_t> gaps, std::int64_t within_tenths = 10) {
  if (gaps.empty()) throw EmptyInput("no gap records");
  std::int64_t sum = 0, sumsq = 0, abs_sum = 0, within = 0;
  for (auto g : gaps) {
    sum += g;
    sumsq += g * g;
    abs_sum += std::llabs(g);
    if (std::llabs(g) <= within_tenths) ++within;
  }
  const auto n = static_cast<std::int64_t>(gaps.size());
  const double dn = static_cast<double>(n);
  SummaryStats s;
  s.n = n;
  s.mean_gap = static_cast<double>(sum) / (10.0 * dn);
  s.std_gap = std::sqrt(static_cast<double>(n * sumsq - sum * sum)) / (10.0 * dn);
  s.mae = static_cast<double>(abs_sum) / (10.0 * dn);
  s.within1_pct = 100.0 * static_cast<double>(within) / dn;
  return s;
}

inline SummaryStats summarize_gaps(std::span<const GapRecord> records, std::int64_t within_tenths = 10) {
  std::vector<std::int64_t> gaps;
  gaps.reserve(records.size());
  for (const auto& r : records) gaps.push_back(r.gap_tenths);
  return summarize_gap_values(gaps, within_tenths);
}

struct QuizSummary {
  std::string quiz_id;
  SummaryStats stats;
};

/// Per-quiz summaries sorted by quiz_id.
inline std::vector<QuizSummary> quiz_table(std::span<const GapRecord> records) {
  if (records.empty()) throw EmptyInput("no gap records");
  std::map<std::string, std::vector<std::int64_t>> groups;
  for (const auto& r : records) groups[r.quiz_id].push_back(r.gap_tenths);
  std::vector<QuizSummary> out;
  for (const auto& [quiz, gaps] : groups) out.push_back({quiz, summarize_gap_values(gaps)});
  return out;
}

struct StabilityStats {
  std::string model_id;
  std::int64_t n_questions = 0;
  std::int64_t runs_per_question = 0;
  double mean_sigma = 0.0;  // points
  double prob_sigma_zero = 0.0;
};

/// Population sigma of each question's runs, averaged over questions.
inline StabilityStats stability(const std::map<std::string, std::vector<Score>>& runs_by_question,
                                const std::string& model_id) {
  if (runs_by_question.empty()) throw EmptyInput("no questions");
  const std::size_t k = runs_by_question.begin()->second.size();
  if (k < 2) throw RaggedRuns("stability needs at least two runs per question");
  double sigma_sum = 0.0;
  std::int64_t zero = 0;
  for (const auto& [q, runs] : runs_by_question) {
    if (runs.size() != k) {
      throw RaggedRuns("question " + q + " has " + std::to_string(runs.size()) + " runs, expected " + std::to_string(k));
    }
    std::int64_t s = 0, ss = 0;
    for (const auto& r : runs) {
      s += r.tenths();
      ss += r.tenths() * r.tenths();
    }
    const auto kk = static_cast<std::int64_t>(k);
    const std::int64_t var_num = kk * ss - s * s;  // k^2 * variance, in tenths^2
    if (var_num == 0) ++zero;
    sigma_sum += std::sqrt(static_cast<double>(var_num)) / (10.0 * static_cast<double>(kk));
  }
  StabilityStats st;
  st.model_id = model_id;
  st.n_questions = static_cast<std::int64_t>(runs_by_question.size());
  st.runs_per_question = static_cast<std::int64_t>(k);
  st.mean_sigma = sigma_sum / static_cast<double>(st.n_questions);
  st.prob_sigma_zero = static_cast<double>(zero) / static_cast<double>(st.n_questions);
  return st;
}

struct CrossModelDelta {
  std::int64_t n_questions = 0;
  double mean_delta = 0.0;      // points, a minus b
  double mean_abs_delta = 0.0;  // points
  double prob_delta_zero = 0.0;
};

/// Per-question delta of run means (a minus b). Means stay exact rationals
/// until aggregation, so Pr(delta == 0) is an exact count.
inline CrossModelDelta cross_model(const std::map<std::string, std::vector<Score>>& runs_a,
                                   const std::map<std::string, std::vector<Score>>& runs_b) {
  if (runs_a.size() != runs_b.size()) throw KeyMismatch("question sets differ in size");
  if (runs_a.empty()) throw EmptyInput("no questions");
  double sum = 0.0, abs_sum = 0.0;
  std::int64_t zero = 0;
  for (const auto& [q, a] : runs_a) {
    auto it = runs_b.find(q);
    if (it == runs_b.end()) throw KeyMismatch("question " + q + " missing from second run set");
    const auto& b = it->second;
    if (a.empty() || b.empty()) throw EmptyInput("question " + q + " has no runs");
    std::int64_t sa = 0, sb = 0;
    for (const auto& s : a) sa += s.tenths();
    for (const auto& s : b) sb += s.tenths();
    const auto ka = static_cast<std::int64_t>(a.size());
    const auto kb = static_cast<std::int64_t>(b.size());
    const std::int64_t num = sa * kb - sb * ka;  // delta = num / (ka*kb) tenths
    if (num == 0) ++zero;
    const double delta = static_cast<double>(num) / (10.0 * static_cast<double>(ka * kb));
    sum += delta;
    abs_sum += std::fabs(delta);
  }
  CrossModelDelta d;
  d.n_questions = static_cast<std::int64_t>(runs_a.size());
  const double n = static_cast<double>(d.n_questions);
  d.mean_delta = sum / n;
  d.mean_abs_delta = abs_sum / n;
  d.prob_delta_zero = static_cast<double>(zero) / n;
  return d;
}

enum class OcrVerdict { Acceptable, Problematic };
enum class GradingVerdict { Correct, Acceptable, Incorrect };

inline std::string to_string(OcrVerdict v) { return v == OcrVerdict::Acceptable ? "Acceptable" : "Problematic"; }

inline std::string to_string(GradingVerdict v) {
  switch (v) {
    case GradingVerdict::Correct: return "Correct";
    case GradingVerdict::Acceptable: return "Acceptable";
    case GradingVerdict::Incorrect: return "Incorrect";
  }
  return "?";
}

inline OcrVerdict ocr_verdict_from_string(std::string_view s) {
  const auto l = to_lower_ascii(trim(s));
  if (l == "acceptable") return OcrVerdict::Acceptable;
  if (l == "problematic") return OcrVerdict::Problematic;
  throw ParseError("unknown OCR verdict '" + std::string(s) + "'");
}

inline GradingVerdict grading_verdict_from_string(std::string_view s) {
  const auto l = to_lower_ascii(trim(s));
  if (l == "correct") return GradingVerdict::Correct;
  if (l == "acceptable") return GradingVerdict::Acceptable;
  if (l == "incorrect") return GradingVerdict::Incorrect;
  throw ParseError("unknown grading verdict '" + std::string(s) + "'");
}

struct VerdictRecord {
  std::string test_code;
  std::string question_id;
  OcrVerdict ocr_verdict = OcrVerdict::Acceptable;
  GradingVerdict grading_verdict = GradingVerdict::Correct;
  Score reviewer_score;
};

/// Percentages in hundredths, rounded half-up: 87.64% -> 8764.
inline std::int64_t percent_hundredths(std::int64_t count, std::int64_t n) {
  if (n <= 0) return 0;
  return (20000 * count + n) / (2 * n);
}

struct VerdictDistribution {
  std::int64_t n = 0;
  std::int64_t ocr_acceptable = 0, ocr_problematic = 0;
  std::int64_t correct = 0, acceptable = 0, incorrect = 0;

  double pct(std::int64_t count) const { return static_cast<double>(percent_hundredths(count, n)) / 100.0; }
  double ocr_acceptable_pct() const { return pct(ocr_acceptable); }
  double ocr_problematic_pct() const { return pct(ocr_problematic); }
  double correct_pct() const { return pct(correct); }
  double acceptable_pct() const { return pct(acceptable); }
  double incorrect_pct() const { return pct(incorrect); }
};

/// Zero records yields n = 0 and all-zero percentages.
inline VerdictDistribution count_verdicts(std::span<const VerdictRecord> verdicts) {
  VerdictDistribution d;
  d.n = static_cast<std::int64_t>(verdicts.size());
  for (const auto& v : verdicts) {
    (v.ocr_verdict == OcrVerdict::Acceptable ? d.ocr_acceptable : d.ocr_problematic)++;
    switch (v.grading_verdict) {
      case GradingVerdict::Correct: ++d.correct; break;
      case GradingVerdict::Acceptable: ++d.acceptable; break;
      case GradingVerdict::Incorrect: ++d.incorrect; break;
    }
  }
  return d;
}

inline VerdictDistribution verdict_distribution(std::span<const VerdictRecord> verdicts) {
  if (verdicts.empty()) throw EmptyInput("no verdicts");
  return count_verdicts(verdicts);
}

/// Verdict table CSV: test_code,question_id,ocr_verdict,grading_verdict,reviewer_score
inline std::vector<VerdictRecord> parse_verdicts_csv(std::string_view text) {
  csv::Table t(text, {"test_code", "question_id", "ocr_verdict", "grading_verdict", "reviewer_score"});
  std::vector<VerdictRecord> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    out.push_back({t.at(i, "test_code"), t.at(i, "question_id"), ocr_verdict_from_string(t.at(i, "ocr_verdict")),
                   grading_verdict_from_string(t.at(i, "grading_verdict")),
                   score_from_decimal(t.at(i, "reviewer_score"))});
  }
  return out;
}

inline std::string format_verdicts_csv(std::span<const VerdictRecord> verdicts) {
  std::string out = "test_code,question_id,ocr_verdict,grading_verdict,reviewer_score\n";
  for (const auto& v : verdicts) {
    out += csv::format_row({v.test_code, v.question_id, to_string(v.ocr_verdict), to_string(v.grading_verdict),
                            render_decimal(v.reviewer_score)});
  }
  return out;
}

struct HistogramBin {
  std::int64_t center_tenths = 0;
  std::int64_t count = 0;
};

/// Bins of width w centered on multiples of w: [c - w/2, c + w/2). Emits every
/// bin between the lowest and highest occupied one, empty ones included.
inline std::vector<HistogramBin> histogram(std::span<const std::int64_t> values, std::int64_t bin_width_tenths) {
  if (bin_width_tenths <= 0) throw ValidationError("bin width must be positive");
  if (values.empty()) return {};
  auto floor_div = [](std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  };
  std::map<std::int64_t, std::int64_t> counts;
  for (auto v : values) ++counts[floor_div(2 * v + bin_width_tenths, 2 * bin_width_tenths)];
  std::vector<HistogramBin> bins;
  const auto lo = counts.begin()->first;
  const auto hi = counts.rbegin()->first;
  for (auto i = lo; i <= hi; ++i) {
    auto it = counts.find(i);
    bins.push_back({i * bin_width_tenths, it == counts.end() ? 0 : it->second});
  }
  return bins;
}

inline std::string format_histogram_csv(std::span<const HistogramBin> bins) {
  std::string out = "bin_center,count\n";
  for (const auto& b : bins) {
    const std::int64_t a = std::llabs(b.center_tenths);
    std::string c = (b.center_tenths < 0 ? "-" : "") + std::to_string(a / 10) + "." + std::to_string(a % 10);
    out += c + "," + std::to_string(b.count) + "\n";
  }
  return out;
}

/// Survey summary rows: group,n,<item counts...> -> integer percentages.
inline std::string render_survey_table(std::string_view counts_csv) {
  auto rows = csv::parse(counts_csv);
  if (rows.empty()) throw ParseError("empty survey counts file");
  const auto& header = rows.front();
  if (header.size() < 3 || header[0] != "group" || header[1] != "n") {
    throw ParseError("survey counts header must start with group,n");
  }
  std::string out = csv::format_row(header);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) throw ParseError("survey row " + std::to_string(r + 1) + " has wrong arity");
    const std::int64_t n = std::stoll(row[1]);
    csv::Row outrow{row[0], row[1]};
    for (std::size_t c = 2; c < row.size(); ++c) {
      const std::int64_t count = std::stoll(row[c]);
      outrow.push_back(std::to_string(n > 0 ? (200 * count + n) / (2 * n) : 0) + "%");
    }
    out += csv::format_row(outrow);
  }
  return out;
}

}  // namespace gradepipe
