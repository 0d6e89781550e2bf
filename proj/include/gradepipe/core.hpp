#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gradepipe/error.hpp"
#include "gradepipe/util.hpp"

namespace gradepipe {

inline constexpr std::int64_t kDefaultGridTenths = 5;

/// Fixed-point points value stored in tenths (2.5 pts == 25).
///
/// Off-grid values are kept as-is and carry a marker relative to the grid
/// they were created against; comparisons look at the value only.
class Score {
 public:
  constexpr Score() = default;

  static Score from_tenths(std::int64_t tenths, std::int64_t grid_tenths = kDefaultGridTenths) {
    if (tenths < 0) throw ValidationError("negative score: " + std::to_string(tenths) + " tenths");
    if (grid_tenths <= 0) throw ValidationError("grid must be positive");
    Score s;
    s.tenths_ = tenths;
    s.off_grid_ = tenths % grid_tenths != 0;
    return s;
  }

  static Score from_points(std::int64_t points) { return from_tenths(points * 10); }

  constexpr std::int64_t tenths() const noexcept { return tenths_; }
  constexpr bool off_grid() const noexcept { return off_grid_; }
  double points() const noexcept { return static_cast<double>(tenths_) / 10.0; }

  friend constexpr bool operator==(const Score& a, const Score& b) noexcept {
    return a.tenths_ == b.tenths_;
  }
  friend constexpr auto operator<=>(const Score& a, const Score& b) noexcept {
    return a.tenths_ <=> b.tenths_;
  }

 private:
  std::int64_t tenths_ = 0;
  bool off_grid_ = false;
};

/// Parses "2.5", "3", "0.0". At most one fractional digit, no sign.
inline Score score_from_decimal(std::string_view text, std::int64_t grid_tenths = kDefaultGridTenths) {
  const std::string t = trim(text);
  if (t.empty()) throw ParseError("empty score");
  std::int64_t whole = 0;
  std::size_t i = 0;
  std::size_t int_digits = 0;
  for (; i < t.size() && t[i] != '.'; ++i) {
    char c = t[i];
    if (c < '0' || c > '9') throw ParseError("not a non-negative decimal: '" + t + "'");
    if (whole > (std::numeric_limits<std::int64_t>::max() / 100)) throw ParseError("score too large: '" + t + "'");
    whole = whole * 10 + (c - '0');
    ++int_digits;
  }
  if (int_digits == 0) throw ParseError("missing integer part: '" + t + "'");
  std::int64_t frac = 0;
  if (i < t.size()) {
    ++i;  // '.'
    const std::size_t frac_digits = t.size() - i;
    if (frac_digits == 0) throw ParseError("missing fractional digit: '" + t + "'");
    if (frac_digits > 1) throw ParseError("more than one fractional digit: '" + t + "'");
    char c = t[i];
    if (c < '0' || c > '9') throw ParseError("not a non-negative decimal: '" + t + "'");
    frac = c - '0';
  }
  return Score::from_tenths(whole * 10 + frac, grid_tenths);
}

/// "2.5", "3", "0"
inline std::string render_decimal(const Score& s) {
  std::string out = std::to_string(s.tenths() / 10);
  if (s.tenths() % 10 != 0) {
    out.push_back('.');
    out.push_back(static_cast<char>('0' + s.tenths() % 10));
  }
  return out;
}

/// AI minus TA, in signed tenths.
constexpr std::int64_t score_gap(const Score& ai, const Score& ta) noexcept {
  return ai.tenths() - ta.tenths();
}

enum class RegionKind { Solution, FinalAnswer };

inline std::string to_string(RegionKind k) {
  return k == RegionKind::Solution ? "Solution" : "FinalAnswer";
}

inline RegionKind region_kind_from_string(std::string_view s) {
  const std::string l = to_lower_ascii(trim(s));
  if (l == "solution") return RegionKind::Solution;
  if (l == "finalanswer" || l == "final_answer" || l == "final") return RegionKind::FinalAnswer;
  throw ParseError("unknown region kind: '" + std::string(s) + "'");
}

struct QuestionSpec {
  std::string question_id;
  std::string statement;
  std::string reference_solution;
  std::string reference_final_answer;
  Score max_points;
  std::vector<std::string> rubric_ids;
};

inline void validate(const QuestionSpec& q) {
  if (q.question_id.empty()) throw ValidationError("question without id");
  if (q.max_points.tenths() <= 0) throw ValidationError("question " + q.question_id + ": max_points must be > 0");
  if (q.rubric_ids.empty()) throw ValidationError("question " + q.question_id + ": no rubrics");
  std::set<std::string> seen;
  for (const auto& r : q.rubric_ids) {
    if (!seen.insert(r).second) throw ValidationError("question " + q.question_id + ": duplicate rubric id " + r);
  }
}

struct SubmissionId {
  std::string test_code;
  std::string quiz_id;
  std::string section_id;

  friend bool operator==(const SubmissionId&, const SubmissionId&) = default;
};

/// Trim + ASCII case-fold. No fuzzy matching: a mistyped code stays unmatched.
inline std::string normalize_test_code(std::string_view code) { return to_lower_ascii(trim(code)); }

}  // namespace gradepipe
