#pragma once

// Constructed datasets whose statistics land on target summary values.
// Each builder is deterministic and documents the arithmetic it relies on.

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradepipe/analytics.hpp"

namespace figures {

using gradepipe::Score;

/// Gap values (tenths) with mean -0.40 pt and population std 1.12 pt exactly.
///
/// With n = 3950: sum = -15800 and sum of squares 558688 give
/// n*ss - s^2 = 44240^2, so std = 44240 / 39500 = 1.12 exactly. (n = 3945
/// cannot hit 1.12 exactly: the required sum of squares is not an integer.)
/// Start from 1580 gaps of -1.0 pt and zeros, then spread zero pairs
/// (0, 0) -> (d, -d), each adding 2d^2 to the sum of squares.
inline std::vector<std::int64_t> global_gaps() {
  constexpr std::int64_t n = 3950;
  constexpr std::int64_t target_ss = 558688;
  std::vector<std::int64_t> g(n, 0);
  for (std::int64_t i = 0; i < 1580; ++i) g[static_cast<std::size_t>(i)] = -10;
  std::int64_t ss = 1580 * 100;
  std::size_t next = 1580;
  std::int64_t need = (target_ss - ss) / 2;  // sum of d^2 still to place
  while (need > 0) {
    std::int64_t d = std::min<std::int64_t>(30, static_cast<std::int64_t>(std::sqrt(static_cast<double>(need))));
    while (d * d > need) --d;
    g[next++] = d;
    g[next++] = -d;
    need -= d * d;
  }
  return g;
}

/// Tenths-valued 3-run triple with a given population sigma.
struct Triple {
  std::int64_t a, b, c;
  double sigma_pts() const {
    const std::int64_t s = a + b + c, ss = a * a + b * b + c * c;
    return std::sqrt(static_cast<double>(3 * ss - s * s)) / 30.0;
  }
};

/// All non-constant triples on the 0.5-pt grid within [0, max], one per
/// distinct sigma, sorted by sigma.
inline std::vector<Triple> sigma_ladder(std::int64_t max_tenths) {
  std::map<std::int64_t, Triple> by_var;  // keyed by 3*ss - s^2 (exact)
  for (std::int64_t a = 0; a <= max_tenths; a += 5)
    for (std::int64_t b = a; b <= max_tenths; b += 5)
      for (std::int64_t c = b; c <= max_tenths; c += 5) {
        const std::int64_t s = a + b + c, ss = a * a + b * b + c * c;
        const std::int64_t v = 3 * ss - s * s;
        if (v > 0) by_var.try_emplace(v, Triple{a, b, c});
      }
  std::vector<Triple> out;
  for (const auto& [v, t] : by_var) out.push_back(t);
  return out;
}

/// 171 questions x 3 runs: `zeros` constant triples, the rest split between
/// two ladder sigmas so the mean sigma is as close to target as the ladder allows.
inline std::map<std::string, std::vector<Score>> stability_runs(std::int64_t n, std::int64_t zeros, double mean_sigma_pts,
                                                                 std::int64_t max_tenths = 30) {
  const auto ladder = sigma_ladder(max_tenths);
  const std::int64_t m = n - zeros;
  const double target_sum = mean_sigma_pts * static_cast<double>(n);
  double best_err = 1e300;
  Triple t1{}, t2{};
  std::int64_t x_best = 0;
  for (std::size_t i = 0; i < ladder.size(); ++i)
    for (std::size_t j = i; j < ladder.size(); ++j)
      for (std::int64_t x = 0; x <= m; ++x) {
        const double sum = static_cast<double>(x) * ladder[i].sigma_pts() + static_cast<double>(m - x) * ladder[j].sigma_pts();
        const double err = std::fabs(sum - target_sum);
        if (err < best_err) {
          best_err = err;
          t1 = ladder[i];
          t2 = ladder[j];
          x_best = x;
        }
      }
  std::map<std::string, std::vector<Score>> runs;
  char key[32];
  for (std::int64_t q = 0; q < n; ++q) {
    std::snprintf(key, sizeof(key), "q%03lld", static_cast<long long>(q));
    std::vector<std::int64_t> v;
    if (q < zeros) {
      const std::int64_t s = (q % 7) * 5;
      v = {s, s, s};
    } else if (q - zeros < x_best) {
      v = {t1.a, t1.b, t1.c};
    } else {
      v = {t2.a, t2.b, t2.c};
    }
    std::vector<Score> scores;
    for (auto t : v) scores.push_back(Score::from_tenths(t));
    runs[key] = std::move(scores);
  }
  return runs;
}

/// Stability table, first model: mean sigma 0.083, P(sigma = 0) = 132/171.
inline std::map<std::string, std::vector<Score>> stability_model_a() { return stability_runs(171, 132, 0.083); }
/// Stability table, second model: mean sigma 0.319, P(sigma = 0) = 124/171.
inline std::map<std::string, std::vector<Score>> stability_model_b() { return stability_runs(171, 124, 0.319); }

struct CrossModelPair {
  std::map<std::string, std::vector<Score>> a, b;
};

/// Cross-model deltas: mean 0.087, mean |delta| 0.315, P(delta = 0) = 0.464.
///
/// P(delta = 0) = 0.464 needs n with 0.464n within 1e-3n of an integer;
/// n = 171 fails (79/171 and 80/171 both miss), n = 250 gives 116 exactly.
/// With three runs per side a question's delta is u/30 pt where u is the
/// difference of run sums in tenths. Positive u total 1505 over 80
/// questions, negative total 855 over 54, all multiples of 0.5 pt.
inline CrossModelPair cross_model_runs() {
  constexpr int n = 250, zero = 116, pos = 80, neg = 54;
  std::vector<std::int64_t> u;
  for (int i = 0; i < zero; ++i) u.push_back(0);
  for (int i = 0; i < pos; ++i) u.push_back(i < 61 ? 20 : 15);   // 61*20 + 19*15 = 1505
  for (int i = 0; i < neg; ++i) u.push_back(i < 9 ? -20 : -15);  // 9*20 + 45*15 = 855
  if (static_cast<int>(u.size()) != n) throw std::logic_error("cross_model_runs size");
  CrossModelPair p;
  char key[32];
  for (int q = 0; q < n; ++q) {
    std::snprintf(key, sizeof(key), "q%03d", q);
    const std::int64_t base = 5 * (q % 3);  // b runs: base, base+5, base+10
    std::vector<std::int64_t> b = {base, base + 5, base + 10};
    std::vector<std::int64_t> a = b;
    a[2] += u[static_cast<std::size_t>(q)];
    if (a[2] < 0) {  // shift the whole question up to stay non-negative
      for (auto& x : a) x += 20;
      for (auto& x : b) x += 20;
    }
    for (auto t : a) p.a[key].push_back(Score::from_tenths(t));
    for (auto t : b) p.b[key].push_back(Score::from_tenths(t));
  }
  return p;
}

struct VerdictCounts {
  std::int64_t n = 0;
  std::int64_t ocr_acceptable = 0, ocr_problematic = 0;
  std::int64_t correct = 0, acceptable = 0, incorrect = 0;
};

/// Smallest n whose round-half-up hundredth percentages hit both target
/// verdict splits: OCR 87.64 / 12.36 and grading 79.79 / 9.55 / 10.67.
inline VerdictCounts find_verdict_counts(std::int64_t limit = 20000) {
  using gradepipe::percent_hundredths;
  auto candidates = [](std::int64_t target, std::int64_t n) {
    std::vector<std::int64_t> out;
    const std::int64_t c0 = target * n / 10000;
    for (std::int64_t c = std::max<std::int64_t>(0, c0 - 2); c <= std::min(n, c0 + 2); ++c) {
      if (percent_hundredths(c, n) == target) out.push_back(c);
    }
    return out;
  };
  for (std::int64_t n = 1; n <= limit; ++n) {
    std::optional<std::int64_t> ocr;
    for (auto c : candidates(8764, n)) {
      if (percent_hundredths(n - c, n) == 1236) ocr = c;
    }
    if (!ocr) continue;
    for (auto c1 : candidates(7979, n)) {
      for (auto c2 : candidates(955, n)) {
        const std::int64_t c3 = n - c1 - c2;
        if (c3 >= 0 && percent_hundredths(c3, n) == 1067) return {n, *ocr, n - *ocr, c1, c2, c3};
      }
    }
  }
  throw std::runtime_error("no verdict split found");
}

inline std::vector<gradepipe::VerdictRecord> verdict_records(const VerdictCounts& c) {
  using gradepipe::GradingVerdict;
  using gradepipe::OcrVerdict;
  if (std::gcd<std::int64_t>(7, c.n) != 1) throw std::logic_error("stride 7 must be coprime with n");
  std::vector<gradepipe::VerdictRecord> out;
  for (std::int64_t i = 0; i < c.n; ++i) {
    gradepipe::VerdictRecord r;
    r.test_code = "s" + std::to_string(i / 3);
    r.question_id = "q" + std::to_string(i % 3);
    r.ocr_verdict = i < c.ocr_acceptable ? OcrVerdict::Acceptable : OcrVerdict::Problematic;
    // Interleave grading verdicts so they are not aligned with OCR verdicts.
    const std::int64_t j = (i * 7) % c.n;
    r.grading_verdict = j < c.correct                  ? GradingVerdict::Correct
                        : j < c.correct + c.acceptable ? GradingVerdict::Acceptable
                                                       : GradingVerdict::Incorrect;
    r.reviewer_score = Score::from_tenths(10 * (i % 4));
    out.push_back(r);
  }
  return out;
}

}  // namespace figures
