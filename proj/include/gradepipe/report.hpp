#pragma once

#include <cmath>
#include <string>

#include "gradepipe/analytics.hpp"
#include "gradepipe/json_io.hpp"

namespace gradepipe {

inline json summary_to_json(const SummaryStats& s) {
  return json{{"n", s.n}, {"mean_gap", s.mean_gap}, {"std_gap", s.std_gap}, {"mae", s.mae}, {"within1_pct", s.within1_pct}};
}

inline std::string format_quiz_table_csv(const std::vector<QuizSummary>& rows) {
  std::string out = "quiz_id,n,mean_gap,std_gap,mae,within1_pct\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%lld,%.6f,%.6f,%.6f,%.2f\n", static_cast<long long>(r.stats.n), r.stats.mean_gap,
                  r.stats.std_gap, r.stats.mae, r.stats.within1_pct);
    out += csv::escape(r.quiz_id) + buf;
  }
  return out;
}

inline json stability_to_json(const StabilityStats& s) {
  return json{{"model_id", s.model_id},
              {"n_questions", s.n_questions},
              {"runs_per_question", s.runs_per_question},
              {"mean_sigma", s.mean_sigma},
              {"prob_sigma_zero", s.prob_sigma_zero}};
}

inline json cross_model_to_json(const CrossModelDelta& d) {
  return json{{"n_questions", d.n_questions},
              {"mean_delta", d.mean_delta},
              {"mean_abs_delta", d.mean_abs_delta},
              {"prob_delta_zero", d.prob_delta_zero}};
}

/// Same document backs verdicts.json and the review service's /stats.
inline json verdicts_to_json(const VerdictDistribution& d) {
  return json{{"n", d.n},
              {"ocr", {{"Acceptable", d.ocr_acceptable_pct()}, {"Problematic", d.ocr_problematic_pct()}}},
              {"grading",
               {{"Correct", d.correct_pct()}, {"Acceptable", d.acceptable_pct()}, {"Incorrect", d.incorrect_pct()}}},
              {"counts",
               {{"ocr_acceptable", d.ocr_acceptable},
                {"ocr_problematic", d.ocr_problematic},
                {"correct", d.correct},
                {"acceptable", d.acceptable},
                {"incorrect", d.incorrect}}}};
}

}  // namespace gradepipe
