#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gradepipe/grade.hpp"
#include "gradepipe/json_io.hpp"

namespace gradepipe {

/// One line of the results file: the final outcome for (submission, question).
struct ResultRecord {
  std::string test_code;
  std::string quiz_id;
  std::string question_id;
  int question_index = 0;
  Score max_points;
  GradeOutcome outcome;
  std::string template_version;
  std::string config_hash;
};

inline json flag_to_json(const Flag& f) {
  json j{{"flag", to_string(f.kind)}};
  if (f.kind == FlagKind::HighVariance) j["sigma_tenths"] = std::round(f.sigma_tenths * 1000.0) / 1000.0;
  return j;
}

inline Flag flag_from_json(const json& j) {
  if (j.is_string()) return {flag_kind_from_string(j.get<std::string>()), 0.0};
  return {flag_kind_from_string(j.at("flag").get<std::string>()), j.value("sigma_tenths", 0.0)};
}

inline json result_to_json(const ResultRecord& r) {
  json runs = json::array();
  for (const auto& run : r.outcome.runs) {
    runs.push_back(json{{"rubric_id", run.rubric_id},
                        {"run_index", run.run_index},
                        {"model_id", run.model_id},
                        {"score", score_to_json(run.score)},
                        {"feedback", run.feedback},
                        {"bundle_hash", run.bundle_hash},
                        {"template_version", run.template_version}});
  }
  json flags = json::array();
  for (const auto& f : r.outcome.flags) flags.push_back(flag_to_json(f));
  return json{{"test_code", r.test_code},
              {"quiz_id", r.quiz_id},
              {"question_id", r.question_id},
              {"question_index", r.question_index},
              {"max_points", score_to_json(r.max_points)},
              {"selected_score", score_to_json(r.outcome.selected_score)},
              {"selection_rule", to_string(r.outcome.selection_rule)},
              {"selected_rubric_id", r.outcome.selected_rubric_id},
              {"feedback", r.outcome.selected_feedback},
              {"flags", flags},
              {"runs", runs},
              {"template_version", r.template_version},
              {"config_hash", r.config_hash}};
}

inline ResultRecord result_from_json(const json& j) {
  try {
    ResultRecord r;
    r.test_code = j.at("test_code").get<std::string>();
    r.quiz_id = j.value("quiz_id", "");
    r.question_id = j.at("question_id").get<std::string>();
    r.question_index = j.value("question_index", 0);
    r.max_points = score_from_json(j.at("max_points"));
    r.outcome.selected_score = score_from_json(j.at("selected_score"));
    r.outcome.selection_rule = selection_rule_from_string(j.at("selection_rule").get<std::string>());
    r.outcome.selected_rubric_id = j.at("selected_rubric_id").get<std::string>();
    r.outcome.selected_feedback = j.at("feedback").get<std::string>();
    for (const auto& jf : j.at("flags")) add_flag(r.outcome.flags, flag_from_json(jf));
    for (const auto& jr : j.at("runs")) {
      GradeRun run;
      run.rubric_id = jr.at("rubric_id").get<std::string>();
      run.run_index = jr.at("run_index").get<int>();
      run.model_id = jr.at("model_id").get<std::string>();
      run.score = score_from_json(jr.at("score"));
      run.feedback = jr.value("feedback", "");
      run.bundle_hash = jr.value("bundle_hash", "");
      run.template_version = jr.value("template_version", "");
      r.outcome.runs.push_back(std::move(run));
    }
    r.template_version = j.value("template_version", "");
    r.config_hash = j.value("config_hash", "");
    if (r.outcome.selected_score > r.max_points) throw ValidationError("selected score exceeds max for " + r.test_code);
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("result record: ") + e.what());
  }
}

inline std::string format_results(const std::vector<ResultRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += result_to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

inline std::vector<ResultRecord> parse_results(std::string_view text) {
  std::vector<ResultRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("results line " + std::to_string(line_no) + " is not valid JSON");
    out.push_back(result_from_json(j));
  }
  return out;
}

inline std::vector<ResultRecord> load_results(const std::filesystem::path& path) {
  return parse_results(read_file(path));
}

}  // namespace gradepipe
