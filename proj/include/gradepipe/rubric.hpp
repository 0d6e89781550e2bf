#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gradepipe/core.hpp"
#include "gradepipe/json_io.hpp"

namespace gradepipe {

enum class RubricKind { Flexible, Fixed };

inline std::string to_string(RubricKind k) { return k == RubricKind::Flexible ? "Flexible" : "Fixed"; }

inline RubricKind rubric_kind_from_string(std::string_view s) {
  const auto l = to_lower_ascii(trim(s));
  if (l == "flexible") return RubricKind::Flexible;
  if (l == "fixed") return RubricKind::Fixed;
  throw ParseError("unknown rubric kind '" + std::string(s) + "'");
}

struct RubricSpec {
  std::string rubric_id;
  std::string question_id;
  RubricKind kind = RubricKind::Flexible;
  std::string body;
  std::vector<std::string> guidance_blocks;
  Score max_points;
  // Set on machine-drafted rubrics; grading refuses them until a human clears it.
  bool review_required = false;
};

inline RubricSpec rubric_from_json(const json& j) {
  try {
    RubricSpec r;
    r.rubric_id = j.at("rubric_id").get<std::string>();
    r.question_id = j.at("question_id").get<std::string>();
    r.kind = rubric_kind_from_string(j.at("kind").get<std::string>());
    r.body = j.at("body").get<std::string>();
    if (j.contains("guidance_blocks")) r.guidance_blocks = j.at("guidance_blocks").get<std::vector<std::string>>();
    r.max_points = score_from_json(j.at("max_points"));
    r.review_required = j.value("review_required", false);
    if (r.rubric_id.empty()) throw ParseError("rubric_id is empty");
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("rubric: ") + e.what());
  }
}

inline json rubric_to_json(const RubricSpec& r) {
  return json{{"rubric_id", r.rubric_id},
              {"question_id", r.question_id},
              {"kind", to_string(r.kind)},
              {"body", r.body},
              {"guidance_blocks", r.guidance_blocks},
              {"max_points", score_to_json(r.max_points)},
              {"review_required", r.review_required}};
}

inline RubricSpec load_rubric(const std::filesystem::path& path) {
  return rubric_from_json(parse_json(read_file(path), path.string()));
}

}  // namespace gradepipe
