#pragma once

#include <cmath>
#include <string>

#include <json.hpp>

#include "gradepipe/core.hpp"

namespace gradepipe {

using json = nlohmann::json;

/// Scores travel as JSON numbers (2.5) or decimal strings ("2.5").
inline Score score_from_json(const json& j, std::int64_t grid_tenths = kDefaultGridTenths) {
  if (j.is_string()) return score_from_decimal(j.get<std::string>(), grid_tenths);
  if (j.is_number_integer() || j.is_number_unsigned()) {
    const auto v = j.get<std::int64_t>();
    if (v < 0) throw ParseError("negative score " + j.dump());
    return Score::from_tenths(v * 10, grid_tenths);
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (!std::isfinite(v) || v < 0) throw ParseError("invalid score " + j.dump());
    const double scaled = v * 10.0;
    const double rounded = std::round(scaled);
    if (std::fabs(scaled - rounded) > 1e-6) throw ParseError("score has more than one fractional digit: " + j.dump());
    return Score::from_tenths(static_cast<std::int64_t>(rounded), grid_tenths);
  }
  throw ParseError("score must be a number or decimal string, got " + j.dump());
}

inline json score_to_json(const Score& s) {
  if (s.tenths() % 10 == 0) return json(s.tenths() / 10);
  return json(static_cast<double>(s.tenths()) / 10.0);
}

inline json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline std::int64_t grid_from_json(const json& j) {
  const Score g = score_from_json(j, 1);
  if (g.tenths() <= 0) throw ParseError("grid must be positive");
  return g.tenths();
}

}  // namespace gradepipe
