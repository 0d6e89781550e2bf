#pragma once

#include <optional>
#include <set>
#include <string>

#include "gradepipe/digest.hpp"
#include "gradepipe/grade.hpp"
#include "gradepipe/messaging.hpp"

namespace gradepipe {

/// Pipeline settings. Loaded from a JSON file; command-line flags override.
struct PipelineConfig {
  double temperature = 0.0;
  std::optional<std::string> temperature_audit;
  int parallelism = 8;
  int max_retries = 2;
  std::string model_id = "replay";
  bool ocr_leniency = true;
  std::optional<std::int64_t> grid_tenths;  // overrides the manifest grid
  std::int64_t high_variance_tenths = 5;
  std::int64_t within_tenths = 10;
  std::int64_t histogram_bin_tenths = 5;
  bool withhold_flagged = true;
  std::set<FlagKind> withhold_flags = MessagePolicy{}.withhold_flags;

  MessagePolicy message_policy() const { return {withhold_flagged, withhold_flags}; }
};

inline json config_to_json(const PipelineConfig& c) {
  json flags = json::array();
  for (auto k : c.withhold_flags) flags.push_back(to_string(k));
  json j{{"temperature", format_temperature(c.temperature)},
         {"parallelism", c.parallelism},
         {"max_retries", c.max_retries},
         {"model_id", c.model_id},
         {"ocr_leniency", c.ocr_leniency},
         {"high_variance_tenths", c.high_variance_tenths},
         {"within_tenths", c.within_tenths},
         {"histogram_bin_tenths", c.histogram_bin_tenths},
         {"withhold_flagged", c.withhold_flagged},
         {"withhold_flags", flags}};
  j["temperature_audit"] = c.temperature_audit ? json(*c.temperature_audit) : json(nullptr);
  j["grid_tenths"] = c.grid_tenths ? json(*c.grid_tenths) : json(nullptr);
  return j;
}

/// Parallelism is excluded: it cannot change any output.
inline std::string config_hash(const PipelineConfig& c) {
  json j = config_to_json(c);
  j.erase("parallelism");
  return "sha256:" + sha256_hex(j.dump()).substr(0, 16);
}

/// Unknown keys are rejected so a typo cannot silently fall back to a default.
inline PipelineConfig config_from_json(const json& j) {
  static const std::set<std::string> kKeys = {
      "temperature",  "temperature_audit",    "parallelism",   "max_retries",      "model_id",
      "ocr_leniency", "grid_tenths",          "grid",          "high_variance_tenths", "within_tenths",
      "histogram_bin_tenths", "withhold_flagged", "withhold_flags"};
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!kKeys.count(k)) throw ValidationError("unknown config key '" + k + "'");
  }
  PipelineConfig c;
  try {
    if (j.contains("temperature")) {
      const auto& t = j.at("temperature");
      c.temperature = t.is_string() ? std::stod(t.get<std::string>()) : t.get<double>();
    }
    if (j.contains("temperature_audit") && !j.at("temperature_audit").is_null()) {
      c.temperature_audit = j.at("temperature_audit").get<std::string>();
    }
    c.parallelism = j.value("parallelism", c.parallelism);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.model_id = j.value("model_id", c.model_id);
    c.ocr_leniency = j.value("ocr_leniency", c.ocr_leniency);
    if (j.contains("grid_tenths") && !j.at("grid_tenths").is_null()) c.grid_tenths = j.at("grid_tenths").get<std::int64_t>();
    if (j.contains("grid")) c.grid_tenths = grid_from_json(j.at("grid"));
    c.high_variance_tenths = j.value("high_variance_tenths", c.high_variance_tenths);
    c.within_tenths = j.value("within_tenths", c.within_tenths);
    c.histogram_bin_tenths = j.value("histogram_bin_tenths", c.histogram_bin_tenths);
    c.withhold_flagged = j.value("withhold_flagged", c.withhold_flagged);
    if (j.contains("withhold_flags")) {
      c.withhold_flags.clear();
      for (const auto& f : j.at("withhold_flags")) c.withhold_flags.insert(flag_kind_from_string(f.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ValidationError("config: temperature is not a number");
  } catch (const ParseError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (c.parallelism < 1) throw ValidationError("parallelism must be >= 1");
  if (c.max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (c.high_variance_tenths < 0) throw ValidationError("high_variance_tenths must be >= 0");
  if (c.histogram_bin_tenths <= 0) throw ValidationError("histogram_bin_tenths must be > 0");
  if (c.grid_tenths && (*c.grid_tenths <= 0 || 10 % *c.grid_tenths != 0)) {
    throw ValidationError("grid_tenths must divide 10");
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return config_from_json(parse_json(read_file(path), path.string()));
}

}  // namespace gradepipe
