#pragma once

#include <cstdio>
#include <optional>
#include <string>

#include "gradepipe/digest.hpp"
#include "gradepipe/json_io.hpp"

namespace gradepipe {

enum class ResponseContract { FreeText, ScoredFeedback };

inline std::string to_string(ResponseContract c) {
  return c == ResponseContract::FreeText ? "FreeText" : "ScoredFeedback";
}

struct PromptBundle {
  std::string system_message;
  std::string user_message;
  double temperature = 0.0;
  ResponseContract response_contract = ResponseContract::FreeText;
  // Present when a ScoredFeedback bundle runs outside [0.0, 0.1] on purpose.
  std::optional<std::string> temperature_audit;
  // Which repeated sample this call is; distinguishes replay fixtures for
  // multi-run stabilization without changing the bundle hash.
  int sample_index = 0;
};

inline std::string format_temperature(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", t);
  return buf;
}

/// Digest of everything the backend sees. sample_index is deliberately left
/// out so repeated runs of one prompt share a hash.
inline std::string bundle_hash(const PromptBundle& b) {
  json j{{"system", b.system_message},
         {"user", b.user_message},
         {"temperature", format_temperature(b.temperature)},
         {"contract", to_string(b.response_contract)}};
  return sha256_hex(j.dump());
}

}  // namespace gradepipe
