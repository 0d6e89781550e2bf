#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gradepipe/bundle.hpp"
#include "gradepipe/core.hpp"
#include "gradepipe/json_io.hpp"

namespace gradepipe {

/// Model backend contract. Implementations must tolerate concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string transcribe(const std::string& image_path, const PromptBundle& bundle) = 0;
  virtual std::string complete(const PromptBundle& bundle) = 0;
  virtual std::string model_id() const = 0;
};

enum class CallOutcome { Ok, TransportError, MalformedOutput };

inline std::string to_string(CallOutcome o) {
  switch (o) {
    case CallOutcome::Ok: return "Ok";
    case CallOutcome::TransportError: return "TransportError";
    case CallOutcome::MalformedOutput: return "MalformedOutput";
  }
  return "?";
}

struct BackendCallLog {
  std::string bundle_hash;
  std::string model_id;
  std::int64_t latency_ms = 0;
  int attempt = 1;
  CallOutcome outcome = CallOutcome::Ok;
};

/// Append-only, thread-safe sink. Optionally mirrors entries to a JSONL file.
class CallLog {
 public:
  CallLog() = default;
  explicit CallLog(const std::filesystem::path& file) : out_(file, std::ios::app) {
    if (!out_) throw IoError("cannot open call log " + file.string());
  }

  void append(BackendCallLog entry) {
    std::lock_guard lock(mu_);
    if (out_.is_open()) {
      out_ << json{{"bundle_hash", entry.bundle_hash},
                   {"model_id", entry.model_id},
                   {"latency_ms", entry.latency_ms},
                   {"attempt", entry.attempt},
                   {"outcome", to_string(entry.outcome)}}
                  .dump()
           << '\n';
      out_.flush();
    }
    entries_.push_back(std::move(entry));
  }

  std::vector<BackendCallLog> entries() const {
    std::lock_guard lock(mu_);
    return entries_;
  }

 private:
  mutable std::mutex mu_;
  std::ofstream out_;
  std::vector<BackendCallLog> entries_;
};

class ExhaustedRetries : public Error {
 public:
  ExhaustedRetries(CallOutcome last, int attempts, const std::string& detail)
      : Error(ErrorCategory::Backend, "ExhaustedRetries",
              "gave up after " + std::to_string(attempts) + " attempts (last outcome " + to_string(last) +
                  "): " + detail),
        last_(last) {}
  CallOutcome last_outcome() const noexcept { return last_; }

 private:
  CallOutcome last_;
};

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds backoff{0};
};

struct ScoredFeedback {
  Score score;
  std::string feedback;
};

namespace detail {

// Returns the end (exclusive) of the balanced {...} starting at `open`, or npos.
inline std::size_t match_object(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

/// First well-formed JSON object in `text` carrying both score and feedback.
inline std::optional<json> find_scored_document(std::string_view text) {
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    const auto end = match_object(text, pos);
    if (end == std::string_view::npos) continue;
    json doc = json::parse(text.substr(pos, end - pos), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) continue;
    if (doc.contains("score") && doc.contains("feedback")) return doc;
  }
  return std::nullopt;
}

}  // namespace detail

/// Extracts {score, feedback}, tolerating prose around the document. Nothing
/// is clamped: out-of-range scores are errors, off-grid scores are marked.
inline ScoredFeedback parse_scored_feedback(std::string_view text, const Score& max_points,
                                            std::int64_t grid_tenths = kDefaultGridTenths) {
  auto doc = detail::find_scored_document(text);
  if (!doc) throw MalformedOutput("no {score, feedback} document in backend output");
  const json& js = doc->at("score");
  const json& jf = doc->at("feedback");
  if (!jf.is_string()) throw MalformedOutput("feedback is not a string");
  if (js.is_number() && js.get<double>() < 0) throw ScoreOutOfRange("score " + js.dump() + " is negative");
  if (js.is_string() && trim(js.get<std::string>()).starts_with("-")) {
    throw ScoreOutOfRange("score " + js.get<std::string>() + " is negative");
  }
  Score score;
  try {
    score = score_from_json(js, grid_tenths);
  } catch (const ParseError& e) {
    throw MalformedOutput(std::string("unusable score: ") + e.what());
  }
  if (score > max_points) {
    throw ScoreOutOfRange("score " + render_decimal(score) + " exceeds max " + render_decimal(max_points));
  }
  return {score, jf.get<std::string>()};
}

namespace detail {

template <class Call>
std::string call_with_retry(Call&& call, const std::string& model_id, const PromptBundle& bundle,
                            const RetryPolicy& policy, CallLog* log) {
  if (policy.max_retries < 0) throw ValidationError("max_retries must be >= 0");
  const std::string hash = bundle_hash(bundle);
  CallOutcome last = CallOutcome::Ok;
  std::string last_detail;
  const int attempts = policy.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1 && policy.backoff.count() > 0) std::this_thread::sleep_for(policy.backoff * (attempt - 1));
    const auto start = std::chrono::steady_clock::now();
    auto record = [&](CallOutcome outcome) {
      if (!log) return;
      const auto ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
      log->append({hash, model_id, ms, attempt, outcome});
    };
    std::string text;
    try {
      text = call();
    } catch (const TransportError& e) {
      record(CallOutcome::TransportError);
      last = CallOutcome::TransportError;
      last_detail = e.what();
      continue;
    } catch (const Error&) {
      record(CallOutcome::TransportError);
      throw;
    }
    if (bundle.response_contract == ResponseContract::ScoredFeedback && !find_scored_document(text)) {
      record(CallOutcome::MalformedOutput);
      last = CallOutcome::MalformedOutput;
      last_detail = "response had no {score, feedback} document";
      continue;
    }
    record(CallOutcome::Ok);
    return text;
  }
  throw ExhaustedRetries(last, attempts, last_detail);
}

}  // namespace detail

/// Retries TransportError and (for ScoredFeedback) unparseable responses.
/// Other backend errors propagate immediately. Every attempt is logged.
inline std::string complete_with_retry(Backend& backend, const PromptBundle& bundle, const RetryPolicy& policy,
                                       CallLog* log = nullptr) {
  return detail::call_with_retry([&] { return backend.complete(bundle); }, backend.model_id(), bundle, policy, log);
}

inline std::string complete_with_retry(Backend& backend, const PromptBundle& bundle, int max_retries,
                                       CallLog* log = nullptr) {
  return complete_with_retry(backend, bundle, RetryPolicy{max_retries, {}}, log);
}

inline std::string transcribe_with_retry(Backend& backend, const std::string& image_path, const PromptBundle& bundle,
                                         const RetryPolicy& policy, CallLog* log = nullptr) {
  return detail::call_with_retry([&] { return backend.transcribe(image_path, bundle); }, backend.model_id(), bundle,
                                 policy, log);
}

/// Deterministic backend over a directory of fixture files named by digest.
///
/// complete() keys on the bundle hash; transcribe() keys on the image bytes
/// plus the bundle hash, so any prompt or template change breaks the match.
/// Repeated samples look for "<key>.<n>.txt" before falling back to "<key>.txt".
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(std::filesystem::path dir, std::string model_id = "replay")
      : dir_(std::move(dir)), model_id_(std::move(model_id)) {}

  static std::string completion_key(const PromptBundle& bundle) { return bundle_hash(bundle); }

  static std::string transcription_key(std::string_view image_bytes, const PromptBundle& bundle) {
    return sha256_hex(sha256_hex(image_bytes) + ":" + bundle_hash(bundle));
  }

  static std::string fixture_name(const std::string& key, int sample_index) {
    return sample_index == 0 ? key + ".txt" : key + "." + std::to_string(sample_index) + ".txt";
  }

  std::string transcribe(const std::string& image_path, const PromptBundle& bundle) override {
    return lookup(transcription_key(read_file(image_path), bundle), bundle.sample_index);
  }

  std::string complete(const PromptBundle& bundle) override {
    return lookup(completion_key(bundle), bundle.sample_index);
  }

  std::string model_id() const override { return model_id_; }

 private:
  std::string lookup(const std::string& key, int sample_index) const {
    if (sample_index != 0) {
      const auto p = dir_ / fixture_name(key, sample_index);
      if (std::filesystem::exists(p)) return read_file(p);
    }
    const auto p = dir_ / fixture_name(key, 0);
    if (!std::filesystem::exists(p)) throw BackendError("replay fixture missing: " + p.string());
    return read_file(p);
  }

  std::filesystem::path dir_;
  std::string model_id_;
};

/// Wraps a backend and stores every response under its replay name, so a live
/// run can be turned into a fixture set.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(Backend& inner, std::filesystem::path dir) : inner_(inner), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::string transcribe(const std::string& image_path, const PromptBundle& bundle) override {
    std::string text = inner_.transcribe(image_path, bundle);
    save(ReplayBackend::transcription_key(read_file(image_path), bundle), bundle.sample_index, text);
    return text;
  }

  std::string complete(const PromptBundle& bundle) override {
    std::string text = inner_.complete(bundle);
    save(ReplayBackend::completion_key(bundle), bundle.sample_index, text);
    return text;
  }

  std::string model_id() const override { return inner_.model_id(); }

 private:
  void save(const std::string& key, int sample, const std::string& text) {
    write_file(dir_ / ReplayBackend::fixture_name(key, sample), text);
  }

  Backend& inner_;
  std::filesystem::path dir_;
};

}  // namespace gradepipe
