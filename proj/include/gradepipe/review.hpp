#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "gradepipe/analytics.hpp"
#include "gradepipe/digest.hpp"
#include "gradepipe/report.hpp"
#include "gradepipe/results.hpp"

namespace gradepipe {

enum class ReviewState { Open, Resolved };

inline std::string to_string(ReviewState s) { return s == ReviewState::Open ? "Open" : "Resolved"; }

struct ReviewVerdict {
  std::string reviewer_id;
  OcrVerdict ocr_verdict = OcrVerdict::Acceptable;
  GradingVerdict grading_verdict = GradingVerdict::Correct;
  Score reviewer_score;
  std::string note;
  std::string timestamp;
};

struct ReviewItem {
  std::string item_id;
  ResultRecord result;
  std::string transcription;
  std::string final_answer_text;
  std::map<std::string, std::string> rubric_bodies;
  std::vector<std::string> image_refs;
  ReviewState state = ReviewState::Open;
  std::optional<ReviewVerdict> verdict;
};

inline std::string review_item_id(const std::string& test_code, const std::string& question_id) {
  return sha256_hex(test_code + "\n" + question_id).substr(0, 16);
}

/// Per-item material the results file does not carry (transcriptions,
/// rubric text, image paths).
struct ItemContext {
  std::string transcription;
  std::string final_answer_text;
  std::map<std::string, std::string> rubric_bodies;
  std::vector<std::string> image_refs;
};

using ContextProvider = std::function<ItemContext(const ResultRecord&)>;

/// Which results enter the queue. Empty kinds means "any flag".
struct FlagFilter {
  std::set<FlagKind> kinds;

  bool matches(const GradeOutcome& o) const {
    if (o.flags.empty()) return false;
    if (kinds.empty()) return true;
    return std::any_of(o.flags.begin(), o.flags.end(), [&](const Flag& f) { return kinds.count(f.kind); });
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json verdict_to_json(const ReviewVerdict& v) {
  return json{{"reviewer_id", v.reviewer_id},
              {"ocr_verdict", to_string(v.ocr_verdict)},
              {"grading_verdict", to_string(v.grading_verdict)},
              {"reviewer_score", score_to_json(v.reviewer_score)},
              {"note", v.note},
              {"timestamp", v.timestamp}};
}

/// Throws ValidationError on missing or malformed fields.
inline ReviewVerdict verdict_from_json(const json& j) {
  try {
    ReviewVerdict v;
    v.reviewer_id = j.at("reviewer_id").get<std::string>();
    v.ocr_verdict = ocr_verdict_from_string(j.at("ocr_verdict").get<std::string>());
    v.grading_verdict = grading_verdict_from_string(j.at("grading_verdict").get<std::string>());
    v.reviewer_score = score_from_json(j.at("reviewer_score"));
    v.note = j.value("note", "");
    v.timestamp = j.value("timestamp", "");
    if (trim(v.reviewer_id).empty()) throw ValidationError("reviewer_id is empty");
    return v;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("verdict: ") + e.what());
  } catch (const ParseError& e) {
    throw ValidationError(std::string("verdict: ") + e.what());
  }
}

inline json item_to_json(const ReviewItem& item) {
  json j{{"item_id", item.item_id},
         {"result", result_to_json(item.result)},
         {"transcription", item.transcription},
         {"final_answer_text", item.final_answer_text},
         {"rubric_bodies", item.rubric_bodies},
         {"image_refs", item.image_refs},
         {"state", to_string(item.state)}};
  j["verdict"] = item.verdict ? verdict_to_json(*item.verdict) : json(nullptr);
  return j;
}

inline json item_summary_json(const ReviewItem& item) {
  json flags = json::array();
  for (const auto& f : item.result.outcome.flags) flags.push_back(flag_to_json(f));
  return json{{"item_id", item.item_id},
              {"test_code", item.result.test_code},
              {"quiz_id", item.result.quiz_id},
              {"question_id", item.result.question_id},
              {"selected_score", score_to_json(item.result.outcome.selected_score)},
              {"max_points", score_to_json(item.result.max_points)},
              {"flags", flags},
              {"state", to_string(item.state)}};
}

/// Event-sourced review queue.
///
/// Every mutation is appended to a JSON Lines log before it becomes visible,
/// and constructing a store over an existing log replays it. Writers are
/// serialized; readers take a shared lock and see a consistent snapshot.
class ReviewStore {
 public:
  explicit ReviewStore(std::filesystem::path log_path) : log_path_(std::move(log_path)) {
    if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
    bool needs_newline = false;
    if (std::filesystem::exists(log_path_)) {
      const std::string text = read_file(log_path_);
      const std::size_t keep = replay(text);
      if (keep < text.size()) std::filesystem::resize_file(log_path_, keep);
      needs_newline = keep > 0 && text[keep - 1] != '\n';
    }
    log_.open(log_path_, std::ios::app | std::ios::binary);
    if (!log_) throw IoError("cannot open review log " + log_path_.string());
    if (needs_newline) log_ << '\n' << std::flush;
  }

  /// Adds an Open item; returns false (and logs nothing) if the id exists.
  bool enqueue(ReviewItem item) {
    std::unique_lock lock(mu_);
    if (index_.count(item.item_id)) return false;
    item.state = ReviewState::Open;
    item.verdict.reset();
    json ev{{"event", "enqueue"}, {"item", item_to_json(item)}};
    append(ev);
    index_[item.item_id] = items_.size();
    items_.push_back(std::move(item));
    return true;
  }

  std::size_t enqueue_flagged(const std::vector<ResultRecord>& results, const FlagFilter& filter = {},
                              const ContextProvider& context = {}) {
    std::size_t added = 0;
    for (const auto& r : results) {
      if (!filter.matches(r.outcome)) continue;
      ReviewItem item;
      item.item_id = review_item_id(r.test_code, r.question_id);
      item.result = r;
      if (context) {
        ItemContext c = context(r);
        item.transcription = std::move(c.transcription);
        item.final_answer_text = std::move(c.final_answer_text);
        item.rubric_bodies = std::move(c.rubric_bodies);
        item.image_refs = std::move(c.image_refs);
      }
      if (enqueue(std::move(item))) ++added;
    }
    return added;
  }

  /// First verdict wins; later ones get Conflict.
  ReviewItem resolve(const std::string& item_id, ReviewVerdict verdict) {
    std::unique_lock lock(mu_);
    auto it = index_.find(item_id);
    if (it == index_.end()) throw NotFound("no review item " + item_id);
    ReviewItem& item = items_[it->second];
    if (item.state == ReviewState::Resolved) throw Conflict("item " + item_id + " is already resolved");
    if (verdict.reviewer_score > item.result.max_points) {
      throw ValidationError("reviewer_score " + render_decimal(verdict.reviewer_score) + " exceeds max " +
                            render_decimal(item.result.max_points));
    }
    if (verdict.timestamp.empty()) verdict.timestamp = utc_timestamp();
    append(json{{"event", "verdict"}, {"item_id", item_id}, {"verdict", verdict_to_json(verdict)}});
    item.verdict = std::move(verdict);
    item.state = ReviewState::Resolved;
    resolution_order_.push_back(it->second);
    return item;
  }

  ReviewItem get(const std::string& item_id) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(item_id);
    if (it == index_.end()) throw NotFound("no review item " + item_id);
    return items_[it->second];
  }

  std::vector<ReviewItem> list(std::optional<ReviewState> state = std::nullopt) const {
    std::shared_lock lock(mu_);
    std::vector<ReviewItem> out;
    for (const auto& i : items_) {
      if (!state || i.state == *state) out.push_back(i);
    }
    return out;
  }

  /// Resolved items as analytics verdict records, in resolution order.
  std::vector<VerdictRecord> verdict_records() const {
    std::shared_lock lock(mu_);
    std::vector<VerdictRecord> out;
    for (auto idx : resolution_order_) {
      const auto& i = items_[idx];
      out.push_back({i.result.test_code, i.result.question_id, i.verdict->ocr_verdict, i.verdict->grading_verdict,
                     i.verdict->reviewer_score});
    }
    return out;
  }

  VerdictDistribution stats() const {
    const auto v = verdict_records();
    return count_verdicts(v);
  }

  /// Canonical dump of the full queue state, for replay equality checks.
  json snapshot() const {
    std::shared_lock lock(mu_);
    json items = json::array();
    for (const auto& i : items_) items.push_back(item_to_json(i));
    json order = json::array();
    for (auto idx : resolution_order_) order.push_back(items_[idx].item_id);
    return json{{"items", items}, {"resolution_order", order}};
  }

  const std::filesystem::path& log_path() const { return log_path_; }

 private:
  static ReviewItem item_from_json(const json& j) {
    ReviewItem item;
    item.item_id = j.at("item_id").get<std::string>();
    item.result = result_from_json(j.at("result"));
    item.transcription = j.value("transcription", "");
    item.final_answer_text = j.value("final_answer_text", "");
    item.rubric_bodies = j.value("rubric_bodies", std::map<std::string, std::string>{});
    item.image_refs = j.value("image_refs", std::vector<std::string>{});
    return item;
  }

  /// Applies the log and returns the byte length to keep: everything, or
  /// everything before a torn final line.
  std::size_t replay(const std::string& text) {
    std::size_t line_no = 0, start = 0;
    while (start < text.size()) {
      const std::size_t nl = text.find('\n', start);
      const bool last = nl == std::string::npos;
      const std::string line = text.substr(start, last ? std::string::npos : nl - start);
      ++line_no;
      if (!trim(line).empty()) {
        json ev = json::parse(line, nullptr, false);
        // A torn final line (crash mid-append) is dropped; anything else is corruption.
        if (ev.is_discarded()) {
          if (last) return start;
          throw ParseError("review log line " + std::to_string(line_no) + " is not valid JSON");
        }
        apply(ev, line_no);
      }
      start = last ? text.size() : nl + 1;
    }
    return text.size();
  }

  void apply(const json& ev, std::size_t line_no) {
    const auto kind = ev.value("event", "");
    if (kind == "enqueue") {
      ReviewItem item = item_from_json(ev.at("item"));
      if (index_.count(item.item_id)) return;
      index_[item.item_id] = items_.size();
      items_.push_back(std::move(item));
    } else if (kind == "verdict") {
      auto it = index_.find(ev.at("item_id").get<std::string>());
      if (it == index_.end()) throw ParseError("review log verdict for unknown item");
      ReviewItem& item = items_[it->second];
      if (item.state == ReviewState::Resolved) return;
      item.verdict = verdict_from_json(ev.at("verdict"));
      item.state = ReviewState::Resolved;
      resolution_order_.push_back(it->second);
    } else {
      throw ParseError("review log line " + std::to_string(line_no) + " has unknown event '" + kind + "'");
    }
  }

  void append(const json& ev) {
    log_ << ev.dump() << '\n';
    log_.flush();
    if (!log_) throw IoError("failed to append to review log " + log_path_.string());
  }

  std::filesystem::path log_path_;
  std::ofstream log_;
  mutable std::shared_mutex mu_;
  std::vector<ReviewItem> items_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::size_t> resolution_order_;
};

}  // namespace gradepipe
