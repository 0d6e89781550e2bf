#pragma once

// Straightforward reference implementations used to cross-check the
// library's single-pass integer arithmetic. They work in long double with
// two passes and share no code with the library.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gradepipe/analytics.hpp"

namespace oracle {

using gradepipe::Score;

struct Summary {
  long double mean = 0, std = 0, mae = 0, within_pct = 0;
};

inline Summary summarize(const std::vector<std::int64_t>& gaps_tenths, std::int64_t within_tenths = 10) {
  Summary s;
  const long double n = static_cast<long double>(gaps_tenths.size());
  for (auto g : gaps_tenths) s.mean += static_cast<long double>(g) / 10.0L;
  s.mean /= n;
  long double var = 0;
  std::int64_t within = 0;
  for (auto g : gaps_tenths) {
    const long double d = static_cast<long double>(g) / 10.0L - s.mean;
    var += d * d;
    s.mae += std::fabs(static_cast<long double>(g) / 10.0L);
    if (g >= -within_tenths && g <= within_tenths) ++within;
  }
  s.std = std::sqrt(var / n);
  s.mae /= n;
  s.within_pct = 100.0L * static_cast<long double>(within) / n;
  return s;
}

inline long double sigma(const std::vector<Score>& runs) {
  long double m = 0;
  for (const auto& r : runs) m += r.points();
  m /= static_cast<long double>(runs.size());
  long double v = 0;
  for (const auto& r : runs) v += (r.points() - m) * (r.points() - m);
  return std::sqrt(v / static_cast<long double>(runs.size()));
}

struct Stability {
  long double mean_sigma = 0, prob_zero = 0;
};

inline Stability stability(const std::map<std::string, std::vector<Score>>& runs) {
  Stability s;
  std::int64_t zero = 0;
  for (const auto& [q, r] : runs) {
    bool constant = true;
    for (const auto& x : r) constant = constant && x.tenths() == r.front().tenths();
    if (constant) ++zero;
    s.mean_sigma += sigma(r);
  }
  s.mean_sigma /= static_cast<long double>(runs.size());
  s.prob_zero = static_cast<long double>(zero) / static_cast<long double>(runs.size());
  return s;
}

struct Cross {
  long double mean = 0, mean_abs = 0, prob_zero = 0;
};

inline Cross cross_model(const std::map<std::string, std::vector<Score>>& a,
                         const std::map<std::string, std::vector<Score>>& b) {
  Cross c;
  std::int64_t zero = 0;
  for (const auto& [q, ra] : a) {
    const auto& rb = b.at(q);
    std::int64_t sa = 0, sb = 0;
    for (const auto& x : ra) sa += x.tenths();
    for (const auto& x : rb) sb += x.tenths();
    // Equal means compared as cross-multiplied integers.
    if (sa * static_cast<std::int64_t>(rb.size()) == sb * static_cast<std::int64_t>(ra.size())) ++zero;
    const long double d = static_cast<long double>(sa) / (10.0L * ra.size()) - static_cast<long double>(sb) / (10.0L * rb.size());
    c.mean += d;
    c.mean_abs += std::fabs(d);
  }
  const long double n = static_cast<long double>(a.size());
  c.mean /= n;
  c.mean_abs /= n;
  c.prob_zero = static_cast<long double>(zero) / n;
  return c;
}

/// Percentage in hundredths, half-up, via quotient and remainder.
inline std::int64_t pct_hundredths(std::int64_t count, std::int64_t n) {
  const std::int64_t q = count * 10000 / n, r = count * 10000 % n;
  return 2 * r >= n ? q + 1 : q;
}

/// Histogram by scanning candidate centers: v lands in c when c - w/2 <= v < c + w/2.
inline std::vector<gradepipe::HistogramBin> histogram(const std::vector<std::int64_t>& values, std::int64_t w) {
  if (values.empty()) return {};
  std::int64_t lo = values.front(), hi = values.front();
  for (auto v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<gradepipe::HistogramBin> out;
  std::int64_t first = 0, last = -1;
  const std::int64_t start = (lo / w - 2) * w, stop = (hi / w + 2) * w;
  for (std::int64_t c = start; c <= stop; c += w) {
    std::int64_t count = 0;
    for (auto v : values) {
      if (2 * c - w <= 2 * v && 2 * v < 2 * c + w) ++count;
    }
    out.push_back({c, count});
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].count > 0) {
      if (last < first) first = static_cast<std::int64_t>(i);
      last = static_cast<std::int64_t>(i);
    }
  }
  return {out.begin() + first, out.begin() + last + 1};
}

}  // namespace oracle
