#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "geotracknet/cellmap/cellmap.hpp"

namespace geotracknet::contrario {

struct DetectorConfig {
  double p = 0.1;        // per-message abnormality quantile
  double epsilon = 0.0;  // NFA threshold; must be set by the caller
  int score_samples = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("detector: p must be in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("detector: epsilon must be positive");
  }
};

// Exact binomial tail B(n,k,p) = sum_{i=k..n} C(n,i) p^i (1-p)^(n-i),
// computed in log space via log-gamma and log-sum-exp.
inline double binomial_tail(int n, int k, double p) {
  if (n < 0 || k < 0 || k > n || !(p > 0.0 && p < 1.0))
    throw DomainError("binomial_tail: need 0 <= k <= n and 0 < p < 1");
  if (k == 0) return 1.0;  // full sum
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n - k + 1));
  for (int i = k; i <= n; ++i) {
    const double lt = lg_n1 - std::lgamma(static_cast<double>(i) + 1.0) -
                      std::lgamma(static_cast<double>(n - i) + 1.0) +
                      static_cast<double>(i) * log_p + static_cast<double>(n - i) * log_q;
    terms.push_back(lt);
    max_term = std::max(max_term, lt);
  }
  double acc = 0.0;
  for (double lt : terms) acc += std::exp(lt - max_term);
  const double tail = std::exp(max_term + std::log(acc));
  return std::min(tail, 1.0);
}

// Number of contiguous segments of a length-T track: T(T+1)/2.
inline std::uint64_t n_segments(std::uint64_t T) {
  if (T < 1) throw DomainError("n_segments: T must be >= 1");
  return T * (T + 1) / 2;
}

// B(n,k,p) memoized over all n <= max length; one fill per detector, shared
// by every track, which keeps the O(T^2) segment scan cheap.
class BinomialTailTable {
 public:
  explicit BinomialTailTable(double p) : p_(p) {}

  void ensure(std::size_t n_max) {
    if (rows_.size() > n_max) return;
    rows_.reserve(n_max + 1);
    if (rows_.empty()) rows_.push_back({1.0});  // n = 0: B(0,0,p) = 1
    for (std::size_t n = rows_.size(); n <= n_max; ++n) {
      std::vector<double> row(n + 1);
      for (std::size_t k = 0; k <= n; ++k)
        row[k] = binomial_tail(static_cast<int>(n), static_cast<int>(k), p_);
      rows_.push_back(std::move(row));
    }
  }

  double tail(std::size_t n, std::size_t k) const { return rows_[n][k]; }
  double p() const { return p_; }
  std::size_t max_n() const { return rows_.empty() ? 0 : rows_.size() - 1; }

 private:
  double p_;
  std::vector<std::vector<double>> rows_;
};

// The most meaningful (lowest-NFA) contiguous segment of one track.
struct SegmentFinding {
  std::size_t start = 0;
  std::size_t length = 0;  // n
  std::size_t abnormal = 0;  // k
  double nfa = 0.0;
};

// Scans all T(T+1)/2 segments via prefix sums. Ties on the NFA value break
// toward the earlier start, then the longer segment.
inline SegmentFinding min_nfa_segment(const std::vector<std::uint8_t>& flags,
                                      BinomialTailTable& table) {
  const std::size_t T = flags.size();
  if (T == 0) throw DomainError("min_nfa_segment: empty track");
  table.ensure(T);
  const double segments = static_cast<double>(n_segments(T));

  std::vector<std::size_t> prefix(T + 1, 0);
  for (std::size_t t = 0; t < T; ++t) prefix[t + 1] = prefix[t] + (flags[t] ? 1 : 0);

  SegmentFinding best;
  best.nfa = std::numeric_limits<double>::infinity();
  for (std::size_t start = 0; start < T; ++start) {
    for (std::size_t len = 1; start + len <= T; ++len) {
      const std::size_t k = prefix[start + len] - prefix[start];
      const double nfa = segments * table.tail(len, k);
      const bool better =
          nfa < best.nfa ||
          (nfa == best.nfa && (start < best.start || (start == best.start && len > best.length)));
      if (better) best = {start, len, k, nfa};
    }
  }
  return best;
}

// Per-message rule: abnormal iff the cell is active and the score sits below
// the cell's p-quantile. Inactive (uncovered) cells never flag.
inline bool flag_message(double score, const cellmap::CellModel& cell, double p) {
  if (!cell.active()) return false;
  return cellmap::cell_cdf(cell, score) < p;
}

struct TrackVerdict {
  std::string track_id;
  std::uint64_t mmsi = 0;
  std::int64_t t0 = 0;
  std::size_t length = 0;  // T
  std::vector<double> scores;
  std::vector<std::uint8_t> flags;
  std::size_t uncovered = 0;  // messages in Inactive cells
  SegmentFinding min_nfa;
  bool abnormal = false;
  double p = 0.0;
  double epsilon = 0.0;
};

// Whole-track decision: flag per message, scan all segments, abnormal iff
// the minimum NFA falls below epsilon. Messages in Inactive cells count as
// normal but still extend T.
class Detector {
 public:
  explicit Detector(DetectorConfig cfg) : cfg_(cfg), table_(cfg.p) { cfg_.validate(); }

  const DetectorConfig& config() const { return cfg_; }

  // Pre-sizes the shared binomial table; call before read-only parallel use.
  void reserve(std::size_t max_track_length) { table_.ensure(max_track_length); }

  TrackVerdict detect_track(const std::string& track_id, const std::vector<double>& scores,
                            const std::vector<const cellmap::CellModel*>& cells) {
    if (scores.empty()) throw DomainError("detect: empty track");
    if (scores.size() != cells.size())
      throw ShapeError("detect: scores and cells must have equal length");
    TrackVerdict v;
    v.track_id = track_id;
    v.length = scores.size();
    v.scores = scores;
    v.p = cfg_.p;
    v.epsilon = cfg_.epsilon;
    v.flags.resize(scores.size());
    for (std::size_t t = 0; t < scores.size(); ++t) {
      const cellmap::CellModel* cell = cells[t];
      if (cell == nullptr || !cell->active()) {
        v.flags[t] = 0;
        ++v.uncovered;
        continue;
      }
      v.flags[t] = flag_message(scores[t], *cell, cfg_.p) ? 1 : 0;
    }
    v.min_nfa = min_nfa_segment(v.flags, table_);
    v.abnormal = v.min_nfa.nfa < cfg_.epsilon;
    return v;
  }

 private:
  DetectorConfig cfg_;
  BinomialTailTable table_;
};

// Baseline without the geospatial prior: a track is abnormal when its total
// log-probability falls under the threshold.
inline bool global_threshold_detect(const std::vector<double>& scores, double threshold) {
  if (scores.empty()) throw DomainError("global threshold: empty track");
  double total = 0.0;
  for (double s : scores) total += s;
  return total < threshold;
}

struct SweepRow {
  double epsilon = 0.0;
  std::size_t abnormal_tracks = 0;
};

// Counts flagged tracks per epsilon from cached min-NFA values; no
// re-scoring involved.
inline std::vector<SweepRow> sweep_epsilon(const std::vector<double>& min_nfas,
                                           const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("sweep: empty epsilon grid");
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double eps : grid) {
    SweepRow row;
    row.epsilon = eps;
    for (double nfa : min_nfas)
      if (nfa < eps) ++row.abnormal_tracks;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace geotracknet::contrario
