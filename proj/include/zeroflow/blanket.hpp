#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "zeroflow/checkpoint.hpp"
#include "zeroflow/datagen.hpp"

namespace zf {

/// Row i holds the gates for the one-hot mask e_i. Requires an amortized
/// encoder (throws ParameterError otherwise).
Tensor gate_matrix(const Checkpoint& ckpt);

/// Values over node pairs i < j, stored row by row:
/// (0,1), (0,2), ..., (0,d-1), (1,2), ...
template <class T>
struct PairMap {
  std::size_t d = 0;
  std::vector<T> values;

  static std::size_t index(std::size_t d, std::size_t i, std::size_t j) {
    return i * d - i * (i + 1) / 2 + (j - i - 1);
  }
  T at(std::size_t i, std::size_t j) const { return values[index(d, i, j)]; }
};

using PairScores = PairMap<double>;
using PairLabels = PairMap<int>;

/// s_ij = max(G_ij, G_ji); the diagonal is ignored.
PairScores symmetrize(const Tensor& g);
/// 1 where |Theta_ij| > eps.
PairLabels ground_truth_edges(const Tensor& theta, double eps = 1e-8);
PairLabels ground_truth_edges(const PrecisionMatrix& theta, double eps = 1e-8);

struct EdgeScores {
  Tensor gates;
  PairScores scores;
  PairLabels labels;
};
EdgeScores edge_scores(const Checkpoint& ckpt, const Tensor& theta, double eps = 1e-8);

struct RocPoint {
  double threshold = 0.0;  // +inf for the (0, 0) start
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Sweeps the distinct scores in descending order; equal scores flip
/// together. AUC is the trapezoid area, computed in integer units so it is
/// the exact rational P(s+ > s-) + P(s+ = s-)/2 rounded once. Throws
/// DataError unless both classes are present.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);
RocCurve roc_auc(const PairScores& scores, const PairLabels& labels);

/// CSV `threshold,fpr,tpr`.
void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Blanket queries

struct ThresholdRule {
  double threshold = 0.1;
};
struct TopKRule {
  std::size_t k = 50;
};
using BlanketRule = std::variant<ThresholdRule, TopKRule>;

struct BlanketResult {
  Tensor gates;                       // [d]
  std::vector<std::size_t> selected;  // off-mask, gate descending, ties by index
  BlanketRule rule;
};

/// Throws ParameterError for non-binary or unmixed masks, ShapeError for a
/// length mismatch.
void validate_query_mask(const Tensor& mask, std::size_t d);
BlanketResult query_blanket(const Checkpoint& ckpt, const Tensor& mask, const BlanketRule& rule);

/// Mask with ones on [start, start + length).
Tensor window_mask(std::size_t d, std::size_t start, std::size_t length);

nlohmann::json rule_to_json(const BlanketRule& rule);
/// Accepts {"threshold": x} or {"topk": k}; throws ParameterError otherwise.
BlanketRule rule_from_json(const nlohmann::json& j);
/// {"gates": [...], "selected": [...], "rule_applied": {...}}.
nlohmann::json to_json(const BlanketResult& result);

// ---------------------------------------------------------------------------
// Market time series

/// One row per entity, one column per day; the header carries the column
/// names. Each column is standardized to mean 0 and (population) variance
/// 1. With `row_labels` the first column holds entity names.
Dataset ingest_market_csv(const std::filesystem::path& path, bool row_labels = false);

struct MarketWindow {
  std::size_t start = 0;
  double past_fraction = 0.0;
  double future_fraction = 0.0;
};

struct MarketReport {
  std::size_t window_len = 5;
  std::size_t topk = 50;
  std::vector<MarketWindow> windows;
};

/// For every window [i, i + window_len): top-k off-window gates, split into
/// days before and after the window. Fractions are over the selected days.
MarketReport market_analysis(const Dataset& data, const Checkpoint& ckpt, std::size_t window_len = 5,
                             std::size_t topk = 50);

/// CSV `window_start,past_fraction,future_fraction`.
void write_market_csv(const MarketReport& report, const std::filesystem::path& path);

}  // namespace zf
