#include "zeroflow/blanket.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "zeroflow/dataset_io.hpp"
#include "zeroflow/errors.hpp"

namespace zf {

Tensor gate_matrix(const Checkpoint& ckpt) {
  if (!std::holds_alternative<AmortizedGateEncoder>(ckpt.model.encoder)) {
    throw ParameterError("gate_matrix: unsupported encoder (fixed gates carry no per-mask structure)");
  }
  return encoder_gates(ckpt.model.encoder, identity(ckpt.d));
}

PairScores symmetrize(const Tensor& g) {
  if (g.rank() != 2 || g.rows() != g.cols()) throw ShapeError("symmetrize: gate matrix must be square");
  const std::size_t d = g.rows();
  PairScores s{d, {}};
  s.values.reserve(d * (d - 1) / 2);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) s.values.push_back(std::max(g(i, j), g(j, i)));
  }
  return s;
}

PairLabels ground_truth_edges(const Tensor& theta, double eps) {
  if (theta.rank() != 2 || theta.rows() != theta.cols()) throw ShapeError("ground_truth_edges: theta must be square");
  if (!(eps >= 0.0)) throw ParameterError("ground_truth_edges: eps must be >= 0");
  const std::size_t d = theta.rows();
  PairLabels y{d, {}};
  y.values.reserve(d * (d - 1) / 2);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) y.values.push_back(std::abs(theta(i, j)) > eps ? 1 : 0);
  }
  return y;
}

PairLabels ground_truth_edges(const PrecisionMatrix& theta, double eps) { return ground_truth_edges(theta.theta, eps); }

EdgeScores edge_scores(const Checkpoint& ckpt, const Tensor& theta, double eps) {
  if (theta.rank() != 2 || theta.rows() != ckpt.d || theta.cols() != ckpt.d) {
    throw ShapeError("edge_scores: theta is " + shape_str(theta.shape()) + " but the checkpoint has d=" +
                     std::to_string(ckpt.d));
  }
  EdgeScores out;
  out.gates = gate_matrix(ckpt);
  out.scores = symmetrize(out.gates);
  out.labels = ground_truth_edges(theta, eps);
  return out;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
  std::uint64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericError("roc_auc: non-finite score at index " + std::to_string(i));
    if (labels[i] != 0 && labels[i] != 1) throw DataError("roc_auc: labels must be 0 or 1");
    (labels[i] ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) throw DataError("roc_auc: rates undefined without both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  // Twice the area, in units of one (positive, negative) pair.
  std::uint64_t area2 = 0;
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double threshold = scores[order[k]];
    std::uint64_t gp = 0, gn = 0;
    for (; k < order.size() && scores[order[k]] == threshold; ++k) (labels[order[k]] ? gp : gn) += 1;
    area2 += gn * (2 * tp + gp);
    tp += gp;
    fp += gn;
    roc.points.push_back({threshold, static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)});
  }
  roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

RocCurve roc_auc(const PairScores& scores, const PairLabels& labels) {
  if (scores.d != labels.d) throw ShapeError("roc_auc: score and label dimensions differ");
  return roc_auc(std::span<const double>(scores.values), std::span<const int>(labels.values));
}

void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path) {
  std::string text = "threshold,fpr,tpr\n";
  for (const RocPoint& p : roc.points) {
    text += format_double(p.threshold) + ',' + format_double(p.fpr) + ',' + format_double(p.tpr) + '\n';
  }
  write_text_file(path, text);
}

// ---------------------------------------------------------------------------

void validate_query_mask(const Tensor& mask, std::size_t d) {
  if (mask.size() != d) {
    throw ShapeError("mask has length " + std::to_string(mask.size()) + ", expected " + std::to_string(d));
  }
  std::size_t ones = 0;
  for (std::size_t j = 0; j < d; ++j) {
    if (mask[j] != 0.0 && mask[j] != 1.0) {
      throw ParameterError("invalid mask: entry " + std::to_string(j) + " is not 0 or 1");
    }
    ones += mask[j] == 1.0;
  }
  if (ones == 0) throw ParameterError("invalid mask: all zeros");
  if (ones == d) throw ParameterError("invalid mask: all ones");
}

BlanketResult query_blanket(const Checkpoint& ckpt, const Tensor& mask, const BlanketRule& rule) {
  const std::size_t d = ckpt.d;
  validate_query_mask(mask, d);
  BlanketResult res;
  res.rule = rule;
  res.gates = encoder_gates(ckpt.model.encoder, mask.reshaped({d}));

  std::vector<std::size_t> off;
  for (std::size_t j = 0; j < d; ++j) {
    if (mask[j] == 0.0) off.push_back(j);
  }
  std::stable_sort(off.begin(), off.end(),
                   [&](std::size_t a, std::size_t b) { return res.gates[a] > res.gates[b]; });
  if (const auto* th = std::get_if<ThresholdRule>(&rule)) {
    for (std::size_t j : off) {
      if (res.gates[j] > th->threshold) res.selected.push_back(j);
    }
  } else {
    const std::size_t k = std::get<TopKRule>(rule).k;
    res.selected.assign(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(std::min(k, off.size())));
  }
  return res;
}

Tensor window_mask(std::size_t d, std::size_t start, std::size_t length) {
  if (length == 0 || start + length > d) {
    throw ParameterError("window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") does not fit in d=" + std::to_string(d));
  }
  Tensor m({d});
  std::fill_n(m.data().begin() + static_cast<std::ptrdiff_t>(start), length, 1.0);
  return m;
}

nlohmann::json rule_to_json(const BlanketRule& rule) {
  if (const auto* th = std::get_if<ThresholdRule>(&rule)) return {{"threshold", th->threshold}};
  return {{"topk", std::get<TopKRule>(rule).k}};
}

BlanketRule rule_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1) throw ParameterError("invalid rule: expected {\"threshold\": x} or {\"topk\": k}");
  if (j.contains("threshold")) {
    const auto& v = j.at("threshold");
    if (!v.is_number() || !std::isfinite(v.get<double>())) throw ParameterError("invalid rule: threshold must be a number");
    return ThresholdRule{v.get<double>()};
  }
  if (j.contains("topk")) {
    const auto& v = j.at("topk");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
      throw ParameterError("invalid rule: topk must be a positive integer");
    }
    return TopKRule{v.get<std::size_t>()};
  }
  throw ParameterError("invalid rule: expected {\"threshold\": x} or {\"topk\": k}");
}

nlohmann::json to_json(const BlanketResult& result) {
  return {{"gates", result.gates.storage()}, {"selected", result.selected}, {"rule_applied", rule_to_json(result.rule)}};
}

// ---------------------------------------------------------------------------

Dataset ingest_market_csv(const std::filesystem::path& path, bool row_labels) {
  CsvTable table = read_numeric_csv(path, row_labels);
  Tensor& x = table.values;
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> means(d), stds(d);
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (std::size_t r = 0; r < n; ++r) mu += x(r, j);
    mu /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (x(r, j) - mu) * (x(r, j) - mu);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) {
      throw DataError(path.string() + ": column " + std::to_string(j) + " ('" + table.header[j] +
                      "') is constant and cannot be standardized");
    }
    for (std::size_t r = 0; r < n; ++r) x(r, j) = (x(r, j) - mu) / sd;
    means[j] = mu;
    stds[j] = sd;
  }
  Dataset out{std::move(x)};
  out.meta = {{"kind", "market"},
              {"source", path.filename().string()},
              {"feature_names", table.header},
              {"standardization", {{"mean", means}, {"std", stds}}}};
  if (row_labels) out.meta["row_labels"] = table.row_labels;
  return out;
}

MarketReport market_analysis(const Dataset& data, const Checkpoint& ckpt, std::size_t window_len, std::size_t topk) {
  const std::size_t d = ckpt.d;
  if (data.d() != d) {
    throw ShapeError("market_analysis: data has " + std::to_string(data.d()) + " columns, checkpoint has d=" +
                     std::to_string(d));
  }
  if (window_len == 0 || window_len >= d) {
    throw ParameterError("market_analysis: window length " + std::to_string(window_len) + " must be in [1, d)");
  }
  if (topk == 0) throw ParameterError("market_analysis: topk must be positive");
  MarketReport rep{window_len, topk, {}};
  for (std::size_t i = 0; i + window_len <= d; ++i) {
    const BlanketResult res = query_blanket(ckpt, window_mask(d, i, window_len), TopKRule{topk});
    std::size_t past = 0;
    for (std::size_t j : res.selected) past += j < i;
    const double total = static_cast<double>(res.selected.size());
    const double past_frac = static_cast<double>(past) / total;
    rep.windows.push_back({i, past_frac, static_cast<double>(res.selected.size() - past) / total});
  }
  return rep;
}

void write_market_csv(const MarketReport& report, const std::filesystem::path& path) {
  std::string text = "window_start,past_fraction,future_fraction\n";
  for (const MarketWindow& w : report.windows) {
    text += std::to_string(w.start) + ',' + format_double(w.past_fraction) + ',' + format_double(w.future_fraction) + '\n';
  }
  write_text_file(path, text);
}

}  // namespace zf
