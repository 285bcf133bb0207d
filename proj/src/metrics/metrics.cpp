#include "sdc/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace sdc::metrics {
namespace {

struct Counts {
  std::int64_t a = 0, a_hat = 0, inter = 0, uni = 0;
};

Counts count(const Mask& a, const Mask& a_hat) {
  require_same_shape(a, a_hat, "metrics");
  Counts c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.pixels[i] != 0, y = a_hat.pixels[i] != 0;
    c.a += x;
    c.a_hat += y;
    c.inter += x && y;
    c.uni += x || y;
  }
  return c;
}

struct ErrorSums {
  double abs_inter = 0, sq_inter = 0, trunc_abs = 0, trunc_sq = 0;
};

ErrorSums error_sums(const ImageF& pred, const ImageF& gt, const Mask& a, const Mask& a_hat, double alpha) {
  require_same_shape(pred, gt, "metrics");
  require_same_shape(pred, a_hat, "metrics");
  require_same_shape(pred, a, "metrics");
  ErrorSums s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!a_hat.pixels[i]) continue;
    const double e = std::abs(double(pred.pixels[i]) - double(gt.pixels[i]));
    const double t = std::min(e, alpha);
    s.trunc_abs += t;
    s.trunc_sq += t * t;
    if (a.pixels[i]) {
      s.abs_inter += e;
      s.sq_inter += e * e;
    }
  }
  return s;
}

void check_alpha(double alpha) {
  if (!(alpha > 0)) throw ConfigError("metrics: alpha must be positive");
}

}  // namespace

double iou(const Mask& a, const Mask& a_hat) {
  const Counts c = count(a, a_hat);
  if (c.uni == 0) throw MetricError("iou: both masks are empty");
  return double(c.inter) / double(c.uni);
}

double ioi(const Mask& a, const Mask& a_hat, IoiDenominator denom) {
  const Counts c = count(a, a_hat);
  const std::int64_t d = denom == IoiDenominator::Predicted ? c.a_hat : c.a;
  if (d == 0) throw MetricError("ioi: denominator mask is empty");
  return double(c.inter) / double(d);
}

double maei(const ImageF& pred, const ImageF& gt, const Mask& a, const Mask& a_hat) {
  const Counts c = count(a, a_hat);
  if (c.inter == 0) throw MetricError("maei: empty intersection");
  return error_sums(pred, gt, a, a_hat, 1.0).abs_inter / double(c.inter);
}

double rmsei(const ImageF& pred, const ImageF& gt, const Mask& a, const Mask& a_hat) {
  const Counts c = count(a, a_hat);
  if (c.inter == 0) throw MetricError("rmsei: empty intersection");
  return std::sqrt(error_sums(pred, gt, a, a_hat, 1.0).sq_inter / double(c.inter));
}

double mate(const ImageF& pred, const ImageF& gt, const Mask& a_hat, double alpha) {
  check_alpha(alpha);
  const Counts c = count(a_hat, a_hat);
  if (c.a_hat == 0) throw MetricError("mate: empty predicted foreground");
  return error_sums(pred, gt, a_hat, a_hat, alpha).trunc_abs / double(c.a_hat);
}

double rmste(const ImageF& pred, const ImageF& gt, const Mask& a_hat, double alpha) {
  check_alpha(alpha);
  const Counts c = count(a_hat, a_hat);
  if (c.a_hat == 0) throw MetricError("rmste: empty predicted foreground");
  return std::sqrt(error_sums(pred, gt, a_hat, a_hat, alpha).trunc_sq / double(c.a_hat));
}

MetricsReport evaluate_masked(const ImageF& pred, const Mask& a_hat, const Mask& a, const ImageF& gt,
                              const EvalOptions& opts, std::string sample_id) {
  check_alpha(opts.alpha);
  const Counts c = count(a, a_hat);
  const ErrorSums s = error_sums(pred, gt, a, a_hat, opts.alpha);
  MetricsReport r;
  r.sample_id = std::move(sample_id);
  r.alpha = opts.alpha;
  r.n_a = c.a;
  r.n_a_hat = c.a_hat;
  r.n_inter = c.inter;
  r.n_union = c.uni;
  r.sum_abs_inter = s.abs_inter;
  r.sum_sq_inter = s.sq_inter;
  r.sum_trunc_abs = s.trunc_abs;
  r.sum_trunc_sq = s.trunc_sq;
  if (c.uni) r.iou = double(c.inter) / double(c.uni);
  const std::int64_t ioi_den = opts.ioi_denominator == IoiDenominator::Predicted ? c.a_hat : c.a;
  if (ioi_den) r.ioi = double(c.inter) / double(ioi_den);
  if (c.inter) {
    r.maei = s.abs_inter / double(c.inter);
    r.rmsei = std::sqrt(s.sq_inter / double(c.inter));
  }
  if (c.a_hat) {
    r.mate = s.trunc_abs / double(c.a_hat);
    r.rmste = std::sqrt(s.trunc_sq / double(c.a_hat));
  }
  return r;
}

MetricsReport evaluate(const ImageF& pred, const ImageF& prob, const Mask& a, const ImageF& gt,
                       const EvalOptions& opts, std::string sample_id) {
  if (!(opts.tau > 0 && opts.tau < 1)) throw ConfigError("evaluate: tau must lie in (0, 1)");
  require_same_shape(pred, prob, "evaluate");
  Mask a_hat(prob.height, prob.width);
  for (std::size_t i = 0; i < prob.size(); ++i) a_hat.pixels[i] = prob.pixels[i] >= opts.tau ? 1 : 0;
  return evaluate_masked(pred, a_hat, a, gt, opts, std::move(sample_id));
}

void MetricsTable::merge(const MetricsTable& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

Summary MetricsTable::summary(Averaging mode) const {
  Summary s;
  if (mode == Averaging::Macro) {
    double rmsei_sum = 0, rmste_sum = 0;
    for (const MetricsReport& r : rows) {
      if (r.iou) s.iou += *r.iou, ++s.n_iou;
      if (r.ioi) s.ioi += *r.ioi, ++s.n_ioi;
      if (r.maei) s.maei += *r.maei, rmsei_sum += *r.rmsei, ++s.n_maei;
      if (r.mate) s.mate += *r.mate, rmste_sum += *r.rmste, ++s.n_mate;
    }
    auto mean = [](double v, int n) { return n ? v / n : std::nan(""); };
    s.iou = mean(s.iou, s.n_iou);
    s.ioi = mean(s.ioi, s.n_ioi);
    s.maei = mean(s.maei, s.n_maei);
    s.rmsei = mean(rmsei_sum, s.n_maei);
    s.mate = mean(s.mate, s.n_mate);
    s.rmste = mean(rmste_sum, s.n_mate);
    return s;
  }
  std::int64_t inter = 0, uni = 0, a = 0, a_hat = 0;
  double abs_i = 0, sq_i = 0, abs_t = 0, sq_t = 0;
  for (const MetricsReport& r : rows) {
    inter += r.n_inter, uni += r.n_union, a += r.n_a, a_hat += r.n_a_hat;
    abs_i += r.sum_abs_inter, sq_i += r.sum_sq_inter, abs_t += r.sum_trunc_abs, sq_t += r.sum_trunc_sq;
  }
  const std::int64_t ioi_den = ioi_denominator == IoiDenominator::Predicted ? a_hat : a;
  auto ratio = [](double v, std::int64_t n) { return n ? v / double(n) : std::nan(""); };
  s.iou = ratio(double(inter), uni);
  s.ioi = ratio(double(inter), ioi_den);
  s.maei = ratio(abs_i, inter);
  s.rmsei = std::sqrt(ratio(sq_i, inter));
  s.mate = ratio(abs_t, a_hat);
  s.rmste = std::sqrt(ratio(sq_t, a_hat));
  s.n_iou = s.n_ioi = s.n_maei = s.n_mate = static_cast<int>(rows.size());
  return s;
}

namespace {

std::string fmt(const std::optional<double>& v, const char* spec = "%.6f") {
  if (!v) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, *v);
  return buf;
}

}  // namespace

void write_text_table(std::ostream& os, const MetricsTable& t, Averaging mode) {
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %9s %9s %9s %9s %7s %7s %7s\n", "sample", "IOU", "IOI", "MAEI",
                "RMSEI", "MATE", "RMSTE", "N_A", "N_Ahat", "N_int");
  os << line;
  for (const MetricsReport& r : t.rows) {
    std::snprintf(line, sizeof line, "%-24s %8s %8s %9s %9s %9s %9s %7lld %7lld %7lld\n", r.sample_id.c_str(),
                  fmt(r.iou, "%.4f").c_str(), fmt(r.ioi, "%.4f").c_str(), fmt(r.maei, "%.4f").c_str(),
                  fmt(r.rmsei, "%.4f").c_str(), fmt(r.mate, "%.4f").c_str(), fmt(r.rmste, "%.4f").c_str(),
                  static_cast<long long>(r.n_a), static_cast<long long>(r.n_a_hat),
                  static_cast<long long>(r.n_inter));
    os << line;
  }
  const Summary s = t.summary(mode);
  std::snprintf(line, sizeof line, "%-24s %8.4f %8.4f %9.4f %9.4f %9.4f %9.4f\n",
                mode == Averaging::Macro ? "mean (macro)" : "mean (micro)", s.iou, s.ioi, s.maei, s.rmsei, s.mate,
                s.rmste);
  os << line;
}

void write_csv(std::ostream& os, const MetricsTable& t) {
  os << "sample_id,iou,ioi,maei,rmsei,mate,rmste,N_A,N_Ahat,N_inter\n";
  for (const MetricsReport& r : t.rows)
    os << r.sample_id << ',' << fmt(r.iou, "%.9g") << ',' << fmt(r.ioi, "%.9g") << ',' << fmt(r.maei, "%.9g")
       << ',' << fmt(r.rmsei, "%.9g") << ',' << fmt(r.mate, "%.9g") << ',' << fmt(r.rmste, "%.9g") << ','
       << r.n_a << ',' << r.n_a_hat << ',' << r.n_inter << '\n';
}

}  // namespace sdc::metrics
