#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdc/common.hpp"

namespace sdc::metrics {

/// A metric whose defining set is empty.
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class IoiDenominator { Predicted, GroundTruth };

// A is the ground-truth foreground, A_hat the predicted one. Background
// ground-truth depth is 0.
double iou(const Mask& a, const Mask& a_hat);
double ioi(const Mask& a, const Mask& a_hat, IoiDenominator denom = IoiDenominator::Predicted);
double maei(const ImageF& pred, const ImageF& gt, const Mask& a, const Mask& a_hat);
double rmsei(const ImageF& pred, const ImageF& gt, const Mask& a, const Mask& a_hat);
double mate(const ImageF& pred, const ImageF& gt, const Mask& a_hat, double alpha = 10.0);
double rmste(const ImageF& pred, const ImageF& gt, const Mask& a_hat, double alpha = 10.0);

/// Per-image metrics. Undefined metrics are empty; the sums allow
/// micro averages after merging.
struct MetricsReport {
  std::string sample_id;
  std::optional<double> iou, ioi, maei, rmsei, mate, rmste;
  double alpha = 10.0;
  std::int64_t n_a = 0, n_a_hat = 0, n_inter = 0, n_union = 0;
  double sum_abs_inter = 0, sum_sq_inter = 0;  // over A and A_hat
  double sum_trunc_abs = 0, sum_trunc_sq = 0;  // over A_hat
};

struct EvalOptions {
  double alpha = 10.0;
  double tau = 0.5;
  IoiDenominator ioi_denominator = IoiDenominator::Predicted;
};

MetricsReport evaluate(const ImageF& pred_depth, const ImageF& prob_map, const Mask& gt_mask,
                       const ImageF& gt_depth, const EvalOptions& opts = {}, std::string sample_id = "");
/// Same with an already thresholded prediction mask.
MetricsReport evaluate_masked(const ImageF& pred_depth, const Mask& a_hat, const Mask& gt_mask,
                              const ImageF& gt_depth, const EvalOptions& opts = {}, std::string sample_id = "");

enum class Averaging { Macro, Micro };

struct Summary {
  double iou = 0, ioi = 0, maei = 0, rmsei = 0, mate = 0, rmste = 0;
  // Number of images each macro mean was taken over.
  int n_iou = 0, n_ioi = 0, n_maei = 0, n_mate = 0;
};

/// Rows of a test set; merging concatenates in order.
struct MetricsTable {
  std::vector<MetricsReport> rows;
  IoiDenominator ioi_denominator = IoiDenominator::Predicted;

  void merge(const MetricsTable& other);
  Summary summary(Averaging mode = Averaging::Macro) const;
};

void write_text_table(std::ostream& os, const MetricsTable& t, Averaging mode = Averaging::Macro);
/// Columns: sample_id,iou,ioi,maei,rmsei,mate,rmste,N_A,N_Ahat,N_inter.
void write_csv(std::ostream& os, const MetricsTable& t);

}  // namespace sdc::metrics
