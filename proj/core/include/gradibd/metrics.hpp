#pragma once

#include <span>
#include <vector>

namespace gradibd {

/// Mann-Whitney AUROC: share of (positive, negative) pairs ordered correctly,
/// ties counted one half. Throws SingleClass unless both labels occur.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: mean over positives of the precision at their rank in
/// descending score order. Equal scores keep their original relative order.
/// Throws NoPositives.
double average_precision(std::span<const double> scores, std::span<const int> labels);

/// F1 of the positive class for predictions score >= threshold; 0 when
/// precision + recall is 0.
double f1_at_threshold(std::span<const double> scores, std::span<const int> labels, double threshold);

struct MetricSummary {
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Mean with a two-sided Student-t confidence interval (n - 1 degrees of
/// freedom) over per-fold values.
MetricSummary t_interval(std::span<const double> values, double level = 0.95);

}  // namespace gradibd
