#pragma once

#include <ostream>
#include <vector>

#include <Eigen/Dense>

namespace hybridscreen {

using ConstVectorRef = const Eigen::Ref<const Eigen::VectorXd>&;

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;
};

// Ranking metrics treat scores that compare equal as a single threshold
// block: AUC gives tied (positive, negative) pairs half credit; AP and F1
// move through the block in one step.

/// Mann-Whitney AUC. Throws DataError unless both classes are present.
double auc_roc(ConstVectorRef scores, ConstVectorRef labels);

/// Step-wise (non-interpolated) average precision.
double auc_pr(ConstVectorRef scores, ConstVectorRef labels);

/// Best F1 over thresholds tau at each distinct score, predicting score >= tau
/// as positive. Reports the smallest tau attaining the maximum.
F1Result max_f1(ConstVectorRef scores, ConstVectorRef labels);

/// Fraction of rows where (score >= cut) matches the label.
double accuracy(ConstVectorRef scores, ConstVectorRef labels, double cut = 0.5);

/// Coefficient of determination 1 - SS_res / SS_tot.
double r2(ConstVectorRef predicted, ConstVectorRef actual);

/// (FPR, TPR) from (0, 0) to (1, 1), one point per threshold block.
std::vector<CurvePoint> roc_points(ConstVectorRef scores, ConstVectorRef labels);

/// (recall, precision) after each threshold block.
std::vector<CurvePoint> pr_points(ConstVectorRef scores, ConstVectorRef labels);

double trapezoid_area(const std::vector<CurvePoint>& points);

/// CSV with an "x,y" header and shortest round-trip decimals.
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points);

}  // namespace hybridscreen
