#include "hybridscreen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hybridscreen/errors.hpp"
#include "hybridscreen/format.hpp"

namespace hybridscreen {

namespace {

struct Block {
  double score;
  long tp;
  long fp;
};

struct Ranking {
  std::vector<Block> blocks;  // descending score
  long positives = 0;
  long negatives = 0;
};

Ranking rank_blocks(ConstVectorRef scores, ConstVectorRef labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  if (scores.size() == 0) throw DataError("no scored labels");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw DataError("non-finite score");
    if (labels[i] != 0.0 && labels[i] != 1.0) throw DataError("ranking metrics need 0/1 labels");
  }
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores[a] > scores[b]; });

  Ranking r;
  for (auto i : order) {
    const bool pos = labels[i] == 1.0;
    if (r.blocks.empty() || r.blocks.back().score != scores[i]) r.blocks.push_back({scores[i], 0, 0});
    (pos ? r.blocks.back().tp : r.blocks.back().fp) += 1;
    (pos ? r.positives : r.negatives) += 1;
  }
  return r;
}

void require_positive(const Ranking& r) {
  if (r.positives == 0) throw DataError("metric needs at least one positive");
}

void require_both(const Ranking& r) {
  if (r.positives == 0 || r.negatives == 0) throw DataError("AUC-ROC needs both classes present");
}

}  // namespace

double auc_roc(ConstVectorRef scores, ConstVectorRef labels) {
  const auto r = rank_blocks(scores, labels);
  require_both(r);
  double area = 0.0;
  long tp_before = 0;
  for (const auto& b : r.blocks) {
    area += static_cast<double>(b.fp) * (static_cast<double>(tp_before) + 0.5 * static_cast<double>(b.tp));
    tp_before += b.tp;
  }
  return area / (static_cast<double>(r.positives) * static_cast<double>(r.negatives));
}

double auc_pr(ConstVectorRef scores, ConstVectorRef labels) {
  const auto r = rank_blocks(scores, labels);
  require_positive(r);
  double ap = 0.0;
  long tp = 0;
  long fp = 0;
  for (const auto& b : r.blocks) {
    tp += b.tp;
    fp += b.fp;
    if (b.tp == 0) continue;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += static_cast<double>(b.tp) / static_cast<double>(r.positives) * precision;
  }
  return ap;
}

F1Result max_f1(ConstVectorRef scores, ConstVectorRef labels) {
  const auto r = rank_blocks(scores, labels);
  require_positive(r);
  F1Result best{-1.0, 0.0};
  long tp = 0;
  long fp = 0;
  for (const auto& b : r.blocks) {
    tp += b.tp;
    fp += b.fp;
    const long fn = r.positives - tp;
    const double f1 = static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
    if (f1 >= best.f1) best = {f1, b.score};
  }
  return best;
}

double accuracy(ConstVectorRef scores, ConstVectorRef labels, double cut) {
  if (scores.size() != labels.size() || scores.size() == 0) throw DataError("accuracy: bad input lengths");
  long hits = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    hits += ((scores[i] >= cut) == (labels[i] == 1.0)) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double r2(ConstVectorRef predicted, ConstVectorRef actual) {
  if (predicted.size() != actual.size()) throw DataError("r2: length mismatch");
  if (actual.size() < 2) throw DataError("r2: need at least two values");
  const double mean = actual.mean();
  const double ss_tot = (actual.array() - mean).square().sum();
  if (!(ss_tot > 0.0)) throw DataError("r2: actual values are constant");
  const double ss_res = (actual - predicted).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

std::vector<CurvePoint> roc_points(ConstVectorRef scores, ConstVectorRef labels) {
  const auto r = rank_blocks(scores, labels);
  require_both(r);
  std::vector<CurvePoint> points{{0.0, 0.0}};
  long tp = 0;
  long fp = 0;
  for (const auto& b : r.blocks) {
    tp += b.tp;
    fp += b.fp;
    points.push_back({static_cast<double>(fp) / static_cast<double>(r.negatives),
                      static_cast<double>(tp) / static_cast<double>(r.positives)});
  }
  return points;
}

std::vector<CurvePoint> pr_points(ConstVectorRef scores, ConstVectorRef labels) {
  const auto r = rank_blocks(scores, labels);
  require_positive(r);
  std::vector<CurvePoint> points;
  long tp = 0;
  long fp = 0;
  for (const auto& b : r.blocks) {
    tp += b.tp;
    fp += b.fp;
    points.push_back({static_cast<double>(tp) / static_cast<double>(r.positives),
                      static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return points;
}

double trapezoid_area(const std::vector<CurvePoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].x - points[i - 1].x) * (points[i].y + points[i - 1].y) * 0.5;
  }
  return area;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
  out << "x,y\n";
  for (const auto& p : points) out << format_double(p.x) << ',' << format_double(p.y) << '\n';
}

}  // namespace hybridscreen
