#pragma once

#include <string>
#include <vector>

#include "dlgdd/image.hpp"

namespace dlgdd {

struct ClassMetrics {
  int cls = 0;
  bool present = false;  // in truth or prediction
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct SegMetrics {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  // Macro averages over classes present in truth or prediction.
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;

  std::string to_json() const;
};

// Per-class one-vs-rest precision/recall/F1 plus pixel accuracy for two
// single-channel masks of the same shape with values in [0, n_classes).
SegMetrics compute_metrics(const Image& predicted, const Image& truth,
                           int n_classes = 4);

}  // namespace dlgdd
