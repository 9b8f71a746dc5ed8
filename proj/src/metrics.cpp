#include "dlgdd/metrics.hpp"

#include "dlgdd/common.hpp"
#include "json.hpp"

namespace dlgdd {

SegMetrics compute_metrics(const Image& predicted, const Image& truth,
                           int n_classes) {
  if (predicted.width != truth.width || predicted.height != truth.height) {
    throw DataError("compute_metrics: mask shapes differ (" +
                    std::to_string(predicted.width) + "x" +
                    std::to_string(predicted.height) + " vs " +
                    std::to_string(truth.width) + "x" +
                    std::to_string(truth.height) + ")");
  }
  if (predicted.channels != 1 || truth.channels != 1) {
    throw DataError("compute_metrics: masks must be single-channel");
  }
  if (n_classes < 1) throw UsageError("compute_metrics: n_classes must be >= 1");

  std::vector<long long> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  long long match = 0;
  std::size_t total = predicted.data.size();
  for (std::size_t i = 0; i < total; ++i) {
    int p = predicted.data[i];
    int t = truth.data[i];
    if (p >= n_classes || t >= n_classes) {
      throw DataError("compute_metrics: mask value out of range [0, " +
                      std::to_string(n_classes) + ")");
    }
    if (p == t) {
      ++match;
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }

  SegMetrics m;
  m.accuracy = total ? static_cast<double>(match) / total : 0.0;
  int counted = 0;
  for (int c = 0; c < n_classes; ++c) {
    ClassMetrics cm;
    cm.cls = c;
    cm.present = tp[c] + fp[c] + fn[c] > 0;
    if (cm.present) {
      long long pred_c = tp[c] + fp[c];
      long long truth_c = tp[c] + fn[c];
      cm.precision = pred_c ? static_cast<double>(tp[c]) / pred_c : 0.0;
      cm.recall = truth_c ? static_cast<double>(tp[c]) / truth_c : 0.0;
      cm.f1 = cm.precision + cm.recall > 0.0
                  ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                  : 0.0;
      m.macro_precision += cm.precision;
      m.macro_recall += cm.recall;
      m.macro_f1 += cm.f1;
      ++counted;
    }
    m.per_class.push_back(cm);
  }
  if (counted) {
    m.macro_precision /= counted;
    m.macro_recall /= counted;
    m.macro_f1 /= counted;
  }
  return m;
}

std::string SegMetrics::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (const ClassMetrics& c : per_class) {
    classes.push_back({{"class", c.cls},
                       {"present", c.present},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1}});
  }
  return nlohmann::json{{"accuracy", accuracy},
                        {"per_class", classes},
                        {"macro_precision", macro_precision},
                        {"macro_recall", macro_recall},
                        {"macro_f1", macro_f1}}
      .dump(2);
}

}  // namespace dlgdd
