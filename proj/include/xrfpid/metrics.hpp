#ifndef XRFPID_METRICS_HPP
#define XRFPID_METRICS_HPP

#include <cstdint>
#include <vector>

#include "xrfpid/pigments.hpp"

namespace xrfpid {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + tn + fp + fn; }
};

struct ClassMetrics {
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

// accuracy = (TP+TN)/total, sensitivity = TP/(TP+FN), precision = TP/(TP+FP),
// F1 = 2*P*S/(P+S). Undefined ratios are 0 by convention.
ClassMetrics compute_metrics(const ConfusionCounts& counts);

double macro_f1(const std::vector<ClassMetrics>& per_class);

// Probability >= threshold counts as positive.
LabelVector threshold_prediction(const float* probs, double threshold = 0.5);

// Accumulate per-class confusion counts for a batch of predictions
// ([n][classes] probabilities) against ground-truth label bytes.
void accumulate_confusion(const float* probs, const std::uint8_t* truth, int n,
                          int classes, double threshold,
                          std::vector<ConfusionCounts>& counts);

}  // namespace xrfpid

#endif
