#include "xrfpid/metrics.hpp"

#include "xrfpid/errors.hpp"

namespace xrfpid {

ClassMetrics compute_metrics(const ConfusionCounts& c) {
    ClassMetrics m;
    const std::int64_t total = c.total();
    m.accuracy = total > 0 ? static_cast<double>(c.tp + c.tn) /
                                 static_cast<double>(total)
                           : 0.0;
    m.sensitivity = c.tp + c.fn > 0 ? static_cast<double>(c.tp) /
                                          static_cast<double>(c.tp + c.fn)
                                    : 0.0;
    m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) /
                                        static_cast<double>(c.tp + c.fp)
                                  : 0.0;
    m.f1 = m.precision + m.sensitivity > 0.0
               ? 2.0 * m.precision * m.sensitivity /
                     (m.precision + m.sensitivity)
               : 0.0;
    return m;
}

double macro_f1(const std::vector<ClassMetrics>& per_class) {
    if (per_class.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& m : per_class) sum += m.f1;
    return sum / static_cast<double>(per_class.size());
}

LabelVector threshold_prediction(const float* probs, double threshold) {
    LabelVector v;
    for (int j = 0; j < kClassCount; ++j)
        v.bits[j] = static_cast<double>(probs[j]) >= threshold;
    return v;
}

void accumulate_confusion(const float* probs, const std::uint8_t* truth, int n,
                          int classes, double threshold,
                          std::vector<ConfusionCounts>& counts) {
    if (static_cast<int>(counts.size()) != classes)
        counts.assign(classes, ConfusionCounts{});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < classes; ++j) {
            const double p = probs[static_cast<std::size_t>(i) * classes + j];
            if (!(p >= 0.0 && p <= 1.0))
                throw ValidationError("prediction probability outside [0, 1]");
            const bool pred = p >= threshold;
            const bool pos = truth[static_cast<std::size_t>(i) * classes + j] != 0;
            auto& c = counts[j];
            if (pred && pos) ++c.tp;
            else if (pred && !pos) ++c.fp;
            else if (!pred && pos) ++c.fn;
            else ++c.tn;
        }
    }
}

}  // namespace xrfpid
