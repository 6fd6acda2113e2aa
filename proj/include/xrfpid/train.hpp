#ifndef XRFPID_TRAIN_HPP
#define XRFPID_TRAIN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "xrfpid/corpus.hpp"
#include "xrfpid/metrics.hpp"
#include "xrfpid/nn.hpp"

namespace xrfpid {

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment accumulators parallel to the network's parameters.
template <typename T>
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    static AdamState make(const Network<T>& net, const AdamConfig& config);
};

// One bias-corrected update from the grads currently held by the network.
// Frozen parameters are left bit-unchanged (moments included). Throws on
// non-finite gradients, naming the parameter.
template <typename T>
void adam_step(Network<T>& net, AdamState<T>& state);

struct TrainConfig {
    double lr = 0.001;
    int batch_size = 64;
    int max_epochs = 150;
    int patience = 10;
    std::uint64_t seed = 0;

    AdamConfig adam() const { return AdamConfig{lr, 0.9, 0.999, 1e-8}; }
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;  // 0-based index into history
    double best_val_loss = 0.0;
};

// Index view into a dataset.
struct DatasetView {
    const FeatureDataset* data = nullptr;
    std::vector<std::uint32_t> indices;

    std::size_t size() const { return indices.size(); }
};

DatasetView full_view(const FeatureDataset& data);

// Mini-batch training with per-epoch seeded shuffling and early stopping on
// validation loss; the network is left at the best-validation weights.
TrainResult train(Network<float>& net, const DatasetView& train_set,
                  const DatasetView& val_set, const TrainConfig& config);

// Mean loss over a view in inference mode.
double evaluate_loss(const Network<float>& net, const DatasetView& view,
                     int batch_size = 64);
// Probabilities [n][classes] over a view in inference mode.
std::vector<float> predict_view(const Network<float>& net,
                                const DatasetView& view, int batch_size = 64);
// Per-class confusion counts of thresholded predictions against the view's
// labels.
std::vector<ConfusionCounts> evaluate_confusion(const Network<float>& net,
                                                const DatasetView& view,
                                                double threshold = 0.5);

// Held-out test split (1/5) plus k validation folds partitioning the rest.
struct FoldPlan {
    std::vector<std::uint32_t> test_indices;
    std::vector<std::vector<std::uint32_t>> folds;
};

FoldPlan make_fold_plan(std::size_t count, int n_folds, std::uint64_t seed);

struct CrossValResult {
    FoldPlan plan;
    std::vector<TrainResult> fold_runs;
    std::vector<std::vector<ClassMetrics>> fold_metrics;  // on the test split
    std::vector<ClassMetrics> mean_metrics;               // averaged over folds
    std::vector<Network<float>> models;
    int best_fold = -1;  // by validation loss
};

CrossValResult crossvalidate(const FeatureDataset& data, const ArchSpec& arch,
                             const TrainConfig& config);

struct FinetuneConfig {
    TrainConfig base;           // seed, batch size; lr for the head phase
    double phase2_lr = 0.0005;
    int phase1_epochs = 30;
    int phase2_epochs = 120;
    double finetune_fraction = 0.2;
    bool stratified = true;     // per-group allocation of the finetune split
    double holdout_fraction = 0.15;  // validation share within the finetune set
};

struct FinetuneResult {
    Network<float> model;
    std::vector<std::uint32_t> finetune_indices;
    std::vector<std::uint32_t> test_indices;
    TrainResult phase1;
    TrainResult phase2;
};

// Split target data into finetune/test, train the dense head with frozen
// features, then unfreeze everything and continue at the lower rate.
FinetuneResult finetune(const Network<float>& pretrained,
                        const FeatureDataset& target,
                        const FinetuneConfig& config);

// Deterministic finetune/test index split (exposed for tests).
void finetune_split(const FeatureDataset& data, double fraction,
                    bool stratified, std::uint64_t seed,
                    std::vector<std::uint32_t>* finetune_indices,
                    std::vector<std::uint32_t>* test_indices);

}  // namespace xrfpid

#endif
