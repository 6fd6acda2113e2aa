#include "xrfpid/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xrfpid/errors.hpp"
#include "xrfpid/rng.hpp"

namespace xrfpid {

template <typename T>
AdamState<T> AdamState<T>::make(const Network<T>& net,
                                const AdamConfig& config) {
    AdamState<T> state;
    state.config = config;
    for (const auto& p : net.params()) {
        state.m.emplace_back(p.value.v.size(), T(0));
        state.v.emplace_back(p.value.v.size(), T(0));
    }
    return state;
}

template <typename T>
void adam_step(Network<T>& net, AdamState<T>& state) {
    auto& params = net.params();
    if (state.m.size() != params.size())
        throw ValidationError("optimizer state does not match the network");
    ++state.step;
    const double b1 = state.config.beta1;
    const double b2 = state.config.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        if (!p.trainable) continue;
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        for (std::size_t i = 0; i < p.value.v.size(); ++i) {
            const double g = static_cast<double>(p.grad.v[i]);
            if (!std::isfinite(g))
                throw Error("non-finite gradient in parameter \"" +
                            p.value.name + "\" at element " + std::to_string(i));
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
            const double vi =
                b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / correction1;
            const double vhat = vi / correction2;
            p.value.v[i] = static_cast<T>(
                static_cast<double>(p.value.v[i]) -
                state.config.lr * mhat / (std::sqrt(vhat) + state.config.eps));
        }
    }
}

DatasetView full_view(const FeatureDataset& data) {
    DatasetView view;
    view.data = &data;
    view.indices.resize(data.size());
    std::iota(view.indices.begin(), view.indices.end(), 0);
    return view;
}

namespace {

void pack_batch(const FeatureDataset& data,
                const std::vector<std::uint32_t>& indices, std::size_t begin,
                std::size_t end, std::vector<float>* features,
                std::vector<std::uint8_t>* labels) {
    const std::size_t b = end - begin;
    features->resize(b * data.dim);
    labels->resize(b * data.classes);
    for (std::size_t i = 0; i < b; ++i) {
        const std::uint32_t idx = indices[begin + i];
        std::copy_n(data.row(idx), data.dim, features->data() + i * data.dim);
        std::copy_n(data.label_row(idx), data.classes,
                    labels->data() + i * data.classes);
    }
}

struct Snapshot {
    std::vector<std::vector<float>> params;
    std::vector<std::vector<float>> bn_state;
};

Snapshot take_snapshot(const Network<float>& net) {
    Snapshot s;
    for (const auto& p : net.params()) s.params.push_back(p.value.v);
    for (const auto& t : net.bn_state()) s.bn_state.push_back(t.v);
    return s;
}

void restore_snapshot(Network<float>& net, const Snapshot& s) {
    for (std::size_t i = 0; i < s.params.size(); ++i)
        net.params()[i].value.v = s.params[i];
    for (std::size_t i = 0; i < s.bn_state.size(); ++i)
        net.bn_state()[i].v = s.bn_state[i];
}

}  // namespace

double evaluate_loss(const Network<float>& net, const DatasetView& view,
                     int batch_size) {
    if (view.size() == 0) throw ConfigError("cannot evaluate an empty view");
    const FeatureDataset& data = *view.data;
    std::vector<float> features;
    std::vector<std::uint8_t> labels;
    double acc = 0.0;
    for (std::size_t begin = 0; begin < view.size();
         begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end =
            std::min(view.size(), begin + static_cast<std::size_t>(batch_size));
        pack_batch(data, view.indices, begin, end, &features, &labels);
        const int b = static_cast<int>(end - begin);
        auto probs = net.forward(features.data(), b, Mode::Inference);
        acc += Network<float>::loss(probs, labels.data(), b, data.classes) * b;
    }
    return acc / static_cast<double>(view.size());
}

std::vector<float> predict_view(const Network<float>& net,
                                const DatasetView& view, int batch_size) {
    const FeatureDataset& data = *view.data;
    std::vector<float> out;
    out.reserve(view.size() * data.classes);
    std::vector<float> features;
    std::vector<std::uint8_t> labels;
    for (std::size_t begin = 0; begin < view.size();
         begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end =
            std::min(view.size(), begin + static_cast<std::size_t>(batch_size));
        pack_batch(data, view.indices, begin, end, &features, &labels);
        const int b = static_cast<int>(end - begin);
        auto probs = net.forward(features.data(), b, Mode::Inference);
        out.insert(out.end(), probs.begin(), probs.end());
    }
    return out;
}

std::vector<ConfusionCounts> evaluate_confusion(const Network<float>& net,
                                                const DatasetView& view,
                                                double threshold) {
    const FeatureDataset& data = *view.data;
    std::vector<float> probs = predict_view(net, view);
    std::vector<std::uint8_t> truth(view.size() * data.classes);
    for (std::size_t i = 0; i < view.size(); ++i)
        std::copy_n(data.label_row(view.indices[i]), data.classes,
                    truth.data() + i * data.classes);
    std::vector<ConfusionCounts> counts(data.classes);
    accumulate_confusion(probs.data(), truth.data(),
                         static_cast<int>(view.size()), data.classes, threshold,
                         counts);
    return counts;
}

TrainResult train(Network<float>& net, const DatasetView& train_set,
                  const DatasetView& val_set, const TrainConfig& config) {
    if (!train_set.data || train_set.size() == 0)
        throw ConfigError("training set is empty");
    if (!val_set.data || val_set.size() == 0)
        throw ConfigError("validation set is empty");
    if (config.batch_size < 2)
        throw ConfigError("batch size must be at least 2");
    if (config.patience < 1) throw ConfigError("patience must be at least 1");
    if (train_set.data->dim != net.arch().input_length)
        throw DimensionError(
            "feature length " + std::to_string(train_set.data->dim) +
            " does not match network input " +
            std::to_string(net.arch().input_length));

    const FeatureDataset& data = *train_set.data;
    AdamState<float> adam = AdamState<float>::make(net, config.adam());

    TrainResult result;
    Snapshot best = take_snapshot(net);
    int epochs_since_best = 0;
    std::vector<std::uint32_t> order = train_set.indices;
    std::vector<float> features;
    std::vector<std::uint8_t> labels;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        // seeded Fisher-Yates shuffle per epoch
        Rng rng(derive_seed(config.seed, 0x5a5a0000ull + epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_index(i)]);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(
                order.size(), begin + static_cast<std::size_t>(config.batch_size));
            if (end - begin < 2) break;  // batch norm needs two samples
            pack_batch(data, order, begin, end, &features, &labels);
            const int b = static_cast<int>(end - begin);
            const std::uint64_t step_seed = derive_seed(
                derive_seed(config.seed, 0xd0d00000ull + epoch), batch_index);
            ForwardCache<float> cache;
            auto probs =
                net.forward(features.data(), b, Mode::Train, step_seed, &cache);
            epoch_loss +=
                Network<float>::loss(probs, labels.data(), b, data.classes) * b;
            seen += end - begin;
            net.zero_grads();
            net.backward(cache, labels.data());
            adam_step(net, adam);
            ++batch_index;
        }
        if (seen == 0)
            throw ConfigError("training set too small for the batch size");

        EpochStats stats;
        stats.train_loss = epoch_loss / static_cast<double>(seen);
        stats.val_loss = evaluate_loss(net, val_set, config.batch_size);
        result.history.push_back(stats);

        if (result.best_epoch < 0 || stats.val_loss < result.best_val_loss) {
            result.best_epoch = epoch;
            result.best_val_loss = stats.val_loss;
            best = take_snapshot(net);
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= config.patience) break;
        }
    }

    restore_snapshot(net, best);
    return result;
}

FoldPlan make_fold_plan(std::size_t count, int n_folds, std::uint64_t seed) {
    if (count < static_cast<std::size_t>(n_folds) * 2)
        throw ConfigError("too few samples for " + std::to_string(n_folds) +
                          " folds");
    std::vector<std::uint32_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0xf01d0000ull));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_index(i)]);

    FoldPlan plan;
    const std::size_t test_count = count / 5;  // 1:4 test:train split
    plan.test_indices.assign(order.begin(), order.begin() + test_count);
    const std::size_t pool = count - test_count;
    plan.folds.resize(n_folds);
    std::size_t at = test_count;
    for (int f = 0; f < n_folds; ++f) {
        std::size_t size = pool / n_folds +
                           (static_cast<std::size_t>(f) < pool % n_folds ? 1 : 0);
        plan.folds[f].assign(order.begin() + at, order.begin() + at + size);
        at += size;
    }
    return plan;
}

CrossValResult crossvalidate(const FeatureDataset& data, const ArchSpec& arch,
                             const TrainConfig& config) {
    if (data.size() < 10)
        throw ConfigError("cross-validation needs at least 10 samples");
    CrossValResult result;
    result.plan = make_fold_plan(data.size(), 5, config.seed);

    DatasetView test_view{&data, result.plan.test_indices};
    for (int f = 0; f < 5; ++f) {
        DatasetView val_view{&data, result.plan.folds[f]};
        DatasetView train_view{&data, {}};
        for (int g = 0; g < 5; ++g)
            if (g != f)
                train_view.indices.insert(train_view.indices.end(),
                                          result.plan.folds[g].begin(),
                                          result.plan.folds[g].end());

        Network<float> net(arch);
        net.init_weights(derive_seed(config.seed, 0x11110000ull + f));
        TrainResult run = train(net, train_view, val_view, config);

        auto counts = evaluate_confusion(net, test_view);
        std::vector<ClassMetrics> metrics;
        metrics.reserve(counts.size());
        for (const auto& c : counts) metrics.push_back(compute_metrics(c));

        if (result.best_fold < 0 ||
            run.best_val_loss < result.fold_runs[result.best_fold].best_val_loss)
            result.best_fold = f;
        result.fold_runs.push_back(std::move(run));
        result.fold_metrics.push_back(std::move(metrics));
        result.models.push_back(std::move(net));
    }

    result.mean_metrics.assign(data.classes, ClassMetrics{});
    for (const auto& fold : result.fold_metrics)
        for (int j = 0; j < data.classes; ++j) {
            result.mean_metrics[j].accuracy += fold[j].accuracy / 5.0;
            result.mean_metrics[j].sensitivity += fold[j].sensitivity / 5.0;
            result.mean_metrics[j].precision += fold[j].precision / 5.0;
            result.mean_metrics[j].f1 += fold[j].f1 / 5.0;
        }
    return result;
}

void finetune_split(const FeatureDataset& data, double fraction,
                    bool stratified, std::uint64_t seed,
                    std::vector<std::uint32_t>* finetune_indices,
                    std::vector<std::uint32_t>* test_indices) {
    const std::size_t n = data.size();
    const std::size_t want =
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (want == 0 || want >= n)
        throw ConfigError("finetune fraction leaves an empty split");

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0xf17e0000ull));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_index(i)]);

    std::vector<bool> picked(n, false);
    if (!stratified) {
        for (std::size_t i = 0; i < want; ++i) picked[order[i]] = true;
    } else {
        // proportional per-group quotas, largest remainder first
        std::map<int, std::vector<std::uint32_t>> by_group;
        for (std::uint32_t idx : order) by_group[data.groups[idx]].push_back(idx);
        std::vector<std::pair<double, int>> remainders;
        std::size_t assigned = 0;
        std::map<int, std::size_t> quota;
        for (const auto& [g, members] : by_group) {
            const double exact = fraction * static_cast<double>(members.size());
            quota[g] = static_cast<std::size_t>(std::floor(exact));
            quota[g] = std::min(quota[g], members.size());
            assigned += quota[g];
            remainders.emplace_back(exact - std::floor(exact), g);
        }
        std::sort(remainders.begin(), remainders.end(),
                  [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                  });
        for (const auto& [rem, g] : remainders) {
            if (assigned >= want) break;
            if (quota[g] < by_group[g].size()) {
                ++quota[g];
                ++assigned;
            }
        }
        // fall back to any group when rounding left a shortfall
        for (const auto& [g, members] : by_group) {
            while (assigned < want && quota[g] < members.size()) {
                ++quota[g];
                ++assigned;
            }
        }
        for (const auto& [g, members] : by_group)
            for (std::size_t i = 0; i < quota[g]; ++i) picked[members[i]] = true;
    }

    finetune_indices->clear();
    test_indices->clear();
    for (std::uint32_t i = 0; i < n; ++i)
        (picked[i] ? finetune_indices : test_indices)->push_back(i);
}

FinetuneResult finetune(const Network<float>& pretrained,
                        const FeatureDataset& target,
                        const FinetuneConfig& config) {
    if (target.dim != pretrained.arch().input_length)
        throw ShapeError("target features do not match the pretrained network");

    FinetuneResult result{Network<float>(pretrained.arch()), {}, {}, {}, {}};
    result.model = pretrained;

    finetune_split(target, config.finetune_fraction, config.stratified,
                   config.base.seed, &result.finetune_indices,
                   &result.test_indices);

    // hold out part of the finetune split for early stopping
    std::vector<std::uint32_t> ft = result.finetune_indices;
    Rng rng(derive_seed(config.base.seed, 0x5a1d0000ull));
    for (std::size_t i = ft.size(); i > 1; --i)
        std::swap(ft[i - 1], ft[rng.uniform_index(i)]);
    std::size_t holdout =
        static_cast<std::size_t>(config.holdout_fraction * ft.size());
    holdout = std::max<std::size_t>(holdout, 2);
    if (holdout >= ft.size())
        throw ConfigError("finetune split too small for a validation holdout");
    DatasetView val_view{&target,
                         {ft.begin(), ft.begin() + static_cast<long>(holdout)}};
    DatasetView train_view{&target,
                           {ft.begin() + static_cast<long>(holdout), ft.end()}};

    // phase 1: dense head only, frozen feature extractor
    result.model.set_feature_trainable(false);
    TrainConfig phase1 = config.base;
    phase1.max_epochs = config.phase1_epochs;
    result.phase1 = train(result.model, train_view, val_view, phase1);

    // phase 2: everything trainable at the lower rate
    result.model.set_feature_trainable(true);
    TrainConfig phase2 = config.base;
    phase2.lr = config.phase2_lr;
    phase2.max_epochs = config.phase2_epochs;
    phase2.seed = derive_seed(config.base.seed, 0x9a5e0002ull);
    result.phase2 = train(result.model, train_view, val_view, phase2);

    return result;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(Network<float>&, AdamState<float>&);
template void adam_step<double>(Network<double>&, AdamState<double>&);

}  // namespace xrfpid
