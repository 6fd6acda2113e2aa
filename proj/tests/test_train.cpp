#include <doctest.h>

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "xrfpid/errors.hpp"
#include "xrfpid/rng.hpp"
#include "xrfpid/train.hpp"

using namespace xrfpid;

namespace {

// Two-class toy set: class 0 fires on a bump in the first half of the
// window, class 1 on a bump in the second half.
FeatureDataset toy_dataset(int per_class, int dim, std::uint64_t seed) {
    FeatureDataset data;
    data.dim = dim;
    data.classes = 2;
    Rng rng(seed);
    for (int i = 0; i < 2 * per_class; ++i) {
        const int cls = i % 2;
        std::vector<float> row(dim);
        for (auto& v : row) v = static_cast<float>(0.05 * rng.uniform());
        const int center = cls == 0 ? dim / 4 : 3 * dim / 4;
        for (int d = -3; d <= 3; ++d)
            row[center + d] += static_cast<float>(0.8 * std::exp(-d * d / 4.0));
        std::uint8_t label[2] = {cls == 0, cls == 1};
        data.append(row.data(), label, cls);
    }
    return data;
}

ArchSpec toy_arch(int dim) {
    ArchSpec arch;
    arch.input_length = dim;
    arch.blocks = {{4, 3}, {8, 3}};
    arch.post = {8, 3};
    arch.num_classes = 2;
    return arch;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("adam leaves parameters unchanged for zero gradients") {
    Network<float> net(ArchSpec::reduced());
    net.init_weights(1);
    std::vector<std::vector<float>> before;
    for (const auto& p : net.params()) before.push_back(p.value.v);
    AdamState<float> state = AdamState<float>::make(net, AdamConfig{});
    net.zero_grads();
    adam_step(net, state);
    std::size_t i = 0;
    for (const auto& p : net.params()) CHECK(p.value.v == before[i++]);
}

TEST_CASE("first adam step matches the scalar closed form") {
    // with m = (1-b1)g and v = (1-b2)g^2, bias correction gives
    // delta = -lr * g / (|g| + eps)
    ArchSpec arch;
    arch.input_length = 16;
    arch.blocks = {{2, 3}};
    arch.post = {2, 3};
    arch.num_classes = 2;
    Network<double> net(arch);
    const double g = 0.3;
    const double lr = 0.001;
    auto& dense_b = net.param("dense_b");
    dense_b.grad.v.assign(dense_b.grad.v.size(), g);
    AdamState<double> state =
        AdamState<double>::make(net, AdamConfig{lr, 0.9, 0.999, 1e-8});
    adam_step(net, state);
    const double expected = -lr * g / (std::abs(g) + 1e-8);
    for (double v : dense_b.value.v)
        CHECK(v == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("adam is deterministic across runs") {
    FeatureDataset data = toy_dataset(8, 64, 3);
    DatasetView view = full_view(data);
    TrainConfig config;
    config.batch_size = 8;
    config.max_epochs = 10;
    config.patience = 10;
    config.seed = 99;

    auto run = [&]() {
        Network<float> net(toy_arch(64));
        net.init_weights(5);
        train(net, view, view, config);
        std::vector<float> flat;
        for (const auto& p : net.params())
            flat.insert(flat.end(), p.value.v.begin(), p.value.v.end());
        return flat;
    };
    CHECK(run() == run());
}

TEST_CASE("adam aborts on non-finite gradients naming the parameter") {
    Network<float> net(ArchSpec::reduced());
    net.init_weights(1);
    AdamState<float> state = AdamState<float>::make(net, AdamConfig{});
    net.zero_grads();
    net.param("post_w").grad.v[3] = std::nanf("");
    CHECK_THROWS_WITH_AS(adam_step(net, state), doctest::Contains("post_w"),
                         Error);
}

TEST_CASE("early stopping halts after patience exhausts") {
    // an absurdly high learning rate reliably worsens validation loss
    FeatureDataset data = toy_dataset(8, 64, 4);
    DatasetView view = full_view(data);
    TrainConfig config;
    config.batch_size = 8;
    config.max_epochs = 50;
    config.patience = 3;
    config.lr = 50.0;
    config.seed = 17;
    Network<float> net(toy_arch(64));
    net.init_weights(6);
    TrainResult result = train(net, view, view, config);
    CHECK(result.history.size() <
          static_cast<std::size_t>(config.max_epochs));
    CHECK(result.best_epoch + config.patience + 1 >=
          static_cast<int>(result.history.size()));
}

TEST_CASE("training returns the best-validation weights, not the last") {
    FeatureDataset data = toy_dataset(8, 64, 5);
    DatasetView view = full_view(data);
    TrainConfig config;
    config.batch_size = 8;
    config.max_epochs = 12;
    config.patience = 12;  // never stop early
    config.lr = 0.05;      // noisy enough to regress occasionally
    config.seed = 23;
    Network<float> net(toy_arch(64));
    net.init_weights(7);
    TrainResult result = train(net, view, view, config);
    const double reported = result.best_val_loss;
    const double actual = evaluate_loss(net, view, config.batch_size);
    CHECK(actual == doctest::Approx(reported).epsilon(1e-6));
    double minimum = 1e300;
    for (const auto& epoch : result.history)
        minimum = std::min(minimum, epoch.val_loss);
    CHECK(reported == doctest::Approx(minimum).epsilon(1e-12));
}

TEST_CASE("a separable toy corpus is overfit quickly") {
    FeatureDataset data = toy_dataset(1, 64, 8);  // one sample per class
    DatasetView view = full_view(data);
    TrainConfig config;
    config.batch_size = 2;
    config.max_epochs = 200;
    config.patience = 200;
    config.lr = 0.005;
    config.seed = 31;
    Network<float> net(toy_arch(64));
    net.init_weights(9);
    TrainResult result = train(net, view, view, config);
    double best_train = 1e300;
    for (const auto& e : result.history)
        best_train = std::min(best_train, e.train_loss);
    CHECK(best_train < 0.01);
    CHECK(result.history.size() <= 200);
}

TEST_CASE("empty corpora are rejected") {
    FeatureDataset data = toy_dataset(4, 64, 10);
    DatasetView view = full_view(data);
    DatasetView empty{&data, {}};
    TrainConfig config;
    Network<float> net(toy_arch(64));
    CHECK_THROWS_AS(train(net, empty, view, config), ConfigError);
    CHECK_THROWS_AS(train(net, view, empty, config), ConfigError);
}

TEST_CASE("fold plans partition the pool") {
    FoldPlan plan = make_fold_plan(100, 5, 42);
    CHECK(plan.test_indices.size() == 20);
    std::set<std::uint32_t> seen(plan.test_indices.begin(),
                                 plan.test_indices.end());
    std::size_t pool = 0;
    for (const auto& fold : plan.folds) {
        CHECK(fold.size() == 16);
        pool += fold.size();
        for (std::uint32_t idx : fold) {
            CHECK(seen.insert(idx).second);  // disjoint from test and folds
        }
    }
    CHECK(pool == 80);
    CHECK(seen.size() == 100);

    FoldPlan again = make_fold_plan(100, 5, 42);
    CHECK(again.test_indices == plan.test_indices);
    CHECK(again.folds == plan.folds);
    FoldPlan other = make_fold_plan(100, 5, 43);
    CHECK(other.test_indices != plan.test_indices);
}

TEST_CASE("uneven pools spread the remainder across folds") {
    FoldPlan plan = make_fold_plan(103, 5, 7);
    CHECK(plan.test_indices.size() == 20);  // floor(103 / 5)
    std::vector<std::size_t> sizes;
    for (const auto& fold : plan.folds) sizes.push_back(fold.size());
    std::size_t total = 0;
    for (std::size_t s : sizes) {
        total += s;
        CHECK(s >= 16);
        CHECK(s <= 17);
    }
    CHECK(total == 83);
}

TEST_CASE("cross-validation trains five models and averages test metrics") {
    FeatureDataset data = toy_dataset(30, 64, 11);  // 60 samples
    TrainConfig config;
    config.batch_size = 8;
    config.max_epochs = 25;
    config.patience = 25;
    config.lr = 0.01;
    config.seed = 77;
    CrossValResult cv = crossvalidate(data, toy_arch(64), config);
    CHECK(cv.models.size() == 5);
    CHECK(cv.fold_metrics.size() == 5);
    CHECK(cv.best_fold >= 0);
    CHECK(cv.best_fold < 5);
    REQUIRE(cv.mean_metrics.size() == 2);
    // the toy task is separable; averaged test accuracy should be high
    CHECK(cv.mean_metrics[0].accuracy > 0.9);
    CHECK(cv.mean_metrics[1].accuracy > 0.9);
}

TEST_CASE("finetune split arithmetic matches the documented counts") {
    FeatureDataset data;
    data.dim = 4;
    data.classes = 2;
    Rng rng(1);
    for (int i = 0; i < 6604; ++i) {
        float row[4] = {0, 0, 0, 0};
        std::uint8_t label[2] = {0, 1};
        data.append(row, label, i % 64);
    }
    std::vector<std::uint32_t> ft, test;
    finetune_split(data, 0.2, true, 5, &ft, &test);
    CHECK(ft.size() == 1320);
    CHECK(test.size() == 5284);
    // stratified: every stack type appears in the finetune split
    std::set<int> groups;
    for (std::uint32_t idx : ft) groups.insert(data.groups[idx]);
    CHECK(groups.size() == 64);

    std::vector<std::uint32_t> ft_plain, test_plain;
    finetune_split(data, 0.2, false, 5, &ft_plain, &test_plain);
    CHECK(ft_plain.size() == 1320);
}

TEST_CASE("phase one of finetuning leaves the feature stack bit-identical") {
    FeatureDataset data = toy_dataset(40, 64, 12);
    Network<float> pretrained(toy_arch(64));
    pretrained.init_weights(13);

    FinetuneConfig config;
    config.base.batch_size = 8;
    config.base.seed = 3;
    config.phase1_epochs = 3;
    config.phase2_epochs = 0;  // isolate phase one
    config.holdout_fraction = 0.25;
    FinetuneResult result = finetune(pretrained, data, config);

    for (const auto& p : pretrained.params()) {
        const auto& after = result.model.param(p.value.name);
        if (p.group == ParamGroup::Feature) {
            CHECK(after.value.v == p.value.v);
        } else {
            CHECK(after.value.v != p.value.v);  // the head did move
        }
    }
    // running statistics are frozen along with the feature stack
    for (std::size_t i = 0; i < pretrained.bn_state().size(); ++i)
        CHECK(result.model.bn_state()[i].v == pretrained.bn_state()[i].v);
    CHECK(result.finetune_indices.size() == 16);  // floor(0.2 * 80)
    CHECK(result.test_indices.size() == 64);
}

}  // TEST_SUITE
