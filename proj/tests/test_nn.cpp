#include <doctest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "xrfpid/errors.hpp"
#include "xrfpid/nn.hpp"
#include "xrfpid/rng.hpp"

using namespace xrfpid;

namespace {

template <typename T>
std::vector<T> random_batch(int n, int dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<T> x(static_cast<std::size_t>(n) * dim);
    for (auto& v : x) v = static_cast<T>(rng.uniform());
    return x;
}

std::vector<std::uint8_t> random_labels(int n, int classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> y(static_cast<std::size_t>(n) * classes);
    for (auto& v : y) v = rng.uniform() < 0.4 ? 1 : 0;
    return y;
}

// Central finite differences against the analytic gradients; returns the
// worst relative error over every parameter element.
double gradient_check(const ArchSpec& arch, std::uint64_t seed, double h) {
    Network<double> net(arch);
    net.init_weights(seed);
    const int n = 4;
    auto x = random_batch<double>(n, arch.input_length, seed + 1);
    auto y = random_labels(n, arch.num_classes, seed + 2);
    const std::uint64_t step_seed = 99;

    auto loss_at = [&]() {
        ForwardCache<double> cache;
        auto probs = net.forward(x.data(), n, Mode::Train, step_seed, &cache);
        return Network<double>::loss(probs, y.data(), n, arch.num_classes);
    };

    ForwardCache<double> cache;
    auto probs = net.forward(x.data(), n, Mode::Train, step_seed, &cache);
    (void)probs;
    net.zero_grads();
    net.backward(cache, y.data());

    double worst = 0.0;
    for (auto& p : net.params()) {
        for (std::size_t i = 0; i < p.value.v.size(); ++i) {
            const double saved = p.value.v[i];
            p.value.v[i] = saved + h;
            const double up = loss_at();
            p.value.v[i] = saved - h;
            const double down = loss_at();
            p.value.v[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double analytic = p.grad.v[i];
            const double denom =
                std::max({std::abs(fd), std::abs(analytic), 1e-6});
            worst = std::max(worst, std::abs(fd - analytic) / denom);
        }
    }
    return worst;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("classifier dimensions follow the pool chain") {
    ArchSpec arch = ArchSpec::classifier();
    CHECK(arch.input_length == 3815);
    CHECK(arch.block_output_lengths() ==
          std::vector<int>{1907, 953, 476, 238, 119});
    CHECK(arch.flatten_dim() == 15232);
    CHECK(arch.num_classes == 11);
}

TEST_CASE("full classifier forward produces valid probabilities") {
    ArchSpec arch = ArchSpec::classifier();
    Network<float> net(arch);
    net.init_weights(2024);
    auto x = random_batch<float>(2, arch.input_length, 5);
    auto probs = net.predict(x.data(), 2);
    REQUIRE(probs.size() == 22);
    for (float p : probs) {
        CHECK(p > 0.0f);
        CHECK(p < 1.0f);
    }
}

TEST_CASE("zero weights give maximum uncertainty") {
    ArchSpec arch = ArchSpec::reduced();
    Network<float> net(arch);  // weights default to zero
    auto x = random_batch<float>(3, arch.input_length, 6);
    auto probs = net.predict(x.data(), 3);
    for (float p : probs) CHECK(p == doctest::Approx(0.5f));
}

TEST_CASE("inference is deterministic") {
    ArchSpec arch = ArchSpec::reduced();
    Network<float> net(arch);
    net.init_weights(7);
    auto x = random_batch<float>(2, arch.input_length, 8);
    auto a = net.predict(x.data(), 2);
    auto b = net.predict(x.data(), 2);
    CHECK(a == b);
}

TEST_CASE("batch of one works in inference mode only") {
    ArchSpec arch = ArchSpec::reduced();
    Network<float> net(arch);
    net.init_weights(9);
    auto x = random_batch<float>(1, arch.input_length, 10);
    CHECK_NOTHROW(net.predict(x.data(), 1));
    ForwardCache<float> cache;
    CHECK_THROWS_AS(net.forward(x.data(), 1, Mode::Train, 0, &cache),
                    ValidationError);
}

TEST_CASE("loss matches the closed form at p = 0.5") {
    // 11 * ln 2 per sample, independent of labels and batch size
    const int classes = 11;
    for (int n : {1, 2, 5}) {
        std::vector<float> probs(static_cast<std::size_t>(n) * classes, 0.5f);
        auto labels = random_labels(n, classes, 77);
        const double loss =
            Network<float>::loss(probs, labels.data(), n, classes);
        CHECK(loss == doctest::Approx(7.6246189861593984).epsilon(1e-12));
    }
}

TEST_CASE("perfect predictions give (near) zero loss") {
    const int classes = 11;
    std::vector<float> probs(classes);
    std::vector<std::uint8_t> labels(classes);
    Rng rng(13);
    for (int j = 0; j < classes; ++j) {
        labels[j] = rng.uniform() < 0.5;
        probs[j] = labels[j] ? 1.0f : 0.0f;
    }
    CHECK(Network<float>::loss(probs, labels.data(), 1, classes) <=
          classes * 1e-11);
}

TEST_CASE("duplicated samples leave the mean loss unchanged") {
    const int classes = 11;
    std::vector<float> one(classes);
    Rng rng(14);
    for (auto& p : one) p = static_cast<float>(rng.uniform(0.05, 0.95));
    auto labels = random_labels(1, classes, 15);
    std::vector<float> two(one);
    two.insert(two.end(), one.begin(), one.end());
    std::vector<std::uint8_t> labels2(labels);
    labels2.insert(labels2.end(), labels.begin(), labels.end());
    CHECK(Network<float>::loss(one, labels.data(), 1, classes) ==
          doctest::Approx(Network<float>::loss(two, labels2.data(), 2, classes))
              .epsilon(1e-12));
}

TEST_CASE("losses reject probabilities outside the unit interval") {
    std::vector<float> probs = {1.5f, 0.5f, 0.5f};
    std::vector<std::uint8_t> labels = {1, 0, 1};
    CHECK_THROWS_AS(Network<float>::loss(probs, labels.data(), 1, 3),
                    ValidationError);
}

TEST_CASE("analytic gradients match finite differences on a tiny net") {
    ArchSpec arch;
    arch.input_length = 16;
    arch.blocks = {{3, 3}};
    arch.post = {3, 3};
    arch.num_classes = 2;
    CHECK(gradient_check(arch, 1234, 1e-3) < 1e-4);
}

TEST_CASE("gradients flow correctly through frozen batch norm") {
    ArchSpec arch;
    arch.input_length = 16;
    arch.blocks = {{3, 3}};
    arch.post = {3, 3};
    arch.num_classes = 2;
    Network<double> net(arch);
    net.init_weights(4321);
    // freeze the feature stack: batch norm switches to running statistics
    net.set_feature_trainable(false);
    const int n = 4;
    auto x = random_batch<double>(n, arch.input_length, 1);
    auto y = random_labels(n, arch.num_classes, 2);
    auto loss_at = [&]() {
        ForwardCache<double> cache;
        auto probs = net.forward(x.data(), n, Mode::Train, 5, &cache);
        return Network<double>::loss(probs, y.data(), n, arch.num_classes);
    };
    ForwardCache<double> cache;
    net.forward(x.data(), n, Mode::Train, 5, &cache);
    net.zero_grads();
    net.backward(cache, y.data());
    // check the head parameters by finite differences
    for (const char* name : {"dense_w", "dense_b"}) {
        auto& p = net.param(name);
        for (std::size_t i = 0; i < p.value.v.size(); i += 7) {
            const double saved = p.value.v[i];
            const double h = 1e-3;
            p.value.v[i] = saved + h;
            const double up = loss_at();
            p.value.v[i] = saved - h;
            const double down = loss_at();
            p.value.v[i] = saved;
            const double fd = (up - down) / (2 * h);
            CHECK(p.grad.v[i] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("a (near) zero-loss batch yields (near) zero gradients") {
    ArchSpec arch = ArchSpec::reduced(32);
    arch.dropout_rate = 0.0;
    Network<double> net(arch);  // zero weights: logits equal the dense bias
    for (auto& b : net.param("dense_b").value.v) b = 20.0;
    const int n = 2;
    auto x = random_batch<double>(n, arch.input_length, 56);
    std::vector<std::uint8_t> labels(
        static_cast<std::size_t>(n) * arch.num_classes, 1);
    ForwardCache<double> cache;
    auto probs = net.forward(x.data(), n, Mode::Train, 3, &cache);
    CHECK(Network<double>::loss(probs, labels.data(), n, arch.num_classes) <
          1e-7);
    net.zero_grads();
    net.backward(cache, labels.data());
    for (const auto& p : net.params())
        for (double g : p.grad.v) CHECK(std::abs(g) < 1e-6);
}

TEST_CASE("model files round trip bit-exactly") {
    test::TempDir tmp("model_roundtrip");
    ArchSpec arch = ArchSpec::reduced();
    Network<float> net(arch);
    net.init_weights(99);
    auto x = random_batch<float>(3, arch.input_length, 100);
    auto before = net.predict(x.data(), 3);
    save_model(net, tmp.file("m.xnn"));
    Network<float> back = load_model(tmp.file("m.xnn"));
    CHECK(back.arch() == arch);
    auto after = back.predict(x.data(), 3);
    CHECK(before == after);
}

TEST_CASE("truncated model files name the offending tensor") {
    test::TempDir tmp("model_truncated");
    Network<float> net(ArchSpec::reduced());
    net.init_weights(1);
    save_model(net, tmp.file("m.xnn"));
    std::ifstream in(tmp.file("m.xnn"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(tmp.file("t.xnn"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_WITH_AS(load_model(tmp.file("t.xnn")),
                         doctest::Contains("truncated"), IoError);
}

TEST_CASE("dropout thins training activations but not inference") {
    ArchSpec arch = ArchSpec::reduced();
    arch.dropout_rate = 0.5;
    Network<float> net(arch);
    net.init_weights(3);
    auto x = random_batch<float>(4, arch.input_length, 4);
    ForwardCache<float> c1, c2;
    net.forward(x.data(), 4, Mode::Train, 1, &c1);
    net.forward(x.data(), 4, Mode::Train, 1, &c2);
    CHECK(c1.dense_in == c2.dense_in);  // same step seed, same mask
    ForwardCache<float> c3;
    net.forward(x.data(), 4, Mode::Train, 2, &c3);
    CHECK(c1.dense_in != c3.dense_in);  // different step seed
    int zeros = 0;
    for (float v : c1.dense_in) zeros += v == 0.0f ? 1 : 0;
    CHECK(zeros > static_cast<int>(c1.dense_in.size()) / 4);
}

}  // TEST_SUITE

TEST_SUITE("kernels") {

TEST_CASE("parallel kernels match the serial reference bit for bit") {
    using namespace xrfpid::kernels;
    Rng rng(42);
    const int n = 3, cin = 5, cout = 4, len = 37, k = 3;
    auto fill = [&rng](std::vector<float>& v) {
        for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    };
    std::vector<float> in(n * cin * len), w(cout * cin * k), b(cout);
    fill(in);
    fill(w);
    fill(b);

    set_jobs(2);
    REQUIRE(current_exec() == Exec::OpenMP);

    std::vector<float> out_ser(n * cout * len), out_par(n * cout * len);
    conv1d_forward(in.data(), w.data(), b.data(), out_ser.data(), n, cin, cout,
                   len, k, Exec::Serial);
    conv1d_forward(in.data(), w.data(), b.data(), out_par.data(), n, cin, cout,
                   len, k, Exec::OpenMP);
    CHECK(out_ser == out_par);

    std::vector<float> dout(n * cout * len);
    fill(dout);
    std::vector<float> din_ser(in.size()), din_par(in.size());
    conv1d_backward_data(dout.data(), w.data(), din_ser.data(), n, cin, cout,
                         len, k, Exec::Serial);
    conv1d_backward_data(dout.data(), w.data(), din_par.data(), n, cin, cout,
                         len, k, Exec::OpenMP);
    CHECK(din_ser == din_par);

    std::vector<float> dw_ser(w.size()), dw_par(w.size()), db_ser(cout),
        db_par(cout);
    conv1d_backward_params(dout.data(), in.data(), dw_ser.data(),
                           db_ser.data(), n, cin, cout, len, k, Exec::Serial);
    conv1d_backward_params(dout.data(), in.data(), dw_par.data(),
                           db_par.data(), n, cin, cout, len, k, Exec::OpenMP);
    CHECK(dw_ser == dw_par);
    CHECK(db_ser == db_par);

    // batch norm
    std::vector<float> gamma(cout), beta(cout), rmean_s(cout), rvar_s(cout, 1),
        rmean_p(cout), rvar_p(cout, 1), invstd_s(cout), invstd_p(cout);
    fill(gamma);
    fill(beta);
    std::vector<float> bn_in(n * cout * len), bn_out_s(bn_in.size()),
        bn_out_p(bn_in.size()), xhat_s(bn_in.size()), xhat_p(bn_in.size());
    fill(bn_in);
    batchnorm_forward_train(bn_in.data(), bn_out_s.data(), xhat_s.data(),
                            gamma.data(), beta.data(), rmean_s.data(),
                            rvar_s.data(), invstd_s.data(), n, cout, len,
                            1e-3f, 0.99f, Exec::Serial);
    batchnorm_forward_train(bn_in.data(), bn_out_p.data(), xhat_p.data(),
                            gamma.data(), beta.data(), rmean_p.data(),
                            rvar_p.data(), invstd_p.data(), n, cout, len,
                            1e-3f, 0.99f, Exec::OpenMP);
    CHECK(bn_out_s == bn_out_p);
    CHECK(xhat_s == xhat_p);
    CHECK(rmean_s == rmean_p);
    CHECK(rvar_s == rvar_p);

    // pooling
    std::vector<float> pool_out_s(n * cout * (len / 2)),
        pool_out_p(n * cout * (len / 2));
    std::vector<std::uint8_t> arg_s(pool_out_s.size()), arg_p(pool_out_s.size());
    maxpool2_forward(bn_in.data(), pool_out_s.data(), arg_s.data(), n, cout,
                     len, Exec::Serial);
    maxpool2_forward(bn_in.data(), pool_out_p.data(), arg_p.data(), n, cout,
                     len, Exec::OpenMP);
    CHECK(pool_out_s == pool_out_p);
    CHECK(arg_s == arg_p);

    // dense
    const int dim = 29, classes = 7;
    std::vector<float> din(n * dim), dw2(classes * dim), db2(classes);
    fill(din);
    fill(dw2);
    fill(db2);
    std::vector<float> y_s(n * classes), y_p(n * classes);
    dense_forward(din.data(), dw2.data(), db2.data(), y_s.data(), n, dim,
                  classes, Exec::Serial);
    dense_forward(din.data(), dw2.data(), db2.data(), y_p.data(), n, dim,
                  classes, Exec::OpenMP);
    CHECK(y_s == y_p);

    // dropout masks are stateless in the element index
    std::vector<float> drop_s(in.size()), drop_p(in.size());
    dropout_forward(in.data(), drop_s.data(),
                    static_cast<std::int64_t>(in.size()), 0.25, 77,
                    Exec::Serial);
    dropout_forward(in.data(), drop_p.data(),
                    static_cast<std::int64_t>(in.size()), 0.25, 77,
                    Exec::OpenMP);
    CHECK(drop_s == drop_p);

    set_jobs(0);
}

TEST_CASE("whole-network forward/backward is thread-count independent") {
    using namespace xrfpid::kernels;
    ArchSpec arch = ArchSpec::reduced();
    Network<float> net(arch);
    net.init_weights(11);
    auto x = random_batch<float>(4, arch.input_length, 12);
    auto y = random_labels(4, arch.num_classes, 13);

    set_jobs(1);
    ForwardCache<float> c1;
    auto p1 = net.forward(x.data(), 4, Mode::Train, 9, &c1);
    net.zero_grads();
    net.backward(c1, y.data());
    std::vector<std::vector<float>> grads1;
    for (const auto& p : net.params()) grads1.push_back(p.grad.v);

    set_jobs(2);
    ForwardCache<float> c2;
    auto p2 = net.forward(x.data(), 4, Mode::Train, 9, &c2);
    net.zero_grads();
    net.backward(c2, y.data());
    set_jobs(0);

    CHECK(p1 == p2);
    std::size_t i = 0;
    for (const auto& p : net.params()) CHECK(grads1[i++] == p.grad.v);
}

}  // TEST_SUITE
