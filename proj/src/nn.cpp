#include "xrfpid/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "xrfpid/errors.hpp"
#include "xrfpid/rng.hpp"

namespace xrfpid {

namespace {

constexpr double kLossClamp = 1e-12;

template <typename T>
Tensor<T> make_tensor(std::string name, std::vector<int> shape, T fill = T(0)) {
    Tensor<T> t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.v.assign(static_cast<std::size_t>(t.size()), fill);
    return t;
}

}  // namespace

ArchSpec ArchSpec::classifier() { return ArchSpec{}; }

ArchSpec ArchSpec::reduced(int input_length) {
    ArchSpec a;
    a.input_length = input_length;
    a.blocks = {{4, 3}, {4, 3}};
    a.post = {4, 3};
    a.num_classes = 3;
    return a;
}

std::vector<int> ArchSpec::block_output_lengths() const {
    std::vector<int> lens;
    int len = input_length;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        len /= 2;
        lens.push_back(len);
    }
    return lens;
}

int ArchSpec::flatten_dim() const {
    return block_output_lengths().back() * post.channels;
}

template <typename T>
Network<T>::Network(const ArchSpec& arch) : arch_(arch) {
    if (arch_.blocks.empty())
        throw ValidationError("network needs at least one conv block");
    if (arch_.block_output_lengths().back() < 1)
        throw ValidationError("input length too short for the pooling chain");

    int cin = 1;
    for (int i = 0; i < n_blocks(); ++i) {
        const auto& b = arch_.blocks[i];
        const std::string tag = "conv" + std::to_string(i);
        params_.push_back({make_tensor<T>(tag + "_w", {b.channels, cin, b.kernel}),
                           make_tensor<T>(tag + "_w_grad",
                                          {b.channels, cin, b.kernel}),
                           ParamGroup::Feature, true});
        params_.push_back({make_tensor<T>(tag + "_b", {b.channels}),
                           make_tensor<T>(tag + "_b_grad", {b.channels}),
                           ParamGroup::Feature, true});
        const std::string bn = "bn" + std::to_string(i);
        params_.push_back({make_tensor<T>(bn + "_gamma", {b.channels}, T(1)),
                           make_tensor<T>(bn + "_gamma_grad", {b.channels}),
                           ParamGroup::Feature, true});
        params_.push_back({make_tensor<T>(bn + "_beta", {b.channels}),
                           make_tensor<T>(bn + "_beta_grad", {b.channels}),
                           ParamGroup::Feature, true});
        bn_state_.push_back(make_tensor<T>(bn + "_rmean", {b.channels}));
        bn_state_.push_back(make_tensor<T>(bn + "_rvar", {b.channels}, T(1)));
        cin = b.channels;
    }
    params_.push_back(
        {make_tensor<T>("post_w", {arch_.post.channels, cin, arch_.post.kernel}),
         make_tensor<T>("post_w_grad", {arch_.post.channels, cin, arch_.post.kernel}),
         ParamGroup::Feature, true});
    params_.push_back({make_tensor<T>("post_b", {arch_.post.channels}),
                       make_tensor<T>("post_b_grad", {arch_.post.channels}),
                       ParamGroup::Feature, true});
    params_.push_back(
        {make_tensor<T>("post_bn_gamma", {arch_.post.channels}, T(1)),
         make_tensor<T>("post_bn_gamma_grad", {arch_.post.channels}),
         ParamGroup::Feature, true});
    params_.push_back({make_tensor<T>("post_bn_beta", {arch_.post.channels}),
                       make_tensor<T>("post_bn_beta_grad", {arch_.post.channels}),
                       ParamGroup::Feature, true});
    bn_state_.push_back(make_tensor<T>("post_bn_rmean", {arch_.post.channels}));
    bn_state_.push_back(
        make_tensor<T>("post_bn_rvar", {arch_.post.channels}, T(1)));

    const int flat = arch_.flatten_dim();
    params_.push_back(
        {make_tensor<T>("dense_w", {arch_.num_classes, flat}),
         make_tensor<T>("dense_w_grad", {arch_.num_classes, flat}),
         ParamGroup::Head, true});
    params_.push_back({make_tensor<T>("dense_b", {arch_.num_classes}),
                       make_tensor<T>("dense_b_grad", {arch_.num_classes}),
                       ParamGroup::Head, true});
}

template <typename T>
Param<T>& Network<T>::param(const std::string& name) {
    for (auto& p : params_)
        if (p.value.name == name) return p;
    throw ValidationError("no parameter named \"" + name + "\"");
}

template <typename T>
const Param<T>& Network<T>::param(const std::string& name) const {
    for (const auto& p : params_)
        if (p.value.name == name) return p;
    throw ValidationError("no parameter named \"" + name + "\"");
}

template <typename T>
void Network<T>::init_weights(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& p : params_) {
        const std::string& name = p.value.name;
        if (name.ends_with("_w")) {
            double limit;
            if (name == "dense_w") {
                const double fan_in = p.value.shape[1];
                const double fan_out = p.value.shape[0];
                limit = std::sqrt(6.0 / (fan_in + fan_out));
            } else {
                const double fan_in = static_cast<double>(p.value.shape[1]) *
                                      p.value.shape[2];
                limit = std::sqrt(6.0 / fan_in);
            }
            for (auto& w : p.value.v)
                w = static_cast<T>(rng.uniform(-limit, limit));
        }
    }
}

template <typename T>
void Network<T>::zero_grads() {
    for (auto& p : params_)
        std::fill(p.grad.v.begin(), p.grad.v.end(), T(0));
}

template <typename T>
void Network<T>::set_feature_trainable(bool trainable) {
    for (auto& p : params_)
        if (p.group == ParamGroup::Feature) p.trainable = trainable;
}

template <typename T>
std::vector<T> Network<T>::forward(const T* input, int n, Mode mode,
                                   std::uint64_t step_seed,
                                   ForwardCache<T>* cache) const {
    using namespace kernels;
    if (n < 1) throw ValidationError("batch must hold at least one sample");
    if (mode == Mode::Train && n < 2)
        throw ValidationError(
            "training forward needs batch >= 2 for batch-norm statistics");
    if (mode == Mode::Train && !cache)
        throw ValidationError("training forward needs a cache");
    const Exec exec = current_exec();
    const int nb = n_blocks();

    if (cache) {
        cache->n = n;
        cache->step_seed = step_seed;
        cache->block_in.assign(nb + 1, {});
        cache->conv_out.assign(nb + 1, {});
        cache->bn_xhat.assign(nb + 1, {});
        cache->bn_invstd.assign(nb + 1, {});
        cache->bn_used_batch_stats.assign(nb + 1, false);
        cache->pool_arg.assign(nb, {});
    }

    std::vector<T> x(input, input + static_cast<std::int64_t>(n) *
                                        arch_.input_length);
    int len = arch_.input_length;
    int cin = 1;

    for (int i = 0; i < nb; ++i) {
        const auto& b = arch_.blocks[i];
        const std::int64_t out_count =
            static_cast<std::int64_t>(n) * b.channels * len;
        const Param<T>& w = params_[static_cast<std::size_t>(i) * 4 + 0];
        const Param<T>& bias = params_[static_cast<std::size_t>(i) * 4 + 1];
        const Param<T>& gamma = params_[static_cast<std::size_t>(i) * 4 + 2];
        const Param<T>& beta = params_[static_cast<std::size_t>(i) * 4 + 3];

        if (cache) cache->block_in[i] = x;
        std::vector<T> conv_out(out_count);
        conv1d_forward(x.data(), w.value.v.data(), bias.value.v.data(),
                       conv_out.data(), n, cin, b.channels, len, b.kernel, exec);
        std::vector<T> act(out_count);
        leaky_relu_forward(conv_out.data(), act.data(), out_count,
                           static_cast<T>(arch_.lrelu_slope), exec);

        std::vector<T> bn_out(out_count);
        Tensor<T>& rmean = bn_state_[static_cast<std::size_t>(i) * 2];
        Tensor<T>& rvar = bn_state_[static_cast<std::size_t>(i) * 2 + 1];
        const bool batch_stats = mode == Mode::Train && gamma.trainable;
        if (batch_stats) {
            std::vector<T> xhat(out_count), invstd(b.channels);
            batchnorm_forward_train(
                act.data(), bn_out.data(), xhat.data(), gamma.value.v.data(),
                beta.value.v.data(), rmean.v.data(), rvar.v.data(),
                invstd.data(), n, b.channels, len,
                static_cast<T>(arch_.bn_eps), static_cast<T>(arch_.bn_momentum),
                exec);
            if (cache) {
                cache->bn_xhat[i] = std::move(xhat);
                cache->bn_invstd[i] = std::move(invstd);
                cache->bn_used_batch_stats[i] = true;
            }
        } else {
            batchnorm_forward_inference(
                act.data(), bn_out.data(), gamma.value.v.data(),
                beta.value.v.data(), rmean.v.data(), rvar.v.data(), n,
                b.channels, len, static_cast<T>(arch_.bn_eps), exec);
            if (cache) {
                // frozen batch norm is an affine map; xhat reconstructed from
                // the running stats for the gradient formulas
                std::vector<T> xhat(out_count), invstd(b.channels);
                for (int ci = 0; ci < b.channels; ++ci)
                    invstd[ci] = static_cast<T>(
                        1.0 / std::sqrt(static_cast<double>(rvar.v[ci]) +
                                        arch_.bn_eps));
                for (int ni = 0; ni < n; ++ni)
                    for (int ci = 0; ci < b.channels; ++ci) {
                        const std::int64_t base =
                            (static_cast<std::int64_t>(ni) * b.channels + ci) *
                            len;
                        for (int xj = 0; xj < len; ++xj)
                            xhat[base + xj] = static_cast<T>(
                                (static_cast<double>(act[base + xj]) -
                                 static_cast<double>(rmean.v[ci])) *
                                static_cast<double>(invstd[ci]));
                    }
                cache->bn_xhat[i] = std::move(xhat);
                cache->bn_invstd[i] = std::move(invstd);
                cache->bn_used_batch_stats[i] = false;
            }
        }
        if (cache) cache->conv_out[i] = std::move(conv_out);

        const int out_len = len / 2;
        std::vector<T> pooled(static_cast<std::int64_t>(n) * b.channels *
                              out_len);
        std::vector<std::uint8_t> arg(pooled.size());
        maxpool2_forward(bn_out.data(), pooled.data(), arg.data(), n,
                         b.channels, len, exec);
        if (cache) cache->pool_arg[i] = std::move(arg);
        x = std::move(pooled);
        len = out_len;
        cin = b.channels;
    }

    // trailing conv -> norm -> dropout -> dense -> sigmoid
    const auto& post = arch_.post;
    const std::size_t pi = static_cast<std::size_t>(nb) * 4;
    const Param<T>& post_w = params_[pi + 0];
    const Param<T>& post_b = params_[pi + 1];
    const Param<T>& post_gamma = params_[pi + 2];
    const Param<T>& post_beta = params_[pi + 3];
    const std::int64_t post_count =
        static_cast<std::int64_t>(n) * post.channels * len;

    if (cache) cache->block_in[nb] = x;
    std::vector<T> post_out(post_count);
    conv1d_forward(x.data(), post_w.value.v.data(), post_b.value.v.data(),
                   post_out.data(), n, cin, post.channels, len, post.kernel,
                   exec);

    std::vector<T> post_bn(post_count);
    Tensor<T>& rmean = bn_state_[static_cast<std::size_t>(nb) * 2];
    Tensor<T>& rvar = bn_state_[static_cast<std::size_t>(nb) * 2 + 1];
    const bool batch_stats = mode == Mode::Train && post_gamma.trainable;
    if (batch_stats) {
        std::vector<T> xhat(post_count), invstd(post.channels);
        batchnorm_forward_train(post_out.data(), post_bn.data(), xhat.data(),
                                post_gamma.value.v.data(),
                                post_beta.value.v.data(), rmean.v.data(),
                                rvar.v.data(), invstd.data(), n, post.channels,
                                len, static_cast<T>(arch_.bn_eps),
                                static_cast<T>(arch_.bn_momentum), exec);
        if (cache) {
            cache->bn_xhat[nb] = std::move(xhat);
            cache->bn_invstd[nb] = std::move(invstd);
            cache->bn_used_batch_stats[nb] = true;
        }
    } else {
        batchnorm_forward_inference(post_out.data(), post_bn.data(),
                                    post_gamma.value.v.data(),
                                    post_beta.value.v.data(), rmean.v.data(),
                                    rvar.v.data(), n, post.channels, len,
                                    static_cast<T>(arch_.bn_eps), exec);
        if (cache) {
            std::vector<T> xhat(post_count), invstd(post.channels);
            for (int ci = 0; ci < post.channels; ++ci)
                invstd[ci] = static_cast<T>(
                    1.0 / std::sqrt(static_cast<double>(rvar.v[ci]) +
                                    arch_.bn_eps));
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < post.channels; ++ci) {
                    const std::int64_t base =
                        (static_cast<std::int64_t>(ni) * post.channels + ci) *
                        len;
                    for (int xj = 0; xj < len; ++xj)
                        xhat[base + xj] = static_cast<T>(
                            (static_cast<double>(post_out[base + xj]) -
                             static_cast<double>(rmean.v[ci])) *
                            static_cast<double>(invstd[ci]));
                }
            cache->bn_xhat[nb] = std::move(xhat);
            cache->bn_invstd[nb] = std::move(invstd);
            cache->bn_used_batch_stats[nb] = false;
        }
    }
    if (cache) cache->conv_out[nb] = std::move(post_out);

    std::vector<T> dropped(post_count);
    if (mode == Mode::Train)
        dropout_forward(post_bn.data(), dropped.data(), post_count,
                        arch_.dropout_rate, step_seed, exec);
    else
        dropped = post_bn;

    const int flat = arch_.flatten_dim();
    const Param<T>& dense_w = params_[pi + 4];
    const Param<T>& dense_b = params_[pi + 5];
    std::vector<T> logits(static_cast<std::int64_t>(n) * arch_.num_classes);
    dense_forward(dropped.data(), dense_w.value.v.data(),
                  dense_b.value.v.data(), logits.data(), n, flat,
                  arch_.num_classes, exec);

    std::vector<T> probs(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        probs[i] =
            static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(logits[i]))));

    if (cache) {
        cache->dense_in = std::move(dropped);
        cache->logits = std::move(logits);
        cache->probs = probs;
    }
    return probs;
}

template <typename T>
double Network<T>::loss(const std::vector<T>& probs, const std::uint8_t* labels,
                        int n, int classes) {
    if (n < 1) throw ValidationError("loss needs at least one sample");
    double acc = 0.0;
    for (std::int64_t i = 0;
         i < static_cast<std::int64_t>(n) * classes; ++i) {
        const double p = static_cast<double>(probs[i]);
        if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError("probability outside [0, 1]");
        const double y = labels[i] ? 1.0 : 0.0;
        acc += y * std::log(std::max(p, kLossClamp)) +
               (1.0 - y) * std::log(std::max(1.0 - p, kLossClamp));
    }
    return -acc / n;
}

template <typename T>
void Network<T>::backward(const ForwardCache<T>& cache,
                          const std::uint8_t* labels) {
    using namespace kernels;
    const Exec exec = current_exec();
    const int n = cache.n;
    const int nb = n_blocks();
    const int classes = arch_.num_classes;
    const auto lens = arch_.block_output_lengths();
    const int last_len = lens.back();

    // d loss / d logits through the clamped cross entropy and the sigmoid
    std::vector<T> dlogits(static_cast<std::int64_t>(n) * classes);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n) * classes; ++i) {
        const double p = static_cast<double>(cache.probs[i]);
        const double y = labels[i] ? 1.0 : 0.0;
        const double dp = -(y * (p > kLossClamp ? 1.0 / p : 0.0) -
                            (1.0 - y) *
                                (1.0 - p > kLossClamp ? 1.0 / (1.0 - p) : 0.0)) /
                          n;
        dlogits[i] = static_cast<T>(dp * p * (1.0 - p));
    }

    const std::size_t pi = static_cast<std::size_t>(nb) * 4;
    const int flat = arch_.flatten_dim();
    Param<T>& dense_w = params_[pi + 4];
    Param<T>& dense_b = params_[pi + 5];
    dense_backward_params(dlogits.data(), cache.dense_in.data(),
                          dense_w.grad.v.data(), dense_b.grad.v.data(), n, flat,
                          classes, exec);
    std::vector<T> ddense_in(static_cast<std::int64_t>(n) * flat);
    dense_backward_data(dlogits.data(), dense_w.value.v.data(),
                        ddense_in.data(), n, flat, classes, exec);

    // dropout
    std::vector<T> dpost_bn(ddense_in.size());
    dropout_backward(ddense_in.data(), dpost_bn.data(),
                     static_cast<std::int64_t>(ddense_in.size()),
                     arch_.dropout_rate, cache.step_seed, exec);

    // post batch norm
    Param<T>& post_gamma = params_[pi + 2];
    Param<T>& post_beta = params_[pi + 3];
    std::vector<T> dpost_conv(dpost_bn.size());
    if (cache.bn_used_batch_stats[nb]) {
        batchnorm_backward(dpost_bn.data(), cache.bn_xhat[nb].data(),
                           post_gamma.value.v.data(),
                           cache.bn_invstd[nb].data(), dpost_conv.data(),
                           post_gamma.grad.v.data(), post_beta.grad.v.data(),
                           n, arch_.post.channels, last_len, exec);
    } else {
        // frozen: running stats are constants
        for (int ci = 0; ci < arch_.post.channels; ++ci) {
            double dg = 0.0, db = 0.0;
            const double scale =
                static_cast<double>(post_gamma.value.v[ci]) *
                static_cast<double>(cache.bn_invstd[nb][ci]);
            for (int ni = 0; ni < n; ++ni) {
                const std::int64_t base =
                    (static_cast<std::int64_t>(ni) * arch_.post.channels + ci) *
                    last_len;
                for (int xj = 0; xj < last_len; ++xj) {
                    const double dy =
                        static_cast<double>(dpost_bn[base + xj]);
                    dg += dy * static_cast<double>(cache.bn_xhat[nb][base + xj]);
                    db += dy;
                    dpost_conv[base + xj] = static_cast<T>(scale * dy);
                }
            }
            post_gamma.grad.v[ci] = static_cast<T>(dg);
            post_beta.grad.v[ci] = static_cast<T>(db);
        }
    }

    // post conv
    Param<T>& post_w = params_[pi + 0];
    Param<T>& post_b = params_[pi + 1];
    const int post_cin = arch_.blocks.back().channels;
    conv1d_backward_params(dpost_conv.data(), cache.block_in[nb].data(),
                           post_w.grad.v.data(), post_b.grad.v.data(), n,
                           post_cin, arch_.post.channels, last_len,
                           arch_.post.kernel, exec);
    std::vector<T> dx(static_cast<std::int64_t>(n) * post_cin * last_len);
    conv1d_backward_data(dpost_conv.data(), post_w.value.v.data(), dx.data(),
                         n, post_cin, arch_.post.channels, last_len,
                         arch_.post.kernel, exec);

    for (int i = nb - 1; i >= 0; --i) {
        const auto& b = arch_.blocks[i];
        // conv/bn/act in block i ran at the block's input length
        const int conv_len = i == 0 ? arch_.input_length : lens[i - 1];
        Param<T>& w = params_[static_cast<std::size_t>(i) * 4 + 0];
        Param<T>& bias = params_[static_cast<std::size_t>(i) * 4 + 1];
        Param<T>& gamma = params_[static_cast<std::size_t>(i) * 4 + 2];
        Param<T>& beta = params_[static_cast<std::size_t>(i) * 4 + 3];

        // pool backward: dx currently holds d(pool_out) [n][ch][out_len]
        std::vector<T> dbn(static_cast<std::int64_t>(n) * b.channels *
                           conv_len);
        maxpool2_backward(dx.data(), cache.pool_arg[i].data(), dbn.data(), n,
                          b.channels, conv_len, exec);

        std::vector<T> dact(dbn.size());
        if (cache.bn_used_batch_stats[i]) {
            batchnorm_backward(dbn.data(), cache.bn_xhat[i].data(),
                               gamma.value.v.data(), cache.bn_invstd[i].data(),
                               dact.data(), gamma.grad.v.data(),
                               beta.grad.v.data(), n, b.channels, conv_len,
                               exec);
        } else {
            for (int ci = 0; ci < b.channels; ++ci) {
                double dg = 0.0, db = 0.0;
                const double scale =
                    static_cast<double>(gamma.value.v[ci]) *
                    static_cast<double>(cache.bn_invstd[i][ci]);
                for (int ni = 0; ni < n; ++ni) {
                    const std::int64_t base =
                        (static_cast<std::int64_t>(ni) * b.channels + ci) *
                        conv_len;
                    for (int xj = 0; xj < conv_len; ++xj) {
                        const double dy = static_cast<double>(dbn[base + xj]);
                        dg += dy *
                              static_cast<double>(cache.bn_xhat[i][base + xj]);
                        db += dy;
                        dact[base + xj] = static_cast<T>(scale * dy);
                    }
                }
                gamma.grad.v[ci] = static_cast<T>(dg);
                beta.grad.v[ci] = static_cast<T>(db);
            }
        }

        std::vector<T> dconv(dact.size());
        leaky_relu_backward(cache.conv_out[i].data(), dact.data(), dconv.data(),
                            static_cast<std::int64_t>(dact.size()),
                            static_cast<T>(arch_.lrelu_slope), exec);

        const int cin = i == 0 ? 1 : arch_.blocks[i - 1].channels;
        conv1d_backward_params(dconv.data(), cache.block_in[i].data(),
                               w.grad.v.data(), bias.grad.v.data(), n, cin,
                               b.channels, conv_len, b.kernel, exec);
        if (i > 0) {
            dx.assign(static_cast<std::int64_t>(n) * cin * conv_len, T(0));
            conv1d_backward_data(dconv.data(), w.value.v.data(), dx.data(), n,
                                 cin, b.channels, conv_len, b.kernel, exec);
        }
    }
}

template <typename T>
std::vector<T> Network<T>::predict(const T* input, int n) const {
    return forward(input, n, Mode::Inference);
}

namespace {

constexpr char kModelMagic[4] = {'X', 'N', 'N', '1'};
constexpr std::uint32_t kModelVersion = 1;

template <typename V>
void write_pod(std::ostream& out, const V& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
void read_pod(std::istream& in, V* v, const std::string& what) {
    in.read(reinterpret_cast<char*>(v), sizeof(V));
    if (!in) throw IoError("model file truncated while reading " + what);
}

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t) {
    write_pod(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_pod(out, static_cast<std::uint32_t>(d));
    for (const T& v : t.v) write_pod(out, static_cast<float>(v));
}

template <typename T>
void read_tensor_into(std::istream& in, Tensor<T>& t) {
    std::uint32_t name_len = 0;
    read_pod(in, &name_len, "tensor header");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("model file truncated while reading tensor name");
    if (name != t.name)
        throw ShapeError("model tensor \"" + name + "\" does not match expected \"" +
                         t.name + "\"");
    std::uint32_t ndim = 0;
    read_pod(in, &ndim, "tensor \"" + name + "\"");
    std::vector<int> shape(ndim);
    for (auto& d : shape) {
        std::uint32_t v = 0;
        read_pod(in, &v, "tensor \"" + name + "\"");
        d = static_cast<int>(v);
    }
    if (shape != t.shape)
        throw ShapeError("shape mismatch for tensor \"" + name + "\"");
    for (auto& v : t.v) {
        float f = 0.0f;
        in.read(reinterpret_cast<char*>(&f), sizeof(float));
        if (!in)
            throw IoError("model file truncated inside tensor \"" + name + "\"");
        v = static_cast<T>(f);
    }
}

}  // namespace

template <typename T>
void save_model(const Network<T>& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model \"" + path + "\"");
    out.write(kModelMagic, 4);
    write_pod(out, kModelVersion);
    const ArchSpec& a = net.arch();
    write_pod(out, static_cast<std::uint32_t>(a.input_length));
    write_pod(out, static_cast<std::uint32_t>(a.blocks.size()));
    for (const auto& b : a.blocks) {
        write_pod(out, static_cast<std::uint32_t>(b.channels));
        write_pod(out, static_cast<std::uint32_t>(b.kernel));
    }
    write_pod(out, static_cast<std::uint32_t>(a.post.channels));
    write_pod(out, static_cast<std::uint32_t>(a.post.kernel));
    write_pod(out, a.dropout_rate);
    write_pod(out, static_cast<std::uint32_t>(a.num_classes));
    write_pod(out, a.lrelu_slope);
    write_pod(out, a.bn_eps);
    write_pod(out, a.bn_momentum);
    write_pod(out, static_cast<std::uint32_t>(net.params().size() +
                                              net.bn_state().size()));
    for (const auto& p : net.params()) write_tensor(out, p.value);
    for (const auto& t : net.bn_state()) write_tensor(out, t);
    if (!out) throw IoError("short write to \"" + path + "\"");
}

template <typename T>
Network<T> load_model_as(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model \"" + path + "\"");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0)
        throw IoError("\"" + path + "\" is not a model file (bad magic)");
    std::uint32_t version = 0;
    read_pod(in, &version, "version");
    if (version != kModelVersion)
        throw IoError("unsupported model version " + std::to_string(version));

    ArchSpec a;
    std::uint32_t v32 = 0;
    read_pod(in, &v32, "input length");
    a.input_length = static_cast<int>(v32);
    read_pod(in, &v32, "block count");
    a.blocks.resize(v32);
    for (auto& b : a.blocks) {
        read_pod(in, &v32, "block channels");
        b.channels = static_cast<int>(v32);
        read_pod(in, &v32, "block kernel");
        b.kernel = static_cast<int>(v32);
    }
    read_pod(in, &v32, "post channels");
    a.post.channels = static_cast<int>(v32);
    read_pod(in, &v32, "post kernel");
    a.post.kernel = static_cast<int>(v32);
    read_pod(in, &a.dropout_rate, "dropout rate");
    read_pod(in, &v32, "class count");
    a.num_classes = static_cast<int>(v32);
    read_pod(in, &a.lrelu_slope, "lrelu slope");
    read_pod(in, &a.bn_eps, "bn epsilon");
    read_pod(in, &a.bn_momentum, "bn momentum");

    Network<T> net(a);
    std::uint32_t tensor_count = 0;
    read_pod(in, &tensor_count, "tensor count");
    if (tensor_count != net.params().size() + net.bn_state().size())
        throw ShapeError("model tensor count mismatch");
    for (auto& p : net.params()) read_tensor_into(in, p.value);
    for (auto& t : net.bn_state()) read_tensor_into(in, t);
    return net;
}

Network<float> load_model(const std::string& path) {
    return load_model_as<float>(path);
}

template class Network<float>;
template class Network<double>;
template void save_model<float>(const Network<float>&, const std::string&);
template void save_model<double>(const Network<double>&, const std::string&);
template Network<float> load_model_as<float>(const std::string&);
template Network<double> load_model_as<double>(const std::string&);

}  // namespace xrfpid
