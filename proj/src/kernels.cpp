#include "xrfpid/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "xrfpid/rng.hpp"

namespace xrfpid::kernels {

namespace {

int g_jobs = 0;  // 0 = library default (all cores)

int effective_jobs() {
    if (g_jobs == 1) return 1;
    return g_jobs > 0 ? g_jobs : omp_get_max_threads();
}

}  // namespace

void set_jobs(int jobs_count) { g_jobs = jobs_count < 0 ? 0 : jobs_count; }

int jobs() { return effective_jobs(); }

Exec current_exec() {
    return effective_jobs() == 1 ? Exec::Serial : Exec::OpenMP;
}

template <typename T>
void conv1d_forward(const T* in, const T* weights, const T* bias, T* out,
                    int n, int cin, int cout, int len, int k, Exec exec) {
    const int pad = k / 2;
    const std::int64_t rows = static_cast<std::int64_t>(n) * cout;
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();

#pragma omp parallel num_threads(threads) if (exec == Exec::OpenMP)
    {
        std::vector<double> acc(len);
#pragma omp for schedule(static)
        for (std::int64_t row = 0; row < rows; ++row) {
            const int ni = static_cast<int>(row / cout);
            const int co = static_cast<int>(row % cout);
            std::fill(acc.begin(), acc.end(), static_cast<double>(bias[co]));
            const T* in_n = in + static_cast<std::int64_t>(ni) * cin * len;
            const T* w_co = weights + static_cast<std::int64_t>(co) * cin * k;
            for (int ci = 0; ci < cin; ++ci) {
                const T* src = in_n + static_cast<std::int64_t>(ci) * len;
                for (int kk = 0; kk < k; ++kk) {
                    const double w = static_cast<double>(w_co[ci * k + kk]);
                    const int shift = kk - pad;
                    const int x0 = std::max(0, -shift);
                    const int x1 = std::min(len, len - shift);
                    for (int x = x0; x < x1; ++x)
                        acc[x] += w * static_cast<double>(src[x + shift]);
                }
            }
            T* dst = out + row * len;
            for (int x = 0; x < len; ++x) dst[x] = static_cast<T>(acc[x]);
        }
    }
}

template <typename T>
void conv1d_backward_data(const T* dout, const T* weights, T* din, int n,
                          int cin, int cout, int len, int k, Exec exec) {
    const int pad = k / 2;
    const std::int64_t rows = static_cast<std::int64_t>(n) * cin;
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();

#pragma omp parallel num_threads(threads) if (exec == Exec::OpenMP)
    {
        std::vector<double> acc(len);
#pragma omp for schedule(static)
        for (std::int64_t row = 0; row < rows; ++row) {
            const int ni = static_cast<int>(row / cin);
            const int ci = static_cast<int>(row % cin);
            std::fill(acc.begin(), acc.end(), 0.0);
            const T* dout_n = dout + static_cast<std::int64_t>(ni) * cout * len;
            for (int co = 0; co < cout; ++co) {
                const T* dsrc = dout_n + static_cast<std::int64_t>(co) * len;
                const T* w = weights +
                             (static_cast<std::int64_t>(co) * cin + ci) * k;
                for (int kk = 0; kk < k; ++kk) {
                    // out[x] consumed in[x + kk - pad]; invert the shift
                    const double wv = static_cast<double>(w[kk]);
                    const int shift = pad - kk;
                    const int y0 = std::max(0, -shift);
                    const int y1 = std::min(len, len - shift);
                    for (int y = y0; y < y1; ++y)
                        acc[y] += wv * static_cast<double>(dsrc[y + shift]);
                }
            }
            T* dst = din + row * len;
            for (int y = 0; y < len; ++y) dst[y] = static_cast<T>(acc[y]);
        }
    }
}

template <typename T>
void conv1d_backward_params(const T* dout, const T* in, T* dweights, T* dbias,
                            int n, int cin, int cout, int len, int k,
                            Exec exec) {
    const int pad = k / 2;
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();

#pragma omp parallel num_threads(threads) if (exec == Exec::OpenMP)
    {
        std::vector<double> acc(static_cast<std::size_t>(cin) * k);
#pragma omp for schedule(static)
        for (int co = 0; co < cout; ++co) {
            std::fill(acc.begin(), acc.end(), 0.0);
            double bias_acc = 0.0;
            for (int ni = 0; ni < n; ++ni) {
                const T* dsrc = dout +
                                (static_cast<std::int64_t>(ni) * cout + co) * len;
                const T* in_n = in + static_cast<std::int64_t>(ni) * cin * len;
                for (int x = 0; x < len; ++x)
                    bias_acc += static_cast<double>(dsrc[x]);
                for (int ci = 0; ci < cin; ++ci) {
                    const T* src = in_n + static_cast<std::int64_t>(ci) * len;
                    for (int kk = 0; kk < k; ++kk) {
                        const int shift = kk - pad;
                        const int x0 = std::max(0, -shift);
                        const int x1 = std::min(len, len - shift);
                        double s = 0.0;
                        for (int x = x0; x < x1; ++x)
                            s += static_cast<double>(dsrc[x]) *
                                 static_cast<double>(src[x + shift]);
                        acc[static_cast<std::size_t>(ci) * k + kk] += s;
                    }
                }
            }
            T* dw = dweights + static_cast<std::int64_t>(co) * cin * k;
            for (std::size_t i = 0; i < acc.size(); ++i)
                dw[i] = static_cast<T>(acc[i]);
            dbias[co] = static_cast<T>(bias_acc);
        }
    }
}

template <typename T>
void leaky_relu_forward(const T* in, T* out, std::int64_t count, T slope,
                        Exec exec) {
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (std::int64_t i = 0; i < count; ++i)
        out[i] = in[i] > T(0) ? in[i] : slope * in[i];
}

template <typename T>
void leaky_relu_backward(const T* pre, const T* dout, T* din,
                         std::int64_t count, T slope, Exec exec) {
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (std::int64_t i = 0; i < count; ++i)
        din[i] = pre[i] > T(0) ? dout[i] : slope * dout[i];
}

template <typename T>
void batchnorm_forward_train(const T* in, T* out, T* xhat, const T* gamma,
                             const T* beta, T* running_mean, T* running_var,
                             T* batch_invstd, int n, int c, int len, T eps,
                             T momentum, Exec exec) {
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
    const double m = static_cast<double>(n) * len;

#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (int ci = 0; ci < c; ++ci) {
        double sum = 0.0;
        for (int ni = 0; ni < n; ++ni) {
            const T* src = in + (static_cast<std::int64_t>(ni) * c + ci) * len;
            for (int x = 0; x < len; ++x) sum += static_cast<double>(src[x]);
        }
        const double mean = sum / m;
        double var_sum = 0.0;
        for (int ni = 0; ni < n; ++ni) {
            const T* src = in + (static_cast<std::int64_t>(ni) * c + ci) * len;
            for (int x = 0; x < len; ++x) {
                const double d = static_cast<double>(src[x]) - mean;
                var_sum += d * d;
            }
        }
        const double var = var_sum / m;
        const double invstd = 1.0 / std::sqrt(var + static_cast<double>(eps));
        const double g = static_cast<double>(gamma[ci]);
        const double b = static_cast<double>(beta[ci]);
        for (int ni = 0; ni < n; ++ni) {
            const std::int64_t base =
                (static_cast<std::int64_t>(ni) * c + ci) * len;
            for (int x = 0; x < len; ++x) {
                const double xh =
                    (static_cast<double>(in[base + x]) - mean) * invstd;
                xhat[base + x] = static_cast<T>(xh);
                out[base + x] = static_cast<T>(g * xh + b);
            }
        }
        batch_invstd[ci] = static_cast<T>(invstd);
        running_mean[ci] = static_cast<T>(
            static_cast<double>(momentum) * static_cast<double>(running_mean[ci]) +
            (1.0 - static_cast<double>(momentum)) * mean);
        running_var[ci] = static_cast<T>(
            static_cast<double>(momentum) * static_cast<double>(running_var[ci]) +
            (1.0 - static_cast<double>(momentum)) * var);
    }
}

template <typename T>
void batchnorm_forward_inference(const T* in, T* out, const T* gamma,
                                 const T* beta, const T* running_mean,
                                 const T* running_var, int n, int c, int len,
                                 T eps, Exec exec) {
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (int ci = 0; ci < c; ++ci) {
        const double invstd =
            1.0 / std::sqrt(static_cast<double>(running_var[ci]) +
                            static_cast<double>(eps));
        const double mean = static_cast<double>(running_mean[ci]);
        const double g = static_cast<double>(gamma[ci]);
        const double b = static_cast<double>(beta[ci]);
        for (int ni = 0; ni < n; ++ni) {
            const std::int64_t base =
                (static_cast<std::int64_t>(ni) * c + ci) * len;
            for (int x = 0; x < len; ++x)
                out[base + x] = static_cast<T>(
                    g * (static_cast<double>(in[base + x]) - mean) * invstd + b);
        }
    }
}

template <typename T>
void batchnorm_backward(const T* dout, const T* xhat, const T* gamma,
                        const T* batch_invstd, T* din, T* dgamma, T* dbeta,
                        int n, int c, int len, Exec exec) {
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
    const double m = static_cast<double>(n) * len;

#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (int ci = 0; ci < c; ++ci) {
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (int ni = 0; ni < n; ++ni) {
            const std::int64_t base =
                (static_cast<std::int64_t>(ni) * c + ci) * len;
            for (int x = 0; x < len; ++x) {
                const double dy = static_cast<double>(dout[base + x]);
                sum_dy += dy;
                sum_dy_xhat += dy * static_cast<double>(xhat[base + x]);
            }
        }
        dgamma[ci] = static_cast<T>(sum_dy_xhat);
        dbeta[ci] = static_cast<T>(sum_dy);
        const double scale = static_cast<double>(gamma[ci]) *
                             static_cast<double>(batch_invstd[ci]);
        for (int ni = 0; ni < n; ++ni) {
            const std::int64_t base =
                (static_cast<std::int64_t>(ni) * c + ci) * len;
            for (int x = 0; x < len; ++x) {
                const double dy = static_cast<double>(dout[base + x]);
                const double xh = static_cast<double>(xhat[base + x]);
                din[base + x] = static_cast<T>(
                    scale * (dy - sum_dy / m - xh * sum_dy_xhat / m));
            }
        }
    }
}

template <typename T>
void maxpool2_forward(const T* in, T* out, std::uint8_t* argmax, int n, int c,
                      int len, Exec exec) {
    const int out_len = len / 2;
    const std::int64_t rows = static_cast<std::int64_t>(n) * c;
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (std::int64_t row = 0; row < rows; ++row) {
        const T* src = in + row * len;
        T* dst = out + row * out_len;
        std::uint8_t* arg = argmax + row * out_len;
        for (int i = 0; i < out_len; ++i) {
            const T a = src[2 * i];
            const T b = src[2 * i + 1];
            const std::uint8_t pick = b > a ? 1 : 0;
            arg[i] = pick;
            dst[i] = pick ? b : a;
        }
    }
}

template <typename T>
void maxpool2_backward(const T* dout, const std::uint8_t* argmax, T* din,
                       int n, int c, int len, Exec exec) {
    const int out_len = len / 2;
    const std::int64_t rows = static_cast<std::int64_t>(n) * c;
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (std::int64_t row = 0; row < rows; ++row) {
        const T* dsrc = dout + row * out_len;
        T* dst = din + row * len;
        for (int x = 0; x < len; ++x) dst[x] = T(0);
        const std::uint8_t* arg = argmax + row * out_len;
        for (int i = 0; i < out_len; ++i) dst[2 * i + arg[i]] = dsrc[i];
    }
}

template <typename T>
void dense_forward(const T* in, const T* weights, const T* bias, T* out,
                   int n, int dim, int classes, Exec exec) {
    const std::int64_t rows = static_cast<std::int64_t>(n) * classes;
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (std::int64_t row = 0; row < rows; ++row) {
        const int ni = static_cast<int>(row / classes);
        const int o = static_cast<int>(row % classes);
        const T* src = in + static_cast<std::int64_t>(ni) * dim;
        const T* w = weights + static_cast<std::int64_t>(o) * dim;
        double acc = static_cast<double>(bias[o]);
        for (int i = 0; i < dim; ++i)
            acc += static_cast<double>(w[i]) * static_cast<double>(src[i]);
        out[row] = static_cast<T>(acc);
    }
}

template <typename T>
void dense_backward_data(const T* dout, const T* weights, T* din, int n,
                         int dim, int classes, Exec exec) {
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (int ni = 0; ni < n; ++ni) {
        const T* dsrc = dout + static_cast<std::int64_t>(ni) * classes;
        T* dst = din + static_cast<std::int64_t>(ni) * dim;
        for (int i = 0; i < dim; ++i) {
            double acc = 0.0;
            for (int o = 0; o < classes; ++o)
                acc += static_cast<double>(dsrc[o]) *
                       static_cast<double>(weights[static_cast<std::int64_t>(o) *
                                                       dim +
                                                   i]);
            dst[i] = static_cast<T>(acc);
        }
    }
}

template <typename T>
void dense_backward_params(const T* dout, const T* in, T* dweights, T* dbias,
                           int n, int dim, int classes, Exec exec) {
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (int o = 0; o < classes; ++o) {
        T* dw = dweights + static_cast<std::int64_t>(o) * dim;
        std::vector<double> acc(dim, 0.0);
        double bias_acc = 0.0;
        for (int ni = 0; ni < n; ++ni) {
            const double dy =
                static_cast<double>(dout[static_cast<std::int64_t>(ni) * classes + o]);
            bias_acc += dy;
            const T* src = in + static_cast<std::int64_t>(ni) * dim;
            for (int i = 0; i < dim; ++i)
                acc[i] += dy * static_cast<double>(src[i]);
        }
        for (int i = 0; i < dim; ++i) dw[i] = static_cast<T>(acc[i]);
        dbias[o] = static_cast<T>(bias_acc);
    }
}

bool dropout_keep(std::uint64_t seed, std::int64_t index, double rate) {
    std::uint64_t h = derive_seed(seed, static_cast<std::uint64_t>(index));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u >= rate;
}

template <typename T>
void dropout_forward(const T* in, T* out, std::int64_t count, double rate,
                     std::uint64_t seed, Exec exec) {
    if (rate <= 0.0) {
        std::copy(in, in + count, out);
        return;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (std::int64_t i = 0; i < count; ++i)
        out[i] = dropout_keep(seed, i, rate) ? in[i] * scale : T(0);
}

template <typename T>
void dropout_backward(const T* dout, T* din, std::int64_t count, double rate,
                      std::uint64_t seed, Exec exec) {
    if (rate <= 0.0) {
        std::copy(dout, dout + count, din);
        return;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    const int threads = exec == Exec::Serial ? 1 : effective_jobs();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (exec == Exec::OpenMP)
    for (std::int64_t i = 0; i < count; ++i)
        din[i] = dropout_keep(seed, i, rate) ? dout[i] * scale : T(0);
}

#define XRFPID_INSTANTIATE(T)                                                  \
    template void conv1d_forward<T>(const T*, const T*, const T*, T*, int,    \
                                    int, int, int, int, Exec);                 \
    template void conv1d_backward_data<T>(const T*, const T*, T*, int, int,   \
                                          int, int, int, Exec);               \
    template void conv1d_backward_params<T>(const T*, const T*, T*, T*, int,  \
                                            int, int, int, int, Exec);        \
    template void leaky_relu_forward<T>(const T*, T*, std::int64_t, T, Exec); \
    template void leaky_relu_backward<T>(const T*, const T*, T*,              \
                                         std::int64_t, T, Exec);              \
    template void batchnorm_forward_train<T>(const T*, T*, T*, const T*,      \
                                             const T*, T*, T*, T*, int, int,  \
                                             int, T, T, Exec);                \
    template void batchnorm_forward_inference<T>(const T*, T*, const T*,      \
                                                 const T*, const T*,          \
                                                 const T*, int, int, int, T,  \
                                                 Exec);                       \
    template void batchnorm_backward<T>(const T*, const T*, const T*,         \
                                        const T*, T*, T*, T*, int, int, int,  \
                                        Exec);                                \
    template void maxpool2_forward<T>(const T*, T*, std::uint8_t*, int, int,  \
                                      int, Exec);                             \
    template void maxpool2_backward<T>(const T*, const std::uint8_t*, T*,     \
                                       int, int, int, Exec);                  \
    template void dense_forward<T>(const T*, const T*, const T*, T*, int,     \
                                   int, int, Exec);                           \
    template void dense_backward_data<T>(const T*, const T*, T*, int, int,    \
                                         int, Exec);                          \
    template void dense_backward_params<T>(const T*, const T*, T*, T*, int,   \
                                           int, int, Exec);                   \
    template void dropout_forward<T>(const T*, T*, std::int64_t, double,      \
                                     std::uint64_t, Exec);                    \
    template void dropout_backward<T>(const T*, T*, std::int64_t, double,     \
                                      std::uint64_t, Exec);

XRFPID_INSTANTIATE(float)
XRFPID_INSTANTIATE(double)

#undef XRFPID_INSTANTIATE

}  // namespace xrfpid::kernels
