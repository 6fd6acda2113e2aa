#ifndef XRFPID_KERNELS_HPP
#define XRFPID_KERNELS_HPP

#include <cstdint>

namespace xrfpid::kernels {

// Serial is the reference path; the OpenMP path distributes independent
// output rows and is bit-identical to it because every output element is
// accumulated by a single thread in the same order.
enum class Exec { Serial, OpenMP };

// Worker count for OpenMP regions; 1 selects the serial reference.
void set_jobs(int jobs);
int jobs();
Exec current_exec();

// 1-D convolution, stride 1, 'same' zero padding (odd kernel).
// in [n][cin][len], weights [cout][cin][k], bias [cout], out [n][cout][len].
// Accumulation is double regardless of T.
template <typename T>
void conv1d_forward(const T* in, const T* weights, const T* bias, T* out,
                    int n, int cin, int cout, int len, int k, Exec exec);

// Gradient w.r.t. the convolution input.
template <typename T>
void conv1d_backward_data(const T* dout, const T* weights, T* din, int n,
                          int cin, int cout, int len, int k, Exec exec);

// Gradients w.r.t. weights and bias.
template <typename T>
void conv1d_backward_params(const T* dout, const T* in, T* dweights, T* dbias,
                            int n, int cin, int cout, int len, int k,
                            Exec exec);

// LeakyReLU forward/backward over a flat buffer; `pre` is the forward input.
template <typename T>
void leaky_relu_forward(const T* in, T* out, std::int64_t count, T slope,
                        Exec exec);
template <typename T>
void leaky_relu_backward(const T* pre, const T* dout, T* din,
                         std::int64_t count, T slope, Exec exec);

// Batch norm over [n][c][len] with per-channel statistics across (n, len).
// Train: computes batch mean/var (population), writes xhat and out, updates
// running stats with `momentum`. Inference: affine using running stats.
template <typename T>
void batchnorm_forward_train(const T* in, T* out, T* xhat, const T* gamma,
                             const T* beta, T* running_mean, T* running_var,
                             T* batch_invstd, int n, int c, int len, T eps,
                             T momentum, Exec exec);
template <typename T>
void batchnorm_forward_inference(const T* in, T* out, const T* gamma,
                                 const T* beta, const T* running_mean,
                                 const T* running_var, int n, int c, int len,
                                 T eps, Exec exec);
template <typename T>
void batchnorm_backward(const T* dout, const T* xhat, const T* gamma,
                        const T* batch_invstd, T* din, T* dgamma, T* dbeta,
                        int n, int c, int len, Exec exec);

// Max pooling, window 2 stride 2, floor output length; argmax (0/1 within
// the window, ties to the left) recorded for the backward pass.
template <typename T>
void maxpool2_forward(const T* in, T* out, std::uint8_t* argmax, int n, int c,
                      int len, Exec exec);
template <typename T>
void maxpool2_backward(const T* dout, const std::uint8_t* argmax, T* din,
                       int n, int c, int len, Exec exec);

// Fully connected layer: in [n][dim], weights [classes][dim].
template <typename T>
void dense_forward(const T* in, const T* weights, const T* bias, T* out,
                   int n, int dim, int classes, Exec exec);
template <typename T>
void dense_backward_data(const T* dout, const T* weights, T* din, int n,
                         int dim, int classes, Exec exec);
template <typename T>
void dense_backward_params(const T* dout, const T* in, T* dweights, T* dbias,
                           int n, int dim, int classes, Exec exec);

// Inverted dropout driven by a stateless per-index hash of `seed`, so masks
// are identical for any worker count.
template <typename T>
void dropout_forward(const T* in, T* out, std::int64_t count, double rate,
                     std::uint64_t seed, Exec exec);
template <typename T>
void dropout_backward(const T* dout, T* din, std::int64_t count, double rate,
                      std::uint64_t seed, Exec exec);

bool dropout_keep(std::uint64_t seed, std::int64_t index, double rate);

}  // namespace xrfpid::kernels

#endif
