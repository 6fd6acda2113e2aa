#ifndef XRFPID_NN_HPP
#define XRFPID_NN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "xrfpid/kernels.hpp"

namespace xrfpid {

struct ConvBlockSpec {
    int channels = 0;
    int kernel = 0;

    bool operator==(const ConvBlockSpec&) const = default;
};

// Conv blocks are conv -> LeakyReLU -> batch norm -> max pool 2; the trailing
// stage is conv -> batch norm -> dropout -> flatten -> dense -> sigmoid.
struct ArchSpec {
    int input_length = 3815;
    std::vector<ConvBlockSpec> blocks = {
        {64, 5}, {64, 3}, {64, 3}, {64, 3}, {128, 3}};
    ConvBlockSpec post{128, 3};
    double dropout_rate = 0.25;
    int num_classes = 11;
    double lrelu_slope = 0.01;
    double bn_eps = 1e-3;
    double bn_momentum = 0.99;

    // The production classifier: 3815 -> pools 1907/953/476/238/119,
    // flatten 15232, 11 sigmoid outputs.
    static ArchSpec classifier();
    // Small net covering every layer type; used by gradient checks.
    static ArchSpec reduced(int input_length = 64);

    std::vector<int> block_output_lengths() const;  // after each pool
    int flatten_dim() const;
    bool operator==(const ArchSpec&) const = default;
};

enum class ParamGroup { Feature, Head };

template <typename T>
struct Tensor {
    std::string name;
    std::vector<int> shape;
    std::vector<T> v;

    std::int64_t size() const {
        std::int64_t s = 1;
        for (int d : shape) s *= d;
        return s;
    }
};

template <typename T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;
    ParamGroup group = ParamGroup::Feature;
    bool trainable = true;
};

enum class Mode { Train, Inference };

template <typename T>
struct ForwardCache {
    int n = 0;
    std::uint64_t step_seed = 0;
    std::vector<std::vector<T>> block_in;    // conv input per block (+post)
    std::vector<std::vector<T>> conv_out;    // pre-activation
    std::vector<std::vector<T>> bn_xhat;
    std::vector<std::vector<T>> bn_invstd;   // per channel
    std::vector<bool> bn_used_batch_stats;
    std::vector<std::vector<std::uint8_t>> pool_arg;
    std::vector<T> dense_in;                 // after dropout, flattened
    std::vector<T> logits;
    std::vector<T> probs;
};

template <typename T>
class Network {
public:
    explicit Network(const ArchSpec& arch);

    const ArchSpec& arch() const { return arch_; }
    std::vector<Param<T>>& params() { return params_; }
    const std::vector<Param<T>>& params() const { return params_; }
    std::vector<Tensor<T>>& bn_state() { return bn_state_; }
    const std::vector<Tensor<T>>& bn_state() const { return bn_state_; }
    Param<T>& param(const std::string& name);
    const Param<T>& param(const std::string& name) const;

    // He/Glorot uniform initialization, deterministic in `seed`.
    void init_weights(std::uint64_t seed);

    // input is [n][input_length]; returns probabilities [n][num_classes].
    // Train mode needs n >= 2 and fills `cache` for backward; dropout is
    // driven by `step_seed`. Frozen batch-norm layers normalize with running
    // stats and leave them untouched.
    std::vector<T> forward(const T* input, int n, Mode mode,
                           std::uint64_t step_seed = 0,
                           ForwardCache<T>* cache = nullptr) const;

    // Mean-over-batch multi-label binary cross entropy.
    static double loss(const std::vector<T>& probs,
                       const std::uint8_t* labels, int n, int classes);

    // Analytic gradients of the loss into every param's grad tensor.
    void backward(const ForwardCache<T>& cache, const std::uint8_t* labels);

    void zero_grads();
    void set_feature_trainable(bool trainable);

    // Convenience: single forward in inference mode.
    std::vector<T> predict(const T* input, int n) const;

private:
    ArchSpec arch_;
    std::vector<Param<T>> params_;
    // rmean/rvar pairs per bn layer; mutable because train-mode forward
    // updates the running statistics in place
    mutable std::vector<Tensor<T>> bn_state_;

    int n_blocks() const { return static_cast<int>(arch_.blocks.size()); }
};

// Weight container I/O; tensors stored as little-endian f32 (docs/formats.md).
template <typename T>
void save_model(const Network<T>& net, const std::string& path);
template <typename T>
Network<T> load_model_as(const std::string& path);
Network<float> load_model(const std::string& path);

extern template class Network<float>;
extern template class Network<double>;

}  // namespace xrfpid

#endif
