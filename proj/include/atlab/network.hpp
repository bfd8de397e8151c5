#pragma once

#include "atlab/layers.hpp"
#include "atlab/tensor.hpp"

#include <random>
#include <string>
#include <vector>

namespace atlab {

enum class Mode { Train, Eval };

// Weight/bias pair for one layer; empty tensors for parameterless layers.
struct LayerParams {
  ArrayX weight;  // Dense: row-major [in, out]; Conv2d: [out_ch, in_ch*k*k]
  ArrayX bias;    // [out] / [out_ch]
};

// Ordered layer stack with parameters. Eval-mode inference is deterministic;
// the internal RNG is consumed only by Train-mode dropout.
class NetworkModel {
 public:
  NetworkModel() = default;
  NetworkModel(std::vector<LayerSpec> layers, std::vector<Index> input_shape, int num_classes);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<Index>& input_shape() const { return input_shape_; }
  int num_classes() const { return num_classes_; }

  std::vector<LayerParams>& params() { return params_; }
  const std::vector<LayerParams>& params() const { return params_; }
  Index param_count() const;

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  void seed_rng(std::uint64_t seed) const { rng_.seed(seed); }
  std::mt19937_64& rng() const { return rng_; }

  // He-uniform fan-in init of all weights, zero biases; deterministic in seed.
  void init_parameters(std::uint64_t seed);

  std::string architecture_string() const {
    return architecture_to_string(layers_, input_shape_, num_classes_);
  }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<LayerParams> params_;
  std::vector<Index> input_shape_;
  int num_classes_ = 0;
  Mode mode_ = Mode::Eval;
  mutable std::mt19937_64 rng_{0};
};

// Presets FC-2, FC-4, Conv-2, Conv-4; conv stacks use valid convolutions so the
// flatten width is derived from the input shape (9216 at 1x28x28 for Conv-2).
NetworkModel build_architecture(const std::string& preset, const std::vector<Index>& input_shape,
                                int num_classes, std::uint64_t seed);
NetworkModel build_architecture(const std::vector<LayerSpec>& layers,
                                const std::vector<Index>& input_shape, int num_classes,
                                std::uint64_t seed);
bool is_known_preset(const std::string& name);
std::vector<LayerSpec> preset_layers(const std::string& preset,
                                     const std::vector<Index>& input_shape, int num_classes);

// Per-layer activations and dropout masks captured for backprop.
struct ForwardTrace {
  std::vector<Tensor> inputs;       // input to each layer
  std::vector<ArrayX> drop_masks;   // scaled keep-masks, aligned with layers
  Tensor logits;
};

// Logits [n, num_classes]. Train mode draws dropout masks from model.rng().
Tensor forward(const NetworkModel& model, const Tensor& batch);
Tensor forward(const NetworkModel& model, const Tensor& batch, ForwardTrace* trace);

// Argmax labels; ties break to the lowest class index.
std::vector<int> predict(const NetworkModel& model, const Tensor& batch);
int predict_one(const NetworkModel& model, const Tensor& item);

// Softmax probabilities [n, C]; rows sum to 1.
Tensor softmax(const Tensor& logits);

enum class Wrt { Params, Input, Both };

struct Gradients {
  std::vector<LayerParams> params;  // aligned with model layers (empty where no params)
  Tensor input;                     // same shape as the batch
};

struct LossGrads {
  double loss = 0.0;
  Gradients grads;
};

// Mean softmax cross-entropy over the batch and its exact gradients.
// grad_scale rescales the upstream dLoss (attacks pass the batch size to get
// per-example-sum semantics from the same code path).
LossGrads loss_and_grads(const NetworkModel& model, const Tensor& batch,
                         const std::vector<int>& labels, Wrt wrt, double grad_scale = 1.0);

double mean_loss(const NetworkModel& model, const Tensor& batch, const std::vector<int>& labels);

// Fraction of items whose argmax equals the label (Eval mode forward).
double accuracy(const NetworkModel& model, const LabeledDataset& data, int threads = 0);

}  // namespace atlab
