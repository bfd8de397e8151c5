#pragma once

#include "atlab/common.hpp"

#include <string>
#include <variant>
#include <vector>

namespace atlab {

struct DenseSpec {
  Index in = 0, out = 0;
};
struct Conv2dSpec {
  Index in_ch = 0, out_ch = 0, kernel = 0, stride = 1;
};
struct ReluSpec {};
struct MaxPool2x2Spec {};
struct DropoutSpec {
  double rate = 0.5;
};
struct FlattenSpec {};

using LayerSpec =
    std::variant<DenseSpec, Conv2dSpec, ReluSpec, MaxPool2x2Spec, DropoutSpec, FlattenSpec>;

// Output item shape of one layer given its input item shape (no batch axis).
// Throws std::invalid_argument when the shapes do not compose.
std::vector<Index> layer_output_shape(const LayerSpec& spec, const std::vector<Index>& in);

// Parameter element counts for a layer: {weight_count, bias_count}, zeros if none.
std::pair<Index, Index> layer_param_counts(const LayerSpec& spec);

// Compact ASCII form, e.g. "Dense(784,500)", "Conv2d(1,32,3,1)", "Dropout(0.5)".
std::string layer_to_string(const LayerSpec& spec);
LayerSpec layer_from_string(const std::string& text);

// Whole-stack serialization used by the checkpoint header:
//   "input=1x28x28;classes=10;layers=Flatten,Dense(784,500),ReLU,Dense(500,10)"
std::string architecture_to_string(const std::vector<LayerSpec>& layers,
                                   const std::vector<Index>& input_shape, int num_classes);
void architecture_from_string(const std::string& text, std::vector<LayerSpec>* layers,
                              std::vector<Index>* input_shape, int* num_classes);

// Validates positivity and that consecutive shapes compose; returns the final
// item shape (which must be {num_classes} for a classifier stack).
std::vector<Index> validate_stack(const std::vector<LayerSpec>& layers,
                                  const std::vector<Index>& input_shape);

}  // namespace atlab
