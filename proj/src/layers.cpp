#include "atlab/layers.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace atlab {

namespace {

Index flat_count(const std::vector<Index>& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

[[noreturn]] void compose_fail(const std::string& layer, const std::vector<Index>& in) {
  throw std::invalid_argument("layer " + layer + " does not compose with input shape " +
                              shape_to_string(in));
}

}  // namespace

std::vector<Index> layer_output_shape(const LayerSpec& spec, const std::vector<Index>& in) {
  if (std::holds_alternative<DenseSpec>(spec)) {
    const auto& d = std::get<DenseSpec>(spec);
    if (d.in <= 0 || d.out <= 0) throw std::invalid_argument("Dense dims must be positive");
    if (in.size() != 1 || in[0] != d.in) compose_fail(layer_to_string(spec), in);
    return {d.out};
  }
  if (std::holds_alternative<Conv2dSpec>(spec)) {
    const auto& c = std::get<Conv2dSpec>(spec);
    if (c.in_ch <= 0 || c.out_ch <= 0 || c.kernel <= 0 || c.stride <= 0)
      throw std::invalid_argument("Conv2d dims must be positive");
    if (in.size() != 3 || in[0] != c.in_ch) compose_fail(layer_to_string(spec), in);
    const Index h = in[1], w = in[2];
    if (h < c.kernel || w < c.kernel) compose_fail(layer_to_string(spec), in);
    // Valid convolution, no padding.
    return {c.out_ch, (h - c.kernel) / c.stride + 1, (w - c.kernel) / c.stride + 1};
  }
  if (std::holds_alternative<MaxPool2x2Spec>(spec)) {
    if (in.size() != 3 || in[1] < 2 || in[2] < 2) compose_fail("MaxPool2x2", in);
    return {in[0], in[1] / 2, in[2] / 2};
  }
  if (std::holds_alternative<DropoutSpec>(spec)) {
    const auto& d = std::get<DropoutSpec>(spec);
    if (!(d.rate >= 0.0 && d.rate < 1.0))
      throw std::invalid_argument("dropout rate must be in [0,1)");
    return in;
  }
  if (std::holds_alternative<FlattenSpec>(spec)) return {flat_count(in)};
  return in;  // ReLU
}

std::pair<Index, Index> layer_param_counts(const LayerSpec& spec) {
  if (std::holds_alternative<DenseSpec>(spec)) {
    const auto& d = std::get<DenseSpec>(spec);
    return {d.in * d.out, d.out};
  }
  if (std::holds_alternative<Conv2dSpec>(spec)) {
    const auto& c = std::get<Conv2dSpec>(spec);
    return {c.out_ch * c.in_ch * c.kernel * c.kernel, c.out_ch};
  }
  return {0, 0};
}

std::string layer_to_string(const LayerSpec& spec) {
  if (std::holds_alternative<DenseSpec>(spec)) {
    const auto& d = std::get<DenseSpec>(spec);
    return "Dense(" + std::to_string(d.in) + "," + std::to_string(d.out) + ")";
  }
  if (std::holds_alternative<Conv2dSpec>(spec)) {
    const auto& c = std::get<Conv2dSpec>(spec);
    return "Conv2d(" + std::to_string(c.in_ch) + "," + std::to_string(c.out_ch) + "," +
           std::to_string(c.kernel) + "," + std::to_string(c.stride) + ")";
  }
  if (std::holds_alternative<ReluSpec>(spec)) return "ReLU";
  if (std::holds_alternative<MaxPool2x2Spec>(spec)) return "MaxPool2x2";
  if (std::holds_alternative<DropoutSpec>(spec)) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "Dropout(%.17g)", std::get<DropoutSpec>(spec).rate);
    return buf;
  }
  return "Flatten";
}

namespace {

std::vector<std::string> split_args(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

LayerSpec layer_from_string(const std::string& text) {
  const auto open = text.find('(');
  const std::string name = open == std::string::npos ? text : text.substr(0, open);
  std::vector<std::string> args;
  if (open != std::string::npos) {
    const auto close = text.rfind(')');
    if (close == std::string::npos || close < open)
      throw FormatError("malformed layer spec: " + text);
    args = split_args(text.substr(open + 1, close - open - 1));
  }
  auto want = [&](std::size_t n) {
    if (args.size() != n) throw FormatError("bad argument count in layer spec: " + text);
  };
  if (name == "Dense") {
    want(2);
    return DenseSpec{std::stoll(args[0]), std::stoll(args[1])};
  }
  if (name == "Conv2d") {
    want(4);
    return Conv2dSpec{std::stoll(args[0]), std::stoll(args[1]), std::stoll(args[2]),
                      std::stoll(args[3])};
  }
  if (name == "ReLU") return ReluSpec{};
  if (name == "MaxPool2x2") return MaxPool2x2Spec{};
  if (name == "Dropout") {
    want(1);
    return DropoutSpec{std::stod(args[0])};
  }
  if (name == "Flatten") return FlattenSpec{};
  throw FormatError("unknown layer kind: " + name);
}

std::string architecture_to_string(const std::vector<LayerSpec>& layers,
                                   const std::vector<Index>& input_shape, int num_classes) {
  std::ostringstream os;
  os << "input=";
  for (std::size_t i = 0; i < input_shape.size(); ++i) {
    if (i) os << 'x';
    os << input_shape[i];
  }
  os << ";classes=" << num_classes << ";layers=";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) os << ',';
    os << layer_to_string(layers[i]);
  }
  return os.str();
}

void architecture_from_string(const std::string& text, std::vector<LayerSpec>* layers,
                              std::vector<Index>* input_shape, int* num_classes) {
  layers->clear();
  input_shape->clear();
  auto grab = [&](const std::string& key, std::size_t from) -> std::pair<std::string, std::size_t> {
    const std::string tag = key + "=";
    if (text.compare(from, tag.size(), tag) != 0)
      throw FormatError("malformed architecture string: expected '" + key + "=' in " + text);
    const auto end = text.find(';', from);
    const std::size_t stop = (key == "layers") ? text.size() : end;
    if (key != "layers" && end == std::string::npos)
      throw FormatError("malformed architecture string: " + text);
    return {text.substr(from + tag.size(), stop - from - tag.size()),
            stop == text.size() ? stop : stop + 1};
  };
  auto [inp, p1] = grab("input", 0);
  auto [cls, p2] = grab("classes", p1);
  auto [lay, p3] = grab("layers", p2);
  (void)p3;
  std::stringstream is(inp);
  std::string tok;
  while (std::getline(is, tok, 'x')) input_shape->push_back(std::stoll(tok));
  *num_classes = std::stoi(cls);
  // Layer list: split on commas outside parentheses.
  std::string cur;
  int depth = 0;
  for (char ch : lay) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      layers->push_back(layer_from_string(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) layers->push_back(layer_from_string(cur));
}

std::vector<Index> validate_stack(const std::vector<LayerSpec>& layers,
                                  const std::vector<Index>& input_shape) {
  std::vector<Index> shape = input_shape;
  for (Index d : shape)
    if (d <= 0) throw std::invalid_argument("input shape dims must be positive");
  for (const auto& l : layers) shape = layer_output_shape(l, shape);
  return shape;
}

}  // namespace atlab
