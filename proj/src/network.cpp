#include "atlab/network.hpp"

#include <algorithm>
#include <cmath>

namespace atlab {

NetworkModel::NetworkModel(std::vector<LayerSpec> layers, std::vector<Index> input_shape,
                           int num_classes)
    : layers_(std::move(layers)), input_shape_(std::move(input_shape)), num_classes_(num_classes) {
  if (num_classes_ < 2) throw std::invalid_argument("num_classes must be >= 2");
  const auto out = validate_stack(layers_, input_shape_);
  if (out.size() != 1 || out[0] != num_classes_)
    throw std::invalid_argument("stack output shape " + shape_to_string(out) +
                                " does not match num_classes=" + std::to_string(num_classes_));
  params_.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto [wc, bc] = layer_param_counts(layers_[i]);
    params_[i].weight = ArrayX::Zero(wc);
    params_[i].bias = ArrayX::Zero(bc);
  }
}

Index NetworkModel::param_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.weight.size() + p.bias.size();
  return n;
}

void NetworkModel::init_parameters(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Index fan_in = 0;
    if (const auto* d = std::get_if<DenseSpec>(&layers_[i])) fan_in = d->in;
    if (const auto* c = std::get_if<Conv2dSpec>(&layers_[i]))
      fan_in = c->in_ch * c->kernel * c->kernel;
    if (fan_in == 0) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> unif(-limit, limit);
    for (Index k = 0; k < params_[i].weight.size(); ++k) params_[i].weight[k] = unif(rng);
    params_[i].bias.setZero();
  }
}

bool is_known_preset(const std::string& name) {
  return name == "FC-2" || name == "FC-4" || name == "Conv-2" || name == "Conv-4";
}

std::vector<LayerSpec> preset_layers(const std::string& preset,
                                     const std::vector<Index>& input_shape, int num_classes) {
  const Index flat = Tensor::count(input_shape);
  const Index C = num_classes;
  std::vector<LayerSpec> layers;
  if (preset == "FC-2") {
    layers = {FlattenSpec{}, DenseSpec{flat, 500}, ReluSpec{}, DenseSpec{500, C}};
  } else if (preset == "FC-4") {
    layers = {FlattenSpec{},     DenseSpec{flat, 500}, ReluSpec{}, DenseSpec{500, 200},
              ReluSpec{},        DenseSpec{200, 100},  ReluSpec{}, DenseSpec{100, C}};
  } else if (preset == "Conv-2" || preset == "Conv-4") {
    if (input_shape.size() != 3)
      throw std::invalid_argument(preset + " preset needs a (channels,h,w) input shape");
    const Index ch = input_shape[0];
    layers = {Conv2dSpec{ch, 32, 3, 1}, ReluSpec{}, Conv2dSpec{32, 64, 3, 1}, ReluSpec{}};
    if (preset == "Conv-4") {
      layers.insert(layers.end(), {LayerSpec{Conv2dSpec{64, 128, 3, 1}}, LayerSpec{ReluSpec{}},
                                   LayerSpec{MaxPool2x2Spec{}}, LayerSpec{Conv2dSpec{128, 128, 3, 1}},
                                   LayerSpec{ReluSpec{}}});
    }
    layers.push_back(MaxPool2x2Spec{});
    // Flatten width follows from the input size; 9216 at 1x28x28 for Conv-2.
    std::vector<Index> shape = input_shape;
    for (const auto& l : layers) shape = layer_output_shape(l, shape);
    layers.push_back(FlattenSpec{});
    layers.push_back(DenseSpec{Tensor::count(shape), 128});
    layers.push_back(ReluSpec{});
    layers.push_back(DropoutSpec{0.5});
    layers.push_back(DenseSpec{128, C});
  } else {
    throw std::invalid_argument("unknown architecture preset: " + preset);
  }
  return layers;
}

NetworkModel build_architecture(const std::string& preset, const std::vector<Index>& input_shape,
                                int num_classes, std::uint64_t seed) {
  NetworkModel model(preset_layers(preset, input_shape, num_classes), input_shape, num_classes);
  model.init_parameters(seed);
  return model;
}

NetworkModel build_architecture(const std::vector<LayerSpec>& layers,
                                const std::vector<Index>& input_shape, int num_classes,
                                std::uint64_t seed) {
  NetworkModel model(layers, input_shape, num_classes);
  model.init_parameters(seed);
  return model;
}

namespace {

struct ShapeInfo {
  std::vector<std::vector<Index>> item_in;  // per-layer input item shape
  std::vector<Index> out_shape;             // final item shape
};

ShapeInfo stack_shapes(const NetworkModel& m) {
  ShapeInfo s;
  std::vector<Index> cur = m.input_shape();
  for (const auto& l : m.layers()) {
    s.item_in.push_back(cur);
    cur = layer_output_shape(l, cur);
  }
  s.out_shape = cur;
  return s;
}

void im2col(const double* img, Index C, Index H, Index W, Index k, Index s, MatrixR& cols) {
  const Index ho = (H - k) / s + 1, wo = (W - k) / s + 1;
  // cols: [ho*wo, C*k*k]
  for (Index i = 0; i < ho; ++i) {
    for (Index j = 0; j < wo; ++j) {
      double* dst = cols.data() + (i * wo + j) * cols.cols();
      for (Index c = 0; c < C; ++c) {
        const double* src = img + c * H * W + (i * s) * W + j * s;
        for (Index ki = 0; ki < k; ++ki) {
          for (Index kj = 0; kj < k; ++kj) *dst++ = src[ki * W + kj];
        }
      }
    }
  }
}

void col2im_add(const MatrixR& cols, Index C, Index H, Index W, Index k, Index s, double* img) {
  const Index ho = (H - k) / s + 1, wo = (W - k) / s + 1;
  for (Index i = 0; i < ho; ++i) {
    for (Index j = 0; j < wo; ++j) {
      const double* src = cols.data() + (i * wo + j) * cols.cols();
      for (Index c = 0; c < C; ++c) {
        double* dst = img + c * H * W + (i * s) * W + j * s;
        for (Index ki = 0; ki < k; ++ki) {
          for (Index kj = 0; kj < k; ++kj) dst[ki * W + kj] += *src++;
        }
      }
    }
  }
}

Tensor apply_layer(const NetworkModel& model, std::size_t li, const LayerSpec& spec,
                   const Tensor& in, const std::vector<Index>& item_in, Mode mode,
                   ArrayX* drop_mask) {
  const Index n = in.rows();
  if (const auto* d = std::get_if<DenseSpec>(&spec)) {
    Tensor out = Tensor::zeros({n, d->out});
    const auto& p = model.params()[li];
    auto W = MapConstMatR(p.weight.data(), d->in, d->out);
    out.mat(n, d->out).noalias() = in.mat(n, d->in) * W;
    out.mat(n, d->out).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(p.bias.data(), d->out);
    return out;
  }
  if (const auto* c = std::get_if<Conv2dSpec>(&spec)) {
    const Index C = item_in[0], H = item_in[1], W = item_in[2];
    const Index k = c->kernel, s = c->stride;
    const Index ho = (H - k) / s + 1, wo = (W - k) / s + 1;
    Tensor out = Tensor::zeros({n, c->out_ch, ho, wo});
    const auto& p = model.params()[li];
    auto Wm = MapConstMatR(p.weight.data(), c->out_ch, c->in_ch * k * k);
    MatrixR cols(ho * wo, c->in_ch * k * k);
    for (Index img = 0; img < n; ++img) {
      im2col(in.data.data() + img * in.row_size(), C, H, W, k, s, cols);
      MapMatR om(out.data.data() + img * out.row_size(), c->out_ch, ho * wo);
      om.noalias() = Wm * cols.transpose();
      om.colwise() += Eigen::Map<const VectorX>(p.bias.data(), c->out_ch);
    }
    return out;
  }
  if (std::holds_alternative<ReluSpec>(spec)) {
    Tensor out = in;
    out.data = out.data.max(0.0);
    return out;
  }
  if (std::holds_alternative<MaxPool2x2Spec>(spec)) {
    const Index C = item_in[0], H = item_in[1], W = item_in[2];
    const Index ho = H / 2, wo = W / 2;
    Tensor out = Tensor::zeros({n, C, ho, wo});
    for (Index img = 0; img < n; ++img) {
      const double* src = in.data.data() + img * in.row_size();
      double* dst = out.data.data() + img * out.row_size();
      for (Index c = 0; c < C; ++c) {
        for (Index i = 0; i < ho; ++i) {
          for (Index j = 0; j < wo; ++j) {
            const double* cell = src + c * H * W + (2 * i) * W + 2 * j;
            double best = cell[0];
            if (cell[1] > best) best = cell[1];
            if (cell[W] > best) best = cell[W];
            if (cell[W + 1] > best) best = cell[W + 1];
            dst[c * ho * wo + i * wo + j] = best;
          }
        }
      }
    }
    return out;
  }
  if (const auto* dr = std::get_if<DropoutSpec>(&spec)) {
    if (mode == Mode::Eval) return in;
    const double keep = 1.0 - dr->rate;
    Tensor out = in;
    ArrayX mask(in.size());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto& rng = model.rng();
    for (Index i = 0; i < mask.size(); ++i) mask[i] = unif(rng) < keep ? 1.0 / keep : 0.0;
    out.data *= mask;
    if (drop_mask) *drop_mask = std::move(mask);
    return out;
  }
  // Flatten
  Tensor out = in;
  out.shape = {n, in.row_size()};
  return out;
}

Tensor forward_impl(const NetworkModel& model, const Tensor& batch, ForwardTrace* trace,
                    Mode mode) {
  if (batch.ndim() < 1) throw std::invalid_argument("empty batch");
  const auto item = std::vector<Index>(batch.shape.begin() + 1, batch.shape.end());
  if (item != model.input_shape())
    throw std::invalid_argument("batch item shape " + shape_to_string(item) +
                                " does not match model input " +
                                shape_to_string(model.input_shape()));
  const auto shapes = stack_shapes(model);
  if (trace) {
    trace->inputs.clear();
    trace->drop_masks.assign(model.layers().size(), ArrayX());
  }
  Tensor cur = batch;
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    ArrayX* maskp = trace ? &trace->drop_masks[i] : nullptr;
    if (trace) {
      trace->inputs.push_back(std::move(cur));
      cur = apply_layer(model, i, model.layers()[i], trace->inputs.back(), shapes.item_in[i],
                        mode, maskp);
    } else {
      cur = apply_layer(model, i, model.layers()[i], cur, shapes.item_in[i], mode, maskp);
    }
  }
  cur.require_finite("forward logits");
  if (trace) trace->logits = cur;
  return cur;
}

}  // namespace

Tensor forward(const NetworkModel& model, const Tensor& batch) {
  return forward_impl(model, batch, nullptr, model.mode());
}

Tensor forward(const NetworkModel& model, const Tensor& batch, ForwardTrace* trace) {
  return forward_impl(model, batch, trace, model.mode());
}

Tensor softmax(const Tensor& logits) {
  const Index n = logits.rows(), C = logits.row_size();
  Tensor out = logits;
  auto M = out.mat(n, C);
  for (Index i = 0; i < n; ++i) {
    const double m = M.row(i).maxCoeff();
    M.row(i) = (M.row(i).array() - m).exp();
    M.row(i) /= M.row(i).sum();
  }
  return out;
}

std::vector<int> predict(const NetworkModel& model, const Tensor& batch) {
  const Tensor logits = forward_impl(model, batch, nullptr, Mode::Eval);
  const Index n = logits.rows(), C = logits.row_size();
  std::vector<int> labels(static_cast<std::size_t>(n));
  auto M = logits.mat(n, C);
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    M.row(i).maxCoeff(&best);  // first maximum: lowest class index on ties
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

int predict_one(const NetworkModel& model, const Tensor& item) {
  Tensor batch = item;
  batch.shape.insert(batch.shape.begin(), 1);
  return predict(model, batch)[0];
}

LossGrads loss_and_grads(const NetworkModel& model, const Tensor& batch,
                         const std::vector<int>& labels, Wrt wrt, double grad_scale) {
  const Index n = batch.rows();
  if (static_cast<Index>(labels.size()) != n)
    throw std::invalid_argument("label count does not match batch size");
  for (int y : labels)
    if (y < 0 || y >= model.num_classes())
      throw std::invalid_argument("label out of range: " + std::to_string(y));

  ForwardTrace trace;
  forward_impl(model, batch, &trace, model.mode());
  const Index C = model.num_classes();
  auto Z = trace.logits.mat(n, C);

  // Mean cross-entropy via log-sum-exp; dZ = (softmax - onehot) * scale / n.
  double loss = 0.0;
  Tensor dcur = Tensor::zeros({n, C});
  auto D = dcur.mat(n, C);
  for (Index i = 0; i < n; ++i) {
    const double m = Z.row(i).maxCoeff();
    const ArrayX e = (Z.row(i).array() - m).exp();
    const double sum = e.sum();
    loss += std::log(sum) + m - Z(i, labels[static_cast<std::size_t>(i)]);
    D.row(i) = (e / sum).matrix();
    D(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  loss /= static_cast<double>(n);
  D *= grad_scale / static_cast<double>(n);

  LossGrads out;
  out.loss = loss;
  if (!std::isfinite(loss)) throw NumericalError("non-finite loss");

  const bool want_params = wrt != Wrt::Input;
  const bool want_input = wrt != Wrt::Params;
  if (want_params) {
    out.grads.params.resize(model.layers().size());
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
      out.grads.params[i].weight = ArrayX::Zero(model.params()[i].weight.size());
      out.grads.params[i].bias = ArrayX::Zero(model.params()[i].bias.size());
    }
  }

  const auto shapes = stack_shapes(model);
  for (std::size_t ri = model.layers().size(); ri-- > 0;) {
    const auto& spec = model.layers()[ri];
    const Tensor& in = trace.inputs[ri];
    const auto& item_in = shapes.item_in[ri];
    const bool need_dinput = want_input || ri > 0;

    if (const auto* d = std::get_if<DenseSpec>(&spec)) {
      auto dO = dcur.mat(n, d->out);
      if (want_params) {
        auto& g = out.grads.params[ri];
        MapMatR(g.weight.data(), d->in, d->out).noalias() = in.mat(n, d->in).transpose() * dO;
        Eigen::Map<Eigen::RowVectorXd>(g.bias.data(), d->out) = dO.colwise().sum();
      }
      if (need_dinput) {
        Tensor dIn = Tensor::zeros(in.shape);
        const auto& p = model.params()[ri];
        dIn.mat(n, d->in).noalias() = dO * MapConstMatR(p.weight.data(), d->in, d->out).transpose();
        dcur = std::move(dIn);
      }
    } else if (const auto* c = std::get_if<Conv2dSpec>(&spec)) {
      const Index Ci = item_in[0], H = item_in[1], W = item_in[2];
      const Index k = c->kernel, s = c->stride;
      const Index ho = (H - k) / s + 1, wo = (W - k) / s + 1;
      const Index ckk = c->in_ch * k * k;
      Tensor dIn = Tensor::zeros(in.shape);
      MatrixR cols(ho * wo, ckk);
      MatrixR dcols(ho * wo, ckk);
      const auto& p = model.params()[ri];
      auto Wm = MapConstMatR(p.weight.data(), c->out_ch, ckk);
      for (Index img = 0; img < n; ++img) {
        MapConstMatR dO(dcur.data.data() + img * dcur.row_size(), c->out_ch, ho * wo);
        if (want_params) {
          im2col(in.data.data() + img * in.row_size(), Ci, H, W, k, s, cols);
          auto& g = out.grads.params[ri];
          MapMatR(g.weight.data(), c->out_ch, ckk).noalias() += dO * cols;
          Eigen::Map<VectorX>(g.bias.data(), c->out_ch) += dO.rowwise().sum();
        }
        if (need_dinput) {
          dcols.noalias() = dO.transpose() * Wm;
          col2im_add(dcols, Ci, H, W, k, s, dIn.data.data() + img * dIn.row_size());
        }
      }
      if (need_dinput) dcur = std::move(dIn);
    } else if (std::holds_alternative<ReluSpec>(spec)) {
      if (need_dinput) dcur.data *= (in.data > 0.0).cast<double>();
    } else if (std::holds_alternative<MaxPool2x2Spec>(spec)) {
      if (need_dinput) {
        const Index Ci = item_in[0], H = item_in[1], W = item_in[2];
        const Index ho = H / 2, wo = W / 2;
        Tensor dIn = Tensor::zeros(in.shape);
        for (Index img = 0; img < n; ++img) {
          const double* src = in.data.data() + img * in.row_size();
          const double* g = dcur.data.data() + img * dcur.row_size();
          double* dst = dIn.data.data() + img * dIn.row_size();
          for (Index ci = 0; ci < Ci; ++ci) {
            for (Index i = 0; i < ho; ++i) {
              for (Index j = 0; j < wo; ++j) {
                const Index base = ci * H * W + (2 * i) * W + 2 * j;
                // First maximum in scan order gets the gradient.
                Index arg = base;
                if (src[base + 1] > src[arg]) arg = base + 1;
                if (src[base + W] > src[arg]) arg = base + W;
                if (src[base + W + 1] > src[arg]) arg = base + W + 1;
                dst[arg] += g[ci * ho * wo + i * wo + j];
              }
            }
          }
        }
        dcur = std::move(dIn);
      }
    } else if (std::holds_alternative<DropoutSpec>(spec)) {
      if (need_dinput && model.mode() == Mode::Train) dcur.data *= trace.drop_masks[ri];
    } else {  // Flatten
      if (need_dinput) dcur.shape = in.shape;
    }
  }

  if (want_input) {
    dcur.require_finite("input gradient");
    out.grads.input = std::move(dcur);
  }
  return out;
}

double mean_loss(const NetworkModel& model, const Tensor& batch, const std::vector<int>& labels) {
  const Tensor logits = forward_impl(model, batch, nullptr, Mode::Eval);
  const Index n = logits.rows(), C = logits.row_size();
  auto Z = logits.mat(n, C);
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double m = Z.row(i).maxCoeff();
    loss += std::log((Z.row(i).array() - m).exp().sum()) + m -
            Z(i, labels[static_cast<std::size_t>(i)]);
  }
  return loss / static_cast<double>(n);
}

double accuracy(const NetworkModel& model, const LabeledDataset& data, int threads) {
  if (data.size() == 0) return 0.0;
  if (threads <= 0) threads = default_threads();
  const Index n = data.size();
  std::vector<int> hits(static_cast<std::size_t>(n), 0);
  parallel_for(n, threads, [&](Index b, Index e) {
    const Index count = e - b;
    Tensor chunk;
    chunk.shape = data.images.shape;
    chunk.shape[0] = count;
    chunk.data = data.images.data.segment(b * data.images.row_size(),
                                          count * data.images.row_size());
    const auto pred = predict(model, chunk);
    for (Index i = 0; i < count; ++i)
      hits[static_cast<std::size_t>(b + i)] =
          pred[static_cast<std::size_t>(i)] == data.labels[static_cast<std::size_t>(b + i)];
  });
  Index correct = 0;
  for (int h : hits) correct += h;
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace atlab
