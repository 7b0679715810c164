#include "hessnet/fnn.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hessnet/error.hpp"

namespace hessnet {

namespace {

void check_trace(const FnnModel& model, const ForwardTrace& trace, const Vector& target) {
  require(trace.pre.size() == model.depth() && trace.act.size() == model.depth() + 1,
          ErrorCode::DimensionMismatch, "trace depth does not match model");
  for (std::size_t k = 0; k < model.depth(); ++k)
    require(trace.pre[k].size() == model.layers[k].outputs() &&
                trace.act[k].size() == model.layers[k].inputs(),
            ErrorCode::DimensionMismatch,
            "trace layer " + std::to_string(k + 1) + " does not match model");
  require(target.size() == model.output_dim(), ErrorCode::DimensionMismatch,
          "target length " + std::to_string(target.size()) + ", model emits " +
              std::to_string(model.output_dim()));
}

void require_kink_free(const FnnModel& model, const ForwardTrace& trace) {
  for (std::size_t k = 0; k < model.depth(); ++k) {
    if (model.layers[k].activation != Activation::ReLU) continue;
    for (std::size_t i = 0; i < trace.pre[k].size(); ++i)
      require(std::abs(trace.pre[k][i]) >= kKinkTolerance, ErrorCode::ReluKink,
              "Hessian undefined at ReLU kink (layer " + std::to_string(k + 1) +
                  ", unit " + std::to_string(i) + ")");
  }
}

Matrix sandwich(const Matrix& w, const Matrix& inner) {
  return matmul(w.transpose(), matmul(inner, w));
}

}  // namespace

ForwardTrace forward(const FnnModel& model, const Vector& input) {
  require(input.size() == model.input_dim(), ErrorCode::DimensionMismatch,
          "input length " + std::to_string(input.size()) + ", model expects " +
              std::to_string(model.input_dim()));
  ForwardTrace trace;
  trace.act.push_back(input);
  for (const FnnLayer& layer : model.layers) {
    Vector y = add(matvec(layer.weights, trace.act.back()), layer.bias);
    trace.act.push_back(activation_apply(layer.activation, y));
    trace.pre.push_back(std::move(y));
  }
  return trace;
}

double loss_component(const Vector& target, const Vector& output) {
  require(target.size() == output.size(), ErrorCode::DimensionMismatch,
          "loss: target length " + std::to_string(target.size()) + " vs output " +
              std::to_string(output.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = target[i] - output[i];
    acc += d * d;
  }
  return 0.5 * acc;
}

GradientBundle backprop(const FnnModel& model, const ForwardTrace& trace,
                        const Vector& target) {
  check_trace(model, trace, target);
  const std::size_t depth = model.depth();
  GradientBundle grads;
  grads.layers.resize(depth);

  // v^(l) = −(z* − z^(l))∘f′(y^(l)); v^(k−1) = (W^(k)ᵀ v^(k))∘f′(y^(k−1)).
  Vector adjoint = subtract(trace.output(), target);
  for (std::size_t k = depth; k-- > 0;) {
    const FnnLayer& layer = model.layers[k];
    Vector v = hadamard(adjoint, activation_first(layer.activation, trace.pre[k]));
    LayerGradient& g = grads.layers[k];
    g.weights = Matrix::outer(v, trace.act[k]);
    g.bias = v;
    g.factors.push_back({v, trace.act[k]});
    if (k > 0) adjoint = matvec_transposed(layer.weights, v);
  }
  return grads;
}

GradientBundle minibatch_gradient(const FnnModel& model,
                                  std::span<const FnnSample> batch) {
  require(!batch.empty(), ErrorCode::InvalidArgument, "mini-batch is empty");
  GradientBundle total;
  for (const FnnSample& sample : batch) {
    validate_sample(model, sample);
    GradientBundle g = backprop(model, forward(model, sample.input), sample.target);
    if (total.layers.empty()) {
      total = std::move(g);
      continue;
    }
    for (std::size_t k = 0; k < model.depth(); ++k) {
      LayerGradient& t = total.layers[k];
      t.weights = add(t.weights, g.layers[k].weights);
      t.bias = add(t.bias, g.layers[k].bias);
      t.factors.push_back(std::move(g.layers[k].factors.front()));
    }
  }
  return total;
}

StructuredHessian hessian(const FnnModel& model, const ForwardTrace& trace,
                          const Vector& target) {
  check_trace(model, trace, target);
  require_kink_free(model, trace);
  const std::size_t depth = model.depth();
  StructuredHessian h;
  h.layers.resize(depth);

  // `curv` is ∂²E/∂z∂z at the current layer output (C), `adjoint` is ∂E/∂z.
  Matrix curv = Matrix::identity(model.output_dim());
  Vector adjoint = subtract(trace.output(), target);
  for (std::size_t k = depth; k-- > 0;) {
    const FnnLayer& layer = model.layers[k];
    const Vector fp = activation_first(layer.activation, trace.pre[k]);
    const Vector fpp = activation_second(layer.activation, trace.pre[k]);
    const Vector d = hadamard(adjoint, fpp);

    Matrix left = hadamard(curv, Matrix::outer(fp, fp));
    for (std::size_t i = 0; i < d.size(); ++i) left(i, i) += d[i];

    if (k > 0) {
      curv = sandwich(layer.weights, left);
      adjoint = matvec_transposed(layer.weights, hadamard(adjoint, fp));
    }
    h.layers[k] = {std::move(left), trace.act[k], d};
  }
  return h;
}

StructuredHessian hessian_relu(const FnnModel& model, const ForwardTrace& trace,
                               const Vector& target) {
  check_trace(model, trace, target);
  require(all_relu(model), ErrorCode::NotRelu,
          "ReLU Hessian requested for a model with non-ReLU layers");
  require_kink_free(model, trace);
  const std::size_t depth = model.depth();
  StructuredHessian h;
  h.layers.resize(depth);

  // C̃^(l) = I∘F^(l); C̃^(k−1) = (W^(k)ᵀ C̃^(k) W^(k))∘F^(k−1).
  const Vector top = activation_first(Activation::ReLU, trace.pre[depth - 1]);
  Matrix reduced = hadamard(Matrix::identity(top.size()), Matrix::outer(top, top));
  for (std::size_t k = depth; k-- > 0;) {
    Matrix next;
    if (k > 0) {
      const Vector fp = activation_first(Activation::ReLU, trace.pre[k - 1]);
      next = hadamard(sandwich(model.layers[k].weights, reduced), Matrix::outer(fp, fp));
    }
    h.layers[k] = {std::move(reduced), trace.act[k], Vector(model.layers[k].outputs())};
    reduced = std::move(next);
  }
  return h;
}

Matrix assemble_dense(const StructuredHessian& h, std::size_t layer) {
  require(layer < h.layers.size(), ErrorCode::BadIndex,
          "layer " + std::to_string(layer + 1) + " out of range");
  const LayerHessian& lh = h.layers[layer];
  return kron(lh.left, Matrix::outer(lh.right, lh.right));
}

Matrix assemble_bias(const StructuredHessian& h, std::size_t layer) {
  require(layer < h.layers.size(), ErrorCode::BadIndex,
          "layer " + std::to_string(layer + 1) + " out of range");
  return h.layers[layer].left;
}

double min_relu_margin(const FnnModel& model, const ForwardTrace& trace) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < model.depth(); ++k) {
    if (model.layers[k].activation != Activation::ReLU) continue;
    for (double y : trace.pre[k]) margin = std::min(margin, std::abs(y));
  }
  return margin;
}

}  // namespace hessnet
