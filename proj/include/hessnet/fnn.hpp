#pragma once

// Forward propagation, exact gradients and exact per-layer Hessians of a
// feedforward network under the loss ½‖z* − z^(l)‖².
//
// Layers are indexed from 0 here; layer k consumes act[k] and produces
// act[k+1]. Weight w_ij is flattened to position i·n + j (output-neuron
// major), under which the weight Hessian of a layer is exactly
// L ⊗ (z zᵀ) with z the layer input.

#include <span>
#include <vector>

#include "hessnet/linalg.hpp"
#include "hessnet/model.hpp"

namespace hessnet {

struct ForwardTrace {
  std::vector<Vector> pre;  // y per layer
  std::vector<Vector> act;  // act[0] = x*, act[k+1] = f(pre[k])

  const Vector& output() const { return act.back(); }
};

ForwardTrace forward(const FnnModel& model, const Vector& input);

/// ½‖z* − z‖².
double loss_component(const Vector& target, const Vector& output);

/// One rank-1 contribution left·rightᵀ to a weight gradient.
struct OuterFactor {
  Vector left;
  Vector right;
};

struct LayerGradient {
  Matrix weights;
  Vector bias;
  /// The weight gradient is exactly Σ left·rightᵀ over these factors.
  std::vector<OuterFactor> factors;
};

struct GradientBundle {
  std::vector<LayerGradient> layers;
};

GradientBundle backprop(const FnnModel& model, const ForwardTrace& trace,
                        const Vector& target);

/// Sum of per-sample gradients; keeps the r factor pairs so the update is
/// available as V·Zᵀ.
GradientBundle minibatch_gradient(const FnnModel& model,
                                  std::span<const FnnSample> batch);

struct LayerHessian {
  Matrix left;       // L = C∘F + D, m×m
  Vector right;      // layer input z, n
  Vector curvature;  // diagonal of D
};

struct StructuredHessian {
  std::vector<LayerHessian> layers;
};

/// Exact weight/bias Hessian blocks for every layer. Throws ReluKink when a
/// ReLU layer has a pre-activation within kKinkTolerance of zero.
StructuredHessian hessian(const FnnModel& model, const ForwardTrace& trace,
                          const Vector& target);

/// Specialisation for all-ReLU networks: f″ vanishes, F is binary and the
/// recursion reduces to C̃ = (WᵀC̃W)∘F. Throws NotRelu or ReluKink.
StructuredHessian hessian_relu(const FnnModel& model, const ForwardTrace& trace,
                               const Vector& target);

/// Dense (mn)×(mn) weight Hessian of one layer.
Matrix assemble_dense(const StructuredHessian& h, std::size_t layer);
/// Dense m×m bias Hessian of one layer.
Matrix assemble_bias(const StructuredHessian& h, std::size_t layer);

/// Smallest |y| over ReLU units of the trace (infinity when there are none).
double min_relu_margin(const FnnModel& model, const ForwardTrace& trace);

}  // namespace hessnet
