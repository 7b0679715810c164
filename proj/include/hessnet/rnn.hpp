#pragma once

// Forward propagation with same-layer feedback, backpropagation through time
// and exact per-output-step Hessians for recurrent networks.
//
// Layers are indexed from 0 and time steps from 1 (step 0 is the zero
// initial state). E^(t) = ½‖z^(*,t) − z^(l,t)‖² is the loss of output step
// t ∈ [a, τ]; the total loss is Σ_t E^(t).

#include <span>
#include <vector>

#include "hessnet/fnn.hpp"
#include "hessnet/linalg.hpp"
#include "hessnet/model.hpp"

namespace hessnet {

struct RnnTrace {
  std::size_t horizon = 0;
  // pre[k][s-1] = y^(k,s)
  std::vector<std::vector<Vector>> pre;
  // act[0][s] = x^(*,s); act[k+1][s] = z^(k,s); act[k+1][0] = 0
  std::vector<std::vector<Vector>> act;

  const Vector& y(std::size_t layer, std::size_t step) const { return pre[layer][step - 1]; }
  /// z^(k−1,s): what layer `layer` consumes at step s.
  const Vector& layer_input(std::size_t layer, std::size_t step) const {
    return act[layer][step];
  }
  /// z^(k,s); step 0 is the zero initial state.
  const Vector& state(std::size_t layer, std::size_t step) const {
    return act[layer + 1][step];
  }
  const Vector& output(std::size_t step) const { return act.back()[step]; }
};

RnnTrace forward_rnn(const RnnModel& model, std::span<const Vector> inputs);

struct LossSequence {
  double total = 0.0;
  std::vector<double> per_step;  // E^(t) for t = a..τ
};

/// targets and outputs both hold steps a..τ in order.
LossSequence loss_sequence(std::span<const Vector> targets, std::span<const Vector> outputs);

/// z^(l,t) for t = a..τ.
std::vector<Vector> output_sequence(const RnnModel& model, const RnnTrace& trace);

/// Adjoints of a single E^(t) over the (layer, step ≤ t) grid.
struct StepAdjoints {
  std::size_t step = 0;
  // delta[k][s-1] = ∂E^(t)/∂y^(k,s); zadj[k][s-1] = ∂E^(t)/∂z^(k,s)
  std::vector<std::vector<Vector>> delta;
  std::vector<std::vector<Vector>> zadj;
};

StepAdjoints step_adjoints(const RnnModel& model, const RnnTrace& trace,
                           const Vector& target, std::size_t step);

struct RnnStepGradient {
  std::size_t step = 0;
  Matrix weights;
  Matrix feedback;
  Vector bias;
  /// G_w^(k,t) = Σ_s ṽ^(k,t,s) z^(k−1,s)ᵀ and G_u^(k,t) = Σ_s ṽ^(k,t,s) z^(k,s−1)ᵀ.
  std::vector<OuterFactor> weight_factors;
  std::vector<OuterFactor> feedback_factors;
};

struct RnnLayerGradient {
  std::vector<RnnStepGradient> steps;  // t = a..τ
  Matrix weights;                      // totals over t
  Matrix feedback;
  Vector bias;
  std::vector<OuterFactor> weight_factors;
  std::vector<OuterFactor> feedback_factors;
};

struct RnnGradientBundle {
  std::size_t horizon = 0;
  std::size_t output_start = 1;
  std::vector<RnnLayerGradient> layers;
};

/// targets hold steps a..τ.
RnnGradientBundle bptt(const RnnModel& model, const RnnTrace& trace,
                       std::span<const Vector> targets);

RnnGradientBundle minibatch_gradient_rnn(const RnnModel& model,
                                         std::span<const RnnSample> batch);

/// First-order contribution of the feedback weights to H_u: the state
/// z^(k,s−1) itself depends on U through injection step ζ < s. Contributes
/// R + Rᵀ with R[(i,j),(p,q)] = delta_i · state_jacobian_jp · state_q.
struct FeedbackTerm {
  std::size_t s = 0;
  std::size_t zeta = 0;
  Vector delta;           // ∂E^(t)/∂y^(k,s)
  Matrix state_jacobian;  // ∂z^(k,s−1)/∂y^(k,ζ)
  Vector state;           // z^(k,ζ−1)
};

struct RnnStepHessian {
  std::size_t step = 0;
  std::size_t units = 0;
  /// C̃(s,ζ) stored at (s−1)·t + (ζ−1), s, ζ = 1..t.
  std::vector<Matrix> blocks;
  std::vector<Vector> weight_right;    // z^(k−1,s)
  std::vector<Vector> feedback_right;  // z^(k,s−1)
  std::vector<FeedbackTerm> feedback_terms;

  const Matrix& block(std::size_t s, std::size_t zeta) const {
    return blocks[(s - 1) * step + (zeta - 1)];
  }
};

struct RnnLayerHessian {
  std::vector<RnnStepHessian> steps;  // t = a..τ
};

struct RnnStructuredHessian {
  std::size_t horizon = 0;
  std::size_t output_start = 1;
  std::vector<RnnLayerHessian> layers;

  /// Throws BadIndex for a layer or step outside the computed range.
  const RnnStepHessian& at(std::size_t layer, std::size_t step) const;
};

/// Exact Hessians of every E^(t) with respect to each layer's W, U and b.
/// Throws ReluKink when a ReLU unit sits on its kink anywhere in the trace.
RnnStructuredHessian hessian_rnn(const RnnModel& model, const RnnTrace& trace,
                                 std::span<const Vector> targets);

/// All-ReLU specialisation (f″ = 0, binary F). Throws NotRelu or ReluKink.
RnnStructuredHessian hessian_rnn_relu(const RnnModel& model, const RnnTrace& trace,
                                      std::span<const Vector> targets);

enum class ParamBlock { Weights, Feedback, Bias };

Matrix assemble_dense_rnn(const RnnStructuredHessian& h, std::size_t layer,
                          std::size_t step, ParamBlock which);
/// Σ_{t=a}^{τ} of the per-step blocks.
Matrix assemble_dense_rnn_total(const RnnStructuredHessian& h, std::size_t layer,
                                ParamBlock which);

double min_relu_margin(const RnnModel& model, const RnnTrace& trace);

}  // namespace hessnet
