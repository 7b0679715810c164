#include "hessnet/rnn.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hessnet/error.hpp"

namespace hessnet {

namespace {

std::string step_label(std::size_t k, std::size_t s) {
  return "layer " + std::to_string(k + 1) + ", step " + std::to_string(s);
}

void check_trace(const RnnModel& model, const RnnTrace& trace) {
  require(trace.horizon == model.horizon && trace.pre.size() == model.depth() &&
              trace.act.size() == model.depth() + 1,
          ErrorCode::DimensionMismatch, "trace does not match model");
  for (std::size_t k = 0; k < model.depth(); ++k) {
    require(trace.pre[k].size() == model.horizon && trace.act[k + 1].size() == model.horizon + 1,
            ErrorCode::DimensionMismatch, "trace horizon does not match model");
    for (std::size_t s = 1; s <= model.horizon; ++s)
      require(trace.y(k, s).size() == model.layers[k].outputs(),
              ErrorCode::DimensionMismatch, "trace " + step_label(k, s) + " has wrong width");
  }
}

void check_targets(const RnnModel& model, std::span<const Vector> targets) {
  require(targets.size() == model.output_steps(), ErrorCode::DimensionMismatch,
          "expected " + std::to_string(model.output_steps()) + " target steps, got " +
              std::to_string(targets.size()));
  for (const Vector& z : targets)
    require(z.size() == model.output_dim(), ErrorCode::DimensionMismatch,
            "target step length " + std::to_string(z.size()) + ", model emits " +
                std::to_string(model.output_dim()));
}

void require_kink_free(const RnnModel& model, const RnnTrace& trace) {
  for (std::size_t k = 0; k < model.depth(); ++k) {
    if (model.layers[k].activation != Activation::ReLU) continue;
    for (std::size_t s = 1; s <= model.horizon; ++s)
      for (std::size_t i = 0; i < trace.y(k, s).size(); ++i)
        require(std::abs(trace.y(k, s)[i]) >= kKinkTolerance, ErrorCode::ReluKink,
                "Hessian undefined at ReLU kink (" + step_label(k, s) + ", unit " +
                    std::to_string(i) + ")");
  }
}

// Square block matrices over time: block (h, h') is m×m, h, h' = 1..t.
Matrix get_block(const Matrix& big, std::size_t m, std::size_t h, std::size_t hp) {
  Matrix b(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) b(i, j) = big((h - 1) * m + i, (hp - 1) * m + j);
  return b;
}

void set_block(Matrix& big, std::size_t h, std::size_t hp, const Matrix& b) {
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      big((h - 1) * b.rows() + i, (hp - 1) * b.cols() + j) = b(i, j);
}

Matrix block_diagonal(const Matrix& w, std::size_t copies) {
  Matrix big(copies * w.rows(), copies * w.cols());
  for (std::size_t c = 0; c < copies; ++c)
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t j = 0; j < w.cols(); ++j)
        big(c * w.rows() + i, c * w.cols() + j) = w(i, j);
  return big;
}

// ∂y^(k,h)/∂y^(k,s) through the same-layer recurrence: identity for h = s and
// Ũ^(k,h−1)···Ũ^(k,s) for h > s, with Ũ^(k,h) = U^(k) diag(f′(y^(k,h))).
Matrix recurrence_jacobian(const RnnLayer& layer, const std::vector<Vector>& fprime,
                           std::size_t t) {
  const std::size_t m = layer.outputs();
  Matrix jy(t * m, t * m);
  for (std::size_t s = 1; s <= t; ++s) {
    Matrix running = Matrix::identity(m);
    set_block(jy, s, s, running);
    for (std::size_t h = s + 1; h <= t; ++h) {
      const Matrix u_tilde = matmul(layer.feedback, Matrix::diagonal(fprime[h - 2]));
      running = matmul(u_tilde, running);
      set_block(jy, h, s, running);
    }
  }
  return jy;
}

// Shared backbone of hessian_rnn and hessian_rnn_relu. For each output step t
// it walks the layers downward carrying Z = ∂²E^(t)/∂z^(k,·)∂z^(k,·) taken
// with the layer's own recurrence frozen, and forms
//   A(h,h') = Z(h,h')∘f′_h f′_hᵀ + [h = h'] diag(∂E^(t)/∂z^(k,h) ∘ f″_h)
//   N = J_yᵀ A J_y,  C̃(s,ζ) = N(s,ζ),  Z^(k−1) = diag(W)ᵀ N diag(W).
RnnStructuredHessian hessian_through_time(const RnnModel& model, const RnnTrace& trace,
                                          std::span<const Vector> targets,
                                          bool with_curvature) {
  const std::size_t depth = model.depth();
  RnnStructuredHessian result;
  result.horizon = model.horizon;
  result.output_start = model.output_start;
  result.layers.resize(depth);

  std::vector<std::vector<Vector>> fprime(depth), fsecond(depth);
  for (std::size_t k = 0; k < depth; ++k)
    for (std::size_t s = 1; s <= model.horizon; ++s) {
      fprime[k].push_back(activation_first(model.layers[k].activation, trace.y(k, s)));
      fsecond[k].push_back(activation_second(model.layers[k].activation, trace.y(k, s)));
    }

  for (std::size_t t = model.output_start; t <= model.horizon; ++t) {
    const Vector& target = targets[t - model.output_start];
    const StepAdjoints adj = step_adjoints(model, trace, target, t);

    const std::size_t top_m = model.output_dim();
    Matrix zcurv(t * top_m, t * top_m);
    set_block(zcurv, t, t, Matrix::identity(top_m));

    for (std::size_t k = depth; k-- > 0;) {
      const RnnLayer& layer = model.layers[k];
      const std::size_t m = layer.outputs();

      Matrix a(t * m, t * m);
      for (std::size_t h = 1; h <= t; ++h)
        for (std::size_t hp = 1; hp <= t; ++hp) {
          Matrix blk = hadamard(get_block(zcurv, m, h, hp),
                                Matrix::outer(fprime[k][h - 1], fprime[k][hp - 1]));
          if (with_curvature && h == hp) {
            const Vector d = hadamard(adj.zadj[k][h - 1], fsecond[k][h - 1]);
            for (std::size_t i = 0; i < m; ++i) blk(i, i) += d[i];
          }
          set_block(a, h, hp, blk);
        }

      const Matrix jy = recurrence_jacobian(layer, fprime[k], t);
      const Matrix n = matmul(jy.transpose(), matmul(a, jy));

      RnnStepHessian step;
      step.step = t;
      step.units = m;
      for (std::size_t s = 1; s <= t; ++s)
        for (std::size_t z = 1; z <= t; ++z) step.blocks.push_back(get_block(n, m, s, z));
      for (std::size_t s = 1; s <= t; ++s) {
        step.weight_right.push_back(trace.layer_input(k, s));
        step.feedback_right.push_back(trace.state(k, s - 1));
      }
      // ζ = 1 would multiply the zero initial state, so it is left out.
      for (std::size_t s = 3; s <= t; ++s)
        for (std::size_t z = 2; z < s; ++z) {
          Matrix jz = matmul(Matrix::diagonal(fprime[k][s - 2]), get_block(jy, m, s - 1, z));
          step.feedback_terms.push_back(
              {s, z, adj.delta[k][s - 1], std::move(jz), trace.state(k, z - 1)});
        }
      result.layers[k].steps.push_back(std::move(step));

      if (k > 0) {
        const Matrix wide = block_diagonal(layer.weights, t);
        zcurv = matmul(wide.transpose(), matmul(n, wide));
      }
    }
  }
  return result;
}

Matrix feedback_correction(const FeedbackTerm& term, std::size_t m) {
  Matrix r(m * m, m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t p = 0; p < m; ++p) {
        const double c = term.delta[i] * term.state_jacobian(j, p);
        if (c == 0.0) continue;
        for (std::size_t q = 0; q < m; ++q) r(i * m + j, p * m + q) = c * term.state[q];
      }
  return r;
}

}  // namespace

RnnTrace forward_rnn(const RnnModel& model, std::span<const Vector> inputs) {
  require(inputs.size() == model.horizon, ErrorCode::DimensionMismatch,
          "expected " + std::to_string(model.horizon) + " input steps, got " +
              std::to_string(inputs.size()));
  RnnTrace trace;
  trace.horizon = model.horizon;
  trace.pre.resize(model.depth());
  trace.act.resize(model.depth() + 1);
  trace.act[0].push_back(Vector(model.input_dim()));
  for (const Vector& x : inputs) {
    require(x.size() == model.input_dim(), ErrorCode::DimensionMismatch,
            "input step length " + std::to_string(x.size()) + ", model expects " +
                std::to_string(model.input_dim()));
    trace.act[0].push_back(x);
  }
  for (std::size_t k = 0; k < model.depth(); ++k) {
    const RnnLayer& layer = model.layers[k];
    trace.act[k + 1].push_back(Vector(layer.outputs()));
    for (std::size_t s = 1; s <= model.horizon; ++s) {
      Vector y = add(add(matvec(layer.weights, trace.act[k][s]),
                         matvec(layer.feedback, trace.act[k + 1][s - 1])),
                     layer.bias);
      trace.act[k + 1].push_back(activation_apply(layer.activation, y));
      trace.pre[k].push_back(std::move(y));
    }
  }
  return trace;
}

LossSequence loss_sequence(std::span<const Vector> targets, std::span<const Vector> outputs) {
  require(targets.size() == outputs.size(), ErrorCode::DimensionMismatch,
          "loss: " + std::to_string(targets.size()) + " target steps vs " +
              std::to_string(outputs.size()) + " output steps");
  LossSequence loss;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    loss.per_step.push_back(loss_component(targets[i], outputs[i]));
    loss.total += loss.per_step.back();
  }
  return loss;
}

std::vector<Vector> output_sequence(const RnnModel& model, const RnnTrace& trace) {
  std::vector<Vector> out;
  for (std::size_t t = model.output_start; t <= model.horizon; ++t) out.push_back(trace.output(t));
  return out;
}

StepAdjoints step_adjoints(const RnnModel& model, const RnnTrace& trace,
                           const Vector& target, std::size_t step) {
  check_trace(model, trace);
  require(step >= 1 && step <= model.horizon, ErrorCode::BadIndex,
          "step " + std::to_string(step) + " outside 1.." + std::to_string(model.horizon));
  require(target.size() == model.output_dim(), ErrorCode::DimensionMismatch,
          "target length does not match model output");
  const std::size_t depth = model.depth();
  StepAdjoints adj;
  adj.step = step;
  adj.delta.assign(depth, std::vector<Vector>(step));
  adj.zadj.assign(depth, std::vector<Vector>(step));

  // v^(k−1,s) = (W^(k)ᵀ v^(k,s) + U^(k−1)ᵀ v^(k−1,s+1))∘f′(y^(k−1,s)), seeded
  // by −(z^(*,t) − z^(l,t)) at the output of step t; terms beyond t vanish.
  for (std::size_t s = step; s >= 1; --s) {
    for (std::size_t k = depth; k-- > 0;) {
      const RnnLayer& layer = model.layers[k];
      Vector g(layer.outputs());
      if (k + 1 == depth && s == step) g = subtract(trace.output(step), target);
      if (k + 1 < depth) g = add(g, matvec_transposed(model.layers[k + 1].weights, adj.delta[k + 1][s - 1]));
      if (s < step) g = add(g, matvec_transposed(layer.feedback, adj.delta[k][s]));
      adj.delta[k][s - 1] = hadamard(g, activation_first(layer.activation, trace.y(k, s)));
      adj.zadj[k][s - 1] = std::move(g);
    }
  }
  return adj;
}

RnnGradientBundle bptt(const RnnModel& model, const RnnTrace& trace,
                       std::span<const Vector> targets) {
  check_trace(model, trace);
  check_targets(model, targets);
  const std::size_t depth = model.depth();
  RnnGradientBundle bundle;
  bundle.horizon = model.horizon;
  bundle.output_start = model.output_start;
  bundle.layers.resize(depth);
  for (std::size_t k = 0; k < depth; ++k) {
    const RnnLayer& layer = model.layers[k];
    RnnLayerGradient& lg = bundle.layers[k];
    lg.weights = Matrix(layer.outputs(), layer.inputs());
    lg.feedback = Matrix(layer.outputs(), layer.outputs());
    lg.bias = Vector(layer.outputs());
    for (std::size_t s = 1; s <= model.horizon; ++s) {
      lg.weight_factors.push_back({Vector(layer.outputs()), trace.layer_input(k, s)});
      lg.feedback_factors.push_back({Vector(layer.outputs()), trace.state(k, s - 1)});
    }
  }

  for (std::size_t t = model.output_start; t <= model.horizon; ++t) {
    const StepAdjoints adj = step_adjoints(model, trace, targets[t - model.output_start], t);
    for (std::size_t k = 0; k < depth; ++k) {
      const RnnLayer& layer = model.layers[k];
      RnnStepGradient sg;
      sg.step = t;
      sg.weights = Matrix(layer.outputs(), layer.inputs());
      sg.feedback = Matrix(layer.outputs(), layer.outputs());
      sg.bias = Vector(layer.outputs());
      for (std::size_t s = 1; s <= t; ++s) {
        const Vector& vt = adj.delta[k][s - 1];
        sg.weights = add(sg.weights, Matrix::outer(vt, trace.layer_input(k, s)));
        sg.feedback = add(sg.feedback, Matrix::outer(vt, trace.state(k, s - 1)));
        sg.bias = add(sg.bias, vt);
        sg.weight_factors.push_back({vt, trace.layer_input(k, s)});
        sg.feedback_factors.push_back({vt, trace.state(k, s - 1)});

        RnnLayerGradient& lg = bundle.layers[k];
        lg.weight_factors[s - 1].left = add(lg.weight_factors[s - 1].left, vt);
        lg.feedback_factors[s - 1].left = add(lg.feedback_factors[s - 1].left, vt);
      }
      RnnLayerGradient& lg = bundle.layers[k];
      lg.weights = add(lg.weights, sg.weights);
      lg.feedback = add(lg.feedback, sg.feedback);
      lg.bias = add(lg.bias, sg.bias);
      lg.steps.push_back(std::move(sg));
    }
  }
  return bundle;
}

RnnGradientBundle minibatch_gradient_rnn(const RnnModel& model,
                                         std::span<const RnnSample> batch) {
  require(!batch.empty(), ErrorCode::InvalidArgument, "mini-batch is empty");
  RnnGradientBundle total;
  for (const RnnSample& sample : batch) {
    validate_sample(model, sample);
    RnnGradientBundle g = bptt(model, forward_rnn(model, sample.inputs), sample.targets);
    if (total.layers.empty()) {
      total = std::move(g);
      continue;
    }
    for (std::size_t k = 0; k < model.depth(); ++k) {
      RnnLayerGradient& acc = total.layers[k];
      RnnLayerGradient& add_in = g.layers[k];
      acc.weights = add(acc.weights, add_in.weights);
      acc.feedback = add(acc.feedback, add_in.feedback);
      acc.bias = add(acc.bias, add_in.bias);
      for (auto& f : add_in.weight_factors) acc.weight_factors.push_back(std::move(f));
      for (auto& f : add_in.feedback_factors) acc.feedback_factors.push_back(std::move(f));
      for (std::size_t i = 0; i < acc.steps.size(); ++i) {
        RnnStepGradient& sa = acc.steps[i];
        RnnStepGradient& sb = add_in.steps[i];
        sa.weights = add(sa.weights, sb.weights);
        sa.feedback = add(sa.feedback, sb.feedback);
        sa.bias = add(sa.bias, sb.bias);
        for (auto& f : sb.weight_factors) sa.weight_factors.push_back(std::move(f));
        for (auto& f : sb.feedback_factors) sa.feedback_factors.push_back(std::move(f));
      }
    }
  }
  return total;
}

const RnnStepHessian& RnnStructuredHessian::at(std::size_t layer, std::size_t step) const {
  require(layer < layers.size(), ErrorCode::BadIndex,
          "layer " + std::to_string(layer + 1) + " out of range");
  require(step >= output_start && step <= horizon, ErrorCode::BadIndex,
          "step " + std::to_string(step) + " outside " + std::to_string(output_start) +
              ".." + std::to_string(horizon));
  return layers[layer].steps[step - output_start];
}

RnnStructuredHessian hessian_rnn(const RnnModel& model, const RnnTrace& trace,
                                 std::span<const Vector> targets) {
  check_trace(model, trace);
  check_targets(model, targets);
  require_kink_free(model, trace);
  return hessian_through_time(model, trace, targets, true);
}

RnnStructuredHessian hessian_rnn_relu(const RnnModel& model, const RnnTrace& trace,
                                      std::span<const Vector> targets) {
  check_trace(model, trace);
  check_targets(model, targets);
  require(all_relu(model), ErrorCode::NotRelu,
          "ReLU Hessian requested for a model with non-ReLU layers");
  require_kink_free(model, trace);
  return hessian_through_time(model, trace, targets, false);
}

Matrix assemble_dense_rnn(const RnnStructuredHessian& h, std::size_t layer,
                          std::size_t step, ParamBlock which) {
  const RnnStepHessian& sh = h.at(layer, step);
  const std::size_t t = sh.step;
  const std::size_t m = sh.units;
  if (which == ParamBlock::Bias) {
    Matrix out(m, m);
    for (const Matrix& b : sh.blocks) out = add(out, b);
    return out;
  }
  const auto& right = which == ParamBlock::Weights ? sh.weight_right : sh.feedback_right;
  const std::size_t n = right.front().size();
  Matrix out(m * n, m * n);
  for (std::size_t s = 1; s <= t; ++s)
    for (std::size_t z = 1; z <= t; ++z)
      out = add(out, kron(sh.block(s, z), Matrix::outer(right[s - 1], right[z - 1])));
  if (which == ParamBlock::Feedback) {
    for (const FeedbackTerm& term : sh.feedback_terms) {
      const Matrix r = feedback_correction(term, m);
      out = add(out, add(r, r.transpose()));
    }
  }
  return out;
}

Matrix assemble_dense_rnn_total(const RnnStructuredHessian& h, std::size_t layer,
                                ParamBlock which) {
  Matrix total;
  for (std::size_t t = h.output_start; t <= h.horizon; ++t) {
    Matrix step = assemble_dense_rnn(h, layer, t, which);
    total = total.rows() == 0 ? std::move(step) : add(total, step);
  }
  return total;
}

double min_relu_margin(const RnnModel& model, const RnnTrace& trace) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < model.depth(); ++k) {
    if (model.layers[k].activation != Activation::ReLU) continue;
    for (const Vector& y : trace.pre[k])
      for (double v : y) margin = std::min(margin, std::abs(v));
  }
  return margin;
}

}  // namespace hessnet
