#include "hessnet/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hessnet/error.hpp"

namespace hessnet {

namespace {

template <class M>
std::vector<ParamRef> layout_of(const M& model, std::size_t layer, ParamBlock block) {
  require(layer < model.depth(), ErrorCode::BadIndex,
          "layer " + std::to_string(layer + 1) + " out of range 1.." + std::to_string(model.depth()));
  const auto& l = model.layers[layer];
  std::vector<ParamRef> refs;
  const std::size_t m = l.outputs();
  std::size_t cols = 1;
  if (block == ParamBlock::Weights) cols = l.inputs();
  if (block == ParamBlock::Feedback) cols = m;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < cols; ++j) refs.push_back({layer, block, i, j});
  return refs;
}

std::vector<double> flatten(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

// Active pattern of every ReLU unit; kink units are encoded separately so a
// trace sitting on the kink never matches a neighbour.
using Pattern = std::vector<signed char>;

void append_pattern(Pattern& p, Activation act, const Vector& y) {
  if (act != Activation::ReLU) return;
  for (double v : y) p.push_back(std::abs(v) < kKinkTolerance ? 2 : (v > 0 ? 1 : 0));
}

Pattern relu_pattern(const FnnModel& model, std::span<const FnnSample> batch) {
  Pattern p;
  if (std::none_of(model.layers.begin(), model.layers.end(),
                   [](const FnnLayer& l) { return l.activation == Activation::ReLU; }))
    return p;
  for (const FnnSample& s : batch) {
    const ForwardTrace tr = forward(model, s.input);
    for (std::size_t k = 0; k < model.depth(); ++k)
      append_pattern(p, model.layers[k].activation, tr.pre[k]);
  }
  return p;
}

Pattern relu_pattern(const RnnModel& model, std::span<const RnnSample> batch) {
  Pattern p;
  if (std::none_of(model.layers.begin(), model.layers.end(),
                   [](const RnnLayer& l) { return l.activation == Activation::ReLU; }))
    return p;
  for (const RnnSample& s : batch) {
    const RnnTrace tr = forward_rnn(model, s.inputs);
    for (std::size_t k = 0; k < model.depth(); ++k)
      for (const Vector& y : tr.pre[k]) append_pattern(p, model.layers[k].activation, y);
  }
  return p;
}

bool has_kink(const Pattern& p) { return std::find(p.begin(), p.end(), 2) != p.end(); }

template <class M, class S>
NumericGradient fd_gradient_impl(const M& model, std::span<const S> batch, const FdConfig& cfg) {
  require(cfg.step > 0.0, ErrorCode::InvalidArgument, "finite-difference step must be positive");
  require(!batch.empty(), ErrorCode::InvalidArgument, "mini-batch is empty");
  NumericGradient g;
  g.layout = parameter_layout(model);
  const Pattern base = relu_pattern(model, batch);
  M work = model;
  for (const ParamRef& ref : g.layout) {
    double& p = parameter(work, ref);
    const double orig = p;
    p = orig + cfg.step;
    const double plus = batch_loss(work, batch);
    const bool plus_ok = relu_pattern(work, batch) == base;
    p = orig - cfg.step;
    const double minus = batch_loss(work, batch);
    const bool minus_ok = relu_pattern(work, batch) == base;
    p = orig;
    const bool skip = has_kink(base) || !plus_ok || !minus_ok;
    g.skipped.push_back(skip);
    g.values.push_back(skip ? 0.0 : (plus - minus) / (2.0 * cfg.step));
  }
  return g;
}

template <class M, class S, class GradFn, class LossFn>
NumericHessian fd_hessian_impl(const M& model, const S& sample, std::size_t layer,
                               ParamBlock block, const FdConfig& cfg, GradFn grad_fn,
                               LossFn loss_fn) {
  require(cfg.step > 0.0, ErrorCode::InvalidArgument, "finite-difference step must be positive");
  const std::vector<ParamRef> refs = block_layout(model, layer, block);
  const std::size_t n = refs.size();
  const std::span<const S> one(&sample, 1);
  const Pattern base = relu_pattern(model, one);
  NumericHessian h{Matrix(n, n), std::vector<bool>(n, has_kink(base))};
  if (has_kink(base)) return h;
  const double step = cfg.step;
  M work = model;

  if (cfg.target == FdConfig::Target::Gradient) {
    for (std::size_t j = 0; j < n; ++j) {
      double& p = parameter(work, refs[j]);
      const double orig = p;
      p = orig + step;
      const std::vector<double> plus = grad_fn(work);
      const bool plus_ok = relu_pattern(work, one) == base;
      p = orig - step;
      const std::vector<double> minus = grad_fn(work);
      const bool minus_ok = relu_pattern(work, one) == base;
      p = orig;
      if (!plus_ok || !minus_ok) {
        h.skipped[j] = true;
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) h.values(i, j) = (plus[i] - minus[i]) / (2.0 * step);
    }
    return h;
  }

  const double centre = loss_fn(work);
  auto shifted = [&](std::size_t i, double di, std::size_t j, double dj) {
    double& pi = parameter(work, refs[i]);
    double& pj = parameter(work, refs[j]);
    const double oi = pi;
    const double oj = pj;
    pi += di;
    pj += dj;
    const double e = loss_fn(work);
    const bool ok = relu_pattern(work, one) == base;
    pj = oj;
    pi = oi;
    return std::pair{e, ok};
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double value = 0.0;
      bool ok = true;
      if (i == j) {
        const auto [ep, okp] = shifted(i, step, i, 0.0);
        const auto [em, okm] = shifted(i, -step, i, 0.0);
        ok = okp && okm;
        value = (ep - 2.0 * centre + em) / (step * step);
      } else {
        const auto [epp, a] = shifted(i, step, j, step);
        const auto [epm, b] = shifted(i, step, j, -step);
        const auto [emp, c] = shifted(i, -step, j, step);
        const auto [emm, d] = shifted(i, -step, j, -step);
        ok = a && b && c && d;
        value = (epp - epm - emp + emm) / (4.0 * step * step);
      }
      if (!ok) {
        h.skipped[i] = true;
        h.skipped[j] = true;
        continue;
      }
      h.values(i, j) = value;
      h.values(j, i) = value;
    }
  }
  return h;
}

}  // namespace

std::vector<ParamRef> block_layout(const FnnModel& model, std::size_t layer, ParamBlock block) {
  require(block != ParamBlock::Feedback, ErrorCode::InvalidArgument,
          "feedback parameters exist only in rnn models");
  return layout_of(model, layer, block);
}

std::vector<ParamRef> block_layout(const RnnModel& model, std::size_t layer, ParamBlock block) {
  return layout_of(model, layer, block);
}

std::vector<ParamRef> parameter_layout(const FnnModel& model) {
  std::vector<ParamRef> all;
  for (std::size_t k = 0; k < model.depth(); ++k)
    for (ParamBlock b : {ParamBlock::Weights, ParamBlock::Bias})
      for (const ParamRef& r : block_layout(model, k, b)) all.push_back(r);
  return all;
}

std::vector<ParamRef> parameter_layout(const RnnModel& model) {
  std::vector<ParamRef> all;
  for (std::size_t k = 0; k < model.depth(); ++k)
    for (ParamBlock b : {ParamBlock::Weights, ParamBlock::Feedback, ParamBlock::Bias})
      for (const ParamRef& r : block_layout(model, k, b)) all.push_back(r);
  return all;
}

double& parameter(FnnModel& model, const ParamRef& ref) {
  FnnLayer& l = model.layers.at(ref.layer);
  switch (ref.block) {
    case ParamBlock::Weights: return l.weights(ref.row, ref.col);
    case ParamBlock::Bias: return l.bias[ref.row];
    case ParamBlock::Feedback: break;
  }
  fail(ErrorCode::InvalidArgument, "feedback parameters exist only in rnn models");
}

double& parameter(RnnModel& model, const ParamRef& ref) {
  RnnLayer& l = model.layers.at(ref.layer);
  switch (ref.block) {
    case ParamBlock::Weights: return l.weights(ref.row, ref.col);
    case ParamBlock::Feedback: return l.feedback(ref.row, ref.col);
    case ParamBlock::Bias: return l.bias[ref.row];
  }
  fail(ErrorCode::InvalidArgument, "unknown parameter block");
}

std::string describe(const ParamRef& ref) {
  std::string s = "layer " + std::to_string(ref.layer + 1) + " ";
  switch (ref.block) {
    case ParamBlock::Weights: return s + "W[" + std::to_string(ref.row) + "," + std::to_string(ref.col) + "]";
    case ParamBlock::Feedback: return s + "U[" + std::to_string(ref.row) + "," + std::to_string(ref.col) + "]";
    case ParamBlock::Bias: return s + "b[" + std::to_string(ref.row) + "]";
  }
  return s;
}

std::vector<double> gradient_entries(const GradientBundle& g, std::size_t layer, ParamBlock block) {
  require(layer < g.layers.size(), ErrorCode::BadIndex, "layer out of range");
  require(block != ParamBlock::Feedback, ErrorCode::InvalidArgument,
          "feedback parameters exist only in rnn models");
  if (block == ParamBlock::Weights) return flatten(g.layers[layer].weights);
  return g.layers[layer].bias.values();
}

std::vector<double> gradient_entries(const RnnLayerGradient& g, ParamBlock block) {
  if (block == ParamBlock::Weights) return flatten(g.weights);
  if (block == ParamBlock::Feedback) return flatten(g.feedback);
  return g.bias.values();
}

std::vector<double> gradient_entries(const RnnStepGradient& g, ParamBlock block) {
  if (block == ParamBlock::Weights) return flatten(g.weights);
  if (block == ParamBlock::Feedback) return flatten(g.feedback);
  return g.bias.values();
}

double batch_loss(const FnnModel& model, std::span<const FnnSample> batch) {
  double total = 0.0;
  for (const FnnSample& s : batch) total += loss_component(s.target, forward(model, s.input).output());
  return total;
}

double batch_loss(const RnnModel& model, std::span<const RnnSample> batch) {
  double total = 0.0;
  for (const RnnSample& s : batch) {
    const RnnTrace tr = forward_rnn(model, s.inputs);
    total += loss_sequence(s.targets, output_sequence(model, tr)).total;
  }
  return total;
}

NumericGradient fd_gradient(const FnnModel& model, std::span<const FnnSample> batch,
                            const FdConfig& cfg) {
  return fd_gradient_impl(model, batch, cfg);
}

NumericGradient fd_gradient(const RnnModel& model, std::span<const RnnSample> batch,
                            const FdConfig& cfg) {
  return fd_gradient_impl(model, batch, cfg);
}

GradientBundle to_bundle(const FnnModel& model, const NumericGradient& g) {
  GradientBundle b;
  for (const FnnLayer& l : model.layers)
    b.layers.push_back({Matrix(l.outputs(), l.inputs()), Vector(l.outputs()), {}});
  for (std::size_t i = 0; i < g.layout.size(); ++i) {
    const ParamRef& r = g.layout[i];
    LayerGradient& lg = b.layers[r.layer];
    if (r.block == ParamBlock::Weights) lg.weights(r.row, r.col) = g.values[i];
    else lg.bias[r.row] = g.values[i];
  }
  return b;
}

RnnGradientBundle to_bundle(const RnnModel& model, const NumericGradient& g) {
  RnnGradientBundle b;
  b.horizon = model.horizon;
  b.output_start = model.output_start;
  for (const RnnLayer& l : model.layers) {
    RnnLayerGradient lg;
    lg.weights = Matrix(l.outputs(), l.inputs());
    lg.feedback = Matrix(l.outputs(), l.outputs());
    lg.bias = Vector(l.outputs());
    b.layers.push_back(std::move(lg));
  }
  for (std::size_t i = 0; i < g.layout.size(); ++i) {
    const ParamRef& r = g.layout[i];
    RnnLayerGradient& lg = b.layers[r.layer];
    if (r.block == ParamBlock::Weights) lg.weights(r.row, r.col) = g.values[i];
    else if (r.block == ParamBlock::Feedback) lg.feedback(r.row, r.col) = g.values[i];
    else lg.bias[r.row] = g.values[i];
  }
  return b;
}

NumericHessian fd_hessian(const FnnModel& model, const FnnSample& sample, std::size_t layer,
                          ParamBlock block, const FdConfig& cfg) {
  validate_sample(model, sample);
  auto grad = [&](const FnnModel& m) {
    return gradient_entries(backprop(m, forward(m, sample.input), sample.target), layer, block);
  };
  auto loss = [&](const FnnModel& m) {
    return loss_component(sample.target, forward(m, sample.input).output());
  };
  return fd_hessian_impl(model, sample, layer, block, cfg, grad, loss);
}

NumericHessian fd_hessian(const RnnModel& model, const RnnSample& sample, std::size_t layer,
                          ParamBlock block, std::optional<std::size_t> step,
                          const FdConfig& cfg) {
  validate_sample(model, sample);
  if (step)
    require(*step >= model.output_start && *step <= model.horizon, ErrorCode::BadIndex,
            "step " + std::to_string(*step) + " outside " + std::to_string(model.output_start) +
                ".." + std::to_string(model.horizon));
  auto grad = [&](const RnnModel& m) {
    const RnnGradientBundle g = bptt(m, forward_rnn(m, sample.inputs), sample.targets);
    const RnnLayerGradient& lg = g.layers[layer];
    if (step) return gradient_entries(lg.steps[*step - m.output_start], block);
    return gradient_entries(lg, block);
  };
  auto loss = [&](const RnnModel& m) {
    const LossSequence l =
        loss_sequence(sample.targets, output_sequence(m, forward_rnn(m, sample.inputs)));
    return step ? l.per_step[*step - m.output_start] : l.total;
  };
  return fd_hessian_impl(model, sample, layer, block, cfg, grad, loss);
}

void VerificationReport::record(double analytic, double numeric, const Tolerance& tol,
                                const std::string& where) {
  const double err = std::abs(analytic - numeric);
  const double mag = std::max(std::abs(analytic), std::abs(numeric));
  const double allowance = std::max(tol.abs, tol.rel * mag);
  ++checked;
  max_abs_error = std::max(max_abs_error, err);
  if (mag > 0.0) max_rel_error = std::max(max_rel_error, err / mag);
  const double ratio = err / allowance;
  if (ratio > worst_ratio_) {
    worst_ratio_ = ratio;
    worst = where;
    worst_analytic = analytic;
    worst_numeric = numeric;
  }
  if (!(err <= allowance)) pass = false;
}

void VerificationReport::merge(const VerificationReport& other) {
  checked += other.checked;
  skipped += other.skipped;
  max_abs_error = std::max(max_abs_error, other.max_abs_error);
  max_rel_error = std::max(max_rel_error, other.max_rel_error);
  pass = pass && other.pass;
  if (other.worst_ratio_ > worst_ratio_) {
    worst_ratio_ = other.worst_ratio_;
    worst = other.worst;
    worst_analytic = other.worst_analytic;
    worst_numeric = other.worst_numeric;
  }
}

std::uint64_t Lcg::next() {
  state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
  return state_;
}

double Lcg::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Lcg::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Lcg::below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

namespace {

constexpr double kParamRange = 0.9;

Matrix random_matrix(std::size_t rows, std::size_t cols, Lcg& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-kParamRange, kParamRange);
  return m;
}

Vector random_vector(std::size_t n, Lcg& rng) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-kParamRange, kParamRange);
  return v;
}

void check_spec(const GeneratorSpec& spec) {
  require(spec.widths.size() >= 2, ErrorCode::InvalidArgument,
          "generator needs an input width and at least one layer width");
  for (std::size_t w : spec.widths)
    require(w > 0, ErrorCode::InvalidArgument, "generator widths must be positive");
}

}  // namespace

FnnModel generate_fnn(const GeneratorSpec& spec, Lcg& rng) {
  check_spec(spec);
  FnnModel model;
  for (std::size_t k = 1; k < spec.widths.size(); ++k)
    model.layers.push_back({random_matrix(spec.widths[k], spec.widths[k - 1], rng),
                            random_vector(spec.widths[k], rng), spec.activation});
  model.validate();
  return model;
}

RnnModel generate_rnn(const GeneratorSpec& spec, Lcg& rng) {
  check_spec(spec);
  RnnModel model;
  model.horizon = spec.horizon;
  model.output_start = spec.output_start;
  for (std::size_t k = 1; k < spec.widths.size(); ++k) {
    const std::size_t m = spec.widths[k];
    RnnLayer layer;
    layer.weights = random_matrix(m, spec.widths[k - 1], rng);
    layer.feedback = random_matrix(m, m, rng);
    layer.bias = random_vector(m, rng);
    layer.activation = spec.activation;
    model.layers.push_back(std::move(layer));
  }
  model.validate();
  return model;
}

FnnSample generate_sample(const FnnModel& model, Lcg& rng) {
  FnnSample s;
  s.input = random_vector(model.input_dim(), rng);
  s.target = random_vector(model.output_dim(), rng);
  return s;
}

RnnSample generate_sample(const RnnModel& model, Lcg& rng) {
  RnnSample s;
  for (std::size_t i = 0; i < model.horizon; ++i) s.inputs.push_back(random_vector(model.input_dim(), rng));
  for (std::size_t i = 0; i < model.output_steps(); ++i)
    s.targets.push_back(random_vector(model.output_dim(), rng));
  return s;
}

Model generate_model(const GeneratorSpec& spec, std::uint64_t seed) {
  Lcg rng(seed);
  if (spec.recurrent) return generate_rnn(spec, rng);
  return generate_fnn(spec, rng);
}

namespace {

constexpr int kMaxRedraws = 100000;

}  // namespace

FnnCase generate_fnn_case(const GeneratorSpec& spec, std::uint64_t seed) {
  Lcg rng(seed);
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    FnnCase c{generate_fnn(spec, rng), {}};
    c.sample = generate_sample(c.model, rng);
    if (min_relu_margin(c.model, forward(c.model, c.sample.input)) >= kReluMargin) return c;
  }
  fail(ErrorCode::InvalidArgument, "no kink-free ReLU draw found for seed " + std::to_string(seed));
}

RnnCase generate_rnn_case(const GeneratorSpec& spec, std::uint64_t seed) {
  Lcg rng(seed);
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    RnnCase c{generate_rnn(spec, rng), {}};
    c.sample = generate_sample(c.model, rng);
    if (min_relu_margin(c.model, forward_rnn(c.model, c.sample.inputs)) >= kReluMargin) return c;
  }
  fail(ErrorCode::InvalidArgument, "no kink-free ReLU draw found for seed " + std::to_string(seed));
}

}  // namespace hessnet
