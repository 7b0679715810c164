#include "hessnet/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hessnet/error.hpp"
#include "hessnet/fnn.hpp"
#include "hessnet/oracle.hpp"
#include "hessnet/spectral.hpp"

namespace hessnet {

namespace {

using json = nlohmann::ordered_json;

json to_json(const Vector& v) { return v.values(); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

json header(Command command, const Model& model) {
  static constexpr const char* names[] = {"forward", "grad", "hessian", "spectrum", "verify"};
  json doc;
  doc["schema"] = 1;
  doc["command"] = names[static_cast<int>(command)];
  doc["type"] = std::holds_alternative<FnnModel>(model) ? "fnn" : "rnn";
  return doc;
}

std::string finish(const json& doc) { return doc.dump(2) + "\n"; }

std::vector<std::size_t> selected_layers(std::size_t depth, const RunOptions& opt) {
  if (opt.layer) {
    require(*opt.layer < depth, ErrorCode::BadIndex,
            "layer " + std::to_string(*opt.layer + 1) + " out of range 1.." + std::to_string(depth));
    return {*opt.layer};
  }
  std::vector<std::size_t> all(depth);
  for (std::size_t k = 0; k < depth; ++k) all[k] = k;
  return all;
}

std::vector<std::size_t> selected_steps(const RnnModel& model, const RunOptions& opt) {
  if (opt.step) {
    require(*opt.step >= model.output_start && *opt.step <= model.horizon, ErrorCode::BadIndex,
            "time " + std::to_string(*opt.step) + " outside output steps " +
                std::to_string(model.output_start) + ".." + std::to_string(model.horizon));
    return {*opt.step};
  }
  std::vector<std::size_t> all;
  for (std::size_t t = model.output_start; t <= model.horizon; ++t) all.push_back(t);
  return all;
}

void reject_time(const RunOptions& opt) {
  require(!opt.step, ErrorCode::InvalidArgument, "--time applies to rnn models only");
}

template <class S>
const S& single_sample(const std::vector<S>& samples, const char* command) {
  require(samples.size() == 1, ErrorCode::InvalidArgument,
          std::string(command) + " expects a single sample, got a batch of " +
              std::to_string(samples.size()));
  return samples.front();
}

bool fits_dense(std::size_t dim) { return dim <= kDenseCap; }

std::string dense_note(std::size_t dim) {
  return "dense block omitted: size " + std::to_string(dim) + " exceeds " + std::to_string(kDenseCap);
}

// ---- forward ----------------------------------------------------------------

json forward_fnn(const FnnModel& model, const std::vector<FnnSample>& samples, const RunOptions& opt) {
  reject_time(opt);
  const auto layers = selected_layers(model.depth(), opt);
  json out = json::array();
  for (const FnnSample& s : samples) {
    const ForwardTrace tr = forward(model, s.input);
    json js;
    js["input"] = to_json(s.input);
    json jl = json::array();
    for (std::size_t k : layers)
      jl.push_back({{"layer", k + 1}, {"y", to_json(tr.pre[k])}, {"z", to_json(tr.act[k + 1])}});
    js["layers"] = std::move(jl);
    js["output"] = to_json(tr.output());
    js["loss"] = loss_component(s.target, tr.output());
    out.push_back(std::move(js));
  }
  return out;
}

json forward_rnn_report(const RnnModel& model, const std::vector<RnnSample>& samples,
                        const RunOptions& opt) {
  const auto layers = selected_layers(model.depth(), opt);
  if (opt.step) selected_steps(model, opt);
  json out = json::array();
  for (const RnnSample& s : samples) {
    const RnnTrace tr = forward_rnn(model, s.inputs);
    json js;
    json jl = json::array();
    for (std::size_t k : layers) {
      json steps = json::array();
      for (std::size_t t = 1; t <= model.horizon; ++t) {
        if (opt.step && t != *opt.step) continue;
        steps.push_back({{"t", t}, {"y", to_json(tr.y(k, t))}, {"z", to_json(tr.state(k, t))}});
      }
      jl.push_back({{"layer", k + 1}, {"steps", std::move(steps)}});
    }
    js["layers"] = std::move(jl);
    json outputs = json::array();
    for (std::size_t t = model.output_start; t <= model.horizon; ++t)
      outputs.push_back({{"t", t}, {"z", to_json(tr.output(t))}});
    js["outputs"] = std::move(outputs);
    const LossSequence loss = loss_sequence(s.targets, output_sequence(model, tr));
    json per = json::array();
    for (std::size_t i = 0; i < loss.per_step.size(); ++i)
      per.push_back({{"t", model.output_start + i}, {"E", loss.per_step[i]}});
    js["loss"] = {{"total", loss.total}, {"per_step", std::move(per)}};
    out.push_back(std::move(js));
  }
  return out;
}

// ---- grad -------------------------------------------------------------------

json grad_fnn(const FnnModel& model, const std::vector<FnnSample>& samples, const RunOptions& opt) {
  reject_time(opt);
  const GradientBundle g = minibatch_gradient(model, samples);
  json layers = json::array();
  for (std::size_t k : selected_layers(model.depth(), opt)) {
    const LayerGradient& lg = g.layers[k];
    json factors = json::array();
    for (std::size_t i = 0; i < lg.factors.size(); ++i)
      factors.push_back({{"sample", i + 1}, {"v", to_json(lg.factors[i].left)}, {"z", to_json(lg.factors[i].right)}});
    layers.push_back({{"layer", k + 1},
                      {"G_w", to_json(lg.weights)},
                      {"G_b", to_json(lg.bias)},
                      {"rank_w", numerical_rank(lg.weights)},
                      {"factors", std::move(factors)}});
  }
  return layers;
}

json rnn_factor_list(const std::vector<OuterFactor>& factors, std::size_t horizon) {
  json out = json::array();
  for (std::size_t i = 0; i < factors.size(); ++i)
    out.push_back({{"sample", i / horizon + 1},
                   {"s", i % horizon + 1},
                   {"v", to_json(factors[i].left)},
                   {"z", to_json(factors[i].right)}});
  return out;
}

json grad_rnn(const RnnModel& model, const std::vector<RnnSample>& samples, const RunOptions& opt) {
  const RnnGradientBundle g = minibatch_gradient_rnn(model, samples);
  const auto steps = selected_steps(model, opt);
  json layers = json::array();
  for (std::size_t k : selected_layers(model.depth(), opt)) {
    const RnnLayerGradient& lg = g.layers[k];
    json js = json::array();
    for (std::size_t t : steps) {
      const RnnStepGradient& sg = lg.steps[t - model.output_start];
      js.push_back({{"t", t},
                    {"G_w", to_json(sg.weights)},
                    {"G_u", to_json(sg.feedback)},
                    {"G_b", to_json(sg.bias)},
                    {"rank_w", numerical_rank(sg.weights)},
                    {"rank_u", numerical_rank(sg.feedback)}});
    }
    layers.push_back({{"layer", k + 1},
                      {"G_w", to_json(lg.weights)},
                      {"G_u", to_json(lg.feedback)},
                      {"G_b", to_json(lg.bias)},
                      {"rank_w", numerical_rank(lg.weights)},
                      {"rank_u", numerical_rank(lg.feedback)},
                      {"factors_w", rnn_factor_list(lg.weight_factors, model.horizon)},
                      {"factors_u", rnn_factor_list(lg.feedback_factors, model.horizon)},
                      {"steps", std::move(js)}});
  }
  return layers;
}

// ---- hessian ----------------------------------------------------------------

StructuredHessian fnn_hessian_for(const FnnModel& model, const FnnSample& s, std::string& path) {
  const ForwardTrace tr = forward(model, s.input);
  path = all_relu(model) ? "relu" : "general";
  return all_relu(model) ? hessian_relu(model, tr, s.target) : hessian(model, tr, s.target);
}

RnnStructuredHessian rnn_hessian_for(const RnnModel& model, const RnnSample& s, std::string& path) {
  const RnnTrace tr = forward_rnn(model, s.inputs);
  path = all_relu(model) ? "relu" : "general";
  return all_relu(model) ? hessian_rnn_relu(model, tr, s.targets) : hessian_rnn(model, tr, s.targets);
}

json hessian_fnn(const FnnModel& model, const std::vector<FnnSample>& samples,
                 const RunOptions& opt, json& doc) {
  reject_time(opt);
  const FnnSample& s = single_sample(samples, "hessian");
  std::string path;
  const StructuredHessian h = fnn_hessian_for(model, s, path);
  doc["path"] = path;
  json layers = json::array();
  for (std::size_t k : selected_layers(model.depth(), opt)) {
    const LayerHessian& lh = h.layers[k];
    json jl{{"layer", k + 1},
            {"left", to_json(lh.left)},
            {"right", to_json(lh.right)},
            {"curvature", to_json(lh.curvature)},
            {"H_b", to_json(assemble_bias(h, k))}};
    if (opt.dense) {
      const std::size_t dim = lh.left.rows() * lh.right.size();
      if (fits_dense(dim)) jl["dense"] = {{"H_w", to_json(assemble_dense(h, k))}};
      else jl["dense_omitted"] = dense_note(dim);
    }
    layers.push_back(std::move(jl));
  }
  return layers;
}

json hessian_rnn_report(const RnnModel& model, const std::vector<RnnSample>& samples,
                        const RunOptions& opt, json& doc) {
  const RnnSample& s = single_sample(samples, "hessian");
  const auto steps = selected_steps(model, opt);
  const auto layers_sel = selected_layers(model.depth(), opt);
  std::string path;
  const RnnStructuredHessian h = rnn_hessian_for(model, s, path);
  doc["path"] = path;
  json layers = json::array();
  for (std::size_t k : layers_sel) {
    json js = json::array();
    for (std::size_t t : steps) {
      const RnnStepHessian& sh = h.at(k, t);
      json terms = json::array();
      for (std::size_t a = 1; a <= t; ++a)
        for (std::size_t b = 1; b <= t; ++b)
          terms.push_back({{"s", a}, {"zeta", b}, {"C", to_json(sh.block(a, b))}});
      json wr = json::array();
      json fr = json::array();
      for (std::size_t i = 0; i < t; ++i) {
        wr.push_back(to_json(sh.weight_right[i]));
        fr.push_back(to_json(sh.feedback_right[i]));
      }
      json ft = json::array();
      for (const FeedbackTerm& f : sh.feedback_terms)
        ft.push_back({{"s", f.s},
                      {"zeta", f.zeta},
                      {"delta", to_json(f.delta)},
                      {"state_jacobian", to_json(f.state_jacobian)},
                      {"state", to_json(f.state)}});
      json jt{{"t", t},
              {"terms", std::move(terms)},
              {"weight_right", std::move(wr)},
              {"feedback_right", std::move(fr)},
              {"feedback_terms", std::move(ft)},
              {"H_b", to_json(assemble_dense_rnn(h, k, t, ParamBlock::Bias))}};
      if (opt.dense) {
        const std::size_t m = sh.units;
        const std::size_t dw = m * sh.weight_right.front().size();
        const std::size_t du = m * m;
        json dense = json::object();
        json omitted = json::array();
        if (fits_dense(dw)) dense["H_w"] = to_json(assemble_dense_rnn(h, k, t, ParamBlock::Weights));
        else omitted.push_back("H_w " + dense_note(dw));
        if (fits_dense(du)) dense["H_u"] = to_json(assemble_dense_rnn(h, k, t, ParamBlock::Feedback));
        else omitted.push_back("H_u " + dense_note(du));
        jt["dense"] = std::move(dense);
        if (!omitted.empty()) jt["dense_omitted"] = std::move(omitted);
      }
      js.push_back(std::move(jt));
    }
    layers.push_back({{"layer", k + 1}, {"steps", std::move(js)}});
  }
  return layers;
}

// ---- spectrum ---------------------------------------------------------------

struct CsvTable {
  std::ostringstream out;
  explicit CsvTable(const char* header) { out << header << "\n"; }
};

std::string csv_number(double v) {
  json j = v;
  return j.dump();
}

json bounds_json(const SpectralReport& r) {
  json b = json::array();
  for (const Interval& iv : r.bounds) b.push_back({iv.lo, iv.hi});
  return b;
}

json spectrum_fnn(const FnnModel& model, const std::vector<FnnSample>& samples,
                  const RunOptions& opt, json& doc, CsvTable& csv) {
  reject_time(opt);
  const FnnSample& s = single_sample(samples, "spectrum");
  std::string path;
  const StructuredHessian h = fnn_hessian_for(model, s, path);
  doc["path"] = path;
  json layers = json::array();
  for (std::size_t k : selected_layers(model.depth(), opt)) {
    const SpectralReport r = fnn_spectrum(h, k);
    layers.push_back({{"layer", k + 1},
                      {"m", h.layers[k].left.rows()},
                      {"n", h.layers[k].right.size()},
                      {"eigenvalues", to_json(r.exact_eigenvalues)},
                      {"factor_eigenvalues", to_json(r.factor_eigenvalues)},
                      {"scale", r.scale},
                      {"zero_multiplicity", r.zero_multiplicity},
                      {"definiteness", definiteness_name(r.definiteness)}});
    for (std::size_t q = 0; q < r.exact_eigenvalues.size(); ++q)
      csv.out << k + 1 << ",," << q + 1 << "," << csv_number(r.bounds[q].lo) << ","
              << csv_number(r.bounds[q].hi) << "," << csv_number(r.exact_eigenvalues[q]) << "\n";
  }
  return layers;
}

json spectrum_rnn(const RnnModel& model, const std::vector<RnnSample>& samples,
                  const RunOptions& opt, json& doc, CsvTable& csv) {
  const RnnSample& s = single_sample(samples, "spectrum");
  const auto steps = selected_steps(model, opt);
  const auto layers_sel = selected_layers(model.depth(), opt);
  std::string path;
  const RnnStructuredHessian h = rnn_hessian_for(model, s, path);
  doc["path"] = path;
  json layers = json::array();
  for (std::size_t k : layers_sel) {
    json js = json::array();
    for (std::size_t t : steps) {
      const RnnStepHessian& sh = h.at(k, t);
      const SpectralReport anchor = kron_rank1_spectrum(sh.block(t, t), sh.weight_right[t - 1]);
      const SpectralReport r = rnn_spectrum_bounds(h, k, t);
      json pairs = json::array();
      for (const auto& [a, b] : bound_index_pairs(t)) pairs.push_back({a, b});
      json jt{{"t", t},
              {"anchor", {{"eigenvalues", to_json(anchor.exact_eigenvalues)},
                          {"factor_eigenvalues", to_json(anchor.factor_eigenvalues)},
                          {"scale", anchor.scale},
                          {"zero_multiplicity", anchor.zero_multiplicity}}},
              {"index_pairs", std::move(pairs)},
              {"bounds", bounds_json(r)},
              {"exact", r.exact},
              {"definiteness", definiteness_name(r.definiteness)}};
      const std::size_t dim = sh.units * sh.weight_right.front().size();
      Vector dense;
      if (fits_dense(dim)) {
        dense = sym_eigenvalues(assemble_dense_rnn(h, k, t, ParamBlock::Weights));
        double radius = 0.0;
        for (double v : dense) radius = std::max(radius, std::abs(v));
        const double slack = 1e-9 * std::max(1.0, radius);
        bool contained = true;
        for (std::size_t q = 0; q < dense.size(); ++q)
          contained = contained && dense[q] >= r.bounds[q].lo - slack && dense[q] <= r.bounds[q].hi + slack;
        jt["dense_eigenvalues"] = to_json(dense);
        jt["contained"] = contained;
      } else {
        jt["dense_omitted"] = dense_note(dim);
      }
      for (std::size_t q = 0; q < r.bounds.size(); ++q)
        csv.out << k + 1 << "," << t << "," << q + 1 << "," << csv_number(r.bounds[q].lo) << ","
                << csv_number(r.bounds[q].hi) << "," << (dense.empty() ? "" : csv_number(dense[q]))
                << "\n";
      js.push_back(std::move(jt));
    }
    layers.push_back({{"layer", k + 1}, {"steps", std::move(js)}});
  }
  return layers;
}

// ---- verify -----------------------------------------------------------------

struct VerifyState {
  VerificationReport gradient{"gradient"};
  VerificationReport hessian{"hessian"};
  VerificationReport symmetry{"hessian-symmetry"};
  json warnings = json::array();
};

Tolerance gradient_tolerance(const RunOptions& opt) { return {1e-6, opt.tolerance}; }
Tolerance hessian_tolerance(const RunOptions& opt) { return {1e-5, 10.0 * opt.tolerance}; }

void check_dense(VerifyState& st, const Matrix& analytic, const NumericHessian& numeric,
                 const std::vector<ParamRef>& refs, const Tolerance& tol, const std::string& prefix) {
  const std::size_t n = refs.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (numeric.skipped[j]) {
      st.hessian.skipped += n;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i)
      st.hessian.record(analytic(i, j), numeric.values(i, j), tol,
                        prefix + "d2E/d" + describe(refs[i]) + " d" + describe(refs[j]));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      st.symmetry.record(analytic(i, j), analytic(j, i), Tolerance{1e-9, 0.0},
                         prefix + describe(refs[i]) + " <-> " + describe(refs[j]));
}

template <class M>
void apply_perturbation(const M& model, const RunOptions& opt, std::vector<ParamRef>& layout,
                        std::vector<double>& analytic) {
  if (!opt.perturb) return;
  const Perturbation& p = *opt.perturb;
  const std::size_t layer = opt.layer.value_or(0);
  require(layer < model.depth(), ErrorCode::BadIndex, "perturbation layer out of range");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const ParamRef& r = layout[i];
    if (r.layer == layer && r.block == p.block && r.row == p.row && r.col == p.col) {
      analytic[i] += p.delta;
      return;
    }
  }
  fail(ErrorCode::BadIndex, "perturbation entry (" + std::to_string(p.row) + "," +
                                std::to_string(p.col) + ") outside layer " + std::to_string(layer + 1));
}

void note_skips(VerifyState& st, const NumericGradient& ng) {
  const auto n = static_cast<std::size_t>(std::count(ng.skipped.begin(), ng.skipped.end(), true));
  if (n > 0)
    st.warnings.push_back(std::to_string(n) +
                          " gradient entries skipped: finite-difference step meets a ReLU kink");
}

void verify_fnn(const FnnModel& model, const std::vector<FnnSample>& samples,
                const RunOptions& opt, VerifyState& st) {
  reject_time(opt);
  const auto layers = selected_layers(model.depth(), opt);
  const GradientBundle g = minibatch_gradient(model, samples);
  const NumericGradient ng = fd_gradient(model, samples);
  note_skips(st, ng);
  std::vector<ParamRef> layout = ng.layout;
  std::vector<double> analytic;
  for (const ParamRef& r : layout) {
    const LayerGradient& lg = g.layers[r.layer];
    analytic.push_back(r.block == ParamBlock::Weights ? lg.weights(r.row, r.col) : lg.bias[r.row]);
  }
  apply_perturbation(model, opt, layout, analytic);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (std::find(layers.begin(), layers.end(), layout[i].layer) == layers.end()) continue;
    if (ng.skipped[i]) {
      ++st.gradient.skipped;
      continue;
    }
    st.gradient.record(analytic[i], ng.values[i], gradient_tolerance(opt), describe(layout[i]));
  }

  for (std::size_t si = 0; si < samples.size(); ++si) {
    const FnnSample& s = samples[si];
    const ForwardTrace tr = forward(model, s.input);
    if (min_relu_margin(model, tr) < kReluMargin)
      st.warnings.push_back("sample " + std::to_string(si + 1) +
                            ": ReLU pre-activation within 0.1 of the kink");
    StructuredHessian h;
    try {
      std::string path;
      h = fnn_hessian_for(model, s, path);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ReluKink) throw;
      st.warnings.push_back("sample " + std::to_string(si + 1) + ": Hessian check skipped: " + e.what());
      continue;
    }
    const std::string prefix = samples.size() > 1 ? "sample " + std::to_string(si + 1) + " " : "";
    for (std::size_t k : layers) {
      check_dense(st, assemble_dense(h, k), fd_hessian(model, s, k, ParamBlock::Weights),
                  block_layout(model, k, ParamBlock::Weights), hessian_tolerance(opt), prefix);
      check_dense(st, assemble_bias(h, k), fd_hessian(model, s, k, ParamBlock::Bias),
                  block_layout(model, k, ParamBlock::Bias), hessian_tolerance(opt), prefix);
    }
  }
}

void verify_rnn(const RnnModel& model, const std::vector<RnnSample>& samples,
                const RunOptions& opt, VerifyState& st) {
  const auto layers = selected_layers(model.depth(), opt);
  const auto steps = selected_steps(model, opt);
  const RnnGradientBundle g = minibatch_gradient_rnn(model, samples);
  const NumericGradient ng = fd_gradient(model, samples);
  note_skips(st, ng);
  std::vector<ParamRef> layout = ng.layout;
  std::vector<double> analytic;
  for (const ParamRef& r : layout) {
    const RnnLayerGradient& lg = g.layers[r.layer];
    if (r.block == ParamBlock::Weights) analytic.push_back(lg.weights(r.row, r.col));
    else if (r.block == ParamBlock::Feedback) analytic.push_back(lg.feedback(r.row, r.col));
    else analytic.push_back(lg.bias[r.row]);
  }
  apply_perturbation(model, opt, layout, analytic);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (std::find(layers.begin(), layers.end(), layout[i].layer) == layers.end()) continue;
    if (ng.skipped[i]) {
      ++st.gradient.skipped;
      continue;
    }
    st.gradient.record(analytic[i], ng.values[i], gradient_tolerance(opt), describe(layout[i]));
  }

  for (std::size_t si = 0; si < samples.size(); ++si) {
    const RnnSample& s = samples[si];
    const RnnTrace tr = forward_rnn(model, s.inputs);
    if (min_relu_margin(model, tr) < kReluMargin)
      st.warnings.push_back("sample " + std::to_string(si + 1) +
                            ": ReLU pre-activation within 0.1 of the kink");
    RnnStructuredHessian h;
    try {
      std::string path;
      h = rnn_hessian_for(model, s, path);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ReluKink) throw;
      st.warnings.push_back("sample " + std::to_string(si + 1) + ": Hessian check skipped: " + e.what());
      continue;
    }
    const std::string sample_prefix = samples.size() > 1 ? "sample " + std::to_string(si + 1) + " " : "";
    for (std::size_t k : layers)
      for (std::size_t t : steps)
        for (ParamBlock b : {ParamBlock::Weights, ParamBlock::Feedback, ParamBlock::Bias})
          check_dense(st, assemble_dense_rnn(h, k, t, b), fd_hessian(model, s, k, b, t),
                      block_layout(model, k, b), hessian_tolerance(opt),
                      sample_prefix + "t=" + std::to_string(t) + " ");
  }
}

json check_json(const VerificationReport& r, const Tolerance& tol) {
  return {{"name", r.label},
          {"pass", r.pass},
          {"abs_tol", tol.abs},
          {"rel_tol", tol.rel},
          {"max_abs_error", r.max_abs_error},
          {"max_rel_error", r.max_rel_error},
          {"worst", r.worst},
          {"worst_analytic", r.worst_analytic},
          {"worst_numeric", r.worst_numeric},
          {"checked", r.checked},
          {"skipped", r.skipped}};
}

void check_csv(std::ostringstream& out, const VerificationReport& r) {
  out << r.label << "," << (r.pass ? "pass" : "fail") << "," << csv_number(r.max_abs_error) << ","
      << csv_number(r.max_rel_error) << ",\"" << r.worst << "\"," << r.checked << "," << r.skipped
      << "\n";
}

}  // namespace

RunResult run_command(Command command, const Model& model, const SampleSet& samples,
                      const RunOptions& opt) {
  require(std::holds_alternative<FnnModel>(model) == std::holds_alternative<std::vector<FnnSample>>(samples),
          ErrorCode::InvalidArgument, "sample kind does not match model kind");
  require(opt.format == Format::Json || command == Command::Spectrum || command == Command::Verify,
          ErrorCode::InvalidArgument, "csv output is available for spectrum and verify only");
  require(opt.tolerance > 0.0 && std::isfinite(opt.tolerance), ErrorCode::InvalidArgument,
          "tolerance must be positive");

  const auto* fnn = std::get_if<FnnModel>(&model);
  const auto* rnn = std::get_if<RnnModel>(&model);
  const auto* fs = std::get_if<std::vector<FnnSample>>(&samples);
  const auto* rs = std::get_if<std::vector<RnnSample>>(&samples);
  require(fnn ? !fs->empty() : !rs->empty(), ErrorCode::InvalidArgument, "no samples given");

  json doc = header(command, model);
  RunResult result;
  switch (command) {
    case Command::Forward:
      doc["samples"] = fnn ? forward_fnn(*fnn, *fs, opt) : forward_rnn_report(*rnn, *rs, opt);
      break;
    case Command::Grad:
      doc["batch_size"] = fnn ? fs->size() : rs->size();
      doc["layers"] = fnn ? grad_fnn(*fnn, *fs, opt) : grad_rnn(*rnn, *rs, opt);
      break;
    case Command::Hessian:
      doc["layers"] = fnn ? hessian_fnn(*fnn, *fs, opt, doc) : hessian_rnn_report(*rnn, *rs, opt, doc);
      break;
    case Command::Spectrum: {
      CsvTable csv("layer,t,q,lo,hi,eigenvalue");
      doc["layers"] = fnn ? spectrum_fnn(*fnn, *fs, opt, doc, csv) : spectrum_rnn(*rnn, *rs, opt, doc, csv);
      if (opt.format == Format::Csv) return {csv.out.str(), true};
      break;
    }
    case Command::Verify: {
      VerifyState st;
      if (fnn) verify_fnn(*fnn, *fs, opt, st);
      else verify_rnn(*rnn, *rs, opt, st);
      result.pass = st.gradient.pass && st.hessian.pass && st.symmetry.pass;
      if (opt.format == Format::Csv) {
        std::ostringstream out;
        out << "check,result,max_abs_error,max_rel_error,worst,checked,skipped\n";
        check_csv(out, st.gradient);
        check_csv(out, st.hessian);
        check_csv(out, st.symmetry);
        return {out.str(), result.pass};
      }
      doc["pass"] = result.pass;
      doc["checks"] = json::array({check_json(st.gradient, gradient_tolerance(opt)),
                                   check_json(st.hessian, hessian_tolerance(opt)),
                                   check_json(st.symmetry, Tolerance{1e-9, 0.0})});
      doc["warnings"] = std::move(st.warnings);
      break;
    }
  }
  result.text = finish(doc);
  return result;
}

}  // namespace hessnet
