#include "hessnet/hessnet.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "hessnet/error.hpp"
#include "hessnet/fnn.hpp"
#include "hessnet/oracle.hpp"
#include "hessnet/report.hpp"
#include "hessnet/rnn.hpp"
#include "hessnet/serialize.hpp"

struct hn_model {
  hessnet::Model value;
};

struct hn_sample {
  hessnet::SampleSet value;
};

namespace {

thread_local std::string g_last_error;

hn_status to_status(hessnet::ErrorCode code) {
  using hessnet::ErrorCode;
  switch (code) {
    case ErrorCode::DimensionMismatch: return HN_ERR_DIMENSION;
    case ErrorCode::InvalidArgument: return HN_ERR_INVALID_ARGUMENT;
    case ErrorCode::InvalidModel: return HN_ERR_INVALID_MODEL;
    case ErrorCode::Parse: return HN_ERR_PARSE;
    case ErrorCode::Io: return HN_ERR_IO;
    case ErrorCode::BadIndex: return HN_ERR_BAD_INDEX;
    case ErrorCode::NotSymmetric: return HN_ERR_NOT_SYMMETRIC;
    case ErrorCode::ReluKink: return HN_ERR_KINK;
    case ErrorCode::NotRelu: return HN_ERR_NOT_RELU;
  }
  return HN_ERR_INTERNAL;
}

template <class F>
hn_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return HN_OK;
  } catch (const hessnet::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HN_ERR_INTERNAL;
  }
}

void require_arg(const void* p, const char* name) {
  hessnet::require(p != nullptr, hessnet::ErrorCode::InvalidArgument,
                   std::string(name) + " must not be null");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

hessnet::SampleSet load_samples(std::string_view text, const hessnet::Model& model) {
  if (const auto* f = std::get_if<hessnet::FnnModel>(&model)) return hessnet::load_fnn_samples(text, *f);
  return hessnet::load_rnn_samples(text, std::get<hessnet::RnnModel>(model));
}

hessnet::ParamBlock to_block(hn_param p) {
  switch (p) {
    case HN_PARAM_W: return hessnet::ParamBlock::Weights;
    case HN_PARAM_U: return hessnet::ParamBlock::Feedback;
    case HN_PARAM_B: return hessnet::ParamBlock::Bias;
  }
  hessnet::fail(hessnet::ErrorCode::InvalidArgument, "unknown parameter block");
}

std::size_t layer_index(std::size_t layer, std::size_t depth) {
  hessnet::require(layer >= 1 && layer <= depth, hessnet::ErrorCode::BadIndex,
                   "layer " + std::to_string(layer) + " out of range 1.." + std::to_string(depth));
  return layer - 1;
}

}  // namespace

extern "C" {

void hn_run_options_init(hn_run_options* opts) {
  if (!opts) return;
  *opts = hn_run_options{};
  opts->format = HN_FORMAT_JSON;
  opts->tolerance = 1e-5;
  opts->perturb_param = HN_PARAM_W;
}

const char* hn_status_name(hn_status status) {
  switch (status) {
    case HN_OK: return "ok";
    case HN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case HN_ERR_PARSE: return "parse error";
    case HN_ERR_DIMENSION: return "dimension mismatch";
    case HN_ERR_INVALID_MODEL: return "invalid model";
    case HN_ERR_IO: return "i/o error";
    case HN_ERR_BAD_INDEX: return "index out of range";
    case HN_ERR_KINK: return "Hessian undefined at ReLU kink";
    case HN_ERR_NOT_RELU: return "model is not all-ReLU";
    case HN_ERR_NOT_SYMMETRIC: return "matrix not symmetric";
    case HN_ERR_VERIFICATION: return "verification failed";
    case HN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* hn_last_error(void) { return g_last_error.c_str(); }

void hn_string_free(char* s) { std::free(s); }

hn_status hn_model_load_file(const char* path, hn_model** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new hn_model{hessnet::load_model(hessnet::read_text_file(path))};
  });
}

hn_status hn_model_load_json(const char* text, hn_model** out) {
  return guarded([&] {
    require_arg(text, "text");
    require_arg(out, "out");
    *out = new hn_model{hessnet::load_model(text)};
  });
}

hn_status hn_model_generate(hn_model_kind kind, const size_t* widths, size_t count,
                            const char* activation, size_t tau, size_t a, uint64_t seed,
                            hn_model** out) {
  return guarded([&] {
    require_arg(widths, "widths");
    require_arg(activation, "activation");
    require_arg(out, "out");
    hessnet::GeneratorSpec spec;
    spec.recurrent = kind == HN_MODEL_RNN;
    spec.widths.assign(widths, widths + count);
    spec.activation = hessnet::parse_activation(activation);
    spec.horizon = tau;
    spec.output_start = a;
    *out = new hn_model{hessnet::generate_model(spec, seed)};
  });
}

void hn_model_free(hn_model* model) { delete model; }

hn_status hn_model_kind_of(const hn_model* model, hn_model_kind* kind) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(kind, "kind");
    *kind = std::holds_alternative<hessnet::FnnModel>(model->value) ? HN_MODEL_FNN : HN_MODEL_RNN;
  });
}

hn_status hn_model_num_layers(const hn_model* model, size_t* count) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(count, "count");
    *count = std::visit([](const auto& m) { return m.depth(); }, model->value);
  });
}

hn_status hn_model_layer_shape(const hn_model* model, size_t layer, size_t* rows, size_t* cols) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(rows, "rows");
    require_arg(cols, "cols");
    std::visit(
        [&](const auto& m) {
          const auto& l = m.layers[layer_index(layer, m.depth())];
          *rows = l.outputs();
          *cols = l.inputs();
        },
        model->value);
  });
}

hn_status hn_model_to_json(const hn_model* model, char** out) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(out, "out");
    *out = copy_string(hessnet::save_model(model->value));
  });
}

hn_status hn_sample_load_file(const char* path, const hn_model* model, hn_sample** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(model, "model");
    require_arg(out, "out");
    *out = new hn_sample{load_samples(hessnet::read_text_file(path), model->value)};
  });
}

hn_status hn_sample_load_json(const char* text, const hn_model* model, hn_sample** out) {
  return guarded([&] {
    require_arg(text, "text");
    require_arg(model, "model");
    require_arg(out, "out");
    *out = new hn_sample{load_samples(text, model->value)};
  });
}

hn_status hn_sample_generate(const hn_model* model, uint64_t seed, hn_sample** out) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(out, "out");
    hessnet::Lcg rng(seed);
    if (const auto* f = std::get_if<hessnet::FnnModel>(&model->value))
      *out = new hn_sample{std::vector<hessnet::FnnSample>{hessnet::generate_sample(*f, rng)}};
    else
      *out = new hn_sample{std::vector<hessnet::RnnSample>{
          hessnet::generate_sample(std::get<hessnet::RnnModel>(model->value), rng)}};
  });
}

void hn_sample_free(hn_sample* sample) { delete sample; }

hn_status hn_sample_count(const hn_sample* sample, size_t* count) {
  return guarded([&] {
    require_arg(sample, "sample");
    require_arg(count, "count");
    *count = std::visit([](const auto& v) { return v.size(); }, sample->value);
  });
}

hn_status hn_sample_to_json(const hn_sample* sample, char** out) {
  return guarded([&] {
    require_arg(sample, "sample");
    require_arg(out, "out");
    std::string text = std::visit(
        [](const auto& v) {
          if (v.size() == 1) return hessnet::save_sample(v.front()) + "\n";
          std::string s = "[\n";
          for (std::size_t i = 0; i < v.size(); ++i) s += hessnet::save_sample(v[i]) + (i + 1 < v.size() ? ",\n" : "\n");
          return s + "]\n";
        },
        sample->value);
    *out = copy_string(text);
  });
}

hn_status hn_loss(const hn_model* model, const hn_sample* sample, double* loss) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(sample, "sample");
    require_arg(loss, "loss");
    if (const auto* f = std::get_if<hessnet::FnnModel>(&model->value)) {
      const auto* s = std::get_if<std::vector<hessnet::FnnSample>>(&sample->value);
      hessnet::require(s != nullptr, hessnet::ErrorCode::InvalidArgument, "sample kind does not match model");
      *loss = hessnet::batch_loss(*f, *s);
    } else {
      const auto* s = std::get_if<std::vector<hessnet::RnnSample>>(&sample->value);
      hessnet::require(s != nullptr, hessnet::ErrorCode::InvalidArgument, "sample kind does not match model");
      *loss = hessnet::batch_loss(std::get<hessnet::RnnModel>(model->value), *s);
    }
  });
}

hn_status hn_hessian_dense(const hn_model* model, const hn_sample* sample, size_t layer,
                           size_t time, hn_param param, double* buf, size_t buf_len,
                           size_t* dim) {
  return guarded([&] {
    using namespace hessnet;
    require_arg(model, "model");
    require_arg(sample, "sample");
    require_arg(dim, "dim");
    Matrix h;
    if (const auto* f = std::get_if<FnnModel>(&model->value)) {
      const auto* s = std::get_if<std::vector<FnnSample>>(&sample->value);
      require(s != nullptr, ErrorCode::InvalidArgument, "sample kind does not match model");
      require(param != HN_PARAM_U, ErrorCode::InvalidArgument, "fnn models have no feedback weights");
      require(time == 0, ErrorCode::InvalidArgument, "time applies to rnn models only");
      const std::size_t k = layer_index(layer, f->depth());
      const FnnSample& x = s->front();
      const StructuredHessian sh = hessian(*f, forward(*f, x.input), x.target);
      h = param == HN_PARAM_W ? assemble_dense(sh, k) : assemble_bias(sh, k);
    } else {
      const auto& r = std::get<RnnModel>(model->value);
      const auto* s = std::get_if<std::vector<RnnSample>>(&sample->value);
      require(s != nullptr, ErrorCode::InvalidArgument, "sample kind does not match model");
      const std::size_t k = layer_index(layer, r.depth());
      const RnnSample& x = s->front();
      const RnnStructuredHessian sh = hessian_rnn(r, forward_rnn(r, x.inputs), x.targets);
      h = time == 0 ? assemble_dense_rnn_total(sh, k, to_block(param))
                    : assemble_dense_rnn(sh, k, time, to_block(param));
    }
    *dim = h.rows();
    require(buf != nullptr && buf_len >= h.rows() * h.cols(), ErrorCode::InvalidArgument,
            "buffer holds " + std::to_string(buf_len) + " values, need " +
                std::to_string(h.rows() * h.cols()));
    std::copy(h.data().begin(), h.data().end(), buf);
  });
}

hn_status hn_run(hn_command command, const hn_model* model, const hn_sample* sample,
                 const hn_run_options* opts, char** report, int* verdict) {
  return guarded([&] {
    using namespace hessnet;
    require_arg(model, "model");
    require_arg(sample, "sample");
    require_arg(report, "report");
    hn_run_options defaults;
    hn_run_options_init(&defaults);
    const hn_run_options& o = opts ? *opts : defaults;
    require(command >= HN_CMD_FORWARD && command <= HN_CMD_VERIFY, ErrorCode::InvalidArgument,
            "unknown command");

    RunOptions ro;
    if (o.layer != 0) ro.layer = o.layer - 1;
    if (o.time != 0) ro.step = o.time;
    ro.dense = o.dense != 0;
    ro.format = o.format == HN_FORMAT_CSV ? Format::Csv : Format::Json;
    ro.tolerance = o.tolerance;
    if (o.perturb) ro.perturb = Perturbation{to_block(o.perturb_param), o.perturb_row, o.perturb_col, o.perturb_delta};

    const RunResult r = run_command(static_cast<Command>(command), model->value, sample->value, ro);
    *report = copy_string(r.text);
    if (verdict) *verdict = r.pass ? 1 : 0;
  });
}

}  // extern "C"
