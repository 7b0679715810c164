#include "hessnet/serialize.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hessnet/error.hpp"

namespace hessnet {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& what) { fail(ErrorCode::Parse, what); }

double read_number(const json& j, const std::string& where) {
  if (!j.is_number()) schema_error(where + ": expected a number");
  return j.get<double>();
}

Vector read_vector(const json& j, const std::string& where) {
  if (!j.is_array()) schema_error(where + ": expected an array of numbers");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v[i] = read_number(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

Matrix read_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) schema_error(where + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const Vector first = read_vector(j[0], where + "[0]");
  const std::size_t cols = first.size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const Vector r = i == 0 ? first : read_vector(j[i], where + "[" + std::to_string(i) + "]");
    if (r.size() != cols) schema_error(where + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = r[c];
  }
  return m;
}

json write_matrix(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

json write_vector(const Vector& v) { return v.values(); }

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where + ": missing \"" + key + "\"");
  return *it;
}

std::size_t read_count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    schema_error(where + ": expected a non-negative integer");
  return j.get<std::size_t>();
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    schema_error(std::string("malformed JSON: ") + e.what());
  }
}

Activation read_activation(const json& layer, const std::string& where) {
  const json& a = field(layer, "activation", where);
  if (!a.is_string()) schema_error(where + ": activation must be a string");
  return parse_activation(a.get<std::string>());
}

std::vector<json> sample_objects(const json& doc) {
  std::vector<json> out;
  if (doc.is_array()) {
    if (doc.empty()) schema_error("sample batch is empty");
    for (const json& s : doc) out.push_back(s);
  } else {
    out.push_back(doc);
  }
  for (const json& s : out)
    if (!s.is_object()) schema_error("sample must be a JSON object");
  return out;
}

}  // namespace

Model load_model(std::string_view text) {
  const json doc = parse_document(text);
  if (!doc.is_object()) schema_error("model document must be a JSON object");
  const json& type = field(doc, "type", "model");
  if (!type.is_string()) schema_error("model: \"type\" must be a string");
  const std::string kind = type.get<std::string>();
  const json& layers = field(doc, "layers", "model");
  if (!layers.is_array()) schema_error("model: \"layers\" must be an array");

  if (kind == "fnn") {
    FnnModel model;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const std::string where = "layers[" + std::to_string(k) + "]";
      const json& l = layers[k];
      if (!l.is_object()) schema_error(where + ": expected an object");
      if (l.contains("U")) schema_error(where + ": \"U\" is only valid for rnn models");
      model.layers.push_back({read_matrix(field(l, "W", where), where + ".W"),
                              read_vector(field(l, "b", where), where + ".b"),
                              read_activation(l, where)});
    }
    model.validate();
    return model;
  }
  if (kind == "rnn") {
    RnnModel model;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const std::string where = "layers[" + std::to_string(k) + "]";
      const json& l = layers[k];
      if (!l.is_object()) schema_error(where + ": expected an object");
      model.layers.push_back({read_matrix(field(l, "W", where), where + ".W"),
                              read_matrix(field(l, "U", where), where + ".U"),
                              read_vector(field(l, "b", where), where + ".b"),
                              read_activation(l, where)});
    }
    model.horizon = read_count(field(doc, "tau", "model"), "model.tau");
    model.output_start = doc.contains("a") ? read_count(doc["a"], "model.a") : 1;
    model.validate();
    return model;
  }
  schema_error("model: unknown type '" + kind + "'");
}

std::string save_model(const Model& model) {
  json doc;
  if (const auto* fnn = std::get_if<FnnModel>(&model)) {
    doc["type"] = "fnn";
    json layers = json::array();
    for (const FnnLayer& l : fnn->layers)
      layers.push_back({{"W", write_matrix(l.weights)},
                        {"b", write_vector(l.bias)},
                        {"activation", activation_name(l.activation)}});
    doc["layers"] = std::move(layers);
  } else {
    const auto& rnn = std::get<RnnModel>(model);
    doc["type"] = "rnn";
    json layers = json::array();
    for (const RnnLayer& l : rnn.layers)
      layers.push_back({{"W", write_matrix(l.weights)},
                        {"U", write_matrix(l.feedback)},
                        {"b", write_vector(l.bias)},
                        {"activation", activation_name(l.activation)}});
    doc["layers"] = std::move(layers);
    doc["tau"] = rnn.horizon;
    doc["a"] = rnn.output_start;
  }
  return doc.dump(2);
}

std::vector<FnnSample> load_fnn_samples(std::string_view text, const FnnModel& model) {
  std::vector<FnnSample> samples;
  for (const json& s : sample_objects(parse_document(text))) {
    FnnSample sample{read_vector(field(s, "input", "sample"), "sample.input"),
                     read_vector(field(s, "target", "sample"), "sample.target")};
    validate_sample(model, sample);
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<RnnSample> load_rnn_samples(std::string_view text, const RnnModel& model) {
  std::vector<RnnSample> samples;
  for (const json& s : sample_objects(parse_document(text))) {
    RnnSample sample;
    auto read_steps = [&](const char* key) {
      const json& steps = field(s, key, "sample");
      if (!steps.is_array()) schema_error(std::string("sample.") + key + ": expected an array of steps");
      std::vector<Vector> out;
      for (std::size_t i = 0; i < steps.size(); ++i)
        out.push_back(read_vector(steps[i], std::string("sample.") + key + "[" + std::to_string(i) + "]"));
      return out;
    };
    sample.inputs = read_steps("input");
    sample.targets = read_steps("target");
    validate_sample(model, sample);
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::string save_sample(const FnnSample& sample) {
  json doc{{"input", write_vector(sample.input)}, {"target", write_vector(sample.target)}};
  return doc.dump(2);
}

std::string save_sample(const RnnSample& sample) {
  json in = json::array();
  json out = json::array();
  for (const Vector& x : sample.inputs) in.push_back(write_vector(x));
  for (const Vector& z : sample.targets) out.push_back(write_vector(z));
  json doc{{"input", std::move(in)}, {"target", std::move(out)}};
  return doc.dump(2);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace hessnet
