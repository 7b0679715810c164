#pragma once

// JSON documents for models and samples.
//
// Model:  {"type":"fnn"|"rnn",
//          "layers":[{"W":[[..]], "U":[[..]] (rnn only), "b":[..],
//                     "activation":"sigmoid"|"relu"|"softplus"|"identity"}],
//          "tau":int, "a":int}                                  (tau, a: rnn only)
// Sample: {"input":[..] | [[..] per step], "target":[..] | [[..] per step]}
//         A JSON array of sample objects is read as a mini-batch.

#include <string>
#include <string_view>
#include <vector>

#include "hessnet/model.hpp"

namespace hessnet {

/// Parses and validates; throws Parse for malformed documents and the
/// model's validation errors for invariant violations.
Model load_model(std::string_view text);
std::string save_model(const Model& model);

std::vector<FnnSample> load_fnn_samples(std::string_view text, const FnnModel& model);
std::vector<RnnSample> load_rnn_samples(std::string_view text, const RnnModel& model);
std::string save_sample(const FnnSample& sample);
std::string save_sample(const RnnSample& sample);

std::string read_text_file(const std::string& path);

}  // namespace hessnet
