#pragma once

#include "hessnet/fnn.hpp"
#include "hessnet/rnn.hpp"

namespace hessnet {

/// One plain step W ← W − αΔW (and U, b alike); returns the updated copy.
FnnModel apply_update(const FnnModel& model, const GradientBundle& grads, double alpha);
RnnModel apply_update(const RnnModel& model, const RnnGradientBundle& grads, double alpha);

}  // namespace hessnet
