#pragma once

#include <filesystem>

#include "pbci/classifier.hpp"
#include "pbci/session.hpp"

namespace pbci {

enum class TraceNorm { none, minmax_pm1 };

// Replays a recording through a causal chain (average reference, high-pass,
// anti-alias decimation, model band filters) and evaluates the model on the
// trailing window at 50 Hz. Tick k reads frames [t - window, t) only.
PredictionTrace simulate_online(const Session& session, const LinearModel& model);

// Maps positives by 1/max and negatives by 1/|min| so zero stays the
// decision boundary.
PredictionTrace normalize_trace(const PredictionTrace& trace, TraceNorm mode);

void trace_to_csv(const PredictionTrace& trace, const std::filesystem::path& path);
PredictionTrace trace_from_csv(const std::filesystem::path& path);

}  // namespace pbci
