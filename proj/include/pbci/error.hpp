#pragma once

#include <stdexcept>
#include <string>

namespace pbci {

// Failure categories shared by the whole toolkit. Loaders and numeric
// routines throw Error with the category that names the violated contract;
// the CLI maps categories onto process exit codes.
enum class errc {
  // bundle / file I/O
  missing_file,
  malformed_header,
  sample_count_mismatch,
  non_finite_sample,
  io_failure,
  malformed_record,
  overlapping_rounds,
  non_monotonic_timestamps,
  // signal processing
  upsample_requested,
  ratio_not_rational,
  single_channel,
  cutoff_above_nyquist,
  unstable_filter,
  window_out_of_bounds,
  too_short,
  invalid_fraction,
  // features
  missing_events,
  single_class,
  degenerate_epoch,
  not_positive_definite,
  too_many_filters,
  non_finite_feature,
  epoch_too_short,
  malformed_angle,
  // classifier
  too_few_observations,
  singular_covariance,
  dimension_mismatch,
  malformed_model,
  kind_mismatch,
  // evaluation
  empty_counts,
  class_too_small,
  // online simulation
  channel_mismatch,
  session_too_short,
  empty_trace,
  // alignment / statistics
  empty_pairs,
  drift_out_of_range,
  empty_round,
  too_few_rounds,
  zero_variance_x,
  // generator
  invalid_config,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace pbci
