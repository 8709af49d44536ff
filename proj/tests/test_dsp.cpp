#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "pbci/dsp.hpp"
#include "pbci/rng.hpp"

using namespace pbci;
using testutil::expect_error;

namespace {

constexpr double kTau = 6.283185307179586;

SessionData make_data(int channels, long frames, double rate) {
  SessionData d;
  d.header.sample_rate_hz = rate;
  for (int c = 0; c < channels; ++c) d.header.channels.push_back("ch" + std::to_string(c));
  d.samples = Matrix::Zero(channels, frames);
  return d;
}

SessionData sine_data(double freq_hz, double rate, double seconds, double amp = 1.0) {
  const long frames = static_cast<long>(std::lround(seconds * rate));
  SessionData d = make_data(1, frames, rate);
  for (long i = 0; i < frames; ++i)
    d.samples(0, i) = amp * std::sin(kTau * freq_hz * static_cast<double>(i) / rate);
  return d;
}

double interior_rms(const Matrix& x, long margin) {
  const long n = x.cols() - 2 * margin;
  REQUIRE(n > 0);
  return std::sqrt(x.middleCols(margin, n).array().square().mean());
}

}  // namespace

TEST_SUITE("dsp") {

TEST_CASE("resample keeps DC level") {
  SessionData d = make_data(2, 5000, 500.0);
  d.samples.setConstant(7.3);
  SessionData y = resample(d, 250.0);
  CHECK(y.header.sample_rate_hz == 250.0);
  CHECK(y.n_frames() == 2500);
  const long margin = 125;
  for (long i = margin; i < y.n_frames() - margin; ++i) {
    CHECK(y.samples(0, i) == doctest::Approx(7.3).epsilon(1e-6));
    CHECK(y.samples(1, i) == doctest::Approx(7.3).epsilon(1e-6));
  }
}

TEST_CASE("resample preserves a passband sine") {
  SessionData d = sine_data(10.0, 500.0, 10.0);
  SessionData y = resample(d, 250.0);
  const long margin = 250;
  double worst = 0.0;
  for (long i = margin; i < y.n_frames() - margin; ++i) {
    const double want = std::sin(kTau * 10.0 * static_cast<double>(i) / 250.0);
    worst = std::max(worst, std::abs(y.samples(0, i) - want));
  }
  CHECK(worst < 0.01);
}

TEST_CASE("resample attenuates above the new Nyquist") {
  SessionData d = sine_data(140.0, 500.0, 10.0);
  SessionData y = resample(d, 250.0);
  const double rms_in = interior_rms(d.samples, 500);
  const double rms_out = interior_rms(y.samples, 250);
  CHECK(20.0 * std::log10(rms_in / rms_out) >= 40.0);
}

TEST_CASE("resample at the source rate is the identity") {
  SessionData d = sine_data(10.0, 250.0, 4.0);
  d.samples(0, 17) = 123.456;
  SessionData y = resample(d, 250.0);
  CHECK(y.samples == d.samples);
  SessionData z = resample(y, 250.0);
  CHECK(z.samples == y.samples);
}

TEST_CASE("resample handles a 2/5 ratio") {
  SessionData d = sine_data(5.0, 250.0, 20.0);
  SessionData y = resample(d, 100.0);
  CHECK(y.n_frames() == 2000);
  const long margin = 200;
  double worst = 0.0;
  for (long i = margin; i < y.n_frames() - margin; ++i) {
    const double want = std::sin(kTau * 5.0 * static_cast<double>(i) / 100.0);
    worst = std::max(worst, std::abs(y.samples(0, i) - want));
  }
  CHECK(worst < 0.01);
}

TEST_CASE("resample rejects bad rates") {
  SessionData d = make_data(1, 1000, 500.0);
  expect_error(errc::upsample_requested, [&] { resample(d, 1000.0); });
  expect_error(errc::ratio_not_rational, [&] { resample(d, 500.0 / std::sqrt(2.0)); });
}

TEST_CASE("average reference zeroes the channel mean") {
  SessionData d = make_data(2, 10, 500.0);
  d.samples.row(0).setConstant(1.0);
  d.samples.row(1).setConstant(3.0);
  SessionData y = average_reference(d);
  CHECK(y.samples(0, 0) == doctest::Approx(-1.0));
  CHECK(y.samples(1, 0) == doctest::Approx(1.0));

  SessionData z = average_reference(y);
  CHECK((z.samples - y.samples).cwiseAbs().maxCoeff() < 1e-12);

  SessionData r = make_data(8, 1000, 500.0);
  Rng rng(97);
  for (long i = 0; i < r.n_frames(); ++i)
    for (long c = 0; c < 8; ++c) r.samples(c, i) = 20.0 * rng.gauss();
  SessionData ry = average_reference(r);
  CHECK(ry.samples.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);

  SessionData one = make_data(1, 10, 500.0);
  expect_error(errc::single_channel, [&] { average_reference(one); });
}

TEST_CASE("high-pass removes DC") {
  SessionData d = make_data(1, 5000, 250.0);
  d.samples.setConstant(5.0);
  SessionData y = highpass(d, 1.0);
  const long margin = 750;  // 3 / lo_hz seconds
  const double mean =
      y.samples.middleCols(margin, y.n_frames() - 2 * margin).array().abs().mean();
  CHECK(mean < 0.05);
}

TEST_CASE("band-pass passes mid-band and rejects out of band") {
  const BandSpec alpha{8.0, 13.0};
  SessionData in_band = sine_data(10.0, 250.0, 12.0);
  SessionData y = bandpass(in_band, alpha);
  const long margin = static_cast<long>(3.0 / 8.0 * 250.0) + 250;
  double worst = 0.0;
  for (long i = margin; i < y.n_frames() - margin; ++i)
    worst = std::max(worst, std::abs(y.samples(0, i) - in_band.samples(0, i)));
  CHECK(worst < 0.05);

  SessionData low = sine_data(2.0, 250.0, 12.0);
  SessionData yl = bandpass(low, alpha);
  const double att = 20.0 * std::log10(interior_rms(low.samples, margin) /
                                       interior_rms(yl.samples, margin));
  CHECK(att >= 30.0);
}

TEST_CASE("zero-phase band-pass keeps transient timing") {
  SessionData d = make_data(1, 4000, 250.0);
  d.samples(0, 2000) = 100.0;
  SessionData y = bandpass(d, {8.0, 13.0});
  long peak = 0;
  y.samples.row(0).cwiseAbs().maxCoeff(&peak);
  CHECK(std::abs(peak - 2000) <= 1);
}

TEST_CASE("filtering is linear") {
  Rng rng(21);
  SessionData x = make_data(2, 2000, 250.0);
  SessionData y = make_data(2, 2000, 250.0);
  for (long i = 0; i < 2000; ++i)
    for (long c = 0; c < 2; ++c) {
      x.samples(c, i) = 10.0 * rng.gauss();
      y.samples(c, i) = 10.0 * rng.gauss();
    }
  const double a = 2.5, b = -1.25;
  SessionData mix = x;
  mix.samples = a * x.samples + b * y.samples;
  const Matrix lhs = bandpass(mix, {8.0, 13.0}).samples;
  const Matrix rhs = a * bandpass(x, {8.0, 13.0}).samples + b * bandpass(y, {8.0, 13.0}).samples;
  const double scale = rhs.cwiseAbs().maxCoeff();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() / scale < 1e-9);
}

TEST_CASE("stopband reaches 40 dB an octave out in zero-phase mode") {
  const SosFilter lp = design_lowpass(20.0, 250.0);
  const double g = sos_gain(lp, 40.0, 250.0);
  CHECK(20.0 * std::log10(g * g) <= -40.0);

  const SosFilter hp = design_highpass(20.0, 250.0);
  const double gh = sos_gain(hp, 10.0, 250.0);
  CHECK(20.0 * std::log10(gh * gh) <= -40.0);
}

TEST_CASE("filter designs reject cutoffs at or above Nyquist") {
  SessionData d = make_data(1, 1000, 100.0);
  expect_error(errc::cutoff_above_nyquist, [&] { highpass(d, 50.0); });
  expect_error(errc::cutoff_above_nyquist, [&] { bandpass(d, {8.0, 50.0}); });
  expect_error(errc::cutoff_above_nyquist, [&] { bandpass(d, {13.0, 8.0}); });
  expect_error(errc::cutoff_above_nyquist, [&] { (void)design_lowpass(0.0, 100.0); });
}

TEST_CASE("epoch extraction uses round-half-up frame indexing") {
  SessionData d = make_data(1, 5000, 250.0);
  for (long i = 0; i < 5000; ++i) d.samples(0, i) = static_cast<double>(i);
  std::vector<EventRecord> events{{10.0, "jump", {}}};
  auto epochs = extract_epochs(d, events, 0.0, 1.0);
  REQUIRE(epochs.size() == 1);
  CHECK(epochs[0].samples.cols() == 250);
  CHECK(epochs[0].samples(0, 0) == 2500.0);
  CHECK(epochs[0].samples(0, 249) == 2749.0);
  CHECK(epochs[0].onset_s == 10.0);
  CHECK(epochs[0].rate_hz == 250.0);

  CHECK(extract_epochs(d, {}, 0.0, 1.0).empty());

  std::vector<EventRecord> early{{0.1, "jump", {}}};
  expect_error(errc::window_out_of_bounds, [&] { extract_epochs(d, early, -0.2, 0.5); });
  std::vector<EventRecord> late{{19.9, "jump", {}}};
  expect_error(errc::window_out_of_bounds, [&] { extract_epochs(d, late, 0.0, 0.5); });
}

TEST_CASE("epoch extraction honors the recording start time") {
  SessionData d = make_data(1, 2500, 250.0);
  d.header.start_time_s = 100.0;
  for (long i = 0; i < 2500; ++i) d.samples(0, i) = static_cast<double>(i);
  std::vector<EventRecord> events{{104.0, "jump", {}}};
  auto epochs = extract_epochs(d, events, 0.0, 1.0);
  REQUIRE(epochs.size() == 1);
  CHECK(epochs[0].samples(0, 0) == 1000.0);
}

TEST_CASE("artifact rejection count is exact") {
  Rng rng(5);
  SessionData d = make_data(4, 500 * 250, 250.0);
  for (long i = 0; i < d.n_frames(); ++i)
    for (long c = 0; c < 4; ++c) d.samples(c, i) = 5.0 * rng.gauss();
  RejectionMask mask = reject_artifact_windows(d, 1.0, 0.02);
  CHECK(mask.rejected.size() == 10);
  CHECK(std::is_sorted(mask.rejected.begin(), mask.rejected.end()));
}

TEST_CASE("artifact rejection finds injected spikes") {
  Rng rng(6);
  SessionData d = make_data(4, 150 * 250, 250.0);
  for (long i = 0; i < d.n_frames(); ++i)
    for (long c = 0; c < 4; ++c) d.samples(c, i) = 5.0 * rng.gauss();
  const std::vector<long> spiked = {10, 77, 140};
  for (long w : spiked)
    for (long j = 0; j < 5; ++j) d.samples(1, w * 250 + 40 + 30 * j) = 200.0;
  RejectionMask mask = reject_artifact_windows(d, 1.0, 0.02);
  REQUIRE(mask.rejected.size() == 3);
  for (long w : spiked)
    CHECK(std::find(mask.rejected.begin(), mask.rejected.end(), w) != mask.rejected.end());
}

TEST_CASE("artifact rejection input checks") {
  SessionData d = make_data(2, 100, 250.0);
  expect_error(errc::invalid_fraction, [&] { reject_artifact_windows(d, 0.1, 0.0); });
  expect_error(errc::invalid_fraction, [&] { reject_artifact_windows(d, 0.1, 1.0); });
  expect_error(errc::too_short, [&] { reject_artifact_windows(d, 1.0, 0.02); });
}

TEST_CASE("mask span queries") {
  RejectionMask mask;
  mask.window_len_s = 1.0;
  mask.rejected = {3, 7};
  CHECK(mask_rejects_span(mask, 3.5, 4.5));
  CHECK(mask_rejects_span(mask, 2.5, 3.1));
  CHECK_FALSE(mask_rejects_span(mask, 4.0, 5.0));
  CHECK_FALSE(mask_rejects_span(mask, 2.0, 3.0));
  CHECK(mask_rejects_span(mask, 6.0, 10.0));
}

}  // TEST_SUITE
