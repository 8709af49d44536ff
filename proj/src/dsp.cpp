#include "pbci/dsp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>

#include "pbci/error.hpp"

namespace pbci {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_cutoff(double cutoff_hz, double rate_hz) {
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0))
    fail(errc::cutoff_above_nyquist, "cutoff " + std::to_string(cutoff_hz) +
                                         " Hz outside (0, " + std::to_string(rate_hz / 2.0) + ") Hz");
}

std::complex<double> sos_response(const SosFilter& filt, double w) {
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = std::polar(1.0, -2.0 * w);
  std::complex<double> h = 1.0;
  for (const auto& s : filt.sections)
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

void check_stable(const SosFilter& filt) {
  std::vector<std::array<double, 2>> w(filt.sections.size(), {0.0, 0.0});
  double x = 1.0;
  for (long n = 0; n < 2000; ++n) {
    double v = x;
    for (std::size_t si = 0; si < filt.sections.size(); ++si) {
      const auto& s = filt.sections[si];
      const double y = s.b0 * v + w[si][0];
      w[si][0] = s.b1 * v - s.a1 * y + w[si][1];
      w[si][1] = s.b2 * v - s.a2 * y;
      v = y;
    }
    if (!std::isfinite(v)) fail(errc::unstable_filter, "impulse response diverged");
    x = 0.0;
  }
  for (const auto& s : filt.sections)
    if (std::abs(s.a2) >= 1.0 || std::abs(s.a1) >= 1.0 + s.a2)
      fail(errc::unstable_filter, "pole outside the unit circle");
}

// Butterworth pole-pair quality factors for a 4th-order cascade.
constexpr double kQ4[2] = {0.54119610014619698, 1.3065629648763764};

Biquad cookbook_section(double cutoff_hz, double rate_hz, double q, bool highpass) {
  const double w0 = 2.0 * kPi * cutoff_hz / rate_hz;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad s;
  if (highpass) {
    s.b0 = (1.0 + cw) / 2.0 / a0;
    s.b1 = -(1.0 + cw) / a0;
    s.b2 = (1.0 + cw) / 2.0 / a0;
  } else {
    s.b0 = (1.0 - cw) / 2.0 / a0;
    s.b1 = (1.0 - cw) / a0;
    s.b2 = (1.0 - cw) / 2.0 / a0;
  }
  s.a1 = -2.0 * cw / a0;
  s.a2 = (1.0 - alpha) / a0;
  return s;
}

}  // namespace

SosFilter design_lowpass(double cutoff_hz, double rate_hz) {
  check_cutoff(cutoff_hz, rate_hz);
  SosFilter filt;
  for (double q : kQ4) filt.sections.push_back(cookbook_section(cutoff_hz, rate_hz, q, false));
  check_stable(filt);
  return filt;
}

SosFilter design_highpass(double cutoff_hz, double rate_hz) {
  check_cutoff(cutoff_hz, rate_hz);
  SosFilter filt;
  for (double q : kQ4) filt.sections.push_back(cookbook_section(cutoff_hz, rate_hz, q, true));
  check_stable(filt);
  return filt;
}

SosFilter design_bandpass(BandSpec band, double rate_hz) {
  if (!(band.lo_hz > 0.0) || !(band.lo_hz < band.hi_hz))
    fail(errc::cutoff_above_nyquist, "band edges must satisfy 0 < lo < hi");
  check_cutoff(band.hi_hz, rate_hz);

  // Order-2 Butterworth prototype through the analog band-pass transform
  // s -> (s^2 + w0^2) / (bw * s), then bilinear with prewarped edges.
  const double fs2 = 2.0 * rate_hz;
  const double w_lo = fs2 * std::tan(kPi * band.lo_hz / rate_hz);
  const double w_hi = fs2 * std::tan(kPi * band.hi_hz / rate_hz);
  const double w0 = std::sqrt(w_lo * w_hi);
  const double bw = w_hi - w_lo;

  const std::complex<double> proto(-std::sqrt(0.5), std::sqrt(0.5));
  const std::complex<double> pb = proto * bw;
  const std::complex<double> root = std::sqrt(pb * pb - 4.0 * w0 * w0);
  const std::complex<double> poles[2] = {(pb + root) / 2.0, (pb - root) / 2.0};

  const double f0 = rate_hz / kPi * std::atan(w0 / fs2);
  const double w0_digital = 2.0 * kPi * f0 / rate_hz;

  SosFilter filt;
  for (const auto& p : poles) {
    const std::complex<double> zp = (fs2 + p) / (fs2 - p);
    Biquad s;
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;  // zeros at z = +1 and z = -1
    s.a1 = -2.0 * zp.real();
    s.a2 = std::norm(zp);
    filt.sections.push_back(s);
    SosFilter one{{filt.sections.back()}};
    const double g = std::abs(sos_response(one, w0_digital));
    if (!(g > 0.0) || !std::isfinite(g)) fail(errc::unstable_filter, "degenerate band-pass section");
    filt.sections.back().b0 /= g;
    filt.sections.back().b2 /= g;
  }
  check_stable(filt);
  return filt;
}

double sos_gain(const SosFilter& filt, double freq_hz, double rate_hz) {
  return std::abs(sos_response(filt, 2.0 * kPi * freq_hz / rate_hz));
}

namespace {

void run_causal(const SosFilter& filt, double* x, long n) {
  for (const auto& s : filt.sections) {
    double w1 = 0.0, w2 = 0.0;
    for (long i = 0; i < n; ++i) {
      const double v = x[i];
      const double y = s.b0 * v + w1;
      w1 = s.b1 * v - s.a1 * y + w2;
      w2 = s.b2 * v - s.a2 * y;
      x[i] = y;
    }
  }
}

}  // namespace

Matrix filter_causal(const SosFilter& filt, const Matrix& x) {
  Matrix y = x;
  std::vector<double> row(static_cast<std::size_t>(y.cols()));
  for (long c = 0; c < y.rows(); ++c) {
    for (long i = 0; i < y.cols(); ++i) row[static_cast<std::size_t>(i)] = y(c, i);
    run_causal(filt, row.data(), y.cols());
    for (long i = 0; i < y.cols(); ++i) y(c, i) = row[static_cast<std::size_t>(i)];
  }
  return y;
}

Matrix filter_zero_phase(const SosFilter& filt, const Matrix& x) {
  Matrix y = x;
  std::vector<double> row(static_cast<std::size_t>(y.cols()));
  const long n = y.cols();
  for (long c = 0; c < y.rows(); ++c) {
    for (long i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = y(c, i);
    run_causal(filt, row.data(), n);
    std::reverse(row.begin(), row.end());
    run_causal(filt, row.data(), n);
    std::reverse(row.begin(), row.end());
    for (long i = 0; i < n; ++i) y(c, i) = row[static_cast<std::size_t>(i)];
  }
  return y;
}

long frame_index(double t_s, double rate_hz) {
  return static_cast<long>(std::floor(t_s * rate_hz + 0.5));
}

SessionData resample(const SessionData& x, double target_hz) {
  const double source_hz = x.header.sample_rate_hz;
  if (target_hz > source_hz)
    fail(errc::upsample_requested, "target " + std::to_string(target_hz) + " Hz above source " +
                                       std::to_string(source_hz) + " Hz");
  const double ratio = target_hz / source_hz;
  long up = 0, down = 0;
  for (long m = 1; m <= 1000; ++m) {
    const double l = ratio * static_cast<double>(m);
    if (std::abs(l - std::round(l)) < 1e-9 && std::round(l) >= 1.0) {
      up = static_cast<long>(std::round(l));
      down = m;
      break;
    }
  }
  if (up == 0)
    fail(errc::ratio_not_rational,
         "no rational factor for " + std::to_string(source_hz) + " -> " + std::to_string(target_hz));
  const long g = std::gcd(up, down);
  up /= g;
  down /= g;

  SessionData out;
  out.header = x.header;
  out.header.sample_rate_hz = target_hz;
  if (up == 1 && down == 1) {
    out.samples = x.samples;
    return out;
  }

  const long n_src = x.n_frames();
  const long n_mid = n_src * up;
  const double mid_hz = source_hz * static_cast<double>(up);
  const SosFilter anti_alias = design_lowpass(0.45 * target_hz / 2.0, mid_hz);

  Matrix mid = Matrix::Zero(x.n_channels(), n_mid);
  for (long c = 0; c < x.n_channels(); ++c)
    for (long i = 0; i < n_src; ++i) mid(c, i * up) = x.samples(c, i) * static_cast<double>(up);
  mid = filter_zero_phase(anti_alias, mid);

  const long n_out = n_mid == 0 ? 0 : (n_mid - 1) / down + 1;
  out.samples.resize(x.n_channels(), n_out);
  for (long c = 0; c < x.n_channels(); ++c)
    for (long i = 0; i < n_out; ++i) out.samples(c, i) = mid(c, i * down);
  return out;
}

SessionData average_reference(const SessionData& x) {
  if (x.n_channels() < 2) fail(errc::single_channel, "average reference needs >= 2 channels");
  SessionData out = x;
  const Eigen::RowVectorXd mean = x.samples.colwise().mean();
  out.samples.rowwise() -= mean;
  return out;
}

SessionData highpass(const SessionData& x, double cutoff_hz, FilterMode mode) {
  const SosFilter filt = design_highpass(cutoff_hz, x.header.sample_rate_hz);
  SessionData out = x;
  out.samples = mode == FilterMode::zero_phase ? filter_zero_phase(filt, x.samples)
                                               : filter_causal(filt, x.samples);
  return out;
}

SessionData bandpass(const SessionData& x, BandSpec band, FilterMode mode) {
  const SosFilter filt = design_bandpass(band, x.header.sample_rate_hz);
  SessionData out = x;
  out.samples = mode == FilterMode::zero_phase ? filter_zero_phase(filt, x.samples)
                                               : filter_causal(filt, x.samples);
  return out;
}

std::vector<Epoch> extract_epochs(const SessionData& x, const std::vector<EventRecord>& events,
                                  double start_offset_s, double end_offset_s) {
  if (!(end_offset_s > start_offset_s))
    fail(errc::window_out_of_bounds, "window end must be after start");
  const double rate = x.header.sample_rate_hz;
  const long n_epoch = frame_index(end_offset_s - start_offset_s, rate);
  std::vector<Epoch> epochs;
  epochs.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double local_t = events[i].t_s + start_offset_s - x.header.start_time_s;
    const long first = frame_index(local_t, rate);
    if (first < 0 || first + n_epoch > x.n_frames())
      fail(errc::window_out_of_bounds,
           "event " + std::to_string(i) + " at t=" + std::to_string(events[i].t_s) +
               " s spills outside the recording");
    Epoch e;
    e.onset_s = events[i].t_s;
    e.rate_hz = rate;
    e.samples = x.samples.middleCols(first, n_epoch);
    epochs.push_back(std::move(e));
  }
  return epochs;
}

RejectionMask reject_artifact_windows(const SessionData& x, double window_len_s, double fraction) {
  if (!(fraction > 0.0) || !(fraction < 1.0))
    fail(errc::invalid_fraction, "fraction must lie in (0, 1)");
  const double rate = x.header.sample_rate_hz;
  const long len = frame_index(window_len_s, rate);
  if (len < 1 || x.n_frames() < len)
    fail(errc::too_short, "recording shorter than one artifact window");
  const long n_win = x.n_frames() / len;
  const long n_ch = x.n_channels();

  const SosFilter hf = design_highpass(30.0, rate);
  const Matrix high = filter_zero_phase(hf, x.samples);

  Vector amp(n_win), var(n_win), hfp(n_win);
  for (long w = 0; w < n_win; ++w) {
    const auto block = x.samples.middleCols(w * len, len);
    amp(w) = block.cwiseAbs().maxCoeff();
    double v = 0.0;
    for (long c = 0; c < n_ch; ++c) {
      const double m = block.row(c).mean();
      v += (block.row(c).array() - m).square().mean();
    }
    var(w) = v / static_cast<double>(n_ch);
    hfp(w) = high.middleCols(w * len, len).array().square().mean();
  }

  auto zscore = [n_win](Vector& v) {
    const double m = v.mean();
    const double sd = std::sqrt((v.array() - m).square().sum() / static_cast<double>(n_win));
    if (sd > 0.0)
      v = (v.array() - m) / sd;
    else
      v.setZero();
  };
  zscore(amp);
  zscore(var);
  zscore(hfp);
  const Vector score = amp + var + hfp;

  const long k = static_cast<long>(std::floor(fraction * static_cast<double>(n_win) + 0.5));
  std::vector<long> order(static_cast<std::size_t>(n_win));
  std::iota(order.begin(), order.end(), 0L);
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    if (score(a) != score(b)) return score(a) > score(b);
    return a < b;
  });

  RejectionMask mask;
  mask.window_len_s = window_len_s;
  mask.fraction = fraction;
  mask.rejected.assign(order.begin(), order.begin() + k);
  std::sort(mask.rejected.begin(), mask.rejected.end());
  return mask;
}

bool mask_rejects_span(const RejectionMask& mask, double t0_s, double t1_s) {
  for (long w : mask.rejected) {
    const double w0 = static_cast<double>(w) * mask.window_len_s;
    const double w1 = w0 + mask.window_len_s;
    if (t0_s < w1 && w0 < t1_s) return true;
  }
  return false;
}

}  // namespace pbci
