#include "tfoc/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tfoc/errors.hpp"

namespace tfoc::dsp {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT (forward, e^{-j...}).
void fft_radix2(std::vector<cd>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cd w = std::polar(1.0, ang * static_cast<double>(k));
        const cd u = a[i + k];
        const cd v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// One-sided transform of a single real frame of length n. Power-of-two sizes
// go through the FFT; other sizes use a precomputed twiddle table.
class FrameTransform {
 public:
  explicit FrameTransform(std::size_t n) : n_(n), bins_(n / 2 + 1) {
    if (!is_power_of_two(n)) {
      twiddle_.resize(n);
      for (std::size_t k = 0; k < n; ++k)
        twiddle_[k] = std::polar(1.0, -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n));
    }
    scratch_.resize(n);
  }

  void run(std::span<const double> frame, std::span<cd> out) {
    if (twiddle_.empty()) {
      for (std::size_t i = 0; i < n_; ++i) scratch_[i] = cd(frame[i], 0.0);
      fft_radix2(scratch_);
      std::copy_n(scratch_.begin(), bins_, out.begin());
      return;
    }
    for (std::size_t k = 0; k < bins_; ++k) {
      cd acc{0.0, 0.0};
      std::size_t idx = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        acc += frame[i] * twiddle_[idx];
        idx += k;
        if (idx >= n_) idx -= n_;
      }
      out[k] = acc;
    }
  }

 private:
  std::size_t n_;
  std::size_t bins_;
  std::vector<cd> twiddle_;
  std::vector<cd> scratch_;
};

}  // namespace

void SampleBuffer::validate() const {
  if (samples.empty()) throw InputError("sample buffer is empty");
  if (!(sampling_rate_hz > 0.0) || !std::isfinite(sampling_rate_hz))
    throw InputError("sampling rate must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!std::isfinite(samples[i])) throw InputError("non-finite sample at index " + std::to_string(i));
}

// ---------------------------------------------------------------------------
// IIR

std::complex<double> Biquad::response(std::complex<double> z) const {
  const cd zi = 1.0 / z;
  const cd zi2 = zi * zi;
  return (b0 + b1 * zi + b2 * zi2) / (1.0 + a1 * zi + a2 * zi2);
}

double Biquad::pole_radius() const {
  // Roots of z^2 + a1 z + a2.
  const cd disc = std::sqrt(cd(a1 * a1 - 4.0 * a2, 0.0));
  const cd r1 = (-a1 + disc) / 2.0;
  const cd r2 = (-a1 - disc) / 2.0;
  return std::max(std::abs(r1), std::abs(r2));
}

std::complex<double> IirFilterSos::response(double f_hz) const {
  const cd z = std::polar(1.0, 2.0 * kPi * f_hz / design_meta.fs);
  cd h{1.0, 0.0};
  for (const auto& s : sections) h *= s.response(z);
  return h;
}

double IirFilterSos::magnitude(double f_hz) const { return std::abs(response(f_hz)); }

bool IirFilterSos::is_stable(double margin) const {
  if (sections.empty()) return false;
  return std::all_of(sections.begin(), sections.end(),
                     [margin](const Biquad& s) { return s.pole_radius() < 1.0 - margin; });
}

IirFilterSos design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs) {
  if (order < 2 || order % 2 != 0) throw DesignError("filter order must be even and >= 2");
  if (!(fs > 0.0) || !std::isfinite(fs)) throw DesignError("sampling rate must be positive");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0))
    throw DesignError("band edges must satisfy 0 < low < high < fs/2");

  const double warp_lo = 2.0 * fs * std::tan(kPi * low_hz / fs);
  const double warp_hi = 2.0 * fs * std::tan(kPi * high_hz / fs);
  const double bw = warp_hi - warp_lo;
  const double w0sq = warp_lo * warp_hi;

  std::vector<cd> zpoles;
  zpoles.reserve(2 * static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const cd proto = std::polar(1.0, kPi * (2.0 * k + order + 1) / (2.0 * order));
    const cd half = proto * bw / 2.0;
    const cd root = std::sqrt(half * half - w0sq);
    for (const cd s : {half + root, half - root}) zpoles.push_back((2.0 * fs + s) / (2.0 * fs - s));
  }

  IirFilterSos out;
  out.design_meta = {order, low_hz, high_hz, fs};
  for (const cd& p : zpoles) {
    if (p.imag() <= 0.0) continue;
    Biquad s;
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;
    s.a1 = -2.0 * p.real();
    s.a2 = std::norm(p);
    out.sections.push_back(s);
  }
  if (out.sections.size() != static_cast<std::size_t>(order))
    throw DesignError("pole pairing failed; band too narrow for the given rate");

  const double centre = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  const cd zc = std::polar(1.0, centre);
  for (auto& s : out.sections) {
    const double g = 1.0 / std::abs(s.response(zc));
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
  }
  std::sort(out.sections.begin(), out.sections.end(),
            [](const Biquad& a, const Biquad& b) { return a.pole_radius() < b.pole_radius(); });

  if (!out.is_stable()) throw DesignError("designed filter is unstable");
  return out;
}

namespace {

void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& x) {
  for (const auto& s : sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
  }
}

}  // namespace

SampleBuffer apply_filter(const IirFilterSos& filter, const SampleBuffer& x, FilterMode mode) {
  x.validate();
  if (!filter.is_stable()) throw DesignError("filter is not stable");
  SampleBuffer y = x;
  run_cascade(filter.sections, y.samples);
  if (mode == FilterMode::zero_phase) {
    std::reverse(y.samples.begin(), y.samples.end());
    run_cascade(filter.sections, y.samples);
    std::reverse(y.samples.begin(), y.samples.end());
  }
  return y;
}

std::string to_string(FilterMode m) { return m == FilterMode::causal ? "causal" : "zero_phase"; }

FilterMode parse_filter_mode(std::string_view s) {
  if (s == "causal") return FilterMode::causal;
  if (s == "zero_phase") return FilterMode::zero_phase;
  throw InputError("unknown filter mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// STFT

std::string to_string(WindowFn w) { return w == WindowFn::hann ? "hann" : "rectangular"; }

WindowFn parse_window_fn(std::string_view s) {
  if (s == "hann") return WindowFn::hann;
  if (s == "rectangular") return WindowFn::rectangular;
  throw InputError("unknown window function '" + std::string(s) + "'");
}

void StftConfig::validate() const {
  if (window_len < 2) throw InputError("STFT window must be at least 2 samples");
  if (overlap < 1 || overlap >= window_len)
    throw InputError("STFT overlap must satisfy 1 <= overlap < window_len");
}

int minimal_overlap(int) { return 1; }
int half_overlap(int window_len) { return window_len / 2; }

std::size_t stft_frame_count(std::size_t n, const StftConfig& cfg) {
  const auto w = static_cast<std::size_t>(cfg.window_len);
  if (n < w) return 0;
  return (n - w) / static_cast<std::size_t>(cfg.hop()) + 1;
}

std::vector<double> make_window(WindowFn fn, int n) {
  std::vector<double> w(static_cast<std::size_t>(n), 1.0);
  if (fn == WindowFn::hann) {
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  }
  return w;
}

ComplexMatrix stft(const SampleBuffer& x, const StftConfig& cfg) {
  cfg.validate();
  x.validate();
  const std::size_t n = x.samples.size();
  const auto w = static_cast<std::size_t>(cfg.window_len);
  if (n < w)
    throw LengthError("signal of " + std::to_string(n) + " samples is shorter than the " +
                      std::to_string(w) + "-sample window");

  const std::size_t frames = stft_frame_count(n, cfg);
  const std::size_t bins = static_cast<std::size_t>(cfg.n_bins());
  const auto hop = static_cast<std::size_t>(cfg.hop());
  const auto window = make_window(cfg.window_fn, cfg.window_len);

  ComplexMatrix out(bins, frames);
  FrameTransform xf(w);
  std::vector<double> frame(w);
  std::vector<cd> spec(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = x.samples.data() + t * hop;
    for (std::size_t i = 0; i < w; ++i) frame[i] = window[i] * src[i];
    xf.run(frame, spec);
    for (std::size_t k = 0; k < bins; ++k) out(k, t) = spec[k];
  }
  return out;
}

Spectrogram spectrogram(const SampleBuffer& x, const StftConfig& cfg) {
  const ComplexMatrix z = stft(x, cfg);
  Spectrogram s;
  s.values = Matrix(z.rows, z.cols);
  for (std::size_t i = 0; i < z.data.size(); ++i) s.values.data[i] = std::abs(z.data[i]);
  s.freq_bin_hz = x.sampling_rate_hz / cfg.window_len;
  s.hop = cfg.hop();
  return s;
}

Spectrogram crop_band(const Spectrogram& s, double low_hz, double high_hz) {
  std::size_t first = s.n_freq(), last = 0;
  for (std::size_t k = 0; k < s.n_freq(); ++k) {
    const double f = s.first_bin_hz + static_cast<double>(k) * s.freq_bin_hz;
    if (f >= low_hz && f <= high_hz) {
      first = std::min(first, k);
      last = k;
    }
  }
  if (first > last) throw InputError("crop band contains no frequency bins");
  Spectrogram out;
  out.values = Matrix(last - first + 1, s.n_frames());
  for (std::size_t k = first; k <= last; ++k)
    for (std::size_t t = 0; t < s.n_frames(); ++t) out.values(k - first, t) = s.values(k, t);
  out.freq_bin_hz = s.freq_bin_hz;
  out.hop = s.hop;
  out.first_bin_hz = s.first_bin_hz + static_cast<double>(first) * s.freq_bin_hz;
  return out;
}

SampleBuffer pad_to_length(const SampleBuffer& x, std::size_t length) {
  if (x.samples.size() >= length) return x;
  const std::size_t extra = length - x.samples.size();
  const std::size_t left = extra / 2;
  SampleBuffer out;
  out.sampling_rate_hz = x.sampling_rate_hz;
  out.samples.assign(length, 0.0);
  std::copy(x.samples.begin(), x.samples.end(), out.samples.begin() + static_cast<std::ptrdiff_t>(left));
  return out;
}

InputTensor assemble_model_input(std::span<const Spectrogram> specs) {
  if (specs.empty()) throw AssemblyError("no spectrograms to assemble");
  const std::size_t f = specs.front().n_freq();
  const std::size_t t = specs.front().n_frames();
  for (const auto& s : specs)
    if (s.n_freq() != f || s.n_frames() != t)
      throw AssemblyError("channel spectrograms differ in shape: " + std::to_string(f) + "x" +
                          std::to_string(t) + " vs " + std::to_string(s.n_freq()) + "x" +
                          std::to_string(s.n_frames()));
  InputTensor out;
  out.values = Matrix(f, t * specs.size());
  for (std::size_t c = 0; c < specs.size(); ++c)
    for (std::size_t k = 0; k < f; ++k)
      for (std::size_t j = 0; j < t; ++j) out.values(k, c * t + j) = specs[c].values(k, j);
  return out;
}

Matrix resize_bilinear(const Matrix& m, std::size_t out_h, std::size_t out_w) {
  if (m.empty() || m.rows == 0 || m.cols == 0) throw InputError("cannot resize an empty matrix");
  if (out_h == 0 || out_w == 0) throw InputError("output dimensions must be >= 1");

  auto coord = [](std::size_t i, std::size_t in, std::size_t out) {
    if (out == 1 || in == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
  };

  Matrix out(out_h, out_w);
  for (std::size_t i = 0; i < out_h; ++i) {
    const double y = coord(i, m.rows, out_h);
    const auto y0 = std::min(static_cast<std::size_t>(y), m.rows - 1);
    const std::size_t y1 = std::min(y0 + 1, m.rows - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t j = 0; j < out_w; ++j) {
      const double x = coord(j, m.cols, out_w);
      const auto x0 = std::min(static_cast<std::size_t>(x), m.cols - 1);
      const std::size_t x1 = std::min(x0 + 1, m.cols - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = m(y0, x0) + fx * (m(y0, x1) - m(y0, x0));
      const double bot = m(y1, x0) + fx * (m(y1, x1) - m(y1, x0));
      out(i, j) = top + fy * (bot - top);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segments

SegmentSpec segment_spec(SegmentId id) {
  switch (id) {
    case SegmentId::full4: return {id, 0.0, 4.0};
    case SegmentId::first3: return {id, 0.0, 3.0};
    case SegmentId::first2: return {id, 0.0, 2.0};
    case SegmentId::mid2: return {id, 1.0, 2.0};
    case SegmentId::end2: return {id, 2.0, 2.0};
    case SegmentId::sec1: return {id, 0.0, 1.0};
    case SegmentId::sec2: return {id, 1.0, 1.0};
    case SegmentId::sec3: return {id, 2.0, 1.0};
    case SegmentId::sec4: return {id, 3.0, 1.0};
  }
  throw RangeError("unknown segment");
}

std::string to_string(SegmentId id) {
  switch (id) {
    case SegmentId::full4: return "full4";
    case SegmentId::first3: return "first3";
    case SegmentId::first2: return "first2";
    case SegmentId::mid2: return "mid2";
    case SegmentId::end2: return "end2";
    case SegmentId::sec1: return "sec1";
    case SegmentId::sec2: return "sec2";
    case SegmentId::sec3: return "sec3";
    case SegmentId::sec4: return "sec4";
  }
  return "?";
}

const std::vector<SegmentId>& all_segments() {
  static const std::vector<SegmentId> ids = {SegmentId::full4,  SegmentId::first3, SegmentId::first2,
                                             SegmentId::mid2,   SegmentId::end2,   SegmentId::sec1,
                                             SegmentId::sec2,   SegmentId::sec3,   SegmentId::sec4};
  return ids;
}

SegmentId parse_segment_id(std::string_view s) {
  for (SegmentId id : all_segments())
    if (to_string(id) == s) return id;
  throw RangeError("unknown segment id '" + std::string(s) + "'");
}

std::pair<std::size_t, std::size_t> segment_range(const SegmentSpec& seg, double fs) {
  if (!(seg.dur_s > 0.0) || seg.start_s < 0.0) throw RangeError("segment must have positive duration");
  const auto begin = static_cast<std::size_t>(std::llround(seg.start_s * fs));
  const auto end = static_cast<std::size_t>(std::llround((seg.start_s + seg.dur_s) * fs));
  return {begin, end};
}

TrialRecord slice_segment(const TrialRecord& trial, const SegmentSpec& seg) {
  const auto [begin, end] = segment_range(seg, trial.fs);
  if (end > trial.n_samples() || begin >= end)
    throw RangeError("segment " + to_string(seg.id) + " [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") lies outside a trial of " +
                     std::to_string(trial.n_samples()) + " samples");
  TrialRecord out = trial;
  for (auto& ch : out.data)
    ch = std::vector<double>(ch.begin() + static_cast<std::ptrdiff_t>(begin),
                             ch.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

}  // namespace tfoc::dsp
