#pragma once

// Stateless signal-processing kernels: Butterworth bandpass design and
// filtering, STFT / spectrogram, model-input assembly, bilinear resize and
// trial segment slicing. Everything here is a pure function of its inputs.

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tfoc/trial.hpp"

namespace tfoc::dsp {

struct SampleBuffer {
  std::vector<double> samples;
  double sampling_rate_hz{0.0};

  // Throws InputError unless non-empty, fs > 0 and every sample finite.
  void validate() const;
};

// Row-major real matrix.
struct Matrix {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool empty() const { return data.empty(); }
};

struct ComplexMatrix {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<std::complex<double>> data;

  ComplexMatrix() = default;
  ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  std::complex<double>& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const std::complex<double>& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// ---------------------------------------------------------------------------
// IIR filtering

// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0{1.0}, b1{0.0}, b2{0.0};
  double a1{0.0}, a2{0.0};

  std::complex<double> response(std::complex<double> z) const;
  // Largest pole magnitude of this section.
  double pole_radius() const;
};

struct FilterDesign {
  int order{0};
  double low_hz{0.0};
  double high_hz{0.0};
  double fs{0.0};
};

struct IirFilterSos {
  std::vector<Biquad> sections;
  FilterDesign design_meta;

  // Complex frequency response at f_hz.
  std::complex<double> response(double f_hz) const;
  double magnitude(double f_hz) const;
  bool is_stable(double margin = 1e-9) const;
};

enum class FilterMode { causal, zero_phase };

// Digital Butterworth bandpass via bilinear transform of an `order`-pole
// lowpass prototype (2*order poles in total), cut-offs pre-warped so both
// edges sit at exactly -3 dB. Sections are normalised to unit gain at the
// geometric band centre.
IirFilterSos design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs);

// Section-cascade filtering with zero initial conditions. zero_phase runs the
// cascade forward, then over the time-reversed output.
SampleBuffer apply_filter(const IirFilterSos& filter, const SampleBuffer& x,
                          FilterMode mode = FilterMode::causal);

std::string to_string(FilterMode m);
FilterMode parse_filter_mode(std::string_view s);

// ---------------------------------------------------------------------------
// STFT

enum class WindowFn { hann, rectangular };

std::string to_string(WindowFn w);
WindowFn parse_window_fn(std::string_view s);

struct StftConfig {
  int window_len{256};
  int overlap{128};  // samples shared by consecutive frames
  WindowFn window_fn{WindowFn::hann};

  int hop() const { return window_len - overlap; }
  int n_bins() const { return window_len / 2 + 1; }
  // Throws InputError unless 1 <= overlap < window_len and window_len >= 2.
  void validate() const;
};

// Overlap presets: "minimal" is one sample, "half" is window_len / 2.
int minimal_overlap(int window_len);
int half_overlap(int window_len);

// Frame count for a signal of n samples; 0 when n < window_len.
std::size_t stft_frame_count(std::size_t n, const StftConfig& cfg);

// Periodic Hann or rectangular window of length n.
std::vector<double> make_window(WindowFn fn, int n);

// One-sided STFT; rows are frequency bins, columns frames. Trailing samples
// that do not fill a frame are dropped. Throws LengthError when the signal is
// shorter than one window.
ComplexMatrix stft(const SampleBuffer& x, const StftConfig& cfg);

struct Spectrogram {
  Matrix values;  // F x T magnitudes
  double freq_bin_hz{0.0};
  int hop{0};
  // Frequency of row 0. Non-zero after crop_band.
  double first_bin_hz{0.0};

  std::size_t n_freq() const { return values.rows; }
  std::size_t n_frames() const { return values.cols; }
};

Spectrogram spectrogram(const SampleBuffer& x, const StftConfig& cfg);

// Keeps rows whose centre frequency lies in [low_hz, high_hz].
Spectrogram crop_band(const Spectrogram& s, double low_hz, double high_hz);

// Zero-pads symmetrically (extra sample on the right) up to `length`.
// Signals already at least that long are returned unchanged.
SampleBuffer pad_to_length(const SampleBuffer& x, std::size_t length);

// Model input as an F x (C*T) matrix (channel blocks left to right). The
// trailing singleton depth axis is implicit.
struct InputTensor {
  Matrix values;

  std::size_t height() const { return values.rows; }
  std::size_t width() const { return values.cols; }
  static constexpr std::size_t depth() { return 1; }
};

// Concatenates channel spectrograms along time, in the given order.
InputTensor assemble_model_input(std::span<const Spectrogram> specs);

// Corner-aligned bilinear interpolation.
Matrix resize_bilinear(const Matrix& m, std::size_t out_h, std::size_t out_w);

// ---------------------------------------------------------------------------
// Segments

enum class SegmentId { full4, first3, first2, mid2, end2, sec1, sec2, sec3, sec4 };

struct SegmentSpec {
  SegmentId id{SegmentId::full4};
  double start_s{0.0};
  double dur_s{4.0};
};

SegmentSpec segment_spec(SegmentId id);
std::string to_string(SegmentId id);
SegmentId parse_segment_id(std::string_view s);
// The nine segments in table order.
const std::vector<SegmentId>& all_segments();

// Sample range [begin, end) of a segment at the given rate.
std::pair<std::size_t, std::size_t> segment_range(const SegmentSpec& seg, double fs);

TrialRecord slice_segment(const TrialRecord& trial, const SegmentSpec& seg);

}  // namespace tfoc::dsp
