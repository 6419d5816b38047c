#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "tfoc/dsp.hpp"
#include "tfoc/errors.hpp"
#include "tfoc/random.hpp"

using namespace tfoc;
using namespace tfoc::dsp;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

// Brute-force STFT oracle: explicit windowed naive DFT per frame.
ComplexMatrix stft_oracle(const std::vector<double>& x, int w, int overlap, bool hann) {
  const int hop = w - overlap;
  const int frames = (static_cast<int>(x.size()) - w) / hop + 1;
  const int bins = w / 2 + 1;
  ComplexMatrix out(bins, frames);
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < bins; ++k) {
      cd acc = 0.0;
      for (int i = 0; i < w; ++i) {
        const double win = hann ? 0.5 * (1.0 - std::cos(2.0 * kPi * i / w)) : 1.0;
        acc += win * x[t * hop + i] * std::exp(cd(0.0, -2.0 * kPi * k * i / w));
      }
      out(k, t) = acc;
    }
  }
  return out;
}

SampleBuffer random_signal(std::size_t n, uint64_t seed, double fs = 250.0) {
  Rng rng(seed);
  SampleBuffer b;
  b.sampling_rate_hz = fs;
  b.samples.resize(n);
  for (auto& v : b.samples) v = rng.uniform(-50.0, 50.0);
  return b;
}

std::vector<double> impulse_response(const IirFilterSos& f, std::size_t n) {
  SampleBuffer imp;
  imp.sampling_rate_hz = f.design_meta.fs;
  imp.samples.assign(n, 0.0);
  imp.samples[0] = 1.0;
  return apply_filter(f, imp).samples;
}

// |sum_n h[n] e^{-jwn}|: frequency response from the impulse response,
// independent of the section-product evaluation.
double dtft_magnitude(const std::vector<double>& h, double f_hz, double fs) {
  cd acc = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n) acc += h[n] * std::polar(1.0, -2.0 * kPi * f_hz * n / fs);
  return std::abs(acc);
}

}  // namespace

TEST_SUITE("butterworth") {
  TEST_CASE("order 6, 8-30 Hz at 250 Hz: band edges at -3 dB, flat centre") {
    const auto f = design_butterworth_bandpass(6, 8.0, 30.0, 250.0);
    CHECK(f.sections.size() == 6);
    CHECK(f.magnitude(8.0) >= 0.705);
    CHECK(f.magnitude(8.0) <= 0.709);
    CHECK(f.magnitude(30.0) >= 0.705);
    CHECK(f.magnitude(30.0) <= 0.709);
    CHECK(f.magnitude(19.0) >= 0.99);
    CHECK(f.magnitude(19.0) <= 1.0 + 1e-12);
    CHECK(f.magnitude(2.0) < 0.1);
    CHECK(f.magnitude(45.0) < 0.1);
  }

  TEST_CASE("section product agrees with the DTFT of the impulse response") {
    const auto f = design_butterworth_bandpass(6, 8.0, 30.0, 250.0);
    const auto h = impulse_response(f, 8192);
    for (double hz : {2.0, 8.0, 19.0, 30.0, 45.0, 100.0})
      CHECK(dtft_magnitude(h, hz, 250.0) == doctest::Approx(f.magnitude(hz)).epsilon(1e-8));
  }

  TEST_CASE("bandpass zeros at DC and Nyquist") {
    const auto f = design_butterworth_bandpass(2, 8.0, 30.0, 100.0);
    CHECK(f.magnitude(0.0) < 1e-12);
    CHECK(f.magnitude(50.0) < 1e-12);
  }

  TEST_CASE("every designed section is stable") {
    for (int order : {2, 4, 6, 8})
      for (double fs : {100.0, 128.0, 250.0, 1000.0}) {
        const auto f = design_butterworth_bandpass(order, 8.0, 30.0, fs);
        for (const auto& s : f.sections) CHECK(s.pole_radius() < 1.0 - 1e-9);
      }
  }

  TEST_CASE("invalid designs are rejected") {
    CHECK_THROWS_AS(design_butterworth_bandpass(6, 30.0, 8.0, 250.0), DesignError);
    CHECK_THROWS_AS(design_butterworth_bandpass(6, 0.0, 30.0, 250.0), DesignError);
    CHECK_THROWS_AS(design_butterworth_bandpass(6, 8.0, 130.0, 250.0), DesignError);
    CHECK_THROWS_AS(design_butterworth_bandpass(5, 8.0, 30.0, 250.0), DesignError);
    CHECK_THROWS_AS(design_butterworth_bandpass(0, 8.0, 30.0, 250.0), DesignError);
  }
}

TEST_SUITE("apply_filter") {
  const auto filt = design_butterworth_bandpass(6, 8.0, 30.0, 250.0);

  TEST_CASE("zero input gives zero output") {
    SampleBuffer x{std::vector<double>(500, 0.0), 250.0};
    for (auto mode : {FilterMode::causal, FilterMode::zero_phase}) {
      const auto y = apply_filter(filt, x, mode);
      CHECK(y.samples.size() == 500);
      for (double v : y.samples) CHECK(v == 0.0);
    }
  }

  TEST_CASE("impulse-response energy matches Parseval over a dense DFT") {
    const std::size_t n = 1 << 15;
    const auto h = impulse_response(filt, n);
    double energy = 0.0;
    for (double v : h) energy += v * v;
    double spectral = 0.0;
    for (std::size_t k = 0; k < n; ++k) spectral += std::norm(filt.response(250.0 * k / n));
    spectral /= static_cast<double>(n);
    CHECK(std::abs(energy - spectral) / spectral < 1e-6);
  }

  TEST_CASE("steady-state 19 Hz sine is scaled by |H(19 Hz)|") {
    const double fs = 250.0;
    SampleBuffer x;
    x.sampling_rate_hz = fs;
    for (int i = 0; i < 5000; ++i) x.samples.push_back(std::sin(2.0 * kPi * 19.0 * i / fs));
    const auto y = apply_filter(filt, x);
    // Least-squares amplitude over the last 2000 samples.
    double ss = 0.0, sc = 0.0;
    for (int i = 3000; i < 5000; ++i) {
      ss += y.samples[i] * std::sin(2.0 * kPi * 19.0 * i / fs);
      sc += y.samples[i] * std::cos(2.0 * kPi * 19.0 * i / fs);
    }
    const double amp = 2.0 * std::hypot(ss, sc) / 2000.0;
    CHECK(std::abs(amp - filt.magnitude(19.0)) / filt.magnitude(19.0) < 0.01);
  }

  TEST_CASE("zero-phase output of a symmetric input is symmetric") {
    const std::size_t n = 12001;
    SampleBuffer x{std::vector<double>(n, 0.0), 250.0};
    Rng rng(3);
    for (std::size_t i = 0; i <= 200; ++i) {
      const double v = rng.uniform(-1.0, 1.0);
      x.samples[n / 2 - i] = v;
      x.samples[n / 2 + i] = v;
    }
    const auto y = apply_filter(filt, x, FilterMode::zero_phase);
    double peak = 0.0, asym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      peak = std::max(peak, std::abs(y.samples[i]));
      asym = std::max(asym, std::abs(y.samples[i] - y.samples[n - 1 - i]));
    }
    CHECK(asym < 1e-9 * peak);
  }

  TEST_CASE("non-finite input is rejected") {
    SampleBuffer x{std::vector<double>(10, 1.0), 250.0};
    x.samples[4] = std::nan("");
    CHECK_THROWS_AS(apply_filter(filt, x), InputError);
    CHECK_THROWS_AS(apply_filter(filt, SampleBuffer{{}, 250.0}), InputError);
  }
}

TEST_SUITE("stft") {
  TEST_CASE("frame and bin counts") {
    struct Case {
      std::size_t n;
      int w, ov;
      std::size_t frames, bins;
    };
    for (const Case c : {Case{1000, 256, 128, 6, 129}, Case{1000, 256, 1, 3, 129}, Case{400, 128, 64, 5, 65}}) {
      const auto z = stft(random_signal(c.n, c.n + c.ov), {c.w, c.ov, WindowFn::hann});
      CHECK(z.cols == c.frames);
      CHECK(z.rows == c.bins);
    }
  }

  TEST_CASE("frame-count formula, exhaustive over n <= 64, w <= 16") {
    for (int w = 2; w <= 16; ++w)
      for (int ov = 1; ov < w; ++ov)
        for (std::size_t n = static_cast<std::size_t>(w); n <= 64; ++n) {
          // Count frames by walking start positions.
          std::size_t frames = 0;
          for (std::size_t start = 0; start + w <= n; start += static_cast<std::size_t>(w - ov)) ++frames;
          const StftConfig cfg{w, ov, WindowFn::rectangular};
          REQUIRE(stft_frame_count(n, cfg) == frames);
          if (n >= 60) REQUIRE(stft(random_signal(n, 9), cfg).cols == frames);
        }
  }

  TEST_CASE("matches the brute-force oracle") {
    struct Case {
      std::size_t n;
      int w, ov;
    };
    // Standard configurations plus non-power-of-two windows.
    for (const Case c : {Case{1000, 256, 128}, Case{1000, 256, 1}, Case{400, 128, 64}, Case{300, 100, 50},
                         Case{97, 12, 5}}) {
      for (bool hann : {true, false}) {
        const auto x = random_signal(c.n, 17 * c.n + c.ov);
        const auto got = stft(x, {c.w, c.ov, hann ? WindowFn::hann : WindowFn::rectangular});
        const auto want = stft_oracle(x.samples, c.w, c.ov, hann);
        REQUIRE(got.rows == want.rows);
        REQUIRE(got.cols == want.cols);
        double err = 0.0;
        for (std::size_t i = 0; i < got.data.size(); ++i) err = std::max(err, std::abs(got.data[i] - want.data[i]));
        CHECK(err < 1e-9);
      }
    }
  }

  TEST_CASE("constant signal with rectangular window") {
    SampleBuffer x{std::vector<double>(700, 2.5), 250.0};
    const auto z = stft(x, {256, 128, WindowFn::rectangular});
    for (std::size_t t = 0; t < z.cols; ++t) {
      CHECK(std::abs(z(0, t) - cd(2.5 * 256, 0.0)) < 1e-9);
      for (std::size_t k = 1; k < z.rows; ++k) CHECK(std::abs(z(k, t)) < 1e-9);
    }
  }

  TEST_CASE("signal shorter than the window is a length error") {
    CHECK_THROWS_AS(stft(random_signal(100, 1), {128, 64, WindowFn::hann}), LengthError);
    CHECK_THROWS_AS(stft(random_signal(300, 1), {128, 128, WindowFn::hann}), InputError);
    CHECK_THROWS_AS(stft(random_signal(300, 1), {128, 0, WindowFn::hann}), InputError);
  }

  TEST_CASE("overlap presets") {
    CHECK(minimal_overlap(256) == 1);
    CHECK(half_overlap(256) == 128);
    CHECK(half_overlap(128) == 64);
  }
}

TEST_SUITE("spectrogram") {
  TEST_CASE("modulus of the stft") {
    const auto x = random_signal(600, 5);
    const StftConfig cfg{128, 64, WindowFn::hann};
    const auto z = stft(x, cfg);
    const auto s = spectrogram(x, cfg);
    CHECK(s.freq_bin_hz == doctest::Approx(250.0 / 128));
    CHECK(s.hop == 64);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      CHECK(s.values.data[i] >= 0.0);
      CHECK(s.values.data[i] == doctest::Approx(std::abs(z.data[i])));
    }
    CHECK(std::abs(cd(3.0, 4.0)) == 5.0);
  }

  TEST_CASE("zero signal gives all-zero spectrogram") {
    const auto s = spectrogram(SampleBuffer{std::vector<double>(512, 0.0), 250.0}, {256, 128, WindowFn::hann});
    for (double v : s.values.data) CHECK(v == 0.0);
  }

  TEST_CASE("bin-centred sine peaks at its bin") {
    const double fs = 250.0, f0 = 10.0 * fs / 256.0;  // 9.765625 Hz
    SampleBuffer x;
    x.sampling_rate_hz = fs;
    for (int i = 0; i < 1000; ++i) x.samples.push_back(std::sin(2.0 * kPi * f0 * i / fs));
    const auto s = spectrogram(x, {256, 128, WindowFn::rectangular});
    for (std::size_t t = 0; t < s.n_frames(); ++t) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < s.n_freq(); ++k)
        if (s.values(k, t) > s.values(best, t)) best = k;
      CHECK(best == 10);
    }
  }

  TEST_CASE("crop keeps the requested band") {
    const auto s = spectrogram(random_signal(512, 2, 64.0), {32, 16, WindowFn::hann});
    const auto c = crop_band(s, 8.0, 30.0);
    CHECK(c.n_freq() == 12);  // 8, 10, ..., 30 Hz
    CHECK(c.first_bin_hz == doctest::Approx(8.0));
    CHECK(c.values(0, 0) == s.values(4, 0));
    CHECK_THROWS_AS(crop_band(s, 40.0, 50.0), InputError);
  }

  TEST_CASE("short segments are padded symmetrically") {
    SampleBuffer x{std::vector<double>(5, 1.0), 100.0};
    const auto p = pad_to_length(x, 10);
    CHECK(p.samples == std::vector<double>{0, 0, 1, 1, 1, 1, 1, 0, 0, 0});
    CHECK(pad_to_length(x, 3).samples.size() == 5);
  }
}

TEST_SUITE("assemble_model_input") {
  Spectrogram filled(std::size_t f, std::size_t t, double base) {
    Spectrogram s;
    s.values = Matrix(f, t);
    for (std::size_t i = 0; i < s.values.data.size(); ++i) s.values.data[i] = base + static_cast<double>(i);
    return s;
  }

  TEST_CASE("three channels concatenate along time") {
    std::vector<Spectrogram> specs = {filled(129, 6, 0), filled(129, 6, 1000), filled(129, 6, 2000)};
    const auto in = assemble_model_input(specs);
    CHECK(in.height() == 129);
    CHECK(in.width() == 18);
    CHECK(in.depth() == 1);
    CHECK(in.values(5, 3) == specs[0].values(5, 3));
    CHECK(in.values(5, 6 + 3) == specs[1].values(5, 3));
    CHECK(in.values(7, 12 + 5) == specs[2].values(7, 5));
  }

  TEST_CASE("rearrangement is a bijection") {
    std::vector<Spectrogram> specs = {filled(4, 3, 0), filled(4, 3, 100), filled(4, 3, 200)};
    const auto in = assemble_model_input(specs);
    std::vector<double> a = in.values.data, b;
    for (const auto& s : specs) b.insert(b.end(), s.values.data.begin(), s.values.data.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }

  TEST_CASE("single channel passes through, mismatch is rejected") {
    std::vector<Spectrogram> one = {filled(65, 5, 0)};
    const auto in = assemble_model_input(one);
    CHECK(in.height() == 65);
    CHECK(in.width() == 5);
    std::vector<Spectrogram> bad = {filled(129, 6, 0), filled(129, 5, 0)};
    CHECK_THROWS_AS(assemble_model_input(bad), AssemblyError);
  }
}

TEST_SUITE("resize_bilinear") {
  TEST_CASE("same size is the identity") {
    Matrix m(32, 32);
    Rng rng(1);
    for (auto& v : m.data) v = rng.uniform();
    CHECK(resize_bilinear(m, 32, 32).data == m.data);
  }

  TEST_CASE("constants are preserved") {
    const auto out = resize_bilinear(Matrix(7, 13, 4.25), 32, 32);
    for (double v : out.data) CHECK(v == doctest::Approx(4.25));
  }

  TEST_CASE("corner alignment and closed form") {
    Matrix m(2, 2);
    m(0, 0) = 0;
    m(0, 1) = 1;
    m(1, 0) = 1;
    m(1, 1) = 2;
    const auto out = resize_bilinear(m, 32, 32);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(0, 31) == 1.0);
    CHECK(out(31, 0) == 1.0);
    CHECK(out(31, 31) == 2.0);
    // m(y, x) = x + y on the unit square.
    CHECK(out(10, 20) == doctest::Approx(10.0 / 31 + 20.0 / 31));
  }

  TEST_CASE("empty input is rejected") {
    CHECK_THROWS_AS(resize_bilinear(Matrix(), 4, 4), InputError);
    CHECK_THROWS_AS(resize_bilinear(Matrix(2, 2), 0, 4), InputError);
  }
}

TEST_SUITE("slice_segment") {
  TrialRecord make_trial(double fs, double dur) {
    TrialRecord t;
    t.fs = fs;
    t.channels = {"C3", "Cz", "C4"};
    const auto n = static_cast<std::size_t>(fs * dur);
    for (int c = 0; c < 3; ++c) {
      std::vector<double> ch(n);
      for (std::size_t i = 0; i < n; ++i) ch[i] = static_cast<double>(i) + 10000.0 * c;
      t.data.push_back(ch);
    }
    return t;
  }

  TEST_CASE("segment table") {
    CHECK(segment_range(segment_spec(SegmentId::mid2), 250.0) == std::pair<std::size_t, std::size_t>{250, 750});
    CHECK(segment_range(segment_spec(SegmentId::sec3), 100.0) == std::pair<std::size_t, std::size_t>{200, 300});
    CHECK(segment_range(segment_spec(SegmentId::end2), 100.0) == std::pair<std::size_t, std::size_t>{200, 400});
    CHECK(segment_range(segment_spec(SegmentId::first3), 100.0) == std::pair<std::size_t, std::size_t>{0, 300});
  }

  TEST_CASE("mid2 slice at 250 Hz") {
    const auto t = make_trial(250.0, 4.0);
    const auto s = slice_segment(t, segment_spec(SegmentId::mid2));
    CHECK(s.n_samples() == 500);
    CHECK(s.data[0].front() == 250.0);
    CHECK(s.data[2].back() == 20749.0);
  }

  TEST_CASE("full4 is the identity") {
    const auto t = make_trial(250.0, 4.0);
    CHECK(slice_segment(t, segment_spec(SegmentId::full4)).data == t.data);
  }

  TEST_CASE("lengths are exactly dur * fs") {
    for (double fs : {100.0, 128.0, 250.0}) {
      const auto t = make_trial(fs, 4.0);
      for (SegmentId id : all_segments()) {
        const auto spec = segment_spec(id);
        CHECK(slice_segment(t, spec).n_samples() == static_cast<std::size_t>(spec.dur_s * fs));
      }
    }
  }

  TEST_CASE("segment outside the trial is a range error") {
    const auto t = make_trial(250.0, 2.0);
    CHECK_THROWS_AS(slice_segment(t, segment_spec(SegmentId::end2)), RangeError);
    CHECK_NOTHROW(slice_segment(t, segment_spec(SegmentId::first2)));
  }

  TEST_CASE("segment ids round-trip through their names") {
    for (SegmentId id : all_segments()) CHECK(parse_segment_id(to_string(id)) == id);
    CHECK_THROWS_AS(parse_segment_id("sec5"), RangeError);
  }
}
