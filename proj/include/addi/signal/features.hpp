// addi/signal/features.hpp

// Copyright 2026  addilab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Log mel filterbank front end: framing with a Povey window, power spectrum,
// triangular mel filters, log with an energy floor. Conventions follow the
// usual speech-toolkit fbank defaults (snip-edges framing, per-frame DC
// removal and preemphasis, no dithering).

#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "addi/common/error.hpp"

namespace addi::signal {

inline constexpr std::size_t kNumMels = 40;

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  void Validate() const {
    Require(!samples.empty(), ErrorKind::kInvalidInput, "audio clip is empty");
    Require(sample_rate > 0, ErrorKind::kInvalidInput, "sample rate must be positive");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Require(std::isfinite(samples[i]), ErrorKind::kInvalidInput,
              "audio sample " + std::to_string(i) + " is not finite");
    }
  }
};

// n_mels x T log-mel energies stored row-major (mel band major). Columns at
// or beyond n_frames_valid are padding and exactly zero.
struct FeatureMatrix {
  std::size_t n_mels = kNumMels;
  std::size_t n_frames = 0;
  std::size_t n_frames_valid = 0;
  std::vector<float> values;

  float at(std::size_t mel, std::size_t frame) const { return values[mel * n_frames + frame]; }
  float& at(std::size_t mel, std::size_t frame) { return values[mel * n_frames + frame]; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

struct FrameOptions {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  double preemph_coeff = 0.97;
  bool remove_dc_offset = true;

  std::size_t FrameLength(int sample_rate) const {
    return static_cast<std::size_t>(sample_rate * 0.001 * frame_length_ms);
  }
  std::size_t FrameShift(int sample_rate) const {
    return static_cast<std::size_t>(sample_rate * 0.001 * frame_shift_ms);
  }
};

struct MelOptions {
  std::size_t n_mels = kNumMels;
  double low_cutoff_hz = 20.0;
  // Upper filter edge; zero or negative means the Nyquist frequency.
  double high_cutoff_hz = 0.0;
  double energy_floor = 1e-10;
};

struct FbankOptions {
  FrameOptions frame;
  MelOptions mel;
};

// Windowed frames, one row per frame.
struct Frames {
  std::size_t frame_length = 0;
  std::vector<std::vector<double>> rows;
};

inline double MelScale(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

inline std::size_t NextPowerOfTwo(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// y[n] = x[n] - coeff * x[n-1], with x[-1] taken as x[0].
inline std::vector<double> Preemphasize(std::span<const double> x, double coeff) {
  Require(!x.empty(), ErrorKind::kInvalidInput, "preemphasis of an empty signal");
  Require(coeff >= 0.0 && coeff < 1.0, ErrorKind::kInvalidInput,
          "preemphasis coefficient must lie in [0, 1)");
  std::vector<double> y(x.size());
  for (std::size_t n = x.size(); n-- > 1;) y[n] = x[n] - coeff * x[n - 1];
  y[0] = x[0] - coeff * x[0];
  return y;
}

// w[n] = (0.5 - 0.5 cos(2 pi n / (N - 1)))^0.85
inline std::vector<double> PoveyWindow(std::size_t length) {
  Require(length >= 2, ErrorKind::kInvalidInput, "window length must be at least 2");
  std::vector<double> w(length);
  const double a = 2.0 * M_PI / static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = std::pow(0.5 - 0.5 * std::cos(a * static_cast<double>(n)), 0.85);
  }
  return w;
}

inline std::size_t NumFrames(std::size_t num_samples, std::size_t frame_length,
                             std::size_t frame_shift) {
  if (num_samples < frame_length) return 0;
  return 1 + (num_samples - frame_length) / frame_shift;
}

inline Frames FrameSignal(std::span<const double> samples, int sample_rate,
                          const FrameOptions& opts = {}) {
  Require(sample_rate > 0, ErrorKind::kInvalidInput, "sample rate must be positive");
  const std::size_t len = opts.FrameLength(sample_rate);
  const std::size_t shift = opts.FrameShift(sample_rate);
  Require(len >= 2 && shift >= 1, ErrorKind::kInvalidInput,
          "frame length/shift too small for sample rate");
  Require(samples.size() >= len, ErrorKind::kInvalidInput,
          "signal of " + std::to_string(samples.size()) +
              " samples is shorter than one frame (" + std::to_string(len) + ")");
  const std::vector<double> window = PoveyWindow(len);
  Frames frames;
  frames.frame_length = len;
  const std::size_t count = NumFrames(samples.size(), len, shift);
  frames.rows.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    std::vector<double> frame(samples.begin() + static_cast<std::ptrdiff_t>(f * shift),
                              samples.begin() + static_cast<std::ptrdiff_t>(f * shift + len));
    if (opts.remove_dc_offset) {
      double mean = 0.0;
      for (double v : frame) mean += v;
      mean /= static_cast<double>(len);
      for (double& v : frame) v -= mean;
    }
    if (opts.preemph_coeff != 0.0) frame = Preemphasize(frame, opts.preemph_coeff);
    for (std::size_t n = 0; n < len; ++n) frame[n] *= window[n];
    frames.rows.push_back(std::move(frame));
  }
  return frames;
}

// Triangular filters equally spaced on the mel scale between the low and
// high cutoffs, evaluated at FFT bin centre frequencies [0, fft_size / 2).
inline std::vector<std::vector<double>> MelBanks(std::size_t fft_size, int sample_rate,
                                                 const MelOptions& opts) {
  const double nyquist = 0.5 * sample_rate;
  const double high = opts.high_cutoff_hz > 0.0 ? opts.high_cutoff_hz : nyquist;
  Require(high <= nyquist, ErrorKind::kInvalidInput,
          "sample rate " + std::to_string(sample_rate) +
              " is below twice the highest filter edge");
  Require(opts.low_cutoff_hz >= 0.0 && opts.low_cutoff_hz < high, ErrorKind::kInvalidInput,
          "low cutoff must lie in [0, high cutoff)");
  Require(opts.n_mels >= 1, ErrorKind::kInvalidInput, "need at least one mel band");
  const std::size_t num_bins = fft_size / 2;
  const double bin_width = static_cast<double>(sample_rate) / static_cast<double>(fft_size);
  const double mel_low = MelScale(opts.low_cutoff_hz);
  const double mel_high = MelScale(high);
  const double delta = (mel_high - mel_low) / static_cast<double>(opts.n_mels + 1);
  std::vector<std::vector<double>> banks(opts.n_mels, std::vector<double>(num_bins, 0.0));
  for (std::size_t b = 0; b < opts.n_mels; ++b) {
    const double left = mel_low + static_cast<double>(b) * delta;
    const double center = left + delta;
    const double right = center + delta;
    for (std::size_t i = 0; i < num_bins; ++i) {
      const double mel = MelScale(bin_width * static_cast<double>(i));
      if (mel > left && mel < right) {
        banks[b][i] = mel <= center ? (mel - left) / (center - left)
                                    : (right - mel) / (right - center);
      }
    }
  }
  return banks;
}

inline FeatureMatrix MelFilterbank(const Frames& frames, int sample_rate,
                                   const MelOptions& opts = {}) {
  Require(!frames.rows.empty(), ErrorKind::kInvalidInput, "no frames to analyse");
  const std::size_t fft_size = NextPowerOfTwo(frames.frame_length);
  const auto banks = MelBanks(fft_size, sample_rate, opts);

  FeatureMatrix out;
  out.n_mels = opts.n_mels;
  out.n_frames = frames.rows.size();
  out.n_frames_valid = out.n_frames;
  out.values.assign(out.n_mels * out.n_frames, 0.0f);

  Eigen::FFT<double> fft;
  std::vector<double> padded(fft_size);
  std::vector<std::complex<double>> spectrum;
  std::vector<double> power(fft_size / 2);
  for (std::size_t f = 0; f < frames.rows.size(); ++f) {
    std::fill(padded.begin(), padded.end(), 0.0);
    std::copy(frames.rows[f].begin(), frames.rows[f].end(), padded.begin());
    fft.fwd(spectrum, padded);
    for (std::size_t i = 0; i < power.size(); ++i) {
      power[i] = std::norm(spectrum[i]);
      if (!std::isfinite(power[i])) {
        Fail(ErrorKind::kNumeric, "non-finite spectrum in frame " + std::to_string(f));
      }
    }
    for (std::size_t b = 0; b < opts.n_mels; ++b) {
      double e = 0.0;
      for (std::size_t i = 0; i < power.size(); ++i) e += banks[b][i] * power[i];
      out.at(b, f) = static_cast<float>(std::log(std::max(e, opts.energy_floor)));
    }
  }
  return out;
}

inline FeatureMatrix ComputeFbank(const AudioClip& clip, const FbankOptions& opts = {}) {
  clip.Validate();
  return MelFilterbank(FrameSignal(clip.samples, clip.sample_rate, opts.frame),
                       clip.sample_rate, opts.mel);
}

// Right-pads every matrix with zero columns to the longest frame count.
inline std::vector<FeatureMatrix> PadToLongest(std::vector<FeatureMatrix> features) {
  Require(!features.empty(), ErrorKind::kInvalidInput, "cannot pad an empty set");
  std::size_t longest = 0;
  for (const auto& f : features) longest = std::max(longest, f.n_frames);
  for (auto& f : features) {
    if (f.n_frames == longest) continue;
    std::vector<float> v(f.n_mels * longest, 0.0f);
    for (std::size_t m = 0; m < f.n_mels; ++m) {
      std::copy_n(f.values.begin() + static_cast<std::ptrdiff_t>(m * f.n_frames), f.n_frames,
                  v.begin() + static_cast<std::ptrdiff_t>(m * longest));
    }
    f.values = std::move(v);
    f.n_frames = longest;
  }
  return features;
}

// Same as above for a target length at least as long as every member; used
// when a model was built for a fixed frame count.
inline FeatureMatrix PadTo(const FeatureMatrix& f, std::size_t frames) {
  Require(frames >= f.n_frames_valid, ErrorKind::kDimension,
          "utterance of " + std::to_string(f.n_frames_valid) +
              " frames does not fit in " + std::to_string(frames));
  FeatureMatrix out;
  out.n_mels = f.n_mels;
  out.n_frames = frames;
  out.n_frames_valid = f.n_frames_valid;
  out.values.assign(f.n_mels * frames, 0.0f);
  for (std::size_t m = 0; m < f.n_mels; ++m) {
    for (std::size_t t = 0; t < f.n_frames_valid; ++t) out.values[m * frames + t] = f.at(m, t);
  }
  return out;
}

}  // namespace addi::signal
