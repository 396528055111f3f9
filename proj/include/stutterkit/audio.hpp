// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

namespace sk {

inline constexpr int kModelSampleRate = 16000;

/// Mono audio. Amplitudes are nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kModelSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Multi-channel decode result, channel-major.
struct DecodedAudio {
  std::vector<std::vector<double>> channels;
  int sample_rate = 0;
};

enum class WavEncoding { Pcm16, Float32 };

/// Decodes a RIFF/WAVE file: PCM 8/16/24/32-bit, IEEE float 32/64, and
/// WAVE_FORMAT_EXTENSIBLE wrapping either. Throws DecodeError.
DecodedAudio read_wav(const std::filesystem::path& path);

/// Writes mono audio. PCM16 clips to [-1, 1]. Throws IoError.
void write_wav(const std::filesystem::path& path, const Waveform& w,
               WavEncoding enc = WavEncoding::Pcm16);
void write_wav(const std::filesystem::path& path, const DecodedAudio& audio,
               WavEncoding enc = WavEncoding::Pcm16);

/// Channel average.
std::vector<double> downmix(const DecodedAudio& audio);

/// Band-limited resampling with a Hann-windowed sinc kernel evaluated on the
/// polyphase grid of the rational rate ratio. The cutoff sits at 0.99 of the
/// lower Nyquist frequency with 6 zero crossings per side. Output length is
/// floor(n * to / from). Identity when the rates match.
std::vector<double> resample(const std::vector<double>& x, int from_rate, int to_rate);

/// Decode, down-mix to mono and resample to `target_rate`.
/// Throws DecodeError for unreadable files, EmptyInputError for zero length.
Waveform load_audio(const std::filesystem::path& path, int target_rate = kModelSampleRate);

/// Like load_audio, but cuts [offset_s, offset_s + duration_s) after
/// resampling. duration_s <= 0 keeps everything from offset_s on.
Waveform load_audio_segment(const std::filesystem::path& path, double offset_s, double duration_s,
                            int target_rate = kModelSampleRate);

double mean_power(const std::vector<double>& x);
double mean_power(const std::vector<double>& x, std::size_t begin, std::size_t end);
double peak_abs(const std::vector<double>& x);

}  // namespace sk
