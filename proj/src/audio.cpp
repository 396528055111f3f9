// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "stutterkit/errors.hpp"

namespace sk {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

void put32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
void put16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

double decode_sample(const unsigned char* p, std::uint16_t format, std::uint16_t bits) {
  if (format == kFormatPcm) {
    switch (bits) {
      case 8:
        return (static_cast<double>(p[0]) - 128.0) / 128.0;
      case 16:
        return static_cast<std::int16_t>(le16(p)) / 32768.0;
      case 24: {
        std::int32_t v = std::int32_t(p[0]) | (std::int32_t(p[1]) << 8) | (std::int32_t(p[2]) << 16);
        if (v & 0x800000) v |= ~0xFFFFFF;
        return v / 8388608.0;
      }
      case 32:
        return static_cast<std::int32_t>(le32(p)) / 2147483648.0;
    }
  } else if (format == kFormatFloat) {
    if (bits == 32) {
      std::uint32_t u = le32(p);
      float f;
      std::memcpy(&f, &u, 4);
      return f;
    }
    if (bits == 64) {
      std::uint64_t u = std::uint64_t(le32(p)) | (std::uint64_t(le32(p + 4)) << 32);
      double d;
      std::memcpy(&d, &u, 8);
      return d;
    }
  }
  throw DecodeError("unsupported sample encoding: format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits");
}

}  // namespace

DecodedAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open audio file: " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw DecodeError("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = buf.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) throw DecodeError("truncated fmt chunk: " + path.string());
      const unsigned char* f = buf.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      block_align = le16(f + 12);
      bits = le16(f + 14);
      if (format == kFormatExtensible) {
        if (len < 40 || avail < 40) throw DecodeError("truncated extensible fmt: " + path.string());
        format = le16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = buf.data() + body;
      // Streaming writers leave the length as 0 or 0xFFFFFFFF.
      data_len = (len == 0 || len > avail) ? avail : len;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw DecodeError("missing fmt chunk: " + path.string());
  if (data == nullptr) throw DecodeError("missing data chunk: " + path.string());
  if (channels == 0 || rate == 0 || bits == 0) throw DecodeError("invalid fmt chunk: " + path.string());
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != channels * bytes_per_sample) block_align = static_cast<std::uint16_t>(channels * bytes_per_sample);

  DecodedAudio out;
  out.sample_rate = static_cast<int>(rate);
  const std::size_t frames = data_len / block_align;
  out.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* frame = data + i * block_align;
    for (std::uint16_t c = 0; c < channels; ++c) {
      out.channels[c][i] = decode_sample(frame + c * bytes_per_sample, format, bits);
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const DecodedAudio& audio, WavEncoding enc) {
  if (audio.channels.empty()) throw ContractViolation("write_wav: no channels");
  const std::size_t frames = audio.channels.front().size();
  for (const auto& ch : audio.channels) {
    if (ch.size() != frames) throw ContractViolation("write_wav: ragged channels");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write audio file: " + path.string());

  const std::uint16_t channels = static_cast<std::uint16_t>(audio.channels.size());
  const std::uint16_t bits = enc == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint16_t format = enc == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat;
  const std::uint16_t block = static_cast<std::uint16_t>(channels * bits / 8);
  const std::uint32_t data_len = static_cast<std::uint32_t>(frames * block);

  os.write("RIFF", 4);
  put32(os, 36 + data_len);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put32(os, 16);
  put16(os, format);
  put16(os, channels);
  put32(os, static_cast<std::uint32_t>(audio.sample_rate));
  put32(os, static_cast<std::uint32_t>(audio.sample_rate) * block);
  put16(os, block);
  put16(os, bits);
  os.write("data", 4);
  put32(os, data_len);
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& ch : audio.channels) {
      if (enc == WavEncoding::Pcm16) {
        // Same scale as the reader; +1.0 saturates at 32767.
        const long q = std::clamp(std::lround(ch[i] * 32768.0), -32768L, 32767L);
        put16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      } else {
        const float f = static_cast<float>(ch[i]);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        put32(os, u);
      }
    }
  }
  if (!os) throw IoError("failed writing audio file: " + path.string());
}

void write_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding enc) {
  DecodedAudio a;
  a.sample_rate = w.sample_rate;
  a.channels.push_back(w.samples);
  write_wav(path, a, enc);
}

std::vector<double> downmix(const DecodedAudio& audio) {
  if (audio.channels.empty()) return {};
  if (audio.channels.size() == 1) return audio.channels.front();
  const std::size_t n = audio.channels.front().size();
  std::vector<double> mono(n, 0.0);
  for (const auto& ch : audio.channels) {
    for (std::size_t i = 0; i < n; ++i) mono[i] += ch[i];
  }
  const double inv = 1.0 / static_cast<double>(audio.channels.size());
  for (double& v : mono) v *= inv;
  return mono;
}

std::vector<double> resample(const std::vector<double>& x, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw ContractViolation("resample: rates must be positive");
  if (from_rate == to_rate) return x;

  constexpr int kZeros = 6;
  const long base = std::gcd(from_rate, to_rate);
  const long in_unit = from_rate / base;
  const long out_unit = to_rate / base;
  const double cutoff = 0.99 * 0.5 * std::min(from_rate, to_rate);
  const double half_width = kZeros / (2.0 * cutoff);

  auto kernel = [&](double t) {
    if (std::abs(t) >= half_width) return 0.0;
    const double window = 0.5 * (1.0 + std::cos(std::numbers::pi * t / half_width));
    const double sinc = t == 0.0 ? 2.0 * cutoff : std::sin(2.0 * std::numbers::pi * cutoff * t) / (std::numbers::pi * t);
    return window * sinc;
  };

  // One filter per output phase within a period of the rate ratio.
  std::vector<long> first(out_unit);
  std::vector<std::vector<double>> weights(out_unit);
  for (long i = 0; i < out_unit; ++i) {
    const double t_out = static_cast<double>(i) / to_rate;
    const long lo = static_cast<long>(std::ceil((t_out - half_width) * from_rate));
    const long hi = static_cast<long>(std::floor((t_out + half_width) * from_rate));
    first[i] = lo;
    for (long j = lo; j <= hi; ++j) {
      weights[i].push_back(kernel(static_cast<double>(j) / from_rate - t_out) / from_rate);
    }
  }

  const long n_in = static_cast<long>(x.size());
  const long n_out = static_cast<long>((static_cast<long long>(n_in) * to_rate) / from_rate);
  std::vector<double> y(static_cast<std::size_t>(n_out), 0.0);
  for (long n = 0; n < n_out; ++n) {
    const long unit = n / out_unit;
    const long phase = n % out_unit;
    const long start = unit * in_unit + first[phase];
    const auto& w = weights[phase];
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const long idx = start + static_cast<long>(k);
      if (idx >= 0 && idx < n_in) acc += w[k] * x[static_cast<std::size_t>(idx)];
    }
    y[static_cast<std::size_t>(n)] = acc;
  }
  return y;
}

Waveform load_audio(const std::filesystem::path& path, int target_rate) {
  if (!std::filesystem::exists(path)) throw DecodeError("audio file not found: " + path.string());
  const DecodedAudio decoded = read_wav(path);
  if (decoded.channels.empty() || decoded.channels.front().empty()) {
    throw EmptyInputError("zero-length audio: " + path.string());
  }
  Waveform w;
  w.sample_rate = target_rate;
  w.samples = resample(downmix(decoded), decoded.sample_rate, target_rate);
  if (w.samples.empty()) throw EmptyInputError("zero-length audio after resampling: " + path.string());
  return w;
}

Waveform load_audio_segment(const std::filesystem::path& path, double offset_s, double duration_s,
                            int target_rate) {
  Waveform w = load_audio(path, target_rate);
  const auto n = w.samples.size();
  const auto begin = static_cast<std::size_t>(std::llround(std::max(0.0, offset_s) * target_rate));
  if (begin >= n) throw EmptyInputError("segment offset beyond end of audio: " + path.string());
  std::size_t end = n;
  if (duration_s > 0) {
    end = std::min(n, begin + static_cast<std::size_t>(std::llround(duration_s * target_rate)));
  }
  if (begin == 0 && end == n) return w;
  w.samples = std::vector<double>(w.samples.begin() + static_cast<long>(begin),
                                  w.samples.begin() + static_cast<long>(end));
  return w;
}

double mean_power(const std::vector<double>& x, std::size_t begin, std::size_t end) {
  if (end <= begin) return 0.0;
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += x[i] * x[i];
  return acc / static_cast<double>(end - begin);
}

double mean_power(const std::vector<double>& x) { return mean_power(x, 0, x.size()); }

double peak_abs(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

}  // namespace sk
