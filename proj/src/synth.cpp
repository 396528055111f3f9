// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stutterkit/errors.hpp"

namespace sk {

namespace fs = std::filesystem;

namespace {

constexpr double kMinF0 = 120.0;
constexpr double kMaxF0 = 350.0;

/// Adds a harmonic tone with 10 ms raised-cosine edges; returns the end sample.
std::size_t add_tone(std::vector<double>& x, std::size_t begin, double dur_s, double f0, double amp, int rate) {
  const auto n = static_cast<std::size_t>(dur_s * rate);
  const auto ramp = static_cast<std::size_t>(0.01 * rate);
  for (std::size_t i = 0; i < n && begin + i < x.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    double env = 1.0;
    if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
    if (n - i <= ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - i) / ramp));
    double v = 0.0;
    for (int h = 1; h <= 4; ++h) v += std::sin(2.0 * std::numbers::pi * f0 * h * t) / h;
    x[begin + i] += amp * env * v;
  }
  return std::min(x.size(), begin + n);
}

struct Voice {
  double f0;
  double amp;
};

double next_pitch(double f, Rng& rng) {
  // At least 10% away from the previous pitch, kept inside the voice range.
  for (;;) {
    const double ratio = rng.uniform() < 0.5 ? rng.uniform(0.72, 0.9) : rng.uniform(1.1, 1.35);
    const double g = f * ratio;
    if (g >= kMinF0 && g <= kMaxF0) return g;
  }
}

double jitter(double amp, Rng& rng) { return amp * rng.uniform(0.8, 1.2); }

/// Fluent-style tones from `pos` until `end`; returns the last pitch used.
double fluent_run(std::vector<double>& x, std::size_t pos, std::size_t end, Voice v, double f, Rng& rng, int rate) {
  while (pos + static_cast<std::size_t>(0.1 * rate) < end) {
    f = next_pitch(f, rng);
    const double dur = std::min(rng.uniform(0.15, 0.35), static_cast<double>(end - pos) / rate);
    pos = add_tone(x, pos, dur, f, jitter(v.amp, rng), rate);
    pos += static_cast<std::size_t>(rng.uniform(0.04, 0.1) * rate);
  }
  return f;
}

}  // namespace

int SynthSpec::count(Label l) const {
  auto it = class_imbalance.find(l);
  const double mult = it == class_imbalance.end() ? 1.0 : it->second;
  return static_cast<int>(std::lround(n_per_class * mult));
}

void SynthSpec::validate() const {
  if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
  if (!(clip_s >= 2.5)) throw ConfigError("clip_s must be at least 2.5 s to hold every class signature");
  if (rate < 8000) throw ConfigError("rate must be >= 8000 Hz");
  if (n_podcasts < 1) throw ConfigError("n_podcasts must be >= 1");
  for (const auto& [l, m] : class_imbalance) {
    if (!(m > 0.0)) throw ConfigError("imbalance multipliers must be positive");
  }
  if (!(noise_level >= 0.0 && noise_level <= 10.0)) throw ConfigError("noise_level must lie in [0, 10]");
}

Waveform synth_clip(Label label, const SynthSpec& spec, Rng& rng) {
  const int rate = spec.rate;
  const auto n = static_cast<std::size_t>(std::lround(spec.clip_s * rate));
  Waveform w{std::vector<double>(n, 0.0), rate};
  auto& x = w.samples;
  const Voice v{rng.uniform(kMinF0, kMaxF0), rng.uniform(0.15, 0.3)};
  auto at = [&](double s) { return std::min(n, static_cast<std::size_t>(s * rate)); };

  std::size_t pos = at(rng.uniform(0.0, 0.05));
  double f = v.f0;
  switch (label) {
    case Label::Fluent:
      fluent_run(x, pos, n, v, f, rng, rate);
      break;
    case Label::Block:
      pos = at(rng.uniform(0.8, 1.2));
      fluent_run(x, pos, n, v, f, rng, rate);
      break;
    case Label::Prolongation: {
      const std::size_t start = at(rng.uniform(0.05, 0.6));
      if (start > pos + at(0.2)) f = fluent_run(x, pos, start - at(0.05), v, f, rng, rate);
      f = next_pitch(f, rng);
      pos = add_tone(x, start, rng.uniform(1.5, 2.0), f, jitter(v.amp, rng), rate);
      fluent_run(x, pos + at(rng.uniform(0.04, 0.1)), n, v, f, rng, rate);
      break;
    }
    case Label::Repetition: {
      const std::size_t start = at(rng.uniform(0.05, 1.0));
      if (start > pos + at(0.2)) f = fluent_run(x, pos, start - at(0.05), v, f, rng, rate);
      f = next_pitch(f, rng);
      const auto reps = rng.uniform_int(2, 4);
      // Shorter bursts and longer gaps than any fluent tone or pause.
      const double dur = rng.uniform(0.08, 0.12);
      const double gap = rng.uniform(0.15, 0.22);
      const double amp = jitter(v.amp, rng);
      pos = start;
      for (std::int64_t r = 0; r < reps; ++r) pos = add_tone(x, pos, dur, f, amp, rate) + at(gap);
      fluent_run(x, pos, n, v, f, rng, rate);
      break;
    }
    case Label::Interjection: {
      const std::size_t start = at(rng.uniform(0.3, 1.8));
      f = fluent_run(x, pos, start, v, f, rng, rate);
      const double amp = jitter(v.amp, rng);
      pos = add_tone(x, start, rng.uniform(0.12, 0.18), rng.uniform(880.0, 920.0), amp, rate);
      pos = add_tone(x, pos, rng.uniform(0.12, 0.18), rng.uniform(1280.0, 1320.0), amp, rate);
      fluent_run(x, pos + at(rng.uniform(0.04, 0.1)), n, v, f, rng, rate);
      break;
    }
  }
  for (auto& s : x) s += spec.noise_level * rng.uniform(-1.0, 1.0);
  return w;
}

Manifest generate(const SynthSpec& spec, const fs::path& out_dir) {
  spec.validate();
  const fs::path clips = out_dir / "clips";
  std::error_code ec;
  fs::create_directories(clips, ec);
  if (ec) throw IoError("cannot create " + clips.string() + ": " + ec.message());

  Manifest m;
  m.source_name = "synth";
  m.base_dir = out_dir;
  const Rng root(spec.seed);
  for (Label l : kAllLabels) {
    for (int k = 0; k < spec.count(l); ++k) {
      char id[64];
      std::snprintf(id, sizeof id, "synth_%s_%04d", std::string(label_short_name(l)).c_str(), k);
      Rng rng = root.fork(std::string_view(id));
      const Waveform w = synth_clip(l, spec, rng);
      const fs::path rel = fs::path("clips") / (std::string(id) + ".wav");
      try {
        write_wav(out_dir / rel, w);
      } catch (const Error& e) {
        throw IoError("cannot write " + (out_dir / rel).string() + ": " + e.what());
      }
      char pod[32];
      std::snprintf(pod, sizeof pod, "pod%02d", k % spec.n_podcasts);
      m.records.push_back({id, rel.generic_string(), 0.0, w.duration_s(), l, pod, AugmentationType::Clean});
    }
  }
  write_manifest(out_dir / "manifest.csv", m);
  return m;
}

namespace {

std::vector<bool> voiced_frames(const Waveform& w, double threshold) {
  const auto hop = static_cast<std::size_t>(w.sample_rate / 100);
  std::vector<bool> v;
  for (std::size_t b = 0; b + hop <= w.size(); b += hop) {
    v.push_back(std::sqrt(mean_power(w.samples, b, b + hop)) > threshold);
  }
  return v;
}

}  // namespace

double leading_silence_s(const Waveform& w, double threshold) {
  const auto v = voiced_frames(w, threshold);
  std::size_t k = 0;
  while (k < v.size() && !v[k]) ++k;
  return static_cast<double>(k) * 0.01;
}

double longest_tonal_run_s(const Waveform& w, double threshold) {
  std::size_t best = 0, cur = 0;
  for (bool b : voiced_frames(w, threshold)) {
    cur = b ? cur + 1 : 0;
    best = std::max(best, cur);
  }
  return static_cast<double>(best) * 0.01;
}

}  // namespace sk
