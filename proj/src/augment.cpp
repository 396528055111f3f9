// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/augment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unsupported/Eigen/FFT>

#include "stutterkit/errors.hpp"
#include "stutterkit/logging.hpp"

namespace sk {

namespace {

// Draws a random entry from `paths` and decodes it, redrawing on failure or
// silence. Throws PoolError after `attempts` failures.
Waveform load_from_pool(const std::vector<std::filesystem::path>& paths, const char* category, int rate,
                        Rng& rng, int attempts, std::string* chosen = nullptr) {
  if (paths.empty()) throw PoolError(std::string("noise pool has no '") + category + "' entries");
  for (int a = 0; a < attempts; ++a) {
    const auto& p = paths[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(paths.size()) - 1))];
    try {
      Waveform w = load_audio(p, rate);
      if (mean_power(w.samples) <= 0.0) {
        log_warn("skipping silent ", category, " file ", p.string());
        continue;
      }
      if (chosen) *chosen = p.string();
      return w;
    } catch (const DataError& e) {
      log_warn("skipping unreadable ", category, " file: ", e.what());
    }
  }
  throw PoolError(std::string("'") + category + "' pool exhausted after " + std::to_string(attempts) +
                  " failed loads");
}

void check_inside(const RoomConfig& room, const std::array<double, 3>& p, const char* what) {
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] > 0.0 && p[a] < room.dims[a])) {
      throw ContractViolation(std::string("simulate_rir: ") + what + " is not strictly inside the room");
    }
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

double SnrSpec::draw(Rng& rng) const { return rng.uniform(min_db, max_db); }

double snr_gain(double clean_power, double interferer_power, double snr_db) {
  return std::sqrt(clean_power / (interferer_power * std::pow(10.0, snr_db / 10.0)));
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& interferer, double snr_db) {
  if (clean.sample_rate != interferer.sample_rate) throw ContractViolation("mix_at_snr: sample rates differ");
  if (clean.size() != interferer.size()) throw ContractViolation("mix_at_snr: lengths differ");
  const double pc = mean_power(clean.samples);
  const double pi = mean_power(interferer.samples);
  if (pc <= 0.0) throw DegenerateInputError("mix_at_snr: clean signal has zero power");
  if (pi <= 0.0) throw DegenerateInputError("mix_at_snr: interferer has zero power");
  const double g = snr_gain(pc, pi, snr_db);
  Waveform out = clean;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += g * interferer.samples[i];
  return out;
}

std::vector<double> fit_length(const std::vector<double>& src, std::size_t length, Rng& rng) {
  if (src.empty()) throw DegenerateInputError("fit_length: empty source");
  std::vector<double> out(length);
  if (src.size() >= length) {
    const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(src.size() - length)));
    std::copy_n(src.begin() + static_cast<long>(start), length, out.begin());
  } else {
    for (std::size_t i = 0; i < length; ++i) out[i] = src[i % src.size()];
  }
  return out;
}

std::vector<double> simulate_rir(const RoomConfig& room, int rate) {
  for (int a = 0; a < 3; ++a) {
    if (!(room.dims[a] > 0.0)) throw ContractViolation("simulate_rir: room dimensions must be positive");
  }
  if (!(room.absorption > 0.0 && room.absorption <= 1.0)) {
    throw ContractViolation("simulate_rir: absorption must lie in (0, 1]");
  }
  if (room.max_order < 0) throw ContractViolation("simulate_rir: max_order must be non-negative");
  check_inside(room, room.source, "source");
  check_inside(room, room.mic, "microphone");
  double direct = 0.0;
  for (int a = 0; a < 3; ++a) direct += std::pow(room.source[a] - room.mic[a], 2);
  if (std::sqrt(direct) < 1e-9) throw DegenerateInputError("simulate_rir: microphone coincides with source");

  const double beta = std::sqrt(1.0 - room.absorption);
  const int n = room.max_order;

  struct Tap {
    long delay;
    double amp;
  };
  std::vector<Tap> taps;
  long max_delay = 0;

  // Per-axis image coordinates and reflection counts.
  std::array<std::vector<std::pair<double, int>>, 3> axis;
  for (int a = 0; a < 3; ++a) {
    for (int m = -n; m <= n; ++m) {
      for (int q = 0; q <= 1; ++q) {
        const int refl = std::abs(2 * m - q);
        if (refl > n) continue;
        const double pos = (1 - 2 * q) * room.source[a] + 2.0 * m * room.dims[a];
        axis[a].emplace_back(pos - room.mic[a], refl);
      }
    }
  }
  for (const auto& [dx, rx] : axis[0]) {
    for (const auto& [dy, ry] : axis[1]) {
      for (const auto& [dz, rz] : axis[2]) {
        const int order = rx + ry + rz;
        const double gain = order == 0 ? 1.0 : std::pow(beta, order);
        if (gain == 0.0) continue;
        const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
        const long delay = std::lround(dist / kSpeedOfSound * rate);
        taps.push_back({delay, gain / dist});
        max_delay = std::max(max_delay, delay);
      }
    }
  }
  std::vector<double> h(static_cast<std::size_t>(max_delay + 1), 0.0);
  for (const auto& t : taps) h[static_cast<std::size_t>(t.delay)] += t.amp;
  return h;
}

RoomConfig random_room(Rng& rng) {
  RoomConfig r;
  r.dims = {rng.uniform(3.0, 10.0), rng.uniform(3.0, 8.0), rng.uniform(2.5, 4.0)};
  r.absorption = rng.uniform(0.2, 0.8);
  r.max_order = 6;
  constexpr double kMargin = 0.5;
  for (int a = 0; a < 3; ++a) {
    r.source[a] = rng.uniform(kMargin, r.dims[a] - kMargin);
    r.mic[a] = rng.uniform(kMargin, r.dims[a] - kMargin);
  }
  return r;
}

NoisePool parse_noise_pool_text(std::string_view text, const std::filesystem::path& base_dir) {
  NoisePool pool;
  std::istringstream in{std::string(text)};
  std::string line;
  long line_no = 0;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    if (kind == "simulate-rooms") {
      pool.simulate_random_rooms = true;
      continue;
    }
    if (kind == "room") {
      RoomConfig r;
      for (auto* arr : {&r.dims, &r.source, &r.mic}) {
        for (double& v : *arr) {
          if (!(ls >> v)) throw ParseError("room entry needs 11 numbers", line_no);
        }
      }
      if (!(ls >> r.absorption >> r.max_order)) throw ParseError("room entry needs 11 numbers", line_no);
      pool.rooms.push_back(r);
      continue;
    }
    std::string rest;
    std::getline(ls >> std::ws, rest);
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back()))) rest.pop_back();
    if (rest.empty()) throw ParseError("missing path after '" + kind + "'", line_no);
    if (kind == "music") pool.music.push_back(resolve(rest));
    else if (kind == "noise") pool.noises.push_back(resolve(rest));
    else if (kind == "speech") pool.speech.push_back(resolve(rest));
    else if (kind == "rir") pool.rirs.push_back(resolve(rest));
    else throw ParseError("unknown pool category '" + kind + "'", line_no);
  }
  return pool;
}

NoisePool parse_noise_pool(const std::filesystem::path& listing) {
  std::ifstream in(listing);
  if (!in) throw IoError("cannot open noise pool listing: " + listing.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_noise_pool_text(ss.str(), listing.parent_path());
}

AugmentResult music_augment(const Waveform& clean, const NoisePool& pool, Rng& rng, const AugmentOptions& opt) {
  std::string src;
  const Waveform music = load_from_pool(pool.music, "music", clean.sample_rate, rng, opt.max_load_attempts, &src);
  Waveform interferer{fit_length(music.samples, clean.size(), rng), clean.sample_rate};
  Placement p{0, clean.size(), {src}, kMusicSnr.draw(rng), false};
  AugmentResult res;
  if (mean_power(clean.samples) <= 0.0) {
    p.skipped_silent = true;
    res.audio = clean;
  } else if (mean_power(interferer.samples) <= 0.0) {
    // A silent slice of a non-silent file: nothing audible to add.
    p.skipped_silent = true;
    res.audio = clean;
  } else {
    res.audio = mix_at_snr(clean, interferer, p.snr_db);
  }
  res.placements.push_back(std::move(p));
  return res;
}

AugmentResult noise_augment(const Waveform& clean, const NoisePool& pool, Rng& rng, const AugmentOptions& opt) {
  if (pool.noises.empty()) throw PoolError("noise pool has no 'noise' entries");
  const auto interval = static_cast<std::size_t>(std::llround(opt.noise_interval_s * clean.sample_rate));
  if (interval == 0) throw ContractViolation("noise_augment: interval must be at least one sample");
  const std::size_t len = clean.size();
  const double clip_power = mean_power(clean.samples);

  AugmentResult res;
  res.audio = clean;
  for (std::size_t begin = 0; begin < len; begin += interval) {
    const std::size_t n = std::min(interval, len - begin);
    std::string src;
    const Waveform noise = load_from_pool(pool.noises, "noise", clean.sample_rate, rng, opt.max_load_attempts, &src);
    const std::vector<double> piece = fit_length(noise.samples, n, rng);
    Placement p{begin, n, {src}, kNoiseSnr.draw(rng), false};

    const double pc = opt.noise_snr_mode == NoiseSnrMode::PerInterval ? mean_power(clean.samples, begin, begin + n)
                                                                       : clip_power;
    const double pn = mean_power(piece);
    if (pc <= 0.0 || pn <= 0.0) {
      p.skipped_silent = true;
    } else {
      const double g = snr_gain(pc, pn, p.snr_db);
      for (std::size_t i = 0; i < n; ++i) res.audio.samples[begin + i] += g * piece[i];
    }
    res.placements.push_back(std::move(p));
  }
  return res;
}

AugmentResult babble_augment(const Waveform& clean, const NoisePool& pool, Rng& rng, const AugmentOptions& opt) {
  if (pool.speech.size() < static_cast<std::size_t>(kBabbleMaxSpeakers)) {
    throw PoolError("babble needs at least " + std::to_string(kBabbleMaxSpeakers) + " speech files, pool has " +
                    std::to_string(pool.speech.size()));
  }
  const auto k = static_cast<std::size_t>(rng.uniform_int(kBabbleMinSpeakers, kBabbleMaxSpeakers));
  // Candidate order is a random permutation; unreadable files are replaced by
  // the next unused candidate, keeping the chosen files distinct.
  const auto order = rng.sample_without_replacement(pool.speech.size(), pool.speech.size());
  std::vector<double> babble(clean.size(), 0.0);
  Placement p{0, clean.size(), {}, 0.0, false};
  int failures = 0;
  for (std::size_t idx : order) {
    if (p.sources.size() == k) break;
    const auto& path = pool.speech[idx];
    try {
      Waveform w = load_audio(path, clean.sample_rate);
      if (mean_power(w.samples) <= 0.0) throw DegenerateInputError("silent speech file " + path.string());
      const auto piece = fit_length(w.samples, clean.size(), rng);
      for (std::size_t i = 0; i < piece.size(); ++i) babble[i] += piece[i];
      p.sources.push_back(path.string());
    } catch (const DataError& e) {
      log_warn("skipping unusable speech file: ", e.what());
      if (++failures >= opt.max_load_attempts) break;
    }
  }
  if (p.sources.size() < k) {
    throw PoolError("speech pool exhausted: needed " + std::to_string(k) + " usable files");
  }
  p.snr_db = kBabbleSnr.draw(rng);
  AugmentResult res;
  if (mean_power(clean.samples) <= 0.0 || mean_power(babble) <= 0.0) {
    p.skipped_silent = true;
    res.audio = clean;
  } else {
    res.audio = mix_at_snr(clean, Waveform{std::move(babble), clean.sample_rate}, p.snr_db);
  }
  res.placements.push_back(std::move(p));
  return res;
}

std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h) {
  if (x.empty() || h.empty()) return {};
  const std::size_t n = x.size() + h.size() - 1;
  std::vector<double> y(n, 0.0);
  if (std::min(x.size(), h.size()) <= 64) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == 0.0) continue;
      for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
    }
    return y;
  }
  const std::size_t nfft = next_pow2(n);
  std::vector<double> xa(nfft, 0.0), ha(nfft, 0.0);
  std::copy(x.begin(), x.end(), xa.begin());
  std::copy(h.begin(), h.end(), ha.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> X, H;
  fft.fwd(X, xa);
  fft.fwd(H, ha);
  for (std::size_t i = 0; i < X.size(); ++i) X[i] *= H[i];
  std::vector<double> full;
  fft.inv(full, X);
  std::copy_n(full.begin(), n, y.begin());
  return y;
}

std::vector<double> reverberate(const std::vector<double>& x, const std::vector<double>& rir) {
  if (peak_abs(rir) == 0.0) throw DegenerateInputError("reverb: impulse response is all zeros");
  std::vector<double> y = convolve(x, rir);
  y.resize(x.size());
  const double target = peak_abs(x);
  const double peak = peak_abs(y);
  if (peak > 0.0) {
    const double scale = target / peak;
    for (double& v : y) v *= scale;
  }
  return y;
}

AugmentResult reverb_augment(const Waveform& clean, const NoisePool& pool, Rng& rng, const AugmentOptions& opt) {
  const std::size_t n_sources = pool.rirs.size() + pool.rooms.size();
  std::vector<double> rir;
  std::string src;
  if (n_sources == 0) {
    if (!pool.simulate_random_rooms) throw PoolError("noise pool has no RIR files or room configs");
    rir = simulate_rir(random_room(rng), clean.sample_rate);
    src = "simulated:random";
  } else {
    int failures = 0;
    while (rir.empty()) {
      const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n_sources) - 1));
      if (idx < pool.rirs.size()) {
        try {
          rir = load_audio(pool.rirs[idx], clean.sample_rate).samples;
          src = pool.rirs[idx].string();
        } catch (const DataError& e) {
          log_warn("skipping unreadable rir: ", e.what());
          if (++failures >= opt.max_load_attempts) throw PoolError("rir pool exhausted");
        }
      } else {
        rir = simulate_rir(pool.rooms[idx - pool.rirs.size()], clean.sample_rate);
        src = "simulated:room" + std::to_string(idx - pool.rirs.size());
      }
    }
  }
  AugmentResult res;
  res.audio = Waveform{reverberate(clean.samples, rir), clean.sample_rate};
  res.placements.push_back(Placement{0, clean.size(), {src}, 0.0, false});
  return res;
}

Manifest expand_manifest(const Manifest& clean, const NoisePool& pool, const Rng& rng,
                         const std::filesystem::path& out_dir, const ExpandOptions& opt) {
  Manifest out;
  out.source_name = clean.source_name + "+aug";
  out.base_dir = out_dir;
  if (clean.empty()) return out;

  try {
    std::filesystem::create_directories(out_dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(std::string("cannot create output directory: ") + e.what());
  }

  std::vector<std::size_t> order(clean.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return clean.records[a].id < clean.records[b].id; });

  std::vector<AugmentationType> types = opt.types;
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  types.erase(std::remove(types.begin(), types.end(), AugmentationType::Clean), types.end());

  const std::size_t per_record = 1 + types.size();
  std::vector<SegmentRecord> rows(clean.size() * per_record);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= order.size()) return;
      try {
        const SegmentRecord& src = clean.records[order[slot]];
        const auto path = clean.resolve(src);
        SegmentRecord base = src;
        base.audio_path = std::filesystem::absolute(path).lexically_normal().string();
        rows[slot * per_record] = base;

        const Waveform audio = load_audio_segment(path, src.offset_s, src.duration_s, kModelSampleRate);
        for (std::size_t t = 0; t < types.size(); ++t) {
          const auto type = types[t];
          Rng r = rng.fork(src.id).fork(augmentation_name(type));
          AugmentResult res;
          switch (type) {
            case AugmentationType::Music: res = music_augment(audio, pool, r, opt.augment); break;
            case AugmentationType::Noise: res = noise_augment(audio, pool, r, opt.augment); break;
            case AugmentationType::Babble: res = babble_augment(audio, pool, r, opt.augment); break;
            case AugmentationType::Reverb: res = reverb_augment(audio, pool, r, opt.augment); break;
            case AugmentationType::Clean: break;
          }
          SegmentRecord aug = src;
          aug.id = src.id + "__" + std::string(augmentation_name(type));
          aug.audio_path = aug.id + ".wav";
          aug.offset_s = 0.0;
          aug.duration_s = res.audio.duration_s();
          aug.augmentation = type;
          write_wav(out_dir / aug.audio_path, res.audio);
          rows[slot * per_record + 1 + t] = std::move(aug);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(order.size());
        return;
      }
    }
  };

  const int jobs = std::max(1, opt.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  out.records = std::move(rows);
  return out;
}

}  // namespace sk
