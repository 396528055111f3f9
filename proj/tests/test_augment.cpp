// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "stutterkit/augment.hpp"
#include "stutterkit/errors.hpp"
#include "test_util.hpp"

namespace sk {
namespace {

namespace fs = std::filesystem;

Waveform random_wave(std::size_t n, Rng& rng, double amp = 0.4) {
  Waveform w{std::vector<double>(n), kModelSampleRate};
  for (auto& v : w.samples) v = amp * rng.uniform(-1.0, 1.0);
  return w;
}

double snr_db(const std::vector<double>& clean, const std::vector<double>& mixed, std::size_t b, std::size_t e) {
  std::vector<double> diff;
  for (std::size_t i = b; i < e; ++i) diff.push_back(mixed[i] - clean[i]);
  return 10.0 * std::log10(mean_power(clean, b, e) / mean_power(diff));
}

class AugmentTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(sk::testing::temp_dir("augment_pool"));
    pool_ = new NoisePool(sk::testing::make_test_pool(*dir_));
  }
  static void TearDownTestSuite() {
    delete pool_;
    delete dir_;
  }
  static fs::path* dir_;
  static NoisePool* pool_;
};

fs::path* AugmentTest::dir_ = nullptr;
NoisePool* AugmentTest::pool_ = nullptr;

TEST(MixAtSnr, GainExamples) {
  EXPECT_NEAR(snr_gain(1.0, 1.0, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(snr_gain(1.0, 1.0, 20.0), 0.1, 1e-15);
  EXPECT_NEAR(snr_gain(4.0, 1.0, 10.0), std::sqrt(0.4), 1e-15);
}

TEST(MixAtSnr, MeasuredSnrIsExact) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Waveform c = random_wave(4000, rng, rng.uniform(0.01, 1.0));
    const Waveform n = random_wave(4000, rng, rng.uniform(0.01, 1.0));
    const double target = rng.uniform(-5.0, 25.0);
    const Waveform m = mix_at_snr(c, n, target);
    EXPECT_NEAR(snr_db(c.samples, m.samples, 0, c.size()), target, 1e-6);
  }
}

TEST(MixAtSnr, Errors) {
  Rng rng(2);
  const Waveform c = random_wave(100, rng);
  EXPECT_THROW(mix_at_snr(c, random_wave(99, rng), 0.0), ContractViolation);
  EXPECT_THROW(mix_at_snr(c, Waveform{std::vector<double>(100, 0.0), kModelSampleRate}, 0.0), DegenerateInputError);
}

TEST(FitLength, LoopsShortAndSlicesLong) {
  Rng rng(3);
  const std::vector<double> src{1, 2, 3};
  EXPECT_EQ(fit_length(src, 7, rng), (std::vector<double>{1, 2, 3, 1, 2, 3, 1}));
  std::vector<double> longer(100);
  for (std::size_t i = 0; i < 100; ++i) longer[i] = static_cast<double>(i);
  const auto s = fit_length(longer, 10, rng);
  ASSERT_EQ(s.size(), 10u);
  for (std::size_t i = 1; i < 10; ++i) EXPECT_EQ(s[i], s[i - 1] + 1.0);
}

TEST_F(AugmentTest, MusicMixWithinRangeAndDeterministic) {
  Rng data(4);
  const Waveform c = random_wave(48000, data);
  Rng a(7), b(7);
  const AugmentResult ra = music_augment(c, *pool_, a);
  const AugmentResult rb = music_augment(c, *pool_, b);
  EXPECT_EQ(ra.audio.samples, rb.audio.samples);
  ASSERT_EQ(ra.placements.size(), 1u);
  EXPECT_GE(ra.placements[0].snr_db, 5.0);
  EXPECT_LE(ra.placements[0].snr_db, 15.0);
  EXPECT_EQ(ra.audio.size(), c.size());
  EXPECT_NEAR(snr_db(c.samples, ra.audio.samples, 0, c.size()), ra.placements[0].snr_db, 1e-6);
}

TEST_F(AugmentTest, NoisePlacementsTileTheClip) {
  Rng data(5);
  for (double seconds : {3.0, 3.5, 0.4, 1.0}) {
    const Waveform c = random_wave(static_cast<std::size_t>(seconds * kModelSampleRate), data);
    Rng r(8);
    const AugmentResult res = noise_augment(c, *pool_, r);
    ASSERT_EQ(res.placements.size(), static_cast<std::size_t>(std::ceil(seconds))) << seconds;
    std::size_t covered = 0;
    for (const auto& p : res.placements) {
      EXPECT_EQ(p.begin, covered);
      EXPECT_GE(p.snr_db, 0.0);
      EXPECT_LE(p.snr_db, 15.0);
      EXPECT_NEAR(snr_db(c.samples, res.audio.samples, p.begin, p.begin + p.length), p.snr_db, 1e-6);
      covered += p.length;
    }
    EXPECT_EQ(covered, c.size());
    if (seconds == 3.5) EXPECT_EQ(res.placements.back().length, 8000u);
  }
}

TEST_F(AugmentTest, SilentIntervalIsCopiedAndFlagged) {
  Rng data(6);
  Waveform c = random_wave(32000, data);
  std::fill(c.samples.begin(), c.samples.begin() + 16000, 0.0);
  Rng r(9);
  const AugmentResult res = noise_augment(c, *pool_, r);
  ASSERT_EQ(res.placements.size(), 2u);
  EXPECT_TRUE(res.placements[0].skipped_silent);
  EXPECT_FALSE(res.placements[1].skipped_silent);
  for (std::size_t i = 0; i < 16000; ++i) ASSERT_EQ(res.audio.samples[i], 0.0);
}

TEST_F(AugmentTest, BabbleSpeakersDistinctAndInRange) {
  Rng data(7);
  const Waveform c = random_wave(16000, data);
  std::set<std::size_t> seen;
  for (std::uint64_t s = 0; s < 60; ++s) {
    Rng r(s);
    const AugmentResult res = babble_augment(c, *pool_, r);
    const auto& p = res.placements.at(0);
    seen.insert(p.sources.size());
    EXPECT_GE(p.sources.size(), 3u);
    EXPECT_LE(p.sources.size(), 7u);
    EXPECT_EQ(std::set<std::string>(p.sources.begin(), p.sources.end()).size(), p.sources.size());
    EXPECT_GE(p.snr_db, 13.0);
    EXPECT_LE(p.snr_db, 20.0);
    EXPECT_NEAR(snr_db(c.samples, res.audio.samples, 0, c.size()), p.snr_db, 1e-6);
  }
  EXPECT_EQ(seen, (std::set<std::size_t>{3, 4, 5, 6, 7}));
}

TEST_F(AugmentTest, BabbleNeedsSevenSpeakers) {
  NoisePool small = *pool_;
  small.speech.resize(6);
  Rng data(8), r(1);
  EXPECT_THROW(babble_augment(random_wave(1000, data), small, r), PoolError);
}

TEST_F(AugmentTest, UnreadableFilesAreRetriedThenExhausted) {
  NoisePool p = *pool_;
  p.music = {*dir_ / "missing.wav", p.music[0]};
  Rng data(9);
  const Waveform c = random_wave(8000, data);
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng r(s);
    EXPECT_NO_THROW(music_augment(c, p, r));
  }
  p.music = {*dir_ / "missing.wav"};
  Rng r(1);
  EXPECT_THROW(music_augment(c, p, r), PoolError);
  p.music.clear();
  EXPECT_THROW(music_augment(c, p, r), PoolError);
}

TEST(Reverb, ImpulseIdentityAndShift) {
  Rng rng(10);
  const auto x = random_wave(500, rng).samples;
  const auto same = reverberate(x, {1.0});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(same[i], x[i], 1e-9);
  std::vector<double> delay(6, 0.0);
  delay[5] = 1.0;
  const auto shifted = convolve(x, delay);
  ASSERT_EQ(shifted.size(), x.size() + 5);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(shifted[i + 5], x[i], 1e-12);
  EXPECT_THROW(reverberate(x, std::vector<double>(4, 0.0)), DegenerateInputError);
}

TEST(Reverb, TruncationLosesEnergyAndPeakMatches) {
  Rng rng(11);
  const auto x = random_wave(3000, rng).samples;
  std::vector<double> h(700);
  for (auto& v : h) v = rng.normal() * 0.1;
  const auto full = convolve(x, h);
  double e_full = 0.0, e_trunc = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) (i < x.size() ? e_trunc : e_full) += full[i] * full[i];
  e_full += e_trunc;
  EXPECT_LE(e_trunc, e_full);
  EXPECT_NEAR(peak_abs(reverberate(x, h)), peak_abs(x), 1e-12);
}

TEST(Convolve, FftPathMatchesDirectSum) {
  Rng rng(12);
  const auto x = random_wave(5000, rng).samples;
  const auto h = random_wave(900, rng).samples;
  const auto y = convolve(x, h);
  for (std::size_t n : {0ul, 17ul, 899ul, 2500ul, 5898ul}) {
    double acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
      if (n >= k && n - k < x.size()) acc += h[k] * x[n - k];
    }
    EXPECT_NEAR(y[n], acc, 1e-10);
  }
}

TEST(Rir, DirectPathOnly) {
  RoomConfig room;
  room.max_order = 0;
  const auto h = simulate_rir(room, 16000);
  const double d = std::sqrt(4.0 + 1.6 * 1.6 + 0.01);
  const auto lag = static_cast<std::size_t>(std::lround(d / kSpeedOfSound * 16000));
  ASSERT_EQ(h.size(), lag + 1);
  EXPECT_NEAR(h[lag], 1.0 / d, 1e-12);
  RoomConfig absorbing;
  absorbing.absorption = 1.0;
  EXPECT_EQ(simulate_rir(absorbing, 16000), h);
}

TEST(Rir, DirectPathFollowsInverseDistance) {
  RoomConfig a, b;
  a.max_order = b.max_order = 0;
  b.dims = {10.0, 8.0, 6.0};
  for (int i = 0; i < 3; ++i) {
    b.source[i] = 2.0 * a.source[i];
    b.mic[i] = 2.0 * a.mic[i];
  }
  const auto ha = simulate_rir(a, 16000), hb = simulate_rir(b, 16000);
  EXPECT_NEAR(hb.back(), ha.back() / 2.0, 1e-12);
  EXPECT_NEAR(static_cast<double>(hb.size() - 1), 2.0 * static_cast<double>(ha.size() - 1), 1.0);
}

TEST(Rir, Errors) {
  RoomConfig r;
  r.mic = r.source;
  EXPECT_THROW(simulate_rir(r, 16000), DegenerateInputError);
  r = {};
  r.mic = {6.0, 1.0, 1.0};
  EXPECT_THROW(simulate_rir(r, 16000), ContractViolation);
}

TEST(NoisePoolListing, ParsesEveryCategory) {
  const std::string text =
      "# pool\nmusic m.wav\nnoise /abs/n.wav\nspeech s.wav\nrir r.wav\n"
      "room 5 4 3 1 1 1 2 2 1 0.4 3\nsimulate-rooms\n";
  const NoisePool p = parse_noise_pool_text(text, "/base");
  EXPECT_EQ(p.music.at(0), fs::path("/base/m.wav"));
  EXPECT_EQ(p.noises.at(0), fs::path("/abs/n.wav"));
  EXPECT_EQ(p.rooms.at(0).max_order, 3);
  EXPECT_DOUBLE_EQ(p.rooms.at(0).absorption, 0.4);
  EXPECT_TRUE(p.simulate_random_rooms);
  EXPECT_THROW(parse_noise_pool_text("guitar g.wav\n"), ParseError);
  EXPECT_THROW(parse_noise_pool_text("room 1 2 3\n"), ParseError);
}

TEST_F(AugmentTest, ExpandManifestFiveTimes) {
  const auto out = sk::testing::temp_dir("expand");
  Manifest clean;
  clean.base_dir = *dir_;
  Rng data(13);
  for (int i = 0; i < 6; ++i) {
    const std::string name = "clip" + std::to_string(i) + ".wav";
    write_wav(*dir_ / name, random_wave(static_cast<std::size_t>(16000 + 1000 * i), data));
    clean.records.push_back({"c" + std::to_string(i), name, 0.0, 1.0 + 0.0625 * i, static_cast<Label>(i % 5),
                             "pod" + std::to_string(i % 2), AugmentationType::Clean});
  }
  ExpandOptions opt;
  const Manifest m = expand_manifest(clean, *pool_, Rng(5), out / "a", opt);
  ASSERT_EQ(m.size(), 5 * clean.size());
  std::map<std::string, SegmentRecord> src;
  for (const auto& r : clean.records) src[r.id] = r;
  std::map<AugmentationType, int> per_type;
  for (const auto& r : m.records) {
    const std::string base = r.id.substr(0, r.id.find("__"));
    EXPECT_EQ(r.label, src.at(base).label);
    EXPECT_EQ(r.podcast_id, src.at(base).podcast_id);
    ++per_type[r.augmentation];
    EXPECT_TRUE(fs::exists(m.resolve(r))) << r.id;
    EXPECT_NEAR(load_audio(m.resolve(r)).duration_s(), src.at(base).duration_s, 1e-9);
  }
  for (auto t : {AugmentationType::Clean, AugmentationType::Music, AugmentationType::Noise, AugmentationType::Babble,
                 AugmentationType::Reverb}) {
    EXPECT_EQ(per_type[t], 6) << augmentation_name(t);
  }
  opt.jobs = 3;
  const Manifest par = expand_manifest(clean, *pool_, Rng(5), out / "b", opt);
  ASSERT_EQ(serialize_manifest(par).size() > 0, true);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(par.records[i].id, m.records[i].id);
    if (m.records[i].augmentation == AugmentationType::Clean) continue;
    EXPECT_EQ(read_wav(par.resolve(par.records[i])).channels, read_wav(m.resolve(m.records[i])).channels);
  }
  EXPECT_TRUE(expand_manifest(Manifest{}, *pool_, Rng(5), out / "c").empty());
  EXPECT_FALSE(fs::exists(out / "c"));
}

}  // namespace
}  // namespace sk
