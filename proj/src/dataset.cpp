// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_set>

#include "stutterkit/errors.hpp"
#include "stutterkit/logging.hpp"

namespace sk {

namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {"Repetition", "Prolongation", "Block",
                                                                   "Interjection", "Fluent"};
constexpr std::array<std::string_view, kNumClasses> kLabelShort = {"R", "P", "B", "In", "F"};
constexpr std::array<std::string_view, 5> kAugNames = {"clean", "music", "noise", "babble", "reverb"};

constexpr std::array<std::string_view, 6> kColumns = {"id", "label", "podcast_id", "audio_path", "offset_s",
                                                      "duration_s"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv(std::string_view line, long line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

double parse_double(std::string_view s, const char* field, long line_no) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(std::string("invalid number in field '") + field + "': '" + std::string(s) + "'", line_no);
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view label_name(Label l) { return kLabelNames[static_cast<std::size_t>(label_index(l))]; }
std::string_view label_short_name(Label l) { return kLabelShort[static_cast<std::size_t>(label_index(l))]; }

std::optional<Label> parse_label(std::string_view s) {
  const std::string k = lower(trim(s));
  for (int i = 0; i < kNumClasses; ++i) {
    if (k == lower(kLabelNames[i]) || k == lower(kLabelShort[i])) return static_cast<Label>(i);
  }
  return std::nullopt;
}

std::string_view augmentation_name(AugmentationType t) { return kAugNames[static_cast<std::size_t>(t)]; }

std::optional<AugmentationType> parse_augmentation(std::string_view s) {
  const std::string k = lower(trim(s));
  if (k.empty()) return AugmentationType::Clean;
  for (std::size_t i = 0; i < kAugNames.size(); ++i) {
    if (k == kAugNames[i]) return static_cast<AugmentationType>(i);
  }
  return std::nullopt;
}

FluencyLabel fluent_pseudo_label(Label l) {
  return l == Label::Fluent ? FluencyLabel::Fluent : FluencyLabel::Disfluent;
}
FluencyLabel fluent_pseudo_label(const SegmentRecord& r) { return fluent_pseudo_label(r.label); }

std::filesystem::path Manifest::resolve(const SegmentRecord& r) const {
  std::filesystem::path p(r.audio_path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::set<std::string> Manifest::podcasts() const {
  std::set<std::string> out;
  for (const auto& r : records) out.insert(r.podcast_id);
  return out;
}

std::array<std::size_t, kNumClasses> Manifest::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& r : records) ++counts[static_cast<std::size_t>(label_index(r.label))];
  return counts;
}

Manifest Manifest::subset(const std::set<std::string>& pods) const {
  Manifest out;
  out.source_name = source_name;
  out.base_dir = base_dir;
  for (const auto& r : records) {
    if (pods.count(r.podcast_id)) out.records.push_back(r);
  }
  return out;
}

void Manifest::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (r.id.empty()) throw ValidationError("record with empty id");
    if (!seen.insert(r.id).second) throw ValidationError("duplicate record id '" + r.id + "'");
    if (!(r.duration_s > 0.0)) throw ValidationError("record '" + r.id + "' has non-positive duration");
  }
}

Manifest parse_manifest_text(std::string_view text, std::string source_name) {
  Manifest m;
  m.source_name = std::move(source_name);

  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  // Skip leading blank lines; a file with nothing in it is an empty manifest.
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) {
    log_warn("manifest '", m.source_name, "' is empty");
    return m;
  }

  std::string_view header_line = lines[first];
  if (header_line.starts_with("\xEF\xBB\xBF")) header_line.remove_prefix(3);
  const auto header = split_csv(header_line, static_cast<long>(first + 1));
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[lower(trim(header[i]))] = i;
  for (auto name : kColumns) {
    if (!col.count(std::string(name))) {
      throw ParseError("manifest header lacks column '" + std::string(name) + "'", static_cast<long>(first + 1));
    }
  }
  const bool has_aug = col.count("augmentation") > 0;

  std::unordered_set<std::string> seen;
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    const long line_no = static_cast<long>(li + 1);
    if (trim(lines[li]).empty()) continue;
    const auto fields = split_csv(lines[li], line_no);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    auto field = [&](std::string_view name) { return std::string(trim(fields[col.at(std::string(name))])); };

    const auto label = parse_label(field("label"));
    if (!label) {
      ++m.excluded_rows;
      continue;
    }
    SegmentRecord r;
    r.id = field("id");
    r.audio_path = field("audio_path");
    r.podcast_id = field("podcast_id");
    r.label = *label;
    r.offset_s = parse_double(field("offset_s"), "offset_s", line_no);
    r.duration_s = parse_double(field("duration_s"), "duration_s", line_no);
    if (has_aug) {
      const auto aug = parse_augmentation(field("augmentation"));
      if (!aug) throw ParseError("unknown augmentation '" + field("augmentation") + "'", line_no);
      r.augmentation = *aug;
    }
    if (r.id.empty()) throw ParseError("empty id", line_no);
    if (r.audio_path.empty()) throw ParseError("empty audio_path", line_no);
    if (r.podcast_id.empty()) throw ParseError("empty podcast_id", line_no);
    if (!(r.duration_s > 0.0)) throw ParseError("duration_s must be positive", line_no);
    if (r.offset_s < 0.0) throw ParseError("offset_s must be non-negative", line_no);
    if (!seen.insert(r.id).second) {
      throw ValidationError("duplicate record id '" + r.id + "' at line " + std::to_string(line_no));
    }
    m.records.push_back(std::move(r));
  }
  if (m.excluded_rows > 0) {
    log_info("manifest '", m.source_name, "': excluded ", m.excluded_rows, " rows outside the label taxonomy");
  }
  return m;
}

Manifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Manifest m = parse_manifest_text(ss.str(), path.filename().string());
  m.base_dir = path.parent_path();
  return m;
}

std::string serialize_manifest(const Manifest& m) {
  const bool with_aug = std::any_of(m.records.begin(), m.records.end(),
                                    [](const auto& r) { return r.augmentation != AugmentationType::Clean; });
  std::ostringstream os;
  os << "id,audio_path,offset_s,duration_s,label,podcast_id";
  if (with_aug) os << ",augmentation";
  os << '\n';
  for (const auto& r : m.records) {
    os << csv_field(r.id) << ',' << csv_field(r.audio_path) << ',' << format_double(r.offset_s) << ','
       << format_double(r.duration_s) << ',' << label_name(r.label) << ',' << csv_field(r.podcast_id);
    if (with_aug) os << ',' << augmentation_name(r.augmentation);
    os << '\n';
  }
  return os.str();
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write manifest: " + path.string());
  os << serialize_manifest(m);
  if (!os) throw IoError("failed writing manifest: " + path.string());
}

SplitPlan make_split(const Manifest& m, const SplitRatios& ratios, int n_folds, Rng& rng) {
  if (n_folds < 2) throw ConfigError("make_split: need at least 2 folds");
  for (double r : {ratios.train, ratios.valid, ratios.test}) {
    if (r < 0.0 || r > 1.0) throw ConfigError("make_split: ratios must lie in [0, 1]");
  }
  if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-6) {
    throw ConfigError("make_split: ratios must sum to 1");
  }
  if (std::abs(ratios.test - 1.0 / n_folds) > 0.5 / n_folds) {
    log_warn("make_split: test ratio ", ratios.test, " differs from the 1/", n_folds,
             " share implied by the fold rotation; the rotation wins");
  }

  const auto pod_set = m.podcasts();
  std::vector<std::string> pods(pod_set.begin(), pod_set.end());
  const auto n = static_cast<long>(pods.size());
  if (n < n_folds) {
    throw InfeasibleSplitError("make_split: " + std::to_string(n) + " podcasts cannot fill " +
                               std::to_string(n_folds) + " folds");
  }
  rng.shuffle(pods);

  const long n_valid = std::max(1L, std::lround(ratios.valid * static_cast<double>(n)));
  SplitPlan plan;
  plan.seed = rng.seed();
  for (long k = 0; k < n_folds; ++k) {
    const long begin = k * n / n_folds;
    const long end = (k + 1) * n / n_folds;
    if (n - (end - begin) - n_valid < 1) {
      throw InfeasibleSplitError("make_split: no podcasts left for training in fold " + std::to_string(k));
    }
    FoldSets fold;
    for (long i = begin; i < end; ++i) fold.test.insert(pods[static_cast<std::size_t>(i)]);
    for (long i = 0; i < n_valid; ++i) fold.valid.insert(pods[static_cast<std::size_t>((end + i) % n)]);
    for (const auto& p : pods) {
      if (!fold.test.count(p) && !fold.valid.count(p)) fold.train.insert(p);
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

std::string serialize_split(const SplitPlan& plan) {
  nlohmann::ordered_json j;
  j["seed"] = plan.seed;
  j["folds"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    const auto& f = plan.folds[k];
    nlohmann::ordered_json fj;
    fj["fold"] = k;
    fj["train"] = std::vector<std::string>(f.train.begin(), f.train.end());
    fj["valid"] = std::vector<std::string>(f.valid.begin(), f.valid.end());
    fj["test"] = std::vector<std::string>(f.test.begin(), f.test.end());
    j["folds"].push_back(std::move(fj));
  }
  return j.dump(2) + "\n";
}

SplitPlan parse_split(std::string_view text) {
  SplitPlan plan;
  try {
    const auto j = nlohmann::json::parse(text);
    plan.seed = j.value("seed", std::uint64_t{0});
    for (const auto& fj : j.at("folds")) {
      FoldSets f;
      for (const auto& p : fj.at("train")) f.train.insert(p.get<std::string>());
      for (const auto& p : fj.at("valid")) f.valid.insert(p.get<std::string>());
      for (const auto& p : fj.at("test")) f.test.insert(p.get<std::string>());
      plan.folds.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid split plan: ") + e.what(), 0);
  }
  return plan;
}

void write_split(const std::filesystem::path& path, const SplitPlan& plan) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write split plan: " + path.string());
  os << serialize_split(plan);
}

SplitPlan read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split plan: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_split(ss.str());
}

ClassWeights inverse_frequency_weights(const std::vector<std::size_t>& counts,
                                       const std::vector<std::string>& names) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  ClassWeights out;
  const double n = static_cast<double>(total);
  const double c = static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) throw MissingClassError(i < names.size() ? names[i] : "class " + std::to_string(i));
    out.w.push_back(n / (c * static_cast<double>(counts[i])));
  }
  return out;
}

ClassWeights class_weights(const Manifest& m) {
  const auto counts = m.class_counts();
  std::vector<std::string> names;
  for (auto l : kAllLabels) names.emplace_back(label_name(l));
  return inverse_frequency_weights(std::vector<std::size_t>(counts.begin(), counts.end()), names);
}

}  // namespace sk
