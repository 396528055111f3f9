// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stutterkit/errors.hpp"

namespace sk {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

std::string shape_str(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

std::map<std::string, Matrix*> slots(StutterNet& net) {
  std::map<std::string, Matrix*> out;
  for (auto& p : net.parameters()) out[p.name] = &p.param->value;
  for (auto& b : net.buffers()) out[b.name] = b.value;
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s;
}

void put_matrix(std::string& out, const Matrix& m) {
  out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
}

Matrix get_matrix(std::string_view bytes, std::size_t& pos, Index rows, Index cols) {
  const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(double);
  if (rows < 0 || cols < 0 || pos + n > bytes.size()) throw IncompatibleError("checkpoint truncated");
  Matrix m(rows, cols);
  std::memcpy(m.data(), bytes.data() + pos, n);
  pos += n;
  return m;
}

}  // namespace

std::string_view group_prefix(ParamGroup g) {
  switch (g) {
    case ParamGroup::Encoder: return "enc.";
    case ParamGroup::FluentBranch: return "fluent.";
    case ParamGroup::DisfluentBranch: return "disfluent.";
  }
  return "";
}

Checkpoint capture(StutterNet& net, const Adam* opt, int epoch, double best_val_loss) {
  Checkpoint ck;
  ck.model = net.config();
  for (const auto& [name, m] : slots(net)) ck.tensors[name] = *m;
  if (opt) {
    ck.adam_steps = opt->steps();
    ck.adam = opt->state();
  }
  ck.epoch = epoch;
  ck.best_val_loss = best_val_loss;
  return ck;
}

void restore(StutterNet& net, const Checkpoint& ck) {
  auto dst = slots(net);
  std::vector<std::string> missing, unexpected, shape;
  for (const auto& [name, m] : dst) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end()) {
      missing.push_back(name);
    } else if (it->second.rows() != m->rows() || it->second.cols() != m->cols()) {
      shape.push_back(name + " (" + shape_str(it->second) + " vs " + shape_str(*m) + ")");
    }
  }
  for (const auto& [name, m] : ck.tensors) {
    if (!dst.count(name)) unexpected.push_back(name);
  }
  if (!missing.empty() || !unexpected.empty() || !shape.empty()) {
    std::string msg = "checkpoint does not match the model:";
    if (!missing.empty()) msg += " missing [" + join(missing) + "]";
    if (!unexpected.empty()) msg += " unexpected [" + join(unexpected) + "]";
    if (!shape.empty()) msg += " shape [" + join(shape) + "]";
    throw IncompatibleError(msg);
  }
  for (auto& [name, m] : dst) *m = ck.tensors.at(name);
}

void transplant(StutterNet& net, const Checkpoint& src, const std::set<ParamGroup>& groups) {
  auto dst = slots(net);
  std::vector<std::string> bad;
  std::vector<std::pair<Matrix*, const Matrix*>> copies;
  for (ParamGroup g : groups) {
    const auto prefix = group_prefix(g);
    std::size_t seen = 0;
    for (auto& [name, m] : dst) {
      if (!name.starts_with(prefix)) continue;
      ++seen;
      auto it = src.tensors.find(name);
      if (it == src.tensors.end()) {
        bad.push_back(name + " (missing in source)");
      } else if (it->second.rows() != m->rows() || it->second.cols() != m->cols()) {
        bad.push_back(name + " (" + shape_str(it->second) + " vs " + shape_str(*m) + ")");
      } else {
        copies.emplace_back(m, &it->second);
      }
    }
    for (const auto& [name, m] : src.tensors) {
      if (name.starts_with(prefix) && !dst.count(name)) bad.push_back(name + " (absent in target)");
    }
    if (seen == 0) bad.push_back(std::string(prefix) + "* (group absent in target)");
  }
  if (!bad.empty()) throw IncompatibleError("cannot transplant: " + join(bad));
  for (auto& [d, s] : copies) *d = *s;
}

StutterNet load_model(const Checkpoint& ck) {
  StutterNet net(ck.model, 0);
  restore(net, ck);
  return net;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  nlohmann::json h;
  h["model"] = ck.model.to_json();
  h["meta"] = ck.meta;
  h["epoch"] = ck.epoch;
  h["adam_steps"] = ck.adam_steps;
  std::string payload;
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& [name, m] : ck.tensors) {
    dir.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    put_matrix(payload, m);
  }
  h["tensors"] = dir;
  nlohmann::json adam = nlohmann::json::array();
  for (const auto& [name, s] : ck.adam) {
    adam.push_back({{"name", name}, {"rows", s.m.rows()}, {"cols", s.m.cols()}});
    put_matrix(payload, s.m);
    put_matrix(payload, s.v);
  }
  h["adam"] = adam;
  const std::string header = h.dump();

  std::string out(kMagic, 4);
  const std::uint32_t version = kVersion;
  const std::uint64_t hlen = header.size();
  out.append(reinterpret_cast<const char*>(&version), 4);
  out.append(reinterpret_cast<const char*>(&hlen), 8);
  out += header;
  // Stored outside the JSON so infinities and the exact bits survive.
  out.append(reinterpret_cast<const char*>(&ck.best_val_loss), 8);
  out += payload;
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IncompatibleError("not a checkpoint file");
  }
  std::uint32_t version = 0;
  std::uint64_t hlen = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&hlen, bytes.data() + 8, 8);
  if (version != kVersion) throw IncompatibleError("unsupported checkpoint version " + std::to_string(version));
  std::size_t pos = 16;
  if (pos + hlen + 8 > bytes.size()) throw IncompatibleError("checkpoint truncated");
  Checkpoint ck;
  try {
    const auto h = nlohmann::json::parse(bytes.substr(pos, hlen));
    pos += hlen;
    std::memcpy(&ck.best_val_loss, bytes.data() + pos, 8);
    pos += 8;
    ck.model = ModelConfig::from_json(h.at("model"));
    ck.meta = h.at("meta");
    ck.epoch = h.at("epoch").get<int>();
    ck.adam_steps = h.at("adam_steps").get<std::int64_t>();
    for (const auto& t : h.at("tensors")) {
      ck.tensors[t.at("name").get<std::string>()] =
          get_matrix(bytes, pos, t.at("rows").get<Index>(), t.at("cols").get<Index>());
    }
    for (const auto& t : h.at("adam")) {
      AdamMoments s;
      s.m = get_matrix(bytes, pos, t.at("rows").get<Index>(), t.at("cols").get<Index>());
      s.v = get_matrix(bytes, pos, t.at("rows").get<Index>(), t.at("cols").get<Index>());
      ck.adam[t.at("name").get<std::string>()] = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw IncompatibleError(std::string("checkpoint model config: ") + e.what());
  }
  if (pos != bytes.size()) throw IncompatibleError("trailing bytes in checkpoint");
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string bytes = serialize_checkpoint(ck);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace sk
