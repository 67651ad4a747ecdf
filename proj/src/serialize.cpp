#include "viblstm/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "viblstm/errors.hpp"

namespace viblstm {

namespace {

using nlohmann::json;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  put_u32(out, bits);
}

std::uint32_t get_u32(const std::string& buf, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

std::uint64_t get_u64(const std::string& buf, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[offset + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

float get_f32(const std::string& buf, std::size_t offset) {
  return std::bit_cast<float>(get_u32(buf, offset));
}

/// Tensors in canonical payload order, trainable or compact form.
std::vector<std::pair<std::string, const Tensor*>> tensor_directory(
    const SequenceClassifier& m) {
  std::vector<std::pair<std::string, const Tensor*>> dir;
  for (int k = 0; k < 4; ++k) {
    dir.emplace_back(names::kLstmW[k], &m.lstm.w(k));
    dir.emplace_back(names::kLstmU[k], &m.lstm.u(k));
    dir.emplace_back(names::kLstmB[k], &m.lstm.b(k));
  }
  dir.emplace_back(names::kHeadW, &m.head_w);
  dir.emplace_back(names::kHeadB, &m.head_b);
  if (m.compact) {
    for (int k = 0; k < 4; ++k) {
      dir.emplace_back(names::kGateScale[k], &m.gate_scales[static_cast<std::size_t>(k)]);
    }
  } else {
    dir.emplace_back(names::kFeatureMu, &m.feature_gate.mu);
    dir.emplace_back(names::kFeatureRho, &m.feature_gate.rho);
    for (int k = 0; k < 4; ++k) {
      dir.emplace_back(names::kGateMu[k], &m.gate_masks[static_cast<std::size_t>(k)].mu);
      dir.emplace_back(names::kGateRho[k], &m.gate_masks[static_cast<std::size_t>(k)].rho);
    }
  }
  return dir;
}

}  // namespace

void save_model(const SequenceClassifier& m, const std::string& path) {
  m.validate();
  const auto dir = tensor_directory(m);

  json manifest;
  manifest["format_version"] = kModelFormatVersion;
  manifest["compact"] = m.compact;
  manifest["dims"] = {{"feature_dim", m.dims.feature_dim},
                      {"hidden_dim", m.dims.hidden_dim},
                      {"num_classes", m.dims.num_classes},
                      {"seq_len", m.dims.seq_len}};
  manifest["dropout_p"] = m.dropout_p;
  if (m.compact) {
    manifest["source_feature_dim"] = m.source_feature_dim;
    manifest["source_feature_indices"] = m.source_feature_indices;
  }
  if (m.meta) {
    manifest["training"] = {{"beta", m.meta->beta},
                            {"beta_v", m.meta->beta_v},
                            {"lambda_gl", m.meta->lambda_gl},
                            {"seed", m.meta->seed},
                            {"epochs", m.meta->epochs}};
  }

  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : dir) {
    json entry;
    entry["name"] = name;
    entry["shape"] = tensor->shape();
    entry["offset"] = offset;
    tensors.push_back(std::move(entry));
    offset += 4 * tensor->size();
  }
  manifest["tensors"] = std::move(tensors);

  const std::string manifest_text = manifest.dump();
  std::string out;
  out.reserve(16 + manifest_text.size() + offset);
  out.append(kModelMagic, 4);
  put_u32(out, kModelFormatVersion);
  put_u64(out, manifest_text.size());
  out += manifest_text;
  for (const auto& [name, tensor] : dir) {
    for (double v : tensor->data()) put_f32(out, static_cast<float>(v));
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw FormatError("cannot open '" + path + "' for writing", 0);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw FormatError("short write to '" + path + "'", out.size());
}

SequenceClassifier load_model(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot open '" + path + "' for reading", 0);
  std::string buf((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  if (buf.size() < 16) throw FormatError("truncated header", buf.size());
  if (std::memcmp(buf.data(), kModelMagic, 4) != 0) throw FormatError("bad magic", 0);
  const std::uint32_t version = get_u32(buf, 4);
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(version), 4);
  }
  const std::uint64_t manifest_len = get_u64(buf, 8);
  if (16 + manifest_len > buf.size()) throw FormatError("truncated manifest", buf.size());

  json manifest;
  try {
    manifest = json::parse(buf.substr(16, manifest_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what(), 16);
  }
  const std::size_t payload_start = 16 + manifest_len;
  const std::size_t payload_len = buf.size() - payload_start;

  SequenceClassifier m;
  try {
    m.compact = manifest.at("compact").get<bool>();
    const json& dims = manifest.at("dims");
    m.dims.feature_dim = dims.at("feature_dim").get<int>();
    m.dims.hidden_dim = dims.at("hidden_dim").get<int>();
    m.dims.num_classes = dims.at("num_classes").get<int>();
    m.dims.seq_len = dims.at("seq_len").get<int>();
    m.dropout_p = manifest.at("dropout_p").get<double>();
    if (m.compact) {
      m.source_feature_dim = manifest.at("source_feature_dim").get<int>();
      m.source_feature_indices = manifest.at("source_feature_indices").get<std::vector<int>>();
    }
    if (manifest.contains("training")) {
      const json& t = manifest.at("training");
      TrainingMeta meta;
      meta.beta = t.at("beta").get<double>();
      meta.beta_v = t.at("beta_v").get<double>();
      meta.lambda_gl = t.at("lambda_gl").get<double>();
      meta.seed = t.at("seed").get<std::uint64_t>();
      meta.epochs = t.at("epochs").get<int>();
      m.meta = meta;
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest field error: ") + e.what(), 16);
  }

  std::uint64_t expected_offset = 0;
  std::unordered_map<std::string, Tensor> loaded;
  for (const json& entry : manifest.at("tensors")) {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<std::size_t>>();
      offset = entry.at("offset").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("tensor entry error: ") + e.what(), 16);
    }
    if (offset < expected_offset) {
      throw FormatError("tensor '" + name + "' overlaps the previous entry",
                        payload_start + offset);
    }
    std::size_t count = 1;
    for (std::size_t s : shape) count *= s;
    if (offset + 4 * count > payload_len) {
      throw FormatError("tensor '" + name + "' exceeds the payload",
                        payload_start + offset);
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < count; ++i) {
      t.at(i) = static_cast<double>(get_f32(buf, payload_start + offset + 4 * i));
    }
    loaded.emplace(name, std::move(t));
    expected_offset = offset + 4 * count;
  }

  auto take = [&](const char* name) -> Tensor {
    auto it = loaded.find(name);
    if (it == loaded.end()) throw FormatError(std::string("missing tensor '") + name + "'", 16);
    return std::move(it->second);
  };

  for (int k = 0; k < 4; ++k) {
    m.lstm.w(k) = take(names::kLstmW[k]);
    m.lstm.u(k) = take(names::kLstmU[k]);
    m.lstm.b(k) = take(names::kLstmB[k]);
  }
  m.head_w = take(names::kHeadW);
  m.head_b = take(names::kHeadB);
  if (m.compact) {
    for (int k = 0; k < 4; ++k) m.gate_scales[static_cast<std::size_t>(k)] = take(names::kGateScale[k]);
  } else {
    m.feature_gate = VibGate(take(names::kFeatureMu), take(names::kFeatureRho));
    for (int k = 0; k < 4; ++k) {
      m.gate_masks[static_cast<std::size_t>(k)] =
          VibGate(take(names::kGateMu[k]), take(names::kGateRho[k]));
    }
  }

  m.validate();
  return m;
}

}  // namespace viblstm
