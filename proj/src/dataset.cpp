#include "viblstm/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "viblstm/errors.hpp"

namespace viblstm {

namespace {

constexpr char kSeqfMagic[4] = {'S', 'E', 'Q', 'F'};
constexpr std::uint32_t kSeqfVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& buf, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

}  // namespace

void SynthSpec::validate() const {
  if (relevant_dims < 1 || relevant_dims > feature_dim) {
    throw std::invalid_argument("relevant_dims must lie in [1, feature_dim]");
  }
  if (num_classes < 2) throw std::invalid_argument("need at least two classes");
  if (seq_len < 1) throw std::invalid_argument("seq_len must be at least 1");
  if (samples_per_class < 1) throw std::invalid_argument("samples_per_class must be at least 1");
  if (noise < 0.0) throw std::invalid_argument("noise must be non-negative");
}

void SequenceDataset::validate() const {
  if (sequences.size() != labels.size()) {
    throw DimensionError("dataset: " + std::to_string(sequences.size()) + " sequences vs " +
                         std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const Tensor& s = sequences[i];
    if (s.rank() != 2 || s.shape()[0] != static_cast<std::size_t>(seq_len) ||
        s.shape()[1] != static_cast<std::size_t>(feature_dim)) {
      throw DimensionError("sequence " + std::to_string(i) + " has shape " + s.shape_str());
    }
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DimensionError("label " + std::to_string(labels[i]) + " out of range");
    }
  }
}

SequenceDataset SequenceDataset::select_features(const std::vector<int>& columns) const {
  for (int c : columns) {
    if (c < 0 || c >= feature_dim) {
      throw DimensionError("feature column " + std::to_string(c) + " out of range");
    }
  }
  SequenceDataset out;
  out.feature_dim = static_cast<int>(columns.size());
  out.seq_len = seq_len;
  out.num_classes = num_classes;
  out.labels = labels;
  out.sequences.reserve(sequences.size());
  for (const Tensor& s : sequences) {
    Tensor r({static_cast<std::size_t>(seq_len), columns.size()});
    for (std::size_t t = 0; t < r.shape()[0]; ++t) {
      for (std::size_t j = 0; j < columns.size(); ++j) {
        r.at(t, j) = s.at(t, static_cast<std::size_t>(columns[j]));
      }
    }
    out.sequences.push_back(std::move(r));
  }
  return out;
}

SequenceDataset generate_synthetic(const SynthSpec& spec, SeededRng& rng) {
  spec.validate();
  const auto d = static_cast<std::size_t>(spec.feature_dim);
  const auto steps = static_cast<std::size_t>(spec.seq_len);
  const auto r = static_cast<std::size_t>(spec.relevant_dims);

  // Planted dimensions: r distinct indices, then one [T x r] prototype per
  // class, all fixed for the dataset.
  std::vector<int> all(d);
  for (std::size_t i = 0; i < d; ++i) all[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
    std::swap(all[i], all[j]);
  }
  std::vector<int> planted(all.begin(), all.begin() + static_cast<long>(r));
  std::sort(planted.begin(), planted.end());

  std::vector<Tensor> prototypes;
  prototypes.reserve(static_cast<std::size_t>(spec.num_classes));
  for (int c = 0; c < spec.num_classes; ++c) prototypes.push_back(gaussian(rng, {steps, r}));

  SequenceDataset ds;
  ds.feature_dim = spec.feature_dim;
  ds.seq_len = spec.seq_len;
  ds.num_classes = spec.num_classes;
  ds.synth_spec = spec;
  ds.planted_dims = planted;

  for (int c = 0; c < spec.num_classes; ++c) {
    for (int sample = 0; sample < spec.samples_per_class; ++sample) {
      Tensor x({steps, d});
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t j = 0; j < d; ++j) x.at(t, j) = spec.noise * rng.normal();
      }
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t k = 0; k < r; ++k) {
          x.at(t, static_cast<std::size_t>(planted[k])) +=
              spec.signal * prototypes[static_cast<std::size_t>(c)].at(t, k);
        }
      }
      ds.sequences.push_back(std::move(x));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

void write_seqf(const SequenceDataset& ds, const std::string& path) {
  ds.validate();
  std::string out;
  const std::size_t values_per_seq =
      static_cast<std::size_t>(ds.seq_len) * static_cast<std::size_t>(ds.feature_dim);
  out.reserve(24 + ds.size() * (4 + 4 * values_per_seq));
  out.append(kSeqfMagic, 4);
  put_u32(out, kSeqfVersion);
  put_u32(out, static_cast<std::uint32_t>(ds.size()));
  put_u32(out, static_cast<std::uint32_t>(ds.seq_len));
  put_u32(out, static_cast<std::uint32_t>(ds.feature_dim));
  put_u32(out, static_cast<std::uint32_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    put_u32(out, static_cast<std::uint32_t>(ds.labels[i]));
    for (double v : ds.sequences[i].data()) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw FormatError("cannot open '" + path + "' for writing", 0);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw FormatError("short write to '" + path + "'", out.size());
}

SequenceDataset read_seqf(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot open '" + path + "' for reading", 0);
  std::string buf((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  if (buf.size() < 24) throw FormatError("truncated header", buf.size());
  if (std::memcmp(buf.data(), kSeqfMagic, 4) != 0) throw FormatError("bad magic", 0);
  const std::uint32_t version = get_u32(buf, 4);
  if (version != kSeqfVersion) {
    throw FormatError("unsupported format version " + std::to_string(version), 4);
  }
  const std::uint32_t count = get_u32(buf, 8);
  const std::uint32_t steps = get_u32(buf, 12);
  const std::uint32_t d = get_u32(buf, 16);
  const std::uint32_t classes = get_u32(buf, 20);
  if (steps == 0 || d == 0 || classes == 0) {
    throw FormatError("zero dimension in header", 12);
  }
  const std::size_t values_per_seq = static_cast<std::size_t>(steps) * d;
  const std::size_t expected = 24 + static_cast<std::size_t>(count) * (4 + 4 * values_per_seq);
  if (buf.size() != expected) {
    throw FormatError("payload length " + std::to_string(buf.size() - 24) + " does not match " +
                          std::to_string(count) + " sequences",
                      buf.size());
  }

  SequenceDataset ds;
  ds.feature_dim = static_cast<int>(d);
  ds.seq_len = static_cast<int>(steps);
  ds.num_classes = static_cast<int>(classes);
  ds.source_path = path;
  std::size_t offset = 24;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t label = get_u32(buf, offset);
    if (label >= classes) {
      throw FormatError("label " + std::to_string(label) + " out of range", offset);
    }
    offset += 4;
    Tensor x({steps, d});
    for (std::size_t j = 0; j < values_per_seq; ++j) {
      x.at(j) = static_cast<double>(std::bit_cast<float>(get_u32(buf, offset)));
      offset += 4;
    }
    ds.sequences.push_back(std::move(x));
    ds.labels.push_back(static_cast<int>(label));
  }
  return ds;
}

std::vector<std::vector<int>> batches(std::size_t dataset_size, std::size_t batch_size,
                                      SeededRng& rng) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  std::vector<int> order = shuffled_indices(rng, static_cast<int>(dataset_size));
  std::vector<std::vector<int>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.emplace_back(order.begin() + static_cast<long>(start),
                     order.begin() + static_cast<long>(end));
  }
  return out;
}

}  // namespace viblstm
