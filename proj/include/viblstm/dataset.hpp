#pragma once

#include <optional>
#include <string>
#include <vector>

#include "viblstm/rng.hpp"
#include "viblstm/tensor.hpp"

namespace viblstm {

/// Synthetic planted-relevant-feature task. Only `relevant_dims` of the
/// `feature_dim` input dimensions carry class information; every class has a
/// fixed random temporal prototype on those dimensions and samples are the
/// prototype plus noise. The rest is pure noise, so a trained feature gate
/// should recover exactly the planted set.
struct SynthSpec {
  int feature_dim = 32;
  int seq_len = 8;
  int num_classes = 5;
  int relevant_dims = 4;
  double signal = 1.0;
  double noise = 1.0;
  int samples_per_class = 100;

  void validate() const;
};

/// Labeled fixed-length sequences of feature vectors.
struct SequenceDataset {
  int feature_dim = 0;
  int seq_len = 0;
  int num_classes = 0;
  std::vector<Tensor> sequences;  // each [T x d]
  std::vector<int> labels;

  // Provenance: the generating spec and planted dims for synthetic data, or
  // the source path for files.
  std::optional<SynthSpec> synth_spec;
  std::vector<int> planted_dims;
  std::string source_path;

  std::size_t size() const { return sequences.size(); }
  void validate() const;

  /// Copy with only the given feature columns, in the given order.
  SequenceDataset select_features(const std::vector<int>& columns) const;
};

/// Generate a balanced synthetic dataset. Reproducible: the same (spec, rng
/// seed) yields the same bytes.
SequenceDataset generate_synthetic(const SynthSpec& spec, SeededRng& rng);

/// Binary sequence-feature file: magic "SEQF", u32 LE version, u32 LE counts
/// (num_sequences, seq_len, feature_dim, num_classes), then per sequence a
/// u32 LE label followed by seq_len*feature_dim IEEE-754 32-bit LE values.
void write_seqf(const SequenceDataset& ds, const std::string& path);
SequenceDataset read_seqf(const std::string& path);

/// Shuffled index batches covering the dataset exactly once; the final batch
/// may be short.
std::vector<std::vector<int>> batches(std::size_t dataset_size, std::size_t batch_size,
                                      SeededRng& rng);

}  // namespace viblstm
