#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "viblstm/classifier.hpp"
#include "viblstm/dataset.hpp"
#include "viblstm/loss_graph.hpp"

namespace viblstm {

/// Initialization scheme for fresh models: masks start near the unmasked
/// model (means near 1, small deviation) so early training behaves like a
/// plain LSTM while the penalty decides which units to keep.
struct InitConfig {
  double mu_mean = 1.0;
  double mu_jitter = 0.01;
  double sigma_init = 0.1;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 50;
  // Two learning-rate groups: mask parameters move fast, everything else slow.
  double lr_vib = 1e-2;
  double lr_main = 1e-4;
  double lr_decay = 1.0;  // multiplicative per-epoch factor
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  ObjectiveConfig objective;
  double dropout_p = 0.5;
  std::uint64_t seed = 0;
  InitConfig init;
  double retain_threshold = 0.01;  // for the per-epoch retained counts

  void validate() const;
};

/// One row of the training history.
struct EpochRecord {
  int epoch = 0;
  double ce = 0.0;
  std::array<double, 4> kl_gates{};
  double kl_feature = 0.0;
  double group_lasso = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::array<int, 4> retained_gates{};
  int retained_features = 0;
};

using TrainHistory = std::vector<EpochRecord>;

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  double mean_ce = 0.0;
};

/// Fresh trainable model: LSTM and head weights uniform in (-1/sqrt(n),
/// 1/sqrt(n)), forget bias 1, other biases 0, mask means near 1 with
/// deviation sigma_init.
SequenceClassifier initialize_model(const Dims& dims, const TrainConfig& cfg, SeededRng& rng);

/// Adam over shuffled mini-batches with the two learning-rate groups.
/// Deterministic given cfg.seed. Throws NumericError (with epoch and batch in
/// the message) if the loss stops being finite.
std::pair<SequenceClassifier, TrainHistory> train(const SequenceClassifier& m,
                                                  const SequenceDataset& train_set,
                                                  const SequenceDataset& val_set,
                                                  const TrainConfig& cfg);

/// Deterministic evaluation (masks at their means or scales, no dropout).
/// Accepts datasets in a compact model's original feature space and selects
/// the model's columns automatically.
EvalReport evaluate(const SequenceClassifier& m, const SequenceDataset& ds);

/// Cross-entropy fine-tuning of a compact model's weights (the fixed gate
/// scales stay fixed). Used after pruning when a little accuracy needs to be
/// recovered.
SequenceClassifier finetune_compact(const SequenceClassifier& m,
                                    const SequenceDataset& train_set, const TrainConfig& cfg);

}  // namespace viblstm
