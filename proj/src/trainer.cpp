#include "viblstm/trainer.hpp"

#include <cmath>

#include "viblstm/errors.hpp"
#include "viblstm/objectives.hpp"

namespace viblstm {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  // Zero freezes a group (used to verify group separation); negative is a bug.
  if (lr_vib < 0.0 || lr_main < 0.0) throw std::invalid_argument("learning rates must be >= 0");
  if (!(lr_decay > 0.0)) throw std::invalid_argument("lr_decay must be > 0");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw std::invalid_argument("dropout_p must lie in [0, 1)");
  }
  if (!(init.sigma_init > 0.0)) throw std::invalid_argument("sigma_init must be > 0");
  if (!(retain_threshold > 0.0)) throw std::invalid_argument("retain_threshold must be > 0");
  objective.validate();
}

SequenceClassifier initialize_model(const Dims& dims, const TrainConfig& cfg, SeededRng& rng) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(dims.feature_dim);
  const auto n = static_cast<std::size_t>(dims.hidden_dim);
  const auto a = static_cast<std::size_t>(dims.num_classes);
  if (d == 0 || n == 0 || a < 2 || dims.seq_len < 1) {
    throw std::invalid_argument("invalid model dims");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(n));

  auto uniform_fill = [&](Tensor t) {
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-bound, bound);
    return t;
  };
  auto fresh_gate = [&](std::size_t len) {
    Tensor mu({len});
    for (std::size_t i = 0; i < len; ++i) mu.at(i) = cfg.init.mu_mean + cfg.init.mu_jitter * rng.normal();
    return VibGate::with_sigma(std::move(mu), cfg.init.sigma_init);
  };

  SequenceClassifier m;
  m.dims = dims;
  m.dropout_p = cfg.dropout_p;
  for (int k = 0; k < 4; ++k) {
    m.lstm.w(k) = uniform_fill(Tensor({n, d}));
    m.lstm.u(k) = uniform_fill(Tensor({n, n}));
    m.lstm.b(k) = (k == kGateForget) ? Tensor::full({n}, 1.0) : Tensor({n});
  }
  m.head_w = uniform_fill(Tensor({a, n}));
  m.head_b = Tensor({a});
  m.feature_gate = fresh_gate(d);
  for (int k = 0; k < 4; ++k) m.gate_masks[static_cast<std::size_t>(k)] = fresh_gate(n);
  m.validate();
  return m;
}

namespace {

/// Adam moment buffers per parameter, in store order.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

void adam_step(ParamStore& store, Tape& tape, const LeafMap& leaves, AdamState& state,
               const TrainConfig& cfg, double decay_factor) {
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double m_corr = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(b2, static_cast<double>(state.step));
  std::size_t slot = 0;
  for (const std::string& name : store.names()) {
    const double lr =
        decay_factor * (store.group(name) == ParamGroup::Vib ? cfg.lr_vib : cfg.lr_main);
    Tensor& param = store.at(name);
    const Tensor& grad = tape.grad(leaves.at(name));
    Tensor& mom = state.m[slot];
    Tensor& vel = state.v[slot];
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad.at(i);
      mom.at(i) = b1 * mom.at(i) + (1.0 - b1) * g;
      vel.at(i) = b2 * vel.at(i) + (1.0 - b2) * g * g;
      const double m_hat = mom.at(i) / m_corr;
      const double v_hat = vel.at(i) / v_corr;
      param.at(i) -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
    ++slot;
  }
}

int retained_count(const VibGate& gate, double threshold) {
  return static_cast<int>(retained_indices(gate, threshold).size());
}

}  // namespace

std::pair<SequenceClassifier, TrainHistory> train(const SequenceClassifier& model_in,
                                                  const SequenceDataset& train_set,
                                                  const SequenceDataset& val_set,
                                                  const TrainConfig& cfg) {
  cfg.validate();
  if (model_in.compact) throw std::invalid_argument("train needs a trainable model");
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw std::invalid_argument("datasets must be nonempty");
  }
  train_set.validate();
  val_set.validate();
  if (train_set.feature_dim != model_in.dims.feature_dim ||
      train_set.seq_len != model_in.dims.seq_len) {
    throw DimensionError("training data does not match model dims");
  }

  SequenceClassifier model = model_in;
  ParamStore store = collect_params(model);
  AdamState adam;
  for (const std::string& name : store.names()) {
    adam.m.push_back(Tensor(store.at(name).shape()));
    adam.v.push_back(Tensor(store.at(name).shape()));
  }

  SeededRng root(cfg.seed);
  SeededRng shuffle_rng = root.fork(1);
  SeededRng noise_rng = root.fork(2);

  TrainHistory history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));
  double decay_factor = 1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_batches =
        batches(train_set.size(), static_cast<std::size_t>(cfg.batch_size), shuffle_rng);
    double ce_sum = 0.0;
    std::size_t ce_examples = 0;

    for (std::size_t b = 0; b < epoch_batches.size(); ++b) {
      const std::vector<int>& batch = epoch_batches[b];
      Tape tape;
      LeafMap leaves;
      for (const std::string& name : store.names()) leaves[name] = tape.leaf(store.at(name));
      LossBuildOptions opts;
      opts.mask_mode = MaskMode::Stochastic;
      opts.dropout_p = cfg.dropout_p;
      LossGraph graph = build_batch_loss(tape, leaves, model.dims, train_set, batch,
                                         cfg.objective, opts, &noise_rng);
      const double loss = tape.value(graph.loss).at(0);
      if (!std::isfinite(loss)) {
        throw NumericError("loss diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      }
      ce_sum += tape.value(graph.mean_ce).at(0) * static_cast<double>(batch.size());
      ce_examples += batch.size();
      tape.backward(graph.loss);
      adam_step(store, tape, leaves, adam, cfg, decay_factor);
    }
    decay_factor *= cfg.lr_decay;

    apply_params(model, store);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.ce = ce_sum / static_cast<double>(ce_examples);
    for (int k = 0; k < 4; ++k) {
      rec.kl_gates[static_cast<std::size_t>(k)] =
          kl_penalty(model.gate_masks[static_cast<std::size_t>(k)]);
      rec.retained_gates[static_cast<std::size_t>(k)] =
          retained_count(model.gate_masks[static_cast<std::size_t>(k)], cfg.retain_threshold);
    }
    rec.kl_feature = kl_penalty(model.feature_gate);
    rec.retained_features = retained_count(model.feature_gate, cfg.retain_threshold);
    rec.group_lasso = group_lasso(model.lstm, model.head_w);
    rec.train_acc = evaluate(model, train_set).accuracy;
    rec.val_acc = evaluate(model, val_set).accuracy;
    history.push_back(rec);
  }

  apply_params(model, store);
  return {std::move(model), std::move(history)};
}

EvalReport evaluate(const SequenceClassifier& m, const SequenceDataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: dataset must be nonempty");

  const SequenceDataset* data = &ds;
  SequenceDataset projected;
  if (m.compact && ds.feature_dim == m.source_feature_dim &&
      ds.feature_dim != m.dims.feature_dim) {
    projected = ds.select_features(m.source_feature_indices);
    data = &projected;
  }
  if (data->feature_dim != m.dims.feature_dim || data->seq_len != m.dims.seq_len) {
    throw DimensionError("evaluate: dataset dims do not match the model");
  }

  const auto classes = static_cast<std::size_t>(m.dims.num_classes);
  std::vector<std::size_t> per_class_total(classes, 0), per_class_correct(classes, 0);
  double ce_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data->size(); ++i) {
    const Tensor logits = forward(m, data->sequences[i], RunMode::Evaluation);
    const int label = data->labels[i];
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < logits.size(); ++j) {
      if (logits.at(j) > logits.at(argmax)) argmax = j;
    }
    ce_sum += cross_entropy(logits, label);
    per_class_total[static_cast<std::size_t>(label)] += 1;
    if (argmax == static_cast<std::size_t>(label)) {
      ++correct;
      per_class_correct[static_cast<std::size_t>(label)] += 1;
    }
  }

  EvalReport report;
  report.accuracy = static_cast<double>(correct) / static_cast<double>(data->size());
  report.mean_ce = ce_sum / static_cast<double>(data->size());
  report.per_class_accuracy.resize(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    if (per_class_total[c] > 0) {
      report.per_class_accuracy[c] =
          static_cast<double>(per_class_correct[c]) / static_cast<double>(per_class_total[c]);
    }
  }
  return report;
}

SequenceClassifier finetune_compact(const SequenceClassifier& m,
                                    const SequenceDataset& train_set, const TrainConfig& cfg) {
  cfg.validate();
  if (!m.compact) throw std::invalid_argument("finetune_compact needs a compact model");

  const SequenceDataset* data = &train_set;
  SequenceDataset projected;
  if (train_set.feature_dim == m.source_feature_dim &&
      train_set.feature_dim != m.dims.feature_dim) {
    projected = train_set.select_features(m.source_feature_indices);
    data = &projected;
  }

  SequenceClassifier model = m;
  ParamStore store;
  for (int k = 0; k < 4; ++k) {
    store.add(names::kLstmW[k], model.lstm.w(k), ParamGroup::Main);
    store.add(names::kLstmU[k], model.lstm.u(k), ParamGroup::Main);
    store.add(names::kLstmB[k], model.lstm.b(k), ParamGroup::Main);
  }
  store.add(names::kHeadW, model.head_w, ParamGroup::Main);
  store.add(names::kHeadB, model.head_b, ParamGroup::Main);

  AdamState adam;
  for (const std::string& name : store.names()) {
    adam.m.push_back(Tensor(store.at(name).shape()));
    adam.v.push_back(Tensor(store.at(name).shape()));
  }

  SeededRng root(cfg.seed);
  SeededRng shuffle_rng = root.fork(1);
  SeededRng noise_rng = root.fork(2);
  double decay_factor = 1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_batches =
        batches(data->size(), static_cast<std::size_t>(cfg.batch_size), shuffle_rng);
    for (std::size_t b = 0; b < epoch_batches.size(); ++b) {
      Tape tape;
      LeafMap leaves;
      for (const std::string& name : store.names()) leaves[name] = tape.leaf(store.at(name));
      LossBuildOptions opts;
      opts.mask_mode = MaskMode::Deterministic;
      opts.dropout_p = cfg.dropout_p;
      opts.fixed_masks = model.gate_scales;
      ObjectiveConfig obj = cfg.objective;  // only CE and lambda_gl apply
      LossGraph graph =
          build_batch_loss(tape, leaves, model.dims, *data, epoch_batches[b], obj, opts,
                           &noise_rng);
      const double loss = tape.value(graph.loss).at(0);
      if (!std::isfinite(loss)) {
        throw NumericError("loss diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      }
      tape.backward(graph.loss);
      adam_step(store, tape, leaves, adam, cfg, decay_factor);
    }
    decay_factor *= cfg.lr_decay;
  }

  for (int k = 0; k < 4; ++k) {
    model.lstm.w(k) = store.at(names::kLstmW[k]);
    model.lstm.u(k) = store.at(names::kLstmU[k]);
    model.lstm.b(k) = store.at(names::kLstmB[k]);
  }
  model.head_w = store.at(names::kHeadW);
  model.head_b = store.at(names::kHeadB);
  return model;
}

}  // namespace viblstm
