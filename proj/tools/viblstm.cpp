// Command-line front end: train, prune, eval, bench, inspect, gen.
// Batch-oriented; every command is deterministic given its flags and seed
// (bench measures wall time and is the one exception). Exit codes: 0 ok,
// 2 configuration or format error, 3 numeric failure, 4 degenerate prune.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "viblstm/errors.hpp"
#include "viblstm/objectives.hpp"
#include "viblstm/pruner.hpp"
#include "viblstm/serialize.hpp"
#include "viblstm/trainer.hpp"

using namespace viblstm;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitDegenerate = 4;

struct SynthRequest {
  SynthSpec spec;
  int val_per_class = 20;
};

/// Parse "d=32,T=8,a=5,r=4,s=1,noise=1,train=100,val=20".
SynthRequest parse_synth(const std::string& text) {
  SynthRequest req;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("bad synth item '" + item + "', expected key=value");
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "d") req.spec.feature_dim = std::stoi(value);
    else if (key == "T") req.spec.seq_len = std::stoi(value);
    else if (key == "a") req.spec.num_classes = std::stoi(value);
    else if (key == "r") req.spec.relevant_dims = std::stoi(value);
    else if (key == "s") req.spec.signal = std::stod(value);
    else if (key == "noise") req.spec.noise = std::stod(value);
    else if (key == "train") req.spec.samples_per_class = std::stoi(value);
    else if (key == "val") req.val_per_class = std::stoi(value);
    else throw std::invalid_argument("unknown synth key '" + key + "'");
  }
  req.spec.validate();
  return req;
}

/// Balanced split of a per-class-contiguous dataset into train and val.
void split_synthetic(const SequenceDataset& all, int train_per_class, int val_per_class,
                     SequenceDataset& train, SequenceDataset& val) {
  train.feature_dim = val.feature_dim = all.feature_dim;
  train.seq_len = val.seq_len = all.seq_len;
  train.num_classes = val.num_classes = all.num_classes;
  train.planted_dims = val.planted_dims = all.planted_dims;
  train.synth_spec = val.synth_spec = all.synth_spec;
  const int per_class = train_per_class + val_per_class;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const bool to_train = static_cast<int>(i) % per_class < train_per_class;
    SequenceDataset& dst = to_train ? train : val;
    dst.sequences.push_back(all.sequences[i]);
    dst.labels.push_back(all.labels[i]);
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  json j;
  in >> j;
  return j;
}

/// Flags override config-file values: apply the file value only when the
/// option was not given on the command line.
template <typename T>
void merge_option(const CLI::App& app, const std::string& flag, const json& cfg,
                  const std::string& key, T& value) {
  if (app.count(flag) > 0) return;
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

double quantile(const std::vector<double>& sorted, double q) {
  const std::size_t idx = static_cast<std::size_t>(
      std::llround(q * static_cast<double>(sorted.size() - 1)));
  return sorted[idx];
}

json counts_to_json(const ParameterCounts& counts) {
  return json{{"lstm", counts.lstm_count},
              {"head", counts.head_count},
              {"vib", counts.vib_count},
              {"total", counts.total}};
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string synth;
  std::string data_path;
  std::string val_path;
  double val_frac = 0.2;
  std::string out_dir;
  std::string config_path;
  int hidden = 64;
  int epochs = 100;
  int warmup_epochs = 0;
  TrainConfig cfg;
};

int cmd_train(const CLI::App& app, TrainArgs& args) {
  if (!args.config_path.empty()) {
    const json cfg = load_config_file(args.config_path);
    merge_option(app, "--synth", cfg, "synth", args.synth);
    merge_option(app, "--data", cfg, "data", args.data_path);
    merge_option(app, "--val", cfg, "val", args.val_path);
    merge_option(app, "--val-frac", cfg, "val_frac", args.val_frac);
    merge_option(app, "--hidden", cfg, "hidden", args.hidden);
    merge_option(app, "--epochs", cfg, "epochs", args.epochs);
    merge_option(app, "--warmup-epochs", cfg, "warmup_epochs", args.warmup_epochs);
    merge_option(app, "--batch-size", cfg, "batch_size", args.cfg.batch_size);
    merge_option(app, "--beta", cfg, "beta", args.cfg.objective.beta);
    merge_option(app, "--beta-v", cfg, "beta_v", args.cfg.objective.beta_v);
    merge_option(app, "--lambda-gl", cfg, "lambda_gl", args.cfg.objective.lambda_gl);
    merge_option(app, "--ce-weight", cfg, "ce_weight", args.cfg.objective.ce_weight);
    merge_option(app, "--lr-vib", cfg, "lr_vib", args.cfg.lr_vib);
    merge_option(app, "--lr-main", cfg, "lr_main", args.cfg.lr_main);
    merge_option(app, "--lr-decay", cfg, "lr_decay", args.cfg.lr_decay);
    merge_option(app, "--dropout", cfg, "dropout", args.cfg.dropout_p);
    merge_option(app, "--seed", cfg, "seed", args.cfg.seed);
  }
  if (args.synth.empty() == args.data_path.empty()) {
    std::cerr << "train: give exactly one of --synth or --data\n";
    return kExitConfig;
  }

  SequenceDataset train_set, val_set;
  json data_desc;
  if (!args.synth.empty()) {
    const SynthRequest req = parse_synth(args.synth);
    SynthSpec all_spec = req.spec;
    all_spec.samples_per_class = req.spec.samples_per_class + req.val_per_class;
    SeededRng data_rng = SeededRng(args.cfg.seed).fork(100);
    const SequenceDataset all = generate_synthetic(all_spec, data_rng);
    split_synthetic(all, req.spec.samples_per_class, req.val_per_class, train_set, val_set);
    data_desc = {{"synth", args.synth},
                 {"planted_dims", train_set.planted_dims},
                 {"train_sequences", train_set.size()},
                 {"val_sequences", val_set.size()}};
  } else {
    const SequenceDataset all = read_seqf(args.data_path);
    if (!args.val_path.empty()) {
      train_set = all;
      val_set = read_seqf(args.val_path);
    } else {
      // Deterministic tail split.
      train_set.feature_dim = val_set.feature_dim = all.feature_dim;
      train_set.seq_len = val_set.seq_len = all.seq_len;
      train_set.num_classes = val_set.num_classes = all.num_classes;
      const auto val_count = static_cast<std::size_t>(
          std::max(1.0, std::floor(args.val_frac * static_cast<double>(all.size()))));
      for (std::size_t i = 0; i < all.size(); ++i) {
        SequenceDataset& dst = (i + val_count < all.size()) ? train_set : val_set;
        dst.sequences.push_back(all.sequences[i]);
        dst.labels.push_back(all.labels[i]);
      }
    }
    data_desc = {{"data", args.data_path},
                 {"val", args.val_path},
                 {"train_sequences", train_set.size()},
                 {"val_sequences", val_set.size()}};
  }

  const Dims dims{train_set.feature_dim, args.hidden, train_set.num_classes,
                  train_set.seq_len};
  SeededRng init_rng = SeededRng(args.cfg.seed).fork(200);
  SequenceClassifier model = initialize_model(dims, args.cfg, init_rng);

  TrainHistory history;
  if (args.warmup_epochs > 0) {
    TrainConfig warm_cfg = args.cfg;
    warm_cfg.epochs = args.warmup_epochs;
    warm_cfg.objective.beta = 0.0;
    warm_cfg.objective.beta_v = 0.0;
    auto [warm_model, warm_history] = train(model, train_set, val_set, warm_cfg);
    model = std::move(warm_model);
    history = std::move(warm_history);
  }
  TrainConfig main_cfg = args.cfg;
  main_cfg.epochs = args.epochs;
  auto [trained, main_history] = train(model, train_set, val_set, main_cfg);
  for (EpochRecord rec : main_history) {
    rec.epoch += args.warmup_epochs;
    history.push_back(rec);
  }

  trained.meta = TrainingMeta{args.cfg.objective.beta, args.cfg.objective.beta_v,
                              args.cfg.objective.lambda_gl, args.cfg.seed,
                              args.warmup_epochs + args.epochs};

  const std::filesystem::path out(args.out_dir);
  std::filesystem::create_directories(out);
  save_model(trained, (out / "model.vibl").string());

  std::ostringstream csv;
  csv << "epoch,ce,kl_i,kl_f,kl_o,kl_g,kl_feature,group_lasso,train_acc,val_acc,"
         "retained_i,retained_f,retained_o,retained_g,retained_feature\n";
  csv.precision(10);
  for (const EpochRecord& r : history) {
    csv << r.epoch << ',' << r.ce << ',' << r.kl_gates[0] << ',' << r.kl_gates[1] << ','
        << r.kl_gates[2] << ',' << r.kl_gates[3] << ',' << r.kl_feature << ',' << r.group_lasso
        << ',' << r.train_acc << ',' << r.val_acc << ',' << r.retained_gates[0] << ','
        << r.retained_gates[1] << ',' << r.retained_gates[2] << ',' << r.retained_gates[3]
        << ',' << r.retained_features << '\n';
  }
  write_text(out / "history.csv", csv.str());

  json effective{{"command", "train"},
                 {"data", data_desc},
                 {"hidden", args.hidden},
                 {"epochs", args.epochs},
                 {"warmup_epochs", args.warmup_epochs},
                 {"batch_size", args.cfg.batch_size},
                 {"beta", args.cfg.objective.beta},
                 {"beta_v", args.cfg.objective.beta_v},
                 {"lambda_gl", args.cfg.objective.lambda_gl},
                 {"ce_weight", args.cfg.objective.ce_weight},
                 {"lr_vib", args.cfg.lr_vib},
                 {"lr_main", args.cfg.lr_main},
                 {"lr_decay", args.cfg.lr_decay},
                 {"dropout", args.cfg.dropout_p},
                 {"seed", args.cfg.seed}};
  write_json(out / "effective-config.json", effective);

  const double final_val = history.empty() ? 0.0 : history.back().val_acc;
  std::cout << "trained " << (args.warmup_epochs + args.epochs) << " epochs; final val_acc "
            << final_val << "; model " << (out / "model.vibl").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// prune

int cmd_prune(const std::string& model_path, const std::string& out_dir, double gate_threshold,
              double feature_threshold, const std::string& rule_name, int finetune_epochs,
              const std::string& finetune_data, std::uint64_t seed) {
  if (rule_name != "all_gates" && rule_name != "any_of_igo") {
    std::cerr << "prune: unknown rule '" << rule_name << "'\n";
    return kExitConfig;
  }
  const SequenceClassifier model = load_model(model_path);
  const HiddenRule rule =
      (rule_name == "all_gates") ? HiddenRule::AllGates : HiddenRule::AnyOfIGO;

  const PrunePlan plan = make_plan(model, gate_threshold, feature_threshold, rule);
  SequenceClassifier compact = apply_plan(model, plan);

  // Equivalence audit on seeded random inputs, against the zero-forced
  // original, before any fine-tuning moves the weights.
  SeededRng probe_rng(seed ^ 0x5EEDFACEULL);
  std::vector<Tensor> probes;
  for (int i = 0; i < 16; ++i) {
    probes.push_back(gaussian(probe_rng, {static_cast<std::size_t>(model.dims.seq_len),
                                          static_cast<std::size_t>(model.dims.feature_dim)}));
  }
  const double deviation = verify_equivalence(model, compact, plan, probes);

  if (finetune_epochs > 0) {
    if (finetune_data.empty()) {
      std::cerr << "prune: --finetune-epochs needs --data\n";
      return kExitConfig;
    }
    TrainConfig cfg;
    cfg.epochs = finetune_epochs;
    cfg.dropout_p = 0.0;
    cfg.seed = seed;
    cfg.objective.beta = 0.0;
    cfg.objective.beta_v = 0.0;
    compact = finetune_compact(compact, read_seqf(finetune_data), cfg);
  }

  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  save_model(compact, (out / "model.vibl").string());

  const std::size_t dense_count =
      lstm_parameter_count(static_cast<std::size_t>(model.dims.feature_dim),
                           static_cast<std::size_t>(model.dims.hidden_dim));
  const std::size_t pruned_count =
      lstm_parameter_count(static_cast<std::size_t>(compact.dims.feature_dim),
                           static_cast<std::size_t>(compact.dims.hidden_dim));
  json report{{"kept_features", plan.kept_features},
              {"kept_hidden", plan.kept_hidden},
              {"gate_threshold", gate_threshold},
              {"feature_threshold", feature_threshold},
              {"rule", rule_name},
              {"dense_lstm_parameters", dense_count},
              {"pruned_lstm_parameters", pruned_count},
              {"compression_ratio", compression_ratio(static_cast<double>(dense_count),
                                                      static_cast<double>(pruned_count))},
              {"max_equivalence_deviation", deviation},
              {"finetune_epochs", finetune_epochs},
              {"dense_counts", counts_to_json(count_parameters(model))},
              {"pruned_counts", counts_to_json(count_parameters(compact))}};
  write_json(out / "prune-report.json", report);

  std::cout << "pruned to " << compact.dims.feature_dim << " features, "
            << compact.dims.hidden_dim << " hidden units; compression "
            << report.at("compression_ratio").get<double>() << "x; max deviation " << deviation
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& out_dir) {
  const SequenceClassifier model = load_model(model_path);
  const SequenceDataset ds = read_seqf(data_path);
  if (ds.size() == 0) {
    std::cerr << "eval: dataset is empty\n";
    return kExitConfig;
  }
  const EvalReport report = evaluate(model, ds);

  json j{{"accuracy", report.accuracy},
         {"per_class_accuracy", report.per_class_accuracy},
         {"mean_ce", report.mean_ce},
         {"sequences", ds.size()},
         {"model", model_path},
         {"data", data_path}};
  std::cout << j.dump(2) << "\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_json(std::filesystem::path(out_dir) / "eval.json", j);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

int cmd_bench(const std::string& model_path, int batch, int repeats, int seq_len,
              std::uint64_t seed, const std::string& out_dir) {
  const SequenceClassifier model = load_model(model_path);
  SequenceClassifier timed = model;
  if (seq_len > 0) timed.dims.seq_len = seq_len;

  SeededRng rng(seed);
  std::vector<Tensor> inputs;
  for (int i = 0; i < batch; ++i) {
    inputs.push_back(gaussian(rng, {static_cast<std::size_t>(timed.dims.seq_len),
                                    static_cast<std::size_t>(timed.dims.feature_dim)}));
  }

  // One untimed pass warms caches; repeats are timed over the whole batch.
  double sink = 0.0;
  for (const Tensor& x : inputs) sink += forward(timed, x, RunMode::Evaluation).at(0);
  std::vector<double> per_sequence_us;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const Tensor& x : inputs) sink += forward(timed, x, RunMode::Evaluation).at(0);
    const auto t1 = std::chrono::steady_clock::now();
    per_sequence_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count() /
                              static_cast<double>(batch));
  }
  std::sort(per_sequence_us.begin(), per_sequence_us.end());

  const double median = quantile(per_sequence_us, 0.5);
  json j{{"model", model_path},
         {"dims",
          {{"feature_dim", timed.dims.feature_dim},
           {"hidden_dim", timed.dims.hidden_dim},
           {"seq_len", timed.dims.seq_len}}},
         {"batch", batch},
         {"repeats", repeats},
         {"median_us_per_sequence", median},
         {"p10_us_per_sequence", quantile(per_sequence_us, 0.1)},
         {"p90_us_per_sequence", quantile(per_sequence_us, 0.9)},
         {"median_us_per_timestep", median / timed.dims.seq_len},
         {"checksum", sink}};
  std::cout << j.dump(2) << "\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_json(std::filesystem::path(out_dir) / "bench.json", j);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// inspect

json ratio_histogram(const Tensor& ratios) {
  // Decade buckets, clamped at the ends.
  const std::vector<double> edges{1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e4};
  std::vector<int> counts(edges.size() + 1, 0);
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    std::size_t bucket = 0;
    while (bucket < edges.size() && ratios.at(i) >= edges[bucket]) ++bucket;
    counts[bucket] += 1;
  }
  json buckets = json::array();
  for (std::size_t b = 0; b < counts.size(); ++b) {
    std::string label;
    if (b == 0) {
      label = "<1e-08";
    } else if (b == edges.size()) {
      label = ">=1e+04";
    } else {
      std::ostringstream os;
      os << "[" << edges[b - 1] << "," << edges[b] << ")";
      label = os.str();
    }
    buckets.push_back({{"range", label}, {"count", counts[b]}});
  }
  return buckets;
}

int cmd_inspect(const std::string& model_path, const std::string& out_dir) {
  const SequenceClassifier model = load_model(model_path);
  json j{{"model", model_path},
         {"compact", model.compact},
         {"dims",
          {{"feature_dim", model.dims.feature_dim},
           {"hidden_dim", model.dims.hidden_dim},
           {"num_classes", model.dims.num_classes},
           {"seq_len", model.dims.seq_len}}},
         {"parameter_counts", counts_to_json(count_parameters(model))}};

  if (model.compact) {
    // No mask parameters left; summarize the fixed scales instead.
    json scales;
    const char* gate_names[4] = {"i", "f", "o", "g"};
    for (int k = 0; k < 4; ++k) {
      const Tensor& s = model.gate_scales[static_cast<std::size_t>(k)];
      double lo = s.at(0), hi = s.at(0), sum = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        lo = std::min(lo, s.at(i));
        hi = std::max(hi, s.at(i));
        sum += s.at(i);
      }
      scales[gate_names[k]] = {{"min", lo}, {"max", hi}, {"mean", sum / s.size()}};
    }
    j["gate_scales"] = scales;
    std::printf("compact model: %d features, %d hidden units\n", model.dims.feature_dim,
                model.dims.hidden_dim);
  } else {
    const std::vector<double> sweep{1e-3, 1e-2, 1e-1, 1.0};
    json gates;
    const char* gate_names[5] = {"feature", "i", "f", "o", "g"};
    const std::vector<const VibGate*> all_gates{&model.feature_gate, &model.gate_masks[0],
                                                &model.gate_masks[1], &model.gate_masks[2],
                                                &model.gate_masks[3]};
    std::printf("%-8s %8s | retained at threshold\n", "gate", "units");
    std::printf("%-8s %8s | %8s %8s %8s %8s\n", "", "", "1e-3", "1e-2", "1e-1", "1");
    for (std::size_t g = 0; g < all_gates.size(); ++g) {
      const Tensor ratios = relevance_ratio(*all_gates[g]);
      json entry{{"histogram", ratio_histogram(ratios)}};
      json retained;
      std::printf("%-8s %8zu |", gate_names[g], ratios.size());
      for (double t : sweep) {
        const int count = static_cast<int>(retained_indices(*all_gates[g], t).size());
        retained[std::to_string(t)] = count;
        std::printf(" %8d", count);
      }
      std::printf("\n");
      entry["retained"] = retained;
      gates[gate_names[g]] = entry;
    }
    j["relevance"] = gates;
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_json(std::filesystem::path(out_dir) / "inspect.json", j);
  } else {
    std::cout << j.dump(2) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gen

int cmd_gen(const std::string& synth, std::uint64_t seed, const std::string& out_path,
            const std::string& meta_path) {
  const SynthRequest req = parse_synth(synth);
  SeededRng rng = SeededRng(seed).fork(100);
  const SequenceDataset ds = generate_synthetic(req.spec, rng);
  write_seqf(ds, out_path);
  if (!meta_path.empty()) {
    write_json(meta_path, json{{"synth", synth},
                               {"seed", seed},
                               {"planted_dims", ds.planted_dims},
                               {"sequences", ds.size()}});
  }
  std::cout << "wrote " << ds.size() << " sequences to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VIB-pruned LSTM sequence classifier toolkit"};
  app.require_subcommand(1);

  // train
  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a masked classifier");
  train_cmd->add_option("--synth", train_args.synth,
                        "synthetic task, e.g. d=32,T=8,a=5,r=4,train=100,val=20");
  train_cmd->add_option("--data", train_args.data_path, "training dataset (.seqf)");
  train_cmd->add_option("--val", train_args.val_path, "validation dataset (.seqf)");
  train_cmd->add_option("--val-frac", train_args.val_frac, "validation split when no --val");
  train_cmd->add_option("--hidden", train_args.hidden, "hidden units");
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--warmup-epochs", train_args.warmup_epochs,
                        "epochs without mask penalties before the main phase");
  train_cmd->add_option("--batch-size", train_args.cfg.batch_size, "mini-batch size");
  train_cmd->add_option("--beta", train_args.cfg.objective.beta, "gate mask penalty weight");
  train_cmd->add_option("--beta-v", train_args.cfg.objective.beta_v,
                        "feature mask penalty weight");
  train_cmd->add_option("--lambda-gl", train_args.cfg.objective.lambda_gl,
                        "group lasso weight");
  train_cmd->add_option("--ce-weight", train_args.cfg.objective.ce_weight,
                        "cross-entropy weight");
  train_cmd->add_option("--lr-vib", train_args.cfg.lr_vib, "mask learning rate");
  train_cmd->add_option("--lr-main", train_args.cfg.lr_main, "weight learning rate");
  train_cmd->add_option("--lr-decay", train_args.cfg.lr_decay, "per-epoch lr factor");
  train_cmd->add_option("--dropout", train_args.cfg.dropout_p, "dropout on the final state");
  train_cmd->add_option("--seed", train_args.cfg.seed, "run seed");
  train_cmd->add_option("--config", train_args.config_path, "JSON config file");
  train_cmd->add_option("--out", train_args.out_dir, "output directory")->required();

  // prune
  std::string prune_model, prune_out, prune_rule = "any_of_igo", prune_data;
  double gate_threshold = 0.01, feature_threshold = 0.01;
  int finetune_epochs = 0;
  std::uint64_t prune_seed = 0;
  CLI::App* prune_cmd = app.add_subcommand("prune", "shrink a trained model");
  prune_cmd->add_option("--model", prune_model, "trained model (.vibl)")->required();
  prune_cmd->add_option("--out", prune_out, "output directory")->required();
  prune_cmd->add_option("--gate-threshold", gate_threshold, "hidden-unit relevance threshold");
  prune_cmd->add_option("--feature-threshold", feature_threshold,
                        "feature relevance threshold");
  prune_cmd->add_option("--rule", prune_rule, "any_of_igo or all_gates");
  prune_cmd->add_option("--finetune-epochs", finetune_epochs, "fine-tune after pruning");
  prune_cmd->add_option("--data", prune_data, "dataset for fine-tuning (.seqf)");
  prune_cmd->add_option("--seed", prune_seed, "seed for probes and fine-tuning");

  // eval
  std::string eval_model, eval_data, eval_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a model on a dataset");
  eval_cmd->add_option("--model", eval_model, "model (.vibl)")->required();
  eval_cmd->add_option("--data", eval_data, "dataset (.seqf)")->required();
  eval_cmd->add_option("--out", eval_out, "output directory for eval.json");

  // bench
  std::string bench_model, bench_out;
  int bench_batch = 10, bench_repeats = 5, bench_seq_len = 0;
  std::uint64_t bench_seed = 0;
  CLI::App* bench_cmd = app.add_subcommand("bench", "single-core forward latency");
  bench_cmd->add_option("--model", bench_model, "model (.vibl)")->required();
  bench_cmd->add_option("--batch", bench_batch, "sequences per repeat");
  bench_cmd->add_option("--repeats", bench_repeats, "timed repeats");
  bench_cmd->add_option("--seq-len", bench_seq_len, "override sequence length");
  bench_cmd->add_option("--seed", bench_seed, "input seed");
  bench_cmd->add_option("--out", bench_out, "output directory for bench.json");

  // inspect
  std::string inspect_model, inspect_out;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "mask relevance and counts");
  inspect_cmd->add_option("--model", inspect_model, "model (.vibl)")->required();
  inspect_cmd->add_option("--out", inspect_out, "output directory for inspect.json");

  // gen
  std::string gen_synth, gen_out, gen_meta;
  std::uint64_t gen_seed = 0;
  CLI::App* gen_cmd = app.add_subcommand("gen", "write a synthetic dataset");
  gen_cmd->add_option("--synth", gen_synth, "synthetic task spec")->required();
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--out", gen_out, "output .seqf path")->required();
  gen_cmd->add_option("--meta", gen_meta, "optional provenance JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(*train_cmd, train_args);
    if (prune_cmd->parsed()) {
      return cmd_prune(prune_model, prune_out, gate_threshold, feature_threshold, prune_rule,
                       finetune_epochs, prune_data, prune_seed);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_model, eval_data, eval_out);
    if (bench_cmd->parsed()) {
      return cmd_bench(bench_model, bench_batch, bench_repeats, bench_seq_len, bench_seed,
                       bench_out);
    }
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_model, inspect_out);
    if (gen_cmd->parsed()) return cmd_gen(gen_synth, gen_seed, gen_out, gen_meta);
  } catch (const DegeneratePlanError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
