#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "echoclutter/filter_net.hpp"
#include "echoclutter/losses.hpp"
#include "echoclutter/manifest.hpp"
#include "echoclutter/optim.hpp"

namespace echoclutter {

enum class LossKind : std::uint8_t { Rec, RecAdv, RecPrc };

std::string to_string(LossKind k);
LossKind parse_loss_kind(const std::string& s);

struct TrainConfig {
  LossKind loss_kind = LossKind::Rec;
  double lambda_rec = 1.0;
  double lambda_adv = 0.01;
  double lambda_prc = 0.1;
  int epochs = 20;
  double lr = 1e-4;
  double shift_probability = 0.5;
  std::uint64_t seed = 0;
  int batch_size = 2;
  int perceptual_pretrain_epochs = 5;

  void validate() const;
  /// Lambdas in effect for the chosen loss kind (unused terms are 0).
  double effective_adv() const noexcept { return loss_kind == LossKind::RecAdv ? lambda_adv : 0.0; }
  double effective_prc() const noexcept { return loss_kind == LossKind::RecPrc ? lambda_prc : 0.0; }
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  /// Learning rate used during this epoch.
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

struct TrainingPair {
  std::string id;
  int pattern_id = -1;
  Sequence clean;
  Sequence cluttered;
  BinaryVolume mask;
};

std::vector<TrainingPair> load_pairs(const DatasetManifest& m, const std::vector<const ManifestRecord*>& records);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Runs the full protocol and leaves the best-validation weights in `net`.
/// Throws ContractError if either split is empty.
TrainResult train(FilterNet& net, const std::vector<TrainingPair>& train_set, const std::vector<TrainingPair>& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Uses the manifest's "train" and "val" splits.
TrainResult train(FilterNet& net, const DatasetManifest& m, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Fits the perceptual autoencoder to reconstruct clean sequences, then freezes it.
void pretrain_perceptual(PerceptualNet& p, const std::vector<TrainingPair>& pairs, int epochs, double lr,
                         int batch_size, std::uint64_t seed);

std::string format_train_log_csv(const std::vector<EpochLog>& log);
void write_train_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace echoclutter
