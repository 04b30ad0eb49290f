#include "echoclutter/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>

#include "echoclutter/clutter.hpp"
#include "echoclutter/codec.hpp"
#include "echoclutter/error.hpp"
#include "echoclutter/random.hpp"

namespace echoclutter {

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::Rec: return "rec";
    case LossKind::RecAdv: return "rec_adv";
    case LossKind::RecPrc: return "rec_prc";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "rec") return LossKind::Rec;
  if (s == "rec_adv") return LossKind::RecAdv;
  if (s == "rec_prc") return LossKind::RecPrc;
  throw ParameterError("unknown loss kind '" + s + "' (expected rec, rec_adv or rec_prc)");
}

void TrainConfig::validate() const {
  if (lambda_rec < 0 || lambda_adv < 0 || lambda_prc < 0) throw ParameterError("loss weights must be >= 0");
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (!(lr > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(shift_probability >= 0.0 && shift_probability <= 1.0)) throw ParameterError("shift probability outside [0,1]");
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
}

std::vector<TrainingPair> load_pairs(const DatasetManifest& m, const std::vector<const ManifestRecord*>& records) {
  std::vector<TrainingPair> out;
  out.reserve(records.size());
  for (const auto* r : records) {
    TrainingPair p;
    p.id = r->id;
    p.pattern_id = r->pattern_id;
    p.clean = decode_sequence(m.resolve(r->clean_path));
    p.cluttered = decode_sequence(m.resolve(r->cluttered_path));
    p.mask = BinaryVolume::from_sequence(decode_sequence(m.resolve(r->mask_path)));
    if (!(p.clean.dims() == p.cluttered.dims()) || !(p.clean.dims() == p.mask.dims)) {
      throw DimensionError("record '" + r->id + "' has mismatched dims");
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

struct Batch {
  Var input;
  Var target;
  Var mask;
};

Batch make_batch(const std::vector<const Sequence*>& in, const std::vector<const Sequence*>& tgt,
                 const std::vector<const Sequence*>& mask) {
  return {constant(sequences_to_batch(in)), constant(sequences_to_batch(tgt)), constant(sequences_to_batch(mask))};
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

double validation_loss(FilterNet& net, const std::vector<TrainingPair>& val, const TrainConfig& cfg,
                       PerceptualNet* perceptual) {
  NoGradGuard guard;
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t i = 0; i < val.size(); i += cfg.batch_size) {
    std::vector<const Sequence*> in, tgt;
    for (std::size_t j = i; j < std::min(val.size(), i + cfg.batch_size); ++j) {
      in.push_back(&val[j].cluttered);
      tgt.push_back(&val[j].clean);
    }
    const Var x = constant(sequences_to_batch(in));
    const Var y = constant(sequences_to_batch(tgt));
    const Var pred = net.forward(x, Mode::Eval);
    double loss = cfg.lambda_rec * loss_rec(pred, y)->value[0];
    if (perceptual && cfg.effective_prc() > 0.0) {
      loss += cfg.effective_prc() * loss_perceptual(pred, y, *perceptual)->value[0];
    }
    total += loss;
    ++batches;
  }
  return total / static_cast<double>(batches);
}

}  // namespace

void pretrain_perceptual(PerceptualNet& p, const std::vector<TrainingPair>& pairs, int epochs, double lr,
                         int batch_size, std::uint64_t seed) {
  if (pairs.empty()) throw ContractError("perceptual pre-training needs data");
  EnableGradGuard grad_on;
  AdamState adam;
  FilterNet& net = p.net();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled(pairs.size(), derive_seed(seed, {static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
      std::vector<const Sequence*> seqs;
      for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) seqs.push_back(&pairs[order[j]].clean);
      const Var x = constant(sequences_to_batch(seqs));
      net.params().zero_grad();
      const Var loss = loss_rec(net.forward(x, Mode::Train), x);
      backward(loss);
      adam_step(net.params(), adam, lr);
    }
  }
  p.freeze();
}

TrainResult train(FilterNet& net, const std::vector<TrainingPair>& train_set, const std::vector<TrainingPair>& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ContractError("training split is empty");
  if (val_set.empty()) throw ContractError("validation split is empty");
  EnableGradGuard grad_on;

  std::unique_ptr<Discriminator> disc;
  std::unique_ptr<PerceptualNet> perceptual;
  AdamState adam_g, adam_d;
  if (cfg.loss_kind == LossKind::RecAdv) {
    disc = std::make_unique<Discriminator>(DiscriminatorConfig{8, 3, net.config().temporal_kernels},
                                           derive_seed(cfg.seed, {0xd15cULL}));
  }
  if (cfg.loss_kind == LossKind::RecPrc) {
    perceptual = std::make_unique<PerceptualNet>(derive_seed(cfg.seed, {0x9e7cULL}), 8, net.config().temporal_kernels);
    pretrain_perceptual(*perceptual, train_set, cfg.perceptual_pretrain_epochs, cfg.lr, cfg.batch_size,
                        derive_seed(cfg.seed, {0x9e7dULL}));
  }

  LRSchedulerState sched;
  sched.current_lr = cfg.lr;
  TrainResult result;
  std::vector<Tensor> best = net.params().snapshot();
  result.best_val_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = sched.current_lr;
    const std::uint64_t epoch_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch)});
    const auto order = shuffled(train_set.size(), derive_seed(epoch_seed, {1}));
    double train_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
      std::vector<Sequence> ins, tgts, masks;
      for (std::size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j) {
        const TrainingPair& p = train_set[order[j]];
        auto shifted = time_shift_pair(p.cluttered, p.clean, cfg.shift_probability,
                                       derive_seed(epoch_seed, {2, static_cast<std::uint64_t>(order[j])}));
        masks.push_back(rotate_frames(p.mask.as_sequence(), shifted.start_frame));
        ins.push_back(std::move(shifted.input));
        tgts.push_back(std::move(shifted.target));
      }
      std::vector<const Sequence*> pi, pt, pm;
      for (std::size_t k = 0; k < ins.size(); ++k) {
        pi.push_back(&ins[k]);
        pt.push_back(&tgts[k]);
        pm.push_back(&masks[k]);
      }
      const Batch b = make_batch(pi, pt, pm);
      const std::uint64_t step_seed = derive_seed(epoch_seed, {3, static_cast<std::uint64_t>(batches)});

      net.params().zero_grad();
      const Var pred = net.forward(b.input, Mode::Train, step_seed);
      Var loss = scale(loss_rec(pred, b.target), static_cast<float>(cfg.lambda_rec));
      AdversarialTerms adv;
      if (disc) {
        adv = loss_adversarial(pred, b.target, b.mask, *disc, Mode::Train);
        loss = add(loss, scale(adv.generator, static_cast<float>(cfg.effective_adv())));
      }
      if (perceptual) {
        loss = add(loss, scale(loss_perceptual(pred, b.target, *perceptual), static_cast<float>(cfg.effective_prc())));
      }
      if (!std::isfinite(loss->value[0])) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      backward(loss);
      adam_step(net.params(), adam_g, lr);
      if (disc) {
        // One discriminator step per filter step, on the same batch.
        disc->params().zero_grad();
        backward(adv.discriminator);
        adam_step(disc->params(), adam_d, lr);
      }
      train_total += loss->value[0];
      ++batches;
    }

    const double val = validation_loss(net, val_set, cfg, perceptual.get());
    EpochLog row{epoch, train_total / static_cast<double>(batches), val, lr};
    result.log.push_back(row);
    if (val < result.best_val_loss) {
      result.best_val_loss = val;
      result.best_epoch = epoch;
      best = net.params().snapshot();
    }
    lr_plateau_update(sched, val);
    if (on_epoch) on_epoch(row);
  }
  net.params().restore(best);
  return result;
}

TrainResult train(FilterNet& net, const DatasetManifest& m, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  const auto tr = m.split("train");
  const auto va = m.split("val");
  if (tr.empty()) throw ContractError("manifest has no 'train' records");
  if (va.empty()) throw ContractError("manifest has no 'val' records");
  return train(net, load_pairs(m, tr), load_pairs(m, va), cfg, on_epoch);
}

std::string format_train_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,val_loss,lr\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.12g\n", r.epoch, r.train_loss, r.val_loss, r.lr);
    out += buf;
  }
  return out;
}

void write_train_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  const std::string s = format_train_log_csv(log);
  write_file_bytes(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

}  // namespace echoclutter
