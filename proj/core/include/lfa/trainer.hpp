#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lfa/classifier.hpp"
#include "lfa/init.hpp"
#include "lfa/types.hpp"

namespace lfa {

struct BagContainer;

/// Hyperparameters of the three-phase training procedure: initialization,
/// the core loop that jointly updates classifier, codebook and
/// log-precisions by SGD, and the classifier fine-tune with the encoder
/// frozen.
struct TrainingConfig {
  EncoderKind encoder = EncoderKind::T1;
  Eigen::Index k = 2;
  double gamma = 1.0;
  InitMode init_mode = InitMode::KMeans;

  double lr_w = 1e-2;
  double lr_c = 1e-2;
  double lr_sigma = 1e-3;

  Eigen::Index minibatch = 1;   // samples per core-loop step
  Eigen::Index epochs = 30;     // core-loop passes; one epoch = N steps
  Eigen::Index subsample = 1024;  // per-sample feature subsample cap N_SF

  bool use_chi2_map = true;  // applies to Bow/T1 only; T2 is signed
  FeatureMapConfig chi2;

  Eigen::Index init_epochs = 200;      // initial classifier fit budget
  Eigen::Index finetune_epochs = 200;  // fine-tune budget
  Eigen::Index pool_cap = 200000;      // clustering pool cap

  std::uint64_t seed = 0;

  void validate() const;

  /// The map is active only for simplex-valued encoders.
  bool map_active() const { return use_chi2_map && encoder != EncoderKind::T2; }
};

struct EpochMetrics {
  Eigen::Index epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> test_acc;
};

struct TrainedModel {
  AggregatorParams params;
  ClassifierParams classifier;
  TrainingConfig config;
  std::vector<EpochMetrics> history;
  std::uint32_t num_classes = 0;
  std::uint32_t feature_dim = 0;
};

/// Design matrix of (optionally chi2-mapped) bag representations, one row
/// per bag in input order.
Matrix encode_dataset(const std::vector<FeatureBag>& bags, const AggregatorParams& params,
                      const std::optional<FeatureMapConfig>& map);

/// Runs the full three-phase procedure. With epochs = 0 the model is the
/// initialization plus the initial classifier only. Throws DivergenceError
/// when the loss becomes non-finite or exceeds 10x its initial value.
TrainedModel train(const BagContainer& train_set, const BagContainer* test_set,
                   const TrainingConfig& config);

Vector class_posterior(const TrainedModel& model, const FeatureBag& bag);
std::uint32_t predict_label(const TrainedModel& model, const FeatureBag& bag);

/// Fraction of bags whose argmax posterior matches the label; ties break
/// toward the lowest class index.
double evaluate(const TrainedModel& model, const std::vector<FeatureBag>& bags);

}  // namespace lfa
