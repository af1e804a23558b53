#include "lfa/trainer.hpp"

#include <cmath>
#include <set>

#include "lfa/data.hpp"
#include "lfa/encoder.hpp"
#include "lfa/gradients.hpp"
#include "lfa/rng.hpp"

namespace lfa {

void TrainingConfig::validate() const {
  if (k < 1) throw ContractError("config: k must be at least 1");
  if (!(gamma > 0.0)) throw ContractError("config: gamma must be positive");
  if (lr_w < 0.0 || lr_c < 0.0 || lr_sigma < 0.0) {
    throw ContractError("config: learning rates must be nonnegative");
  }
  if (minibatch < 1) throw ContractError("config: minibatch must be at least 1");
  if (epochs < 0) throw ContractError("config: negative epoch count");
  if (subsample < 1) throw ContractError("config: subsample size must be at least 1");
  if (init_epochs < 0 || finetune_epochs < 0) {
    throw ContractError("config: negative classifier epoch budget");
  }
  if (pool_cap < k) throw ContractError("config: pool cap smaller than k");
  if (chi2.order < 0) throw ContractError("config: negative feature map order");
  if (!(chi2.period > 0.0)) throw ContractError("config: feature map period must be positive");
  if (!(chi2.input_floor > 0.0)) throw ContractError("config: feature map floor must be positive");
}

Matrix encode_dataset(const std::vector<FeatureBag>& bags, const AggregatorParams& params,
                      const std::optional<FeatureMapConfig>& map) {
  if (bags.empty()) throw ContractError("encode_dataset: no bags");
  const Eigen::Index width =
      map.has_value() ? map->output_dim(params.output_dim()) : params.output_dim();
  Matrix design(static_cast<Eigen::Index>(bags.size()), width);
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const Vector rep = aggregate(bags[i], params);
    design.row(static_cast<Eigen::Index>(i)) =
        (map.has_value() ? chi2_map(rep, *map) : rep).transpose();
  }
  return design;
}

namespace {

std::vector<std::uint32_t> labels_of(const std::vector<FeatureBag>& bags) {
  std::vector<std::uint32_t> labels;
  labels.reserve(bags.size());
  for (const FeatureBag& bag : bags) labels.push_back(bag.label);
  return labels;
}

double accuracy_from_design(const Matrix& design, const std::vector<std::uint32_t>& labels,
                            const ClassifierParams& classifier) {
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    Eigen::Index best = 0;
    const Vector logits = classifier.weights * design.row(i).transpose() + classifier.biases;
    for (Eigen::Index m = 1; m < logits.size(); ++m) {
      if (logits(m) > logits(best)) best = m;  // ties keep the lowest index
    }
    if (static_cast<std::uint32_t>(best) == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(design.rows());
}

double mean_loss_from_design(const Matrix& design, const std::vector<std::uint32_t>& labels,
                             const ClassifierParams& classifier) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    total += softmax_ce(design.row(i).transpose(), labels[static_cast<std::size_t>(i)],
                        classifier);
  }
  return total / static_cast<double>(design.rows());
}

FeatureBag subsampled_bag(const FeatureBag& bag, Eigen::Index cap, Rng& rng) {
  if (bag.size() <= cap) return bag;
  SubsampleSpec spec;
  spec.sample_size = cap;
  spec.seed = rng.next_u64();
  spec.replacement = false;
  const std::vector<Eigen::Index> rows = subsample_indices(bag.size(), spec);
  FeatureBag sub;
  sub.id = bag.id;
  sub.label = bag.label;
  sub.descriptors.resize(static_cast<Eigen::Index>(rows.size()), bag.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sub.descriptors.row(static_cast<Eigen::Index>(i)) = bag.descriptors.row(rows[i]);
  }
  return sub;
}

EpochMetrics snapshot_metrics(Eigen::Index epoch, const std::vector<FeatureBag>& train_bags,
                              const std::vector<std::uint32_t>& train_labels,
                              const std::vector<FeatureBag>& test_bags,
                              const std::vector<std::uint32_t>& test_labels,
                              const AggregatorParams& params, const ClassifierParams& classifier,
                              const std::optional<FeatureMapConfig>& map) {
  EpochMetrics row;
  row.epoch = epoch;
  const Matrix train_design = encode_dataset(train_bags, params, map);
  row.train_loss = mean_loss_from_design(train_design, train_labels, classifier);
  row.train_acc = accuracy_from_design(train_design, train_labels, classifier);
  if (!test_bags.empty()) {
    const Matrix test_design = encode_dataset(test_bags, params, map);
    row.test_acc = accuracy_from_design(test_design, test_labels, classifier);
  }
  return row;
}

}  // namespace

TrainedModel train(const BagContainer& train_set, const BagContainer* test_set,
                   const TrainingConfig& config) {
  config.validate();
  train_set.validate();
  if (test_set != nullptr) {
    test_set->validate();
    if (test_set->dim != train_set.dim) {
      throw ContractError("train: test set dimension differs from train set");
    }
  }
  const std::vector<FeatureBag>& bags = train_set.bags;
  if (bags.empty()) throw ContractError("train: empty training set");
  {
    std::set<std::uint32_t> present;
    for (const FeatureBag& bag : bags) present.insert(bag.label);
    if (present.size() < 2) throw ContractError("train: need at least 2 classes present");
  }

  const std::optional<FeatureMapConfig> map =
      config.map_active() ? std::optional<FeatureMapConfig>(config.chi2) : std::nullopt;
  const std::vector<std::uint32_t> train_labels = labels_of(bags);
  const std::vector<FeatureBag> no_bags;
  const std::vector<FeatureBag>& test_bags = test_set ? test_set->bags : no_bags;
  const std::vector<std::uint32_t> test_labels =
      test_set ? labels_of(test_bags) : std::vector<std::uint32_t>{};
  const auto num_classes = static_cast<Eigen::Index>(train_set.num_classes);
  const Eigen::Index n = static_cast<Eigen::Index>(bags.size());

  // Phase 1: parameter initialization and the initial classifier fit.
  InitConfig init_cfg;
  init_cfg.mode = config.init_mode;
  init_cfg.kind = config.encoder;
  init_cfg.k = config.k;
  init_cfg.gamma = config.gamma;
  init_cfg.pool_cap = config.pool_cap;
  init_cfg.seed = derive_seed(config.seed, "init");
  AggregatorParams params = init_params(bags, init_cfg);

  FitOptions fit_opts;
  fit_opts.lr = config.lr_w;
  fit_opts.epochs = static_cast<int>(config.init_epochs);
  fit_opts.batch = static_cast<int>(config.minibatch);
  fit_opts.seed = derive_seed(config.seed, "classifier.init");
  Matrix design = encode_dataset(bags, params, map);
  ClassifierParams classifier = fit_classifier(design, train_labels, num_classes, fit_opts);

  TrainedModel model;
  model.config = config;
  model.num_classes = train_set.num_classes;
  model.feature_dim = train_set.dim;
  model.history.push_back(snapshot_metrics(0, bags, train_labels, test_bags, test_labels, params,
                                           classifier, map));
  const double initial_loss = model.history.front().train_loss;

  if (config.epochs == 0) {
    model.params = std::move(params);
    model.classifier = std::move(classifier);
    return model;
  }

  // Phase 2: core loop. Bow freezes the aggregator entirely.
  const double lr_c = config.encoder == EncoderKind::Bow ? 0.0 : config.lr_c;
  const double lr_sigma = config.encoder == EncoderKind::Bow ? 0.0 : config.lr_sigma;
  Rng sampler(derive_seed(config.seed, "trainer"));
  Rng subsampler(derive_seed(config.seed, "subsampler"));

  for (Eigen::Index epoch = 1; epoch <= config.epochs; ++epoch) {
    for (Eigen::Index step = 0; step < n; ++step) {
      Matrix d_w = Matrix::Zero(classifier.weights.rows(), classifier.weights.cols());
      Vector d_b = Vector::Zero(classifier.biases.size());
      ParamGradients d_params = ParamGradients::zero(params.codeword_count(), params.dim());

      for (Eigen::Index s = 0; s < config.minibatch; ++s) {
        const auto i = static_cast<std::size_t>(sampler.uniform_int(static_cast<std::uint64_t>(n)));
        const FeatureBag sample = subsampled_bag(bags[i], config.subsample, subsampler);
        const Vector rep = aggregate(sample, params);
        if (!rep.allFinite()) {
          throw DivergenceError(
              "train: non-finite representation in core loop (epoch " + std::to_string(epoch) +
              ", step " + std::to_string(step) + "); lr_w=" + std::to_string(config.lr_w) +
              " lr_c=" + std::to_string(lr_c) + " lr_sigma=" + std::to_string(lr_sigma));
        }
        const Vector mapped = map.has_value() ? chi2_map(rep, *map) : rep;
        const double loss = softmax_ce(mapped, sample.label, classifier);
        if (!std::isfinite(loss)) {
          throw DivergenceError(
              "train: non-finite loss in core loop (epoch " + std::to_string(epoch) + ", step " +
              std::to_string(step) + "); lr_w=" + std::to_string(config.lr_w) +
              " lr_c=" + std::to_string(lr_c) + " lr_sigma=" + std::to_string(lr_sigma));
        }
        const CeGradients ce = softmax_ce_backward(mapped, sample.label, classifier);
        const Vector d_rep =
            map.has_value() ? chi2_map_backward(rep, *map, ce.d_input) : ce.d_input;
        const ParamGradients g = backward_aggregate(sample, params, d_rep);
        d_w += ce.d_weights;
        d_b += ce.d_biases;
        d_params.d_codebook += g.d_codebook;
        d_params.d_log_precisions += g.d_log_precisions;
      }

      const double inv = 1.0 / static_cast<double>(config.minibatch);
      classifier.weights -= config.lr_w * inv * d_w;
      classifier.biases -= config.lr_w * inv * d_b;
      params.codebook.centers -= lr_c * inv * d_params.d_codebook;
      params.precisions.log_precisions -= lr_sigma * inv * d_params.d_log_precisions;
    }

    const EpochMetrics row = snapshot_metrics(epoch, bags, train_labels, test_bags, test_labels,
                                              params, classifier, map);
    if (!std::isfinite(row.train_loss) || row.train_loss > 10.0 * initial_loss) {
      throw DivergenceError(
          "train: loss diverged at epoch " + std::to_string(epoch) + " (" +
          std::to_string(row.train_loss) + " vs initial " + std::to_string(initial_loss) +
          "); lr_w=" + std::to_string(config.lr_w) + " lr_c=" + std::to_string(lr_c) +
          " lr_sigma=" + std::to_string(lr_sigma));
    }
    model.history.push_back(row);
  }

  // Phase 3: classifier fine-tune with the encoder frozen, warm-started
  // from the core-loop classifier.
  fit_opts.epochs = static_cast<int>(config.finetune_epochs);
  fit_opts.seed = derive_seed(config.seed, "classifier.finetune");
  design = encode_dataset(bags, params, map);
  classifier = fit_classifier_warm(std::move(classifier), design, train_labels, fit_opts);

  model.params = std::move(params);
  model.classifier = std::move(classifier);
  return model;
}

Vector class_posterior(const TrainedModel& model, const FeatureBag& bag) {
  if (bag.dim() != static_cast<Eigen::Index>(model.feature_dim)) {
    throw ContractError("predict: bag dimension does not match model");
  }
  const std::optional<FeatureMapConfig> map =
      model.config.map_active() ? std::optional<FeatureMapConfig>(model.config.chi2)
                                : std::nullopt;
  const Vector rep = aggregate(bag, model.params);
  const Vector mapped = map.has_value() ? chi2_map(rep, *map) : rep;
  return posterior(mapped, model.classifier);
}

std::uint32_t predict_label(const TrainedModel& model, const FeatureBag& bag) {
  const Vector p = class_posterior(model, bag);
  Eigen::Index best = 0;
  for (Eigen::Index m = 1; m < p.size(); ++m) {
    if (p(m) > p(best)) best = m;
  }
  return static_cast<std::uint32_t>(best);
}

double evaluate(const TrainedModel& model, const std::vector<FeatureBag>& bags) {
  if (bags.empty()) throw ContractError("evaluate: empty bag set");
  Eigen::Index correct = 0;
  for (const FeatureBag& bag : bags) {
    if (predict_label(model, bag) == bag.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(bags.size());
}

}  // namespace lfa
