#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lfa/trainer.hpp"
#include "lfa/types.hpp"

namespace lfa {

/// Ordered list of bags with the shared descriptor dimension and class count.
struct BagContainer {
  std::uint32_t num_classes = 0;
  std::uint32_t dim = 0;
  std::vector<FeatureBag> bags;

  void validate() const;  // labels < num_classes, shared dim, finite payload
};

enum class SyntheticKind { Concentric, Xor };

struct SyntheticConfig {
  SyntheticKind dataset = SyntheticKind::Concentric;
  Eigen::Index bags_per_class = 100;
  Eigen::Index features_per_bag = 50;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

/// Two-class 2-D dataset: class 0 bags sample the unit disc, class 1 bags
/// the annulus with radii [2, 3]; Gaussian noise of the configured scale is
/// added to both.
BagContainer gen_concentric(const SyntheticConfig& cfg);

/// Two-class 2-D dataset: class 0 features come from an equal mixture of
/// Gaussians at (0,0) and (1,1), class 1 from (0,1) and (1,0), isotropic
/// standard deviation = noise.
BagContainer gen_xor(const SyntheticConfig& cfg);

BagContainer gen_synthetic(const SyntheticConfig& cfg);

// Bag container file, little-endian:
//   magic "LFAB", version u32 = 1, M u32, D u32, bag count u32;
//   per bag: id length u16, id bytes, label u32, N_F u32,
//            N_F * D float32 values, row-major.
void write_bags(const BagContainer& container, const std::string& path);
BagContainer read_bags(const std::string& path);

/// CSV import: header row `bag_id,label,f1,...,fD` required; one feature per
/// row; rows with the same bag_id form one bag (grouped in order of first
/// appearance).
BagContainer read_bags_csv(const std::string& path);

/// Reads either format, choosing by the file's magic bytes.
BagContainer read_bags_any(const std::string& path);

/// Deterministic train/test split. Stratified keeps per-class proportions
/// within one bag; it requires at least 2 bags in every class.
std::pair<BagContainer, BagContainer> split(const BagContainer& container, double train_fraction,
                                            std::uint64_t seed, bool stratified);

// Model file: magic "LFAM", version u32 = 1, then a self-describing
// key-value section (u32 entry count; per entry: key length u16, key bytes,
// type tag u8, payload). Type tags: 1 = u64, 2 = f64, 3 = string
// (u32 length + bytes), 4 = f64 array (u64 count + values). All parameters
// are stored as double-precision bits, so a round-trip is lossless.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

/// Metrics CSV: header `epoch,train_loss,train_acc,test_acc`, one row per
/// epoch; test_acc stays empty when no test set was given.
std::string metrics_to_csv(const std::vector<EpochMetrics>& history);
void write_metrics_csv(const std::vector<EpochMetrics>& history, const std::string& path);
std::vector<EpochMetrics> read_metrics_csv(const std::string& path);

}  // namespace lfa
