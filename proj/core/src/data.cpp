#include "lfa/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "binary_io.hpp"
#include "lfa/rng.hpp"

namespace lfa {

namespace {

constexpr char kBagMagic[4] = {'L', 'F', 'A', 'B'};
constexpr char kModelMagic[4] = {'L', 'F', 'A', 'M'};
constexpr std::uint32_t kBagVersion = 1;
constexpr std::uint32_t kModelVersion = 1;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open file for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

}  // namespace

void BagContainer::validate() const {
  if (num_classes < 1) throw ContractError("container: class count must be at least 1");
  for (const FeatureBag& bag : bags) {
    if (bag.size() < 1) throw ContractError("container: bag '" + bag.id + "' is empty");
    if (bag.dim() != static_cast<Eigen::Index>(dim)) {
      throw ContractError("container: bag '" + bag.id + "' dimension mismatch");
    }
    if (bag.label >= num_classes) {
      throw ContractError("container: bag '" + bag.id + "' label out of range");
    }
    if (!bag.descriptors.allFinite()) {
      throw ContractError("container: bag '" + bag.id + "' has non-finite descriptors");
    }
  }
}

namespace {

FeatureBag make_bag(std::string id, std::uint32_t label, const Matrix& points) {
  FeatureBag bag;
  bag.id = std::move(id);
  bag.label = label;
  bag.descriptors = points.cast<float>();
  return bag;
}

}  // namespace

BagContainer gen_concentric(const SyntheticConfig& cfg) {
  if (cfg.bags_per_class < 1 || cfg.features_per_bag < 1) {
    throw ContractError("gen_concentric: bag and feature counts must be positive");
  }
  if (cfg.noise < 0.0) throw ContractError("gen_concentric: negative noise scale");
  Rng rng(derive_seed(cfg.seed, "data.concentric"));
  BagContainer container;
  container.num_classes = 2;
  container.dim = 2;
  for (std::uint32_t label = 0; label < 2; ++label) {
    for (Eigen::Index b = 0; b < cfg.bags_per_class; ++b) {
      Matrix points(cfg.features_per_bag, 2);
      for (Eigen::Index i = 0; i < cfg.features_per_bag; ++i) {
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double radius;
        if (label == 0) {
          radius = std::sqrt(rng.uniform());  // uniform over the unit disc
        } else {
          radius = std::sqrt(rng.uniform(4.0, 9.0));  // uniform over the annulus [2, 3]
        }
        points(i, 0) = radius * std::cos(theta) + cfg.noise * rng.normal();
        points(i, 1) = radius * std::sin(theta) + cfg.noise * rng.normal();
      }
      container.bags.push_back(make_bag(
          "concentric-c" + std::to_string(label) + "-b" + std::to_string(b), label, points));
    }
  }
  return container;
}

BagContainer gen_xor(const SyntheticConfig& cfg) {
  if (cfg.bags_per_class < 1 || cfg.features_per_bag < 1) {
    throw ContractError("gen_xor: bag and feature counts must be positive");
  }
  if (cfg.noise < 0.0) throw ContractError("gen_xor: negative noise scale");
  Rng rng(derive_seed(cfg.seed, "data.xor"));
  // Class 0 corners on the main diagonal, class 1 on the anti-diagonal.
  const double corners[2][2][2] = {{{0.0, 0.0}, {1.0, 1.0}}, {{0.0, 1.0}, {1.0, 0.0}}};
  BagContainer container;
  container.num_classes = 2;
  container.dim = 2;
  for (std::uint32_t label = 0; label < 2; ++label) {
    for (Eigen::Index b = 0; b < cfg.bags_per_class; ++b) {
      Matrix points(cfg.features_per_bag, 2);
      for (Eigen::Index i = 0; i < cfg.features_per_bag; ++i) {
        const auto& corner = corners[label][rng.uniform_int(2)];
        points(i, 0) = corner[0] + cfg.noise * rng.normal();
        points(i, 1) = corner[1] + cfg.noise * rng.normal();
      }
      container.bags.push_back(
          make_bag("xor-c" + std::to_string(label) + "-b" + std::to_string(b), label, points));
    }
  }
  return container;
}

BagContainer gen_synthetic(const SyntheticConfig& cfg) {
  return cfg.dataset == SyntheticKind::Concentric ? gen_concentric(cfg) : gen_xor(cfg);
}

void write_bags(const BagContainer& container, const std::string& path) {
  container.validate();
  std::string out;
  out.append(kBagMagic, 4);
  detail::put_u32(out, kBagVersion);
  detail::put_u32(out, container.num_classes);
  detail::put_u32(out, container.dim);
  detail::put_u32(out, static_cast<std::uint32_t>(container.bags.size()));
  for (const FeatureBag& bag : container.bags) {
    if (bag.id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ContractError("write_bags: bag id longer than 65535 bytes");
    }
    detail::put_u16(out, static_cast<std::uint16_t>(bag.id.size()));
    out.append(bag.id);
    detail::put_u32(out, bag.label);
    detail::put_u32(out, static_cast<std::uint32_t>(bag.size()));
    for (Eigen::Index r = 0; r < bag.size(); ++r) {
      for (Eigen::Index c = 0; c < bag.dim(); ++c) {
        detail::put_f32(out, bag.descriptors(r, c));
      }
    }
  }
  write_file(path, out);
}

BagContainer read_bags(const std::string& path) {
  const std::string bytes = read_file(path);
  detail::Reader reader(bytes, "bag container");
  if (reader.get_bytes(4) != std::string(kBagMagic, 4)) {
    throw FormatError(FormatError::Kind::BadMagic, "bag container: magic mismatch");
  }
  const std::uint32_t version = reader.get_u32();
  if (version != kBagVersion) {
    throw FormatError(FormatError::Kind::BadVersion,
                      "bag container: unsupported version " + std::to_string(version));
  }
  BagContainer container;
  container.num_classes = reader.get_u32();
  container.dim = reader.get_u32();
  const std::uint32_t bag_count = reader.get_u32();
  if (container.num_classes < 1 || container.dim < 1) {
    throw FormatError(FormatError::Kind::Malformed, "bag container: zero class count or dimension");
  }
  container.bags.reserve(bag_count);
  for (std::uint32_t b = 0; b < bag_count; ++b) {
    FeatureBag bag;
    const std::uint16_t id_len = reader.get_u16();
    bag.id = reader.get_bytes(id_len);
    bag.label = reader.get_u32();
    if (bag.label >= container.num_classes) {
      throw FormatError(FormatError::Kind::LabelOutOfRange,
                        "bag container: bag '" + bag.id + "' label " +
                            std::to_string(bag.label) + " >= class count " +
                            std::to_string(container.num_classes));
    }
    const std::uint32_t rows = reader.get_u32();
    if (rows < 1) {
      throw FormatError(FormatError::Kind::Malformed, "bag container: empty bag '" + bag.id + "'");
    }
    bag.descriptors.resize(rows, container.dim);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < container.dim; ++c) {
        const float v = reader.get_f32();
        if (!std::isfinite(v)) {
          throw FormatError(FormatError::Kind::NonFinitePayload,
                            "bag container: non-finite value in bag '" + bag.id + "'");
        }
        bag.descriptors(r, c) = v;
      }
    }
    container.bags.push_back(std::move(bag));
  }
  if (!reader.at_end()) {
    throw FormatError(FormatError::Kind::Malformed, "bag container: trailing bytes");
  }
  return container;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_double(const std::string& text, const std::string& what) {
  double value = 0.0;
  const auto* begin = text.data();
  const auto* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(FormatError::Kind::Malformed, what + ": bad number '" + text + "'");
  }
  return value;
}

}  // namespace

BagContainer read_bags_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(FormatError::Kind::Truncated, "bag csv: missing header row");
  }
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "bag_id" || header[1] != "label") {
    throw FormatError(FormatError::Kind::Malformed,
                      "bag csv: header must be bag_id,label,f1,...,fD");
  }
  const std::size_t dim = header.size() - 2;

  std::vector<std::string> order;
  std::map<std::string, std::uint32_t> labels;
  std::map<std::string, std::vector<std::vector<float>>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    const std::string where = "bag csv line " + std::to_string(line_no);
    if (fields.size() != header.size()) {
      throw FormatError(FormatError::Kind::Malformed, where + ": wrong field count");
    }
    const std::string& id = fields[0];
    const double label_val = parse_double(fields[1], where);
    if (label_val < 0 || label_val != std::floor(label_val)) {
      throw FormatError(FormatError::Kind::Malformed, where + ": bad label");
    }
    const auto label = static_cast<std::uint32_t>(label_val);
    std::vector<float> feature(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double v = parse_double(fields[2 + i], where);
      if (!std::isfinite(v)) {
        throw FormatError(FormatError::Kind::NonFinitePayload, where + ": non-finite value");
      }
      feature[i] = static_cast<float>(v);
    }
    auto [it, inserted] = labels.emplace(id, label);
    if (inserted) {
      order.push_back(id);
    } else if (it->second != label) {
      throw FormatError(FormatError::Kind::Malformed,
                        where + ": bag '" + id + "' has inconsistent labels");
    }
    rows[id].push_back(std::move(feature));
  }
  if (order.empty()) {
    throw FormatError(FormatError::Kind::Malformed, "bag csv: no data rows");
  }

  BagContainer container;
  container.dim = static_cast<std::uint32_t>(dim);
  std::uint32_t max_label = 0;
  for (const std::string& id : order) max_label = std::max(max_label, labels[id]);
  container.num_classes = max_label + 1;
  for (const std::string& id : order) {
    FeatureBag bag;
    bag.id = id;
    bag.label = labels[id];
    const auto& feats = rows[id];
    bag.descriptors.resize(static_cast<Eigen::Index>(feats.size()),
                           static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < feats.size(); ++r) {
      for (std::size_t c = 0; c < dim; ++c) {
        bag.descriptors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = feats[r][c];
      }
    }
    container.bags.push_back(std::move(bag));
  }
  return container;
}

BagContainer read_bags_any(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error("cannot open file: " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  if (std::memcmp(magic, kBagMagic, 4) == 0) return read_bags(path);
  return read_bags_csv(path);
}

std::pair<BagContainer, BagContainer> split(const BagContainer& container, double train_fraction,
                                            std::uint64_t seed, bool stratified) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ContractError("split: train fraction must lie in (0, 1)");
  }
  container.validate();
  Rng rng(derive_seed(seed, "data.split"));

  std::vector<bool> in_train(container.bags.size(), false);
  if (stratified) {
    std::vector<std::vector<std::size_t>> by_class(container.num_classes);
    for (std::size_t i = 0; i < container.bags.size(); ++i) {
      by_class[container.bags[i].label].push_back(i);
    }
    for (std::uint32_t c = 0; c < container.num_classes; ++c) {
      auto& members = by_class[c];
      if (members.size() < 2) {
        throw ContractError("split: class " + std::to_string(c) +
                            " has fewer than 2 bags, cannot stratify");
      }
      rng.shuffle(members);
      const auto n_train = static_cast<std::size_t>(
          std::llround(train_fraction * static_cast<double>(members.size())));
      const std::size_t clamped = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
      for (std::size_t i = 0; i < clamped; ++i) in_train[members[i]] = true;
    }
  } else {
    std::vector<std::size_t> order(container.bags.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(order.size())));
    const std::size_t clamped = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
    for (std::size_t i = 0; i < clamped; ++i) in_train[order[i]] = true;
  }

  BagContainer train_set{container.num_classes, container.dim, {}};
  BagContainer test_set{container.num_classes, container.dim, {}};
  for (std::size_t i = 0; i < container.bags.size(); ++i) {
    (in_train[i] ? train_set : test_set).bags.push_back(container.bags[i]);
  }
  return {std::move(train_set), std::move(test_set)};
}

// --- model serialization ---------------------------------------------------

namespace {

enum class Tag : std::uint8_t { U64 = 1, F64 = 2, Str = 3, F64Array = 4 };

void put_key(std::string& out, std::string_view key, Tag tag) {
  detail::put_u16(out, static_cast<std::uint16_t>(key.size()));
  out.append(key);
  out.push_back(static_cast<char>(tag));
}

void put_u64_entry(std::string& out, std::string_view key, std::uint64_t v) {
  put_key(out, key, Tag::U64);
  detail::put_u64(out, v);
}

void put_f64_entry(std::string& out, std::string_view key, double v) {
  put_key(out, key, Tag::F64);
  detail::put_f64(out, v);
}

void put_str_entry(std::string& out, std::string_view key, std::string_view v) {
  put_key(out, key, Tag::Str);
  detail::put_u32(out, static_cast<std::uint32_t>(v.size()));
  out.append(v);
}

void put_array_entry(std::string& out, std::string_view key, const double* data, std::size_t n) {
  put_key(out, key, Tag::F64Array);
  detail::put_u64(out, n);
  for (std::size_t i = 0; i < n; ++i) detail::put_f64(out, data[i]);
}

struct KvValue {
  Tag tag;
  std::uint64_t u64 = 0;
  double f64 = 0.0;
  std::string str;
  std::vector<double> array;
};

class KvSection {
 public:
  explicit KvSection(detail::Reader& reader) {
    const std::uint32_t count = reader.get_u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint16_t key_len = reader.get_u16();
      std::string key = reader.get_bytes(key_len);
      KvValue value;
      const auto tag = static_cast<Tag>(reader.get_bytes(1)[0]);
      value.tag = tag;
      switch (tag) {
        case Tag::U64: value.u64 = reader.get_u64(); break;
        case Tag::F64: value.f64 = reader.get_f64(); break;
        case Tag::Str: {
          const std::uint32_t len = reader.get_u32();
          value.str = reader.get_bytes(len);
          break;
        }
        case Tag::F64Array: {
          const std::uint64_t n = reader.get_u64();
          value.array.resize(n);
          for (std::uint64_t j = 0; j < n; ++j) value.array[j] = reader.get_f64();
          break;
        }
        default:
          throw FormatError(FormatError::Kind::Malformed, "model: unknown value tag");
      }
      entries_.emplace(std::move(key), std::move(value));
    }
  }

  const KvValue& get(const std::string& key, Tag tag) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw FormatError(FormatError::Kind::Malformed, "model: missing key '" + key + "'");
    }
    if (it->second.tag != tag) {
      throw FormatError(FormatError::Kind::Malformed, "model: wrong type for key '" + key + "'");
    }
    return it->second;
  }

  std::uint64_t get_u64(const std::string& key) const { return get(key, Tag::U64).u64; }
  double get_f64(const std::string& key) const { return get(key, Tag::F64).f64; }
  const std::string& get_str(const std::string& key) const { return get(key, Tag::Str).str; }
  const std::vector<double>& get_array(const std::string& key) const {
    return get(key, Tag::F64Array).array;
  }

 private:
  std::map<std::string, KvValue> entries_;
};

Matrix matrix_from_array(const std::vector<double>& values, Eigen::Index rows,
                         Eigen::Index cols, const std::string& key) {
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw FormatError(FormatError::Kind::Malformed, "model: array '" + key + "' has wrong size");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
    }
  }
  return m;
}

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
  std::string body;
  std::uint32_t entry_count = 0;
  auto u64 = [&](std::string_view key, std::uint64_t v) { put_u64_entry(body, key, v); ++entry_count; };
  auto f64 = [&](std::string_view key, double v) { put_f64_entry(body, key, v); ++entry_count; };
  auto str = [&](std::string_view key, std::string_view v) { put_str_entry(body, key, v); ++entry_count; };
  auto arr = [&](std::string_view key, const double* data, std::size_t n) {
    put_array_entry(body, key, data, n);
    ++entry_count;
  };

  const TrainingConfig& cfg = model.config;
  str("encoder", to_string(model.params.kind));
  u64("k", static_cast<std::uint64_t>(model.params.codeword_count()));
  u64("d", model.feature_dim);
  u64("m", model.num_classes);
  f64("gamma", model.params.gamma);
  u64("use_chi2_map", cfg.use_chi2_map ? 1 : 0);
  u64("chi2.order", static_cast<std::uint64_t>(cfg.chi2.order));
  f64("chi2.period", cfg.chi2.period);
  f64("chi2.floor", cfg.chi2.input_floor);
  str("init_mode", to_string(cfg.init_mode));
  f64("lr_w", cfg.lr_w);
  f64("lr_c", cfg.lr_c);
  f64("lr_sigma", cfg.lr_sigma);
  u64("minibatch", static_cast<std::uint64_t>(cfg.minibatch));
  u64("epochs", static_cast<std::uint64_t>(cfg.epochs));
  u64("subsample", static_cast<std::uint64_t>(cfg.subsample));
  u64("init_epochs", static_cast<std::uint64_t>(cfg.init_epochs));
  u64("finetune_epochs", static_cast<std::uint64_t>(cfg.finetune_epochs));
  u64("pool_cap", static_cast<std::uint64_t>(cfg.pool_cap));
  u64("seed", cfg.seed);

  arr("codebook", model.params.codebook.centers.data(),
      static_cast<std::size_t>(model.params.codebook.centers.size()));
  arr("log_precisions", model.params.precisions.log_precisions.data(),
      static_cast<std::size_t>(model.params.precisions.log_precisions.size()));
  arr("weights", model.classifier.weights.data(),
      static_cast<std::size_t>(model.classifier.weights.size()));
  arr("biases", model.classifier.biases.data(),
      static_cast<std::size_t>(model.classifier.biases.size()));

  std::vector<double> loss, train_acc, test_acc;
  for (const EpochMetrics& row : model.history) {
    loss.push_back(row.train_loss);
    train_acc.push_back(row.train_acc);
    test_acc.push_back(row.test_acc.value_or(kMissing));
  }
  arr("metrics.train_loss", loss.data(), loss.size());
  arr("metrics.train_acc", train_acc.data(), train_acc.size());
  arr("metrics.test_acc", test_acc.data(), test_acc.size());

  std::string out;
  out.append(kModelMagic, 4);
  detail::put_u32(out, kModelVersion);
  detail::put_u32(out, entry_count);
  out.append(body);
  write_file(path, out);
}

TrainedModel load_model(const std::string& path) {
  const std::string bytes = read_file(path);
  detail::Reader reader(bytes, "model");
  if (reader.get_bytes(4) != std::string(kModelMagic, 4)) {
    throw FormatError(FormatError::Kind::BadMagic, "model: magic mismatch");
  }
  const std::uint32_t version = reader.get_u32();
  if (version != kModelVersion) {
    throw FormatError(FormatError::Kind::BadVersion,
                      "model: unsupported version " + std::to_string(version));
  }
  const KvSection kv(reader);
  if (!reader.at_end()) {
    throw FormatError(FormatError::Kind::Malformed, "model: trailing bytes");
  }

  TrainedModel model;
  TrainingConfig& cfg = model.config;
  model.params.kind = encoder_kind_from_string(kv.get_str("encoder"));
  const auto k = static_cast<Eigen::Index>(kv.get_u64("k"));
  model.feature_dim = static_cast<std::uint32_t>(kv.get_u64("d"));
  model.num_classes = static_cast<std::uint32_t>(kv.get_u64("m"));
  const auto d = static_cast<Eigen::Index>(model.feature_dim);
  model.params.gamma = kv.get_f64("gamma");
  cfg.encoder = model.params.kind;
  cfg.k = k;
  cfg.gamma = model.params.gamma;
  cfg.use_chi2_map = kv.get_u64("use_chi2_map") != 0;
  cfg.chi2.order = static_cast<int>(kv.get_u64("chi2.order"));
  cfg.chi2.period = kv.get_f64("chi2.period");
  cfg.chi2.input_floor = kv.get_f64("chi2.floor");
  cfg.init_mode = init_mode_from_string(kv.get_str("init_mode"));
  cfg.lr_w = kv.get_f64("lr_w");
  cfg.lr_c = kv.get_f64("lr_c");
  cfg.lr_sigma = kv.get_f64("lr_sigma");
  cfg.minibatch = static_cast<Eigen::Index>(kv.get_u64("minibatch"));
  cfg.epochs = static_cast<Eigen::Index>(kv.get_u64("epochs"));
  cfg.subsample = static_cast<Eigen::Index>(kv.get_u64("subsample"));
  cfg.init_epochs = static_cast<Eigen::Index>(kv.get_u64("init_epochs"));
  cfg.finetune_epochs = static_cast<Eigen::Index>(kv.get_u64("finetune_epochs"));
  cfg.pool_cap = static_cast<Eigen::Index>(kv.get_u64("pool_cap"));
  cfg.seed = kv.get_u64("seed");

  model.params.codebook.centers = matrix_from_array(kv.get_array("codebook"), k, d, "codebook");
  model.params.precisions.log_precisions =
      matrix_from_array(kv.get_array("log_precisions"), k, d, "log_precisions");
  const auto m = static_cast<Eigen::Index>(model.num_classes);
  const auto& weights = kv.get_array("weights");
  if (m < 1 || weights.size() % static_cast<std::size_t>(m) != 0) {
    throw FormatError(FormatError::Kind::Malformed, "model: weight array size mismatch");
  }
  const auto input_dim = static_cast<Eigen::Index>(weights.size() / static_cast<std::size_t>(m));
  model.classifier.weights = matrix_from_array(weights, m, input_dim, "weights");
  const auto& biases = kv.get_array("biases");
  if (static_cast<Eigen::Index>(biases.size()) != m) {
    throw FormatError(FormatError::Kind::Malformed, "model: bias array size mismatch");
  }
  model.classifier.biases = Eigen::Map<const Vector>(biases.data(), m);

  const auto& loss = kv.get_array("metrics.train_loss");
  const auto& train_acc = kv.get_array("metrics.train_acc");
  const auto& test_acc = kv.get_array("metrics.test_acc");
  if (loss.size() != train_acc.size() || loss.size() != test_acc.size()) {
    throw FormatError(FormatError::Kind::Malformed, "model: metric array size mismatch");
  }
  for (std::size_t i = 0; i < loss.size(); ++i) {
    EpochMetrics row;
    row.epoch = static_cast<Eigen::Index>(i);
    row.train_loss = loss[i];
    row.train_acc = train_acc[i];
    if (!std::isnan(test_acc[i])) row.test_acc = test_acc[i];
    model.history.push_back(row);
  }

  model.params.validate();
  return model;
}

// --- metrics CSV -------------------------------------------------------------

std::string metrics_to_csv(const std::vector<EpochMetrics>& history) {
  std::string out = "epoch,train_loss,train_acc,test_acc\n";
  char buf[128];
  for (const EpochMetrics& row : history) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,", static_cast<long long>(row.epoch),
                  row.train_loss, row.train_acc);
    out += buf;
    if (row.test_acc.has_value()) {
      std::snprintf(buf, sizeof(buf), "%.9g", *row.test_acc);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_metrics_csv(const std::vector<EpochMetrics>& history, const std::string& path) {
  write_file(path, metrics_to_csv(history));
}

std::vector<EpochMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(FormatError::Kind::Truncated, "metrics csv: missing header");
  }
  if (split_csv_line(line) != std::vector<std::string>{"epoch", "train_loss", "train_acc",
                                                       "test_acc"}) {
    throw FormatError(FormatError::Kind::Malformed, "metrics csv: unexpected header");
  }
  std::vector<EpochMetrics> history;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    const std::string where = "metrics csv line " + std::to_string(line_no);
    if (fields.size() != 4) {
      throw FormatError(FormatError::Kind::Malformed, where + ": wrong field count");
    }
    EpochMetrics row;
    row.epoch = static_cast<Eigen::Index>(parse_double(fields[0], where));
    row.train_loss = parse_double(fields[1], where);
    row.train_acc = parse_double(fields[2], where);
    if (!fields[3].empty()) row.test_acc = parse_double(fields[3], where);
    history.push_back(row);
  }
  return history;
}

}  // namespace lfa
