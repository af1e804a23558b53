// lfa: train, evaluate and inspect learned local-feature aggregation models.
//
// Exit codes: 0 success, 1 usage error, 2 runtime/validation failure,
// 3 gradient check failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lfa/data.hpp"
#include "lfa/gradcheck.hpp"
#include "lfa/plot.hpp"
#include "lfa/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitGradcheck = 3;

// Post-parse validation failures that count as usage errors (exit 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw lfa::Error("cannot open file for writing: " + path);
  out << content;
  if (!out) throw lfa::Error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lfa::Error("cannot open file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

std::string csv_twin_path(const std::string& svg_path) {
  if (svg_path.size() >= 4 && svg_path.substr(svg_path.size() - 4) == ".svg") {
    return svg_path.substr(0, svg_path.size() - 4) + ".csv";
  }
  return svg_path + ".csv";
}

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string dataset;
  long long bags_per_class = 100;
  long long features_per_bag = 50;
  double noise = 0.1;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen_data(const GenDataArgs& args) {
  lfa::SyntheticConfig cfg;
  cfg.dataset = args.dataset == "concentric" ? lfa::SyntheticKind::Concentric
                                             : lfa::SyntheticKind::Xor;
  cfg.bags_per_class = args.bags_per_class;
  cfg.features_per_bag = args.features_per_bag;
  cfg.noise = args.noise;
  cfg.seed = args.seed;
  const lfa::BagContainer container = lfa::gen_synthetic(cfg);
  lfa::write_bags(container, args.out);
  std::printf("wrote %s: %zu bags, %u classes, D=%u, %lld features/bag -> %s\n",
              args.dataset.c_str(), container.bags.size(), container.num_classes, container.dim,
              args.features_per_bag, args.out.c_str());
  return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string train_path;
  std::string test_path;
  std::string encoder = "t1";
  long long k = 2;
  double gamma = 1.0;
  std::string init = "kmeans";
  long long epochs = 30;
  double lr_w = 1e-2;
  double lr_c = 1e-2;
  double lr_sigma = 1e-3;
  long long subsample = 1024;
  long long minibatch = 1;
  std::string chi2_map = "auto";
  long long init_epochs = 200;
  long long finetune_epochs = 200;
  std::uint64_t seed = 0;
  std::string model_out;
  std::string metrics_out;
};

lfa::TrainingConfig to_config(const TrainArgs& args) {
  lfa::TrainingConfig cfg;
  cfg.encoder = lfa::encoder_kind_from_string(args.encoder);
  cfg.k = args.k;
  cfg.gamma = args.gamma;
  cfg.init_mode = lfa::init_mode_from_string(args.init);
  cfg.lr_w = args.lr_w;
  cfg.lr_c = args.lr_c;
  cfg.lr_sigma = args.lr_sigma;
  cfg.minibatch = args.minibatch;
  cfg.epochs = args.epochs;
  cfg.subsample = args.subsample;
  cfg.init_epochs = args.init_epochs;
  cfg.finetune_epochs = args.finetune_epochs;
  cfg.seed = args.seed;
  if (args.chi2_map == "auto") {
    cfg.use_chi2_map = cfg.encoder != lfa::EncoderKind::T2;
  } else {
    cfg.use_chi2_map = args.chi2_map == "on";
    if (cfg.use_chi2_map && cfg.encoder == lfa::EncoderKind::T2) {
      throw UsageError("--chi2-map on: the chi2 map needs nonnegative input, "
                       "incompatible with --encoder t2");
    }
  }
  return cfg;
}

int run_train(const TrainArgs& args) {
  const lfa::TrainingConfig cfg = to_config(args);
  const lfa::BagContainer train_set = lfa::read_bags_any(args.train_path);
  std::optional<lfa::BagContainer> test_set;
  if (!args.test_path.empty()) test_set = lfa::read_bags_any(args.test_path);

  const lfa::TrainedModel model =
      lfa::train(train_set, test_set.has_value() ? &*test_set : nullptr, cfg);

  if (!args.model_out.empty()) lfa::save_model(model, args.model_out);
  if (!args.metrics_out.empty()) lfa::write_metrics_csv(model.history, args.metrics_out);

  const double train_acc = lfa::evaluate(model, train_set.bags);
  std::printf("train_acc=%.4f", train_acc);
  if (test_set.has_value()) {
    std::printf(" test_acc=%.4f", lfa::evaluate(model, test_set->bags));
  }
  std::printf("\n");
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

int run_eval(const std::string& model_path, const std::string& data_path) {
  const lfa::TrainedModel model = lfa::load_model(model_path);
  const lfa::BagContainer data = lfa::read_bags_any(data_path);
  std::printf("%.4f\n", lfa::evaluate(model, data.bags));
  return kExitOk;
}

// --- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
  std::string encoder = "t1";
  int trials = 100;
  std::uint64_t seed = 0;
  std::string chi2_map = "auto";
};

int run_gradcheck(const GradcheckArgs& args) {
  lfa::GradcheckOptions opts;
  opts.encoder = lfa::encoder_kind_from_string(args.encoder);
  opts.trials = args.trials;
  opts.seed = args.seed;
  if (args.chi2_map == "auto") {
    opts.use_chi2_map = opts.encoder != lfa::EncoderKind::T2;
  } else {
    opts.use_chi2_map = args.chi2_map == "on";
    if (opts.use_chi2_map && opts.encoder == lfa::EncoderKind::T2) {
      throw UsageError("--chi2-map on: the chi2 map needs nonnegative input, "
                       "incompatible with --encoder t2");
    }
  }
  if (std::getenv("LFA_GRADCHECK_PERTURB") != nullptr) opts.perturb = true;

  const lfa::GradcheckReport report = lfa::gradcheck(opts);
  std::printf("trials: %d\n", report.trials);
  std::printf("max rel err codebook:       %.3e\n", report.max_err_codebook);
  std::printf("max rel err log_precisions: %.3e\n", report.max_err_log_precisions);
  std::printf("max rel err weights:        %.3e\n", report.max_err_weights);
  if (opts.use_chi2_map) {
    std::printf("max rel err map input:      %.3e\n", report.max_err_map_input);
  }
  const bool ok = report.passed(opts.tolerance);
  std::printf("%s (tolerance %.1e)\n", ok ? "PASS" : "FAIL", opts.tolerance);
  return ok ? kExitOk : kExitGradcheck;
}

// --- export-plot -------------------------------------------------------------

struct ExportPlotArgs {
  std::string model_path;
  std::string data_path;
  std::string metrics_path;
  std::string out;
};

int run_export_plot(const ExportPlotArgs& args) {
  if (!args.metrics_path.empty()) {
    const std::string raw = read_text_file(args.metrics_path);
    const std::vector<lfa::EpochMetrics> history = lfa::read_metrics_csv(args.metrics_path);
    write_text_file(args.out, lfa::metrics_plot_svg(history));
    write_text_file(csv_twin_path(args.out), raw);  // twin is a row-for-row copy
    std::printf("wrote %s and %s\n", args.out.c_str(), csv_twin_path(args.out).c_str());
    return kExitOk;
  }
  const lfa::TrainedModel model = lfa::load_model(args.model_path);
  const lfa::BagContainer data = lfa::read_bags_any(args.data_path);
  if (data.dim != 2) {
    throw UsageError("codebook plots need 2-D data, got D=" + std::to_string(data.dim));
  }
  if (model.feature_dim != data.dim) {
    throw lfa::ContractError("model dimension does not match data");
  }
  write_text_file(args.out, lfa::scatter_plot_svg(data, model.params.codebook.centers));
  write_text_file(csv_twin_path(args.out),
                  lfa::scatter_plot_csv(data, model.params.codebook.centers));
  std::printf("wrote %s and %s\n", args.out.c_str(), csv_twin_path(args.out).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned local-feature aggregation: training, evaluation and plots"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic bag container");
  gen->add_option("--dataset", gen_args.dataset, "dataset family")
      ->required()
      ->check(CLI::IsMember({"concentric", "xor"}));
  gen->add_option("--bags-per-class", gen_args.bags_per_class, "bags per class")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen->add_option("--features-per-bag", gen_args.features_per_bag, "local features per bag")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen->add_option("--noise", gen_args.noise, "noise scale")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_args.seed, "rng seed")->capture_default_str();
  gen->add_option("--out", gen_args.out, "output container path")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train an aggregation model");
  train->add_option("--train", train_args.train_path, "training container (binary or csv)")
      ->required();
  train->add_option("--test", train_args.test_path, "test container for per-epoch accuracy");
  train->add_option("--encoder", train_args.encoder, "aggregation function")
      ->capture_default_str()
      ->check(CLI::IsMember({"bow", "t1", "t2"}));
  train->add_option("--k", train_args.k, "codebook size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--gamma", train_args.gamma, "kernel scale")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--init", train_args.init, "codebook/covariance initialization")
      ->capture_default_str()
      ->check(CLI::IsMember({"random", "kmeans", "gmm"}));
  train->add_option("--epochs", train_args.epochs, "core-loop epochs (N steps each)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train->add_option("--lr-w", train_args.lr_w, "classifier learning rate")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train->add_option("--lr-c", train_args.lr_c, "codebook learning rate")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train->add_option("--lr-sigma", train_args.lr_sigma, "log-precision learning rate")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train->add_option("--subsample", train_args.subsample,
                    "per-sample feature subsample cap N_SF")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--minibatch", train_args.minibatch, "samples per core-loop step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--chi2-map", train_args.chi2_map,
                    "chi2 feature map (auto = on for bow/t1, off for t2)")
      ->capture_default_str()
      ->check(CLI::IsMember({"on", "off", "auto"}));
  train->add_option("--init-epochs", train_args.init_epochs, "initial classifier fit budget")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train->add_option("--finetune-epochs", train_args.finetune_epochs,
                    "classifier fine-tune budget")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train->add_option("--seed", train_args.seed, "rng seed")->capture_default_str();
  train->add_option("--model-out", train_args.model_out, "output model path");
  train->add_option("--metrics-out", train_args.metrics_out, "output per-epoch metrics csv");

  std::string eval_model, eval_data;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a saved model on a container");
  eval->add_option("--model", eval_model, "model path")->required();
  eval->add_option("--data", eval_data, "container path")->required();

  GradcheckArgs grad_args;
  CLI::App* grad = app.add_subcommand("gradcheck",
                                      "verify analytic gradients against finite differences");
  grad->add_option("--encoder", grad_args.encoder, "encoder to check")
      ->capture_default_str()
      ->check(CLI::IsMember({"t1", "t2"}));
  grad->add_option("--trials", grad_args.trials, "random instances")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  grad->add_option("--seed", grad_args.seed, "rng seed")->capture_default_str();
  grad->add_option("--chi2-map", grad_args.chi2_map,
                   "chi2 feature map (auto = on for t1, off for t2)")
      ->capture_default_str()
      ->check(CLI::IsMember({"on", "off", "auto"}));

  ExportPlotArgs plot_args;
  CLI::App* plot = app.add_subcommand("export-plot", "emit an SVG plot plus its CSV twin");
  auto* plot_model = plot->add_option("--model", plot_args.model_path,
                                      "model path (codebook scatter mode)");
  auto* plot_data = plot->add_option("--data", plot_args.data_path,
                                     "2-D container path (codebook scatter mode)");
  auto* plot_metrics = plot->add_option("--metrics", plot_args.metrics_path,
                                        "metrics csv path (accuracy curve mode)");
  plot->add_option("--out", plot_args.out, "output .svg path")->required();
  plot_model->needs(plot_data);
  plot_data->needs(plot_model);
  plot_metrics->excludes(plot_model);
  plot_metrics->excludes(plot_data);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_model, eval_data);
    if (grad->parsed()) return run_gradcheck(grad_args);
    if (plot->parsed()) {
      if (plot_args.metrics_path.empty() && plot_args.model_path.empty()) {
        std::fprintf(stderr, "export-plot: pass either --metrics or --model with --data\n");
        return kExitUsage;
      }
      return run_export_plot(plot_args);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const lfa::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
