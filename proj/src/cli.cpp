#include "tcct/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "tcct/bench.hpp"
#include "tcct/checkpoint.hpp"
#include "tcct/config.hpp"
#include "tcct/errors.hpp"
#include "tcct/trainer.hpp"

namespace tcct::cli {

namespace {

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * fraction);
  return buf;
}

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

data::Dataset load_split(const std::filesystem::path& root, const std::filesystem::path& manifest,
                         const std::vector<std::string>& features, data::Split split,
                         const data::LoadOptions& load, std::ostream& err) {
  if (!std::filesystem::exists(manifest)) throw DataError("manifest not found: " + manifest.string());
  std::vector<std::string> warnings;
  auto ds = data::load_dataset(root, manifest, features, split, load, &warnings);
  print_warnings(warnings, err);
  if (ds.empty()) {
    throw DataError("no " + std::string(data::split_name(split)) + " samples in " + manifest.string());
  }
  return ds;
}

void print_confusion(const train::EvalResult& r, std::ostream& out) {
  out << "confusion (rows true, columns predicted)\n";
  out << std::setw(16) << "";
  for (std::size_t j = 0; j < kNumClasses; ++j) out << std::setw(16) << data::label_name(static_cast<int>(j));
  out << "\n";
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    out << std::setw(16) << data::label_name(static_cast<int>(i));
    for (std::size_t j = 0; j < kNumClasses; ++j) out << std::setw(16) << r.confusion[i][j];
    out << "\n";
  }
}

struct AblationFlags {
  bool ct_only = false, tc_only = false, no_attention = false;

  void add_to(CLI::App* cmd) {
    cmd->add_flag("--ct-only", ct_only, "Use only the temporal-spatial stream");
    cmd->add_flag("--tc-only", tc_only, "Use only the temporal-frequency stream");
    cmd->add_flag("--no-attention", no_attention, "Skip the attention blocks");
  }
  model::Ablation get() const {
    model::Ablation a;
    a.ct_only = ct_only;
    a.tc_only = tc_only;
    a.no_attention = no_attention;
    if (ct_only && tc_only) throw ConfigError("--ct-only and --tc-only are exclusive");
    return a;
  }
};

// Dataset selection shared by eval and bench.
struct DataFlags {
  std::string manifest;
  std::string root;
  std::string split = "val";
  std::string features;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--manifest", manifest, "Manifest CSV (sample_id,path,label,split)")->required();
    cmd->add_option("--root", root, "Directory sample paths are relative to (default: manifest dir)");
    cmd->add_option("--split", split, "train, val or test")->capture_default_str();
    cmd->add_option("--features", features, "Comma-separated feature columns (default: checkpoint's)");
  }

  data::Dataset load(const LoadedCheckpoint& ckpt, std::ostream& err) const {
    const std::filesystem::path m(manifest);
    const std::filesystem::path r = root.empty() ? m.parent_path() : std::filesystem::path(root);
    const auto names = features.empty() ? ckpt.config.features : split_list(features);
    const auto part = data::parse_split(split);
    data::LoadOptions opts = ckpt.config.load;
    auto ds = load_split(r, m, names, part, opts, err);
    if (ds.feature_count() != ckpt.config.features.size()) {
      throw FeatureMismatchError("checkpoint was trained on " +
                                 std::to_string(ckpt.config.features.size()) + " features, data has " +
                                 std::to_string(ds.feature_count()));
    }
    if (ckpt.stats) ds = data::standardize(ds, ckpt.stats).first;
    return ds;
  }
};

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets, std::ostream& out,
              std::ostream& err) {
  const RunConfig config = load_run_config(config_path, parse_overrides(sets));
  auto train_set = load_split(config.data_root, config.manifest, config.features, data::Split::Train,
                              config.load, err);
  auto val_set = load_split(config.data_root, config.manifest, config.features, data::Split::Val,
                            config.load, err);
  std::optional<data::FeatureStats> stats;
  if (config.standardize) {
    auto [train_std, s] = data::standardize(train_set);
    train_set = std::move(train_std);
    val_set = data::standardize(val_set, s).first;
    stats = std::move(s);
  }

  model::TcctModel model(config.model, config.train.seed);
  if (!config.metrics.parent_path().empty()) std::filesystem::create_directories(config.metrics.parent_path());
  if (!config.checkpoint.parent_path().empty()) {
    std::filesystem::create_directories(config.checkpoint.parent_path());
  }
  std::ofstream metrics(config.metrics, std::ios::trunc);
  if (!metrics) throw DataError("cannot write metrics file " + config.metrics.string());
  metrics << train::kMetricsHeader << "\n";

  train::TrainCallbacks callbacks;
  callbacks.on_epoch = [&](const train::EpochMetrics& m) {
    metrics << train::metrics_csv_row(m) << "\n" << std::flush;
    out << "epoch " << m.epoch << "  loss " << std::setprecision(4) << m.train_loss << "  train "
        << percent(m.train_acc) << "  val " << percent(m.val_acc) << "\n";
  };
  callbacks.on_improvement = [&](model::TcctModel& m, const train::EpochMetrics&) {
    save_checkpoint(config.checkpoint, config, m, stats);
  };
  callbacks.on_warning = [&](const std::string& w) { err << "warning: " << w << "\n"; };

  const auto report = train::train(train_set, val_set, model, config.train, config.augment, config.loss,
                                   callbacks);
  save_checkpoint(config.checkpoint, config, model, stats);
  out << "best epoch " << report.best_epoch << ", validation accuracy " << percent(report.best_val_acc)
      << (report.stopped_early ? " (stopped early)" : "") << "\n";
  out << "checkpoint " << config.checkpoint.string() << "\n";
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const DataFlags& data_flags, const AblationFlags& flags,
             std::ostream& out, std::ostream& err) {
  const auto ablation = flags.get();
  const auto ckpt = load_checkpoint(checkpoint);
  const auto ds = data_flags.load(ckpt, err);
  const auto r = train::evaluate(ds, *ckpt.model, ablation);
  out << "samples " << r.total << "\n";
  out << "accuracy " << percent(r.accuracy) << "\n";
  print_confusion(r, out);
  return kOk;
}

int cmd_infer(const std::string& checkpoint, const std::string& sample, const AblationFlags& flags,
              std::ostream& out) {
  const auto ablation = flags.get();
  const auto ckpt = load_checkpoint(checkpoint);
  auto matrix = data::normalize_length(data::read_sample_csv(sample, ckpt.config.features),
                                       ckpt.config.load.target_length);
  if (ckpt.stats) data::apply_standardization(matrix, *ckpt.stats);
  const auto fused = ckpt.model->infer(std::span(&matrix, 1), ablation);
  const int label = model::predict(fused.probs).front();
  out << "prediction " << data::label_name(label) << "\n";
  const auto p = fused.probs.values();
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", p[k]);
    out << data::label_name(static_cast<int>(k)) << " " << buf << "\n";
  }
  return kOk;
}

int cmd_bench(const std::string& checkpoint, const DataFlags& data_flags, const AblationFlags& flags,
              const bench::BenchOptions& options, const std::string& csv, std::ostream& out,
              std::ostream& err) {
  const auto ablation = flags.get();
  options.validate();
  const auto ckpt = load_checkpoint(checkpoint);
  const auto ds = data_flags.load(ckpt, err);
  const auto report = bench::run_bench(*ckpt.model, ds, ablation, options);
  out << bench::format_report(report);
  if (!csv.empty()) {
    std::ofstream f(csv, std::ios::trunc);
    if (!f) throw DataError("cannot write " + csv);
    f << bench::kBenchHeader << "\n" << bench::bench_csv_row(report) << "\n";
  }
  return kOk;
}

struct ScalogramFlags {
  std::string sample, output, features;
  std::size_t scales = 32;
  double f_min = 0.1, f_max = 15.0, sampling_rate = 30.0, bandwidth = 1.0, center = 1.0;
  bool normalize = false;
  std::size_t length = kSignalLength;
};

int cmd_scalogram(const ScalogramFlags& f, std::ostream& out) {
  wavelet::MorletParams morlet{f.bandwidth, f.center};
  try {
    morlet.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto names = split_list(f.features);
  if (names.empty()) throw ConfigError("--features must name at least one feature");
  wavelet::ScaleGrid grid;
  try {
    grid = wavelet::ScaleGrid::from_frequency_band(f.f_min, f.f_max, f.scales, f.sampling_rate, morlet);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto matrix = data::read_sample_csv(f.sample, names);
  if (f.normalize) matrix = data::normalize_length(matrix, f.length);
  if (matrix.length < 2) throw DataError("sample " + f.sample + " needs at least two frames");
  const auto s = wavelet::scalogram(matrix, grid, morlet);

  std::ofstream csv(f.output, std::ios::trunc);
  if (!csv) throw DataError("cannot write " + f.output);
  csv << "feature,scale";
  for (std::size_t t = 0; t < s.length; ++t) csv << "," << t;
  csv << "\n";
  char buf[40];
  for (std::size_t fi = 0; fi < s.features; ++fi) {
    for (std::size_t k = 0; k < s.scales; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", grid.scales[k]);
      csv << names[fi] << "," << buf;
      for (std::size_t t = 0; t < s.length; ++t) {
        std::snprintf(buf, sizeof(buf), "%.17g", s(fi, k, t));
        csv << "," << buf;
      }
      csv << "\n";
    }
  }
  if (!csv) throw DataError("failed writing " + f.output);
  out << "wrote " << s.features * s.scales << " rows (" << s.features << " features x " << s.scales
      << " scales) to " << f.output << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stream engagement classifier: train, evaluate, infer, benchmark"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  std::string config_path, checkpoint, sample, csv;
  std::vector<std::string> sets;
  AblationFlags ablation;
  DataFlags data_flags;
  bench::BenchOptions bench_opts;
  ScalogramFlags sflags;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint + metrics CSV");
  train_cmd->add_option("--config", config_path, "Config file of section.key = value lines")->required();
  train_cmd->add_option("--set", sets, "Override a config entry, key=value (repeatable)");

  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and confusion matrix on a split");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  data_flags.add_to(eval_cmd);
  ablation.add_to(eval_cmd);

  auto* infer_cmd = app.add_subcommand("infer", "Classify one sample CSV");
  infer_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  infer_cmd->add_option("--sample", sample, "Sample CSV")->required();
  ablation.add_to(infer_cmd);

  auto* bench_cmd = app.add_subcommand("bench", "Inference latency and throughput");
  bench_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  data_flags.add_to(bench_cmd);
  ablation.add_to(bench_cmd);
  bench_cmd->add_option("--warmup", bench_opts.warmup, "Untimed warmup runs")->capture_default_str();
  bench_cmd->add_option("--iters", bench_opts.iters, "Timed single-sample runs")->capture_default_str();
  bench_cmd->add_option("--batch", bench_opts.batch_size, "Batch size for the whole-split pass")
      ->capture_default_str();
  bench_cmd->add_option("--threads", bench_opts.threads, "Parallel workers for the whole-split pass")
      ->capture_default_str();
  bench_cmd->add_flag("--train-epoch", bench_opts.train_epoch, "Also time one training epoch");
  bench_cmd->add_option("--csv", csv, "Write the report as CSV");

  auto* scal_cmd = app.add_subcommand("scalogram", "Export CWT magnitudes of a sample as CSV");
  scal_cmd->add_option("--sample", sflags.sample, "Sample CSV")->required();
  scal_cmd->add_option("--features", sflags.features, "Comma-separated feature columns")->required();
  scal_cmd->add_option("--output", sflags.output, "Output CSV")->required();
  scal_cmd->add_option("--scales", sflags.scales, "Number of scales")->capture_default_str();
  scal_cmd->add_option("--f-min", sflags.f_min, "Lowest frequency, Hz")->capture_default_str();
  scal_cmd->add_option("--f-max", sflags.f_max, "Highest frequency, Hz")->capture_default_str();
  scal_cmd->add_option("--fs", sflags.sampling_rate, "Sampling rate, Hz")->capture_default_str();
  scal_cmd->add_option("--bandwidth", sflags.bandwidth, "Morlet bandwidth B")->capture_default_str();
  scal_cmd->add_option("--center", sflags.center, "Morlet center frequency C")->capture_default_str();
  scal_cmd->add_flag("--normalize", sflags.normalize, "Trim or tile the sample to --length first");
  scal_cmd->add_option("--length", sflags.length, "Target length for --normalize")->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (*train_cmd) return cmd_train(config_path, sets, out, err);
    if (*eval_cmd) return cmd_eval(checkpoint, data_flags, ablation, out, err);
    if (*infer_cmd) return cmd_infer(checkpoint, sample, ablation, out);
    if (*bench_cmd) return cmd_bench(checkpoint, data_flags, ablation, bench_opts, csv, out, err);
    if (*scal_cmd) return cmd_scalogram(sflags, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const FeatureMismatchError& e) {
    err << "feature mismatch: " << e.what() << "\n";
    return kShapeError;
  } catch (const ShapeError& e) {
    err << "shape mismatch: " << e.what() << "\n";
    return kShapeError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace tcct::cli
