/*
 * Copyright 2026 The SPDrought Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line driver: gen, train, eval, interpret, assess, ablate.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "spdrought/assess.hpp"
#include "spdrought/byte_io.hpp"
#include "spdrought/error.hpp"
#include "spdrought/gridcube.hpp"
#include "spdrought/interpret.hpp"
#include "spdrought/pipeline.hpp"
#include "spdrought/trainer.hpp"

#ifndef SPDROUGHT_VERSION
#define SPDROUGHT_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace spdrought;

namespace {

// Raised for problems a user fixes by changing the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool skipped_option(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() || names[0] == "help" || names[0] == "config";
}

// Fills options absent from the command line with key=value lines of a
// config file; '#' starts a comment and unknown keys are usage errors.
void apply_config_file(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (skipped_option(opt) || opt->count() > 0) continue;  // the command line wins
    opt->add_result(value);
    opt->run_callback();
  }
}

// Options in the "Required" group may come from the command line or the
// config file, so CLI11's own required() check would fire too early.
void check_required(const CLI::App* sub) {
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_group() == "Required" && opt->count() == 0) throw UsageError(opt->get_name() + " is required");
  }
}

std::string option_value(const CLI::Option* opt) {
  if (opt->count() == 0) return opt->get_default_str();
  std::string out;
  for (const auto& r : opt->results()) out += (out.empty() ? "" : ",") + r;
  return out;
}

// key=value lines for every option of `sub` after resolution, readable back
// through --config.
void write_manifest(const std::string& path, const std::string& command, const CLI::App* sub) {
  std::ostringstream os;
  os << "# spdrought run manifest\n# command=" << command << "\n# version=" << SPDROUGHT_VERSION << "\n";
  for (const CLI::Option* opt : sub->get_options()) {
    if (skipped_option(opt)) continue;
    os << opt->get_lnames()[0] << '=' << option_value(opt) << '\n';
  }
  write_text_file(path, os.str());
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SPD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

int parse_index(const std::string& name) {
  for (int k = 0; k < kIndexCount; ++k) {
    if (kIndexNames[k] == name) return k;
  }
  throw UsageError("unknown index '" + name + "' (expected sm, esi or sif)");
}

struct TrainFlags {
  TrainConfig cfg;
  std::string variant = "full";
  std::string precision = "float32";
};

void add_train_options(CLI::App* sub, TrainFlags& f) {
  auto& c = f.cfg;
  sub->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch-size", c.batch_size, "Pixels per batch")->capture_default_str();
  sub->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  sub->add_option("--context", c.context, "Context weeks")->capture_default_str();
  sub->add_option("--horizon", c.horizon, "Forecast weeks")->capture_default_str();
  sub->add_option("--stride", c.stride, "Window stride in weeks")->capture_default_str();
  sub->add_option("--block", c.block, "Spatial split block size")->capture_default_str();
  sub->add_option("--train-frac", c.train_frac, "Fraction of blocks used for training")->capture_default_str();
  sub->add_option("--seed", c.seed, "Root seed")->capture_default_str();
  sub->add_option("--variant", f.variant,
                  "full, no_static, no_fusion, no_encoder, no_decoder, context_50, single_task, temporal_split")
      ->capture_default_str();
  sub->add_option("--task", c.task, "Target index for single_task (0 sm, 1 esi, 2 sif)")->capture_default_str();
  sub->add_option("--radius", c.radius, "Fusion neighbourhood radius")->capture_default_str();
  sub->add_option("--model-dim", c.model_dim, "Model width")->capture_default_str();
  sub->add_option("--ff-dim", c.ff_dim, "Feed-forward width")->capture_default_str();
  sub->add_option("--heads", c.heads, "Attention heads")->capture_default_str();
  sub->add_option("--encoder-layers", c.encoder_layers, "Encoder layers")->capture_default_str();
  sub->add_option("--decoder-layers", c.decoder_layers, "Decoder layers")->capture_default_str();
  sub->add_option("--dropout", c.dropout, "Input-projection dropout rate")->capture_default_str();
  sub->add_option("--precision", f.precision, "Training arithmetic: float32 or float64")->capture_default_str();
}

TrainConfig resolve_train(const TrainFlags& f, int threads) {
  TrainConfig cfg = f.cfg;
  try {
    cfg.variant = parse_variant(f.variant);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (f.precision == "float32") {
    cfg.precision = Precision::kFloat32;
  } else if (f.precision == "float64") {
    cfg.precision = Precision::kFloat64;
  } else {
    throw UsageError("precision must be float32 or float64");
  }
  cfg.threads = threads;
  cfg = cfg.resolved();
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string default_dir_of(const std::string& file) {
  const fs::path p = fs::path(file).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

EvalReport baseline_report(const PreparedData& data, const SampleSet& samples, int threads, bool climatology) {
  const int wpy = data.spec.weeks_per_year;
  return evaluate_forecasts(
      data, samples,
      [&](std::span<const std::size_t> px, const Window& w) {
        std::vector<Eigen::MatrixXd> out;
        for (const auto p : px) {
          const Eigen::MatrixXd ctx = center_context(data, p, w).leftCols(kIndexCount);
          out.push_back(climatology ? climatology_forecast(ctx, w.context_start, w.horizon_len, wpy)
                                    : persistence_forecast(ctx, w.horizon_len));
        }
        return out;
      },
      threads);
}

EvalReport dlinear_report(const PreparedData& data, const TrainConfig& cfg, const SampleSet& samples, int threads) {
  DLinear model(cfg.context, cfg.horizon, kIndexCount);
  train_dlinear(model, data, cfg);
  return evaluate_forecasts(
      data, samples,
      [&](std::span<const std::size_t> px, const Window& w) {
        std::vector<Eigen::MatrixXd> out;
        for (const auto p : px) out.push_back(model.forecast(center_context(data, p, w).leftCols(kIndexCount)));
        return out;
      },
      threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal multi-task drought-index forecasting"};
  app.set_version_flag("--version", SPDROUGHT_VERSION);
  app.require_subcommand(1);

  std::map<CLI::App*, std::string> configs;
  auto add_common = [&](CLI::App* sub, int& threads) {
    sub->add_option("--config", configs[sub], "key=value file; command-line flags take precedence");
    sub->add_option("--threads", threads, "Worker threads (0: SPD_THREADS or 1)")->capture_default_str();
  };

  // gen
  SynthConfig synth;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  int gen_threads = 0;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--rows", synth.rows, "Grid rows")->capture_default_str();
  gen->add_option("--cols", synth.cols, "Grid columns")->capture_default_str();
  gen->add_option("--years", synth.years, "Years of weekly data")->capture_default_str();
  gen->add_option("--weeks-per-year", synth.weeks_per_year, "Weeks per year")->capture_default_str();
  gen->add_option("--ocean-fraction", synth.ocean_fraction, "Fraction of ocean pixels")->capture_default_str();
  gen->add_option("--events", synth.drought_events, "Planted drought events")->capture_default_str();
  gen->add_option("--nan-fraction", synth.nan_fraction, "Missing-value rate on land")->capture_default_str();
  gen->add_option("--categories", synth.categories, "Land-cover categories")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output DSG1 file")->group("Required");
  add_common(gen, gen_threads);

  // train
  TrainFlags train_flags;
  std::string train_data, train_out;
  int train_threads = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", train_data, "Input DSG1 file")->group("Required");
  train_cmd->add_option("--out", train_out, "Output directory")->group("Required");
  add_train_options(train_cmd, train_flags);
  add_common(train_cmd, train_threads);

  // eval
  std::string eval_data, eval_ckpt, eval_out;
  bool eval_baselines = false;
  int eval_threads = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on its test split");
  eval_cmd->add_option("--data", eval_data, "Input DSG1 file")->group("Required");
  eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint (SPCK)")->group("Required");
  eval_cmd->add_option("--out", eval_out, "Output directory (default: the checkpoint's directory)");
  eval_cmd->add_flag("--baselines", eval_baselines, "Also score persistence, climatology and DLinear");
  add_common(eval_cmd, eval_threads);

  // interpret
  std::string ig_data, ig_ckpt, ig_out, ig_index = "sm";
  int ig_week = -1, ig_lag = 1, ig_steps = 128, ig_threads = 0;
  auto* ig_cmd = app.add_subcommand("interpret", "Integrated-gradient lag attribution maps");
  ig_cmd->add_option("--data", ig_data, "Input DSG1 file")->group("Required");
  ig_cmd->add_option("--ckpt", ig_ckpt, "Checkpoint (SPCK)")->group("Required");
  ig_cmd->add_option("--out", ig_out, "Output directory")->group("Required");
  ig_cmd->add_option("--index", ig_index, "Target index: sm, esi or sif")->capture_default_str();
  ig_cmd->add_option("--week", ig_week, "First horizon week of the window (-1: last window)")->capture_default_str();
  ig_cmd->add_option("--lag", ig_lag, "Weeks before the target week")->capture_default_str();
  ig_cmd->add_option("--steps", ig_steps, "Integration steps")->capture_default_str();
  add_common(ig_cmd, ig_threads);

  // assess
  std::string as_data, as_ckpt, as_out;
  double as_percentile = kDroughtPercentile;
  int as_week = -1, as_threads = 0;
  auto* as_cmd = app.add_subcommand("assess", "Percentile drought assessment of soil-moisture forecasts");
  as_cmd->add_option("--data", as_data, "Input DSG1 file")->group("Required");
  as_cmd->add_option("--ckpt", as_ckpt, "Checkpoint (SPCK)")->group("Required");
  as_cmd->add_option("--out", as_out, "Output directory")->group("Required");
  as_cmd->add_option("--percentile", as_percentile, "Drought percentile")->capture_default_str();
  as_cmd->add_option("--week", as_week, "Week of the exported masks (-1: first week of the last window)")
      ->capture_default_str();
  add_common(as_cmd, as_threads);

  // ablate
  TrainFlags ab_flags;
  std::string ab_data, ab_out, ab_variants = "full,no_static,no_fusion,no_encoder,no_decoder", ab_seeds = "1,2,3";
  bool ab_importance = false;
  int ab_threads = 0;
  auto* ab_cmd = app.add_subcommand("ablate", "Train variants over seeds, or rank predictors by removal");
  ab_cmd->add_option("--data", ab_data, "Input DSG1 file")->group("Required");
  ab_cmd->add_option("--out", ab_out, "Output directory")->group("Required");
  ab_cmd->add_option("--variants", ab_variants, "Comma-separated variants (single_task:k for one task)")
      ->capture_default_str();
  ab_cmd->add_option("--seeds", ab_seeds, "Comma-separated seeds")->capture_default_str();
  ab_cmd->add_flag("--importance", ab_importance, "Rank dynamic predictors by first-epoch loss change instead");
  add_train_options(ab_cmd, ab_flags);
  add_common(ab_cmd, ab_threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (!configs[sub].empty()) apply_config_file(sub, configs[sub]);
    check_required(sub);

    if (sub == gen) {
      synth.validate();
      write_manifest(gen_out + ".manifest.txt", command, sub);
      const Dataset ds = generate_synthetic(synth, gen_seed);
      save_dataset(gen_out, ds);
      std::printf("wrote %s: %dx%d grid, %d weeks, %zu land pixels\n", gen_out.c_str(), ds.spec.rows, ds.spec.cols,
                  ds.spec.weeks, ds.spec.land_count());
    } else if (sub == train_cmd) {
      const TrainConfig cfg = resolve_train(train_flags, resolve_threads(train_threads));
      fs::create_directories(train_out);
      write_manifest(join_path(train_out, "manifest.txt"), command, sub);
      const Dataset ds = load_dataset(train_data);
      const PreparedData data = prepare_data(ds, cfg.radius);
      if (cfg.variant != Variant::kTemporalSplit) {
        write_text_file(join_path(train_out, "split.txt"),
                        block_split(data.spec, cfg.block, cfg.train_frac, cfg.seed).to_text());
      }
      write_text_file(join_path(train_out, "max_table.txt"), data.table.to_text());
      const TrainResult result = train(data, cfg);
      save_checkpoint(join_path(train_out, "model.spck"), result.checkpoint);
      write_text_file(join_path(train_out, "loss_trace.tsv"), result.loss_trace_text());
      std::printf("trained %s for %d epochs, final loss %.6f\n", std::string(variant_name(cfg.variant)).c_str(),
                  cfg.epochs, result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back());
    } else if (sub == eval_cmd) {
      const int threads = resolve_threads(eval_threads);
      const std::string out = eval_out.empty() ? default_dir_of(eval_ckpt) : eval_out;
      fs::create_directories(out);
      write_manifest(join_path(out, "manifest_eval.txt"), command, sub);
      const Checkpoint ckpt = load_checkpoint(eval_ckpt);
      const TrainConfig cfg = read_config(ckpt);
      const PreparedData data = prepare_data(load_dataset(eval_data), cfg.radius);
      const SampleSet test = test_samples(data, cfg);
      std::string text = evaluate(ckpt, data, test, threads).to_text(variant_name(cfg.variant));
      if (eval_baselines) {
        text += baseline_report(data, test, threads, false).to_text("persistence");
        if (cfg.context >= data.spec.weeks_per_year) {
          text += baseline_report(data, test, threads, true).to_text("climatology");
        } else {
          std::fprintf(stderr, "note: climatology baseline skipped, context is shorter than one year\n");
        }
        text += dlinear_report(data, cfg, test, threads).to_text("dlinear");
      }
      write_text_file(join_path(out, "eval_report.tsv"), text);
      std::fputs(text.c_str(), stdout);
    } else if (sub == ig_cmd) {
      const int threads = resolve_threads(ig_threads);
      const int index = parse_index(ig_index);
      fs::create_directories(ig_out);
      write_manifest(join_path(ig_out, "manifest_interpret.txt"), command, sub);
      const Checkpoint ckpt = load_checkpoint(ig_ckpt);
      const TrainConfig cfg = read_config(ckpt);
      const PreparedData data = prepare_data(load_dataset(ig_data), cfg.radius);
      const int week = ig_week >= 0 ? ig_week : data.spec.weeks - cfg.horizon;
      const LagAttribution la = lag_attribution_grid(ckpt, data, index, week, ig_lag, ig_steps, threads);
      export_lag_attribution(la, ig_out);
      std::ostringstream os;
      os << "predictor\tmean_attribution\tpixels\n";
      for (std::size_t v = 0; v < la.rasters.size(); ++v) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const double x : la.rasters[v].values) {
          if (std::isfinite(x)) {
            sum += x;
            ++n;
          }
        }
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s\t%.9g\t%zu\n", la.names[v].c_str(), n ? sum / n : 0.0, n);
        os << buf;
      }
      write_text_file(join_path(ig_out, "attribution_summary.tsv"), os.str());
      std::fputs(os.str().c_str(), stdout);
    } else if (sub == as_cmd) {
      const int threads = resolve_threads(as_threads);
      fs::create_directories(as_out);
      write_manifest(join_path(as_out, "manifest_assess.txt"), command, sub);
      const Checkpoint ckpt = load_checkpoint(as_ckpt);
      const TrainConfig cfg = read_config(ckpt);
      const Dataset raw = load_dataset(as_data);
      const PreparedData data = prepare_data(raw, cfg.radius);
      const Assessment a = assess_soil_moisture(ckpt, raw, data, as_percentile, threads);
      write_text_file(join_path(as_out, "assess_report.tsv"), a.report.to_text());
      write_text_file(join_path(as_out, "slots.csv"), a.slots_csv(data.spec));
      const SampleSet test = test_samples(data, cfg);
      const int week = as_week >= 0 ? as_week : test.windows.back().horizon_start();
      export_drought_mask(a.predicted_mask(data.spec, week),
                          join_path(as_out, "predicted_week" + std::to_string(week)));
      export_drought_mask(a.observed_mask(data.spec, week), join_path(as_out, "observed_week" + std::to_string(week)));
      std::fputs(a.report.to_text().c_str(), stdout);
    } else if (sub == ab_cmd) {
      const TrainConfig base = resolve_train(ab_flags, resolve_threads(ab_threads));
      fs::create_directories(ab_out);
      write_manifest(join_path(ab_out, "manifest_ablate.txt"), command, sub);
      const PreparedData data = prepare_data(load_dataset(ab_data), base.radius);
      if (ab_importance) {
        const FeatureImportance fi = feature_importance_by_ablation(data, base);
        write_text_file(join_path(ab_out, "importance.tsv"), fi.to_text());
        std::fputs(fi.to_text().c_str(), stdout);
        return 0;
      }
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(ab_seeds)) seeds.push_back(std::stoull(s));
      std::ostringstream os;
      os << "variant\tseed\tsm\tesi\tsif\ttotal\n";
      std::string summary;
      for (const auto& token : split_list(ab_variants)) {
        TrainConfig cfg = base;
        const auto colon = token.find(':');
        cfg.variant = parse_variant(token.substr(0, colon));
        if (colon != std::string::npos) cfg.task = std::stoi(token.substr(colon + 1));
        cfg.context = cfg.variant == Variant::kContext50 ? 50 : base.context;
        std::vector<EvalReport> runs;
        for (const auto seed : seeds) {
          cfg.seed = seed;
          const TrainResult r = train(data, cfg);
          runs.push_back(evaluate(r.checkpoint, data, cfg.threads));
          const auto& e = runs.back();
          char buf[192];
          std::snprintf(buf, sizeof(buf), "%s\t%llu\t%.4f\t%.4f\t%.4f\t%.4f\n", token.c_str(),
                        static_cast<unsigned long long>(seed), e.mae[0] * 1e3, e.mae[1] * 1e3, e.mae[2] * 1e3,
                        e.total * 1e3);
          os << buf;
          std::fputs(buf, stdout);
        }
        summary += aggregate_runs(runs).to_text(token);
      }
      write_text_file(join_path(ab_out, "ablation.tsv"), os.str() + summary);
      std::fputs(summary.c_str(), stdout);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\nRun with --help for more information.\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
