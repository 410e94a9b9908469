// Command-line front end: train / eval / predict / synth / aggregate.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or
// validation error. Commands never leave partial output files behind on
// error paths: every output is assembled in memory (or staged by the
// self-cleaning archive writer) before anything lands on disk.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "avmc/archive.hpp"
#include "avmc/checkpoint.hpp"
#include "avmc/config_json.hpp"
#include "avmc/metrics.hpp"
#include "avmc/training.hpp"

namespace {

using namespace avmc;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw FormatError("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string(what) + " '" + path + "' cannot be opened");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Modality> parse_tasks(const std::string& csv) {
  std::vector<Modality> tasks;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) tasks.push_back(modality_from_string(item));
  }
  if (tasks.empty()) throw ConfigError("--tasks must name at least one task");
  return tasks;
}

void apply_ablation(TrainConfig& tc, const std::vector<std::string>& ablations) {
  for (const std::string& a : ablations) {
    if (a == "mixup-a") {
      tc.ablation.disable_mixup_a = true;
    } else if (a == "mixup-v") {
      tc.ablation.disable_mixup_v = true;
    } else if (a == "mixup-av") {
      tc.ablation.disable_mixup_a = true;
      tc.ablation.disable_mixup_v = true;
    } else if (a == "unimodal-tasks") {
      tc.ablation.disable_unimodal_tasks = true;
    } else {
      throw ConfigError("unknown ablation '" + a +
                        "' (expected mixup-a, mixup-v, mixup-av, unimodal-tasks)");
    }
  }
}

std::string summary_line(const MetricsReport& r) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  auto opt = [&](const std::optional<double>& v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    if (v) {
      s << *v;
    } else {
      s << "n/a";
    }
    return s.str();
  };
  out << "task " << task_key(r.task) << " [" << r.label_source << " labels]: acc2 " << r.acc2
      << "  f1 " << r.f1 << "  acc2_weak " << opt(r.acc2_weak) << "  mae ";
  out.precision(4);
  out << r.mae;
  out.precision(2);
  out << "  corr " << opt(r.corr) << "  r_square " << opt(r.r_square) << "  (n=" << r.n_instances
      << ")";
  return out.str();
}

void check_spec_compatibility(const PerFeature<FeatureSpec>& ckpt,
                              const PerFeature<FeatureSpec>& archive) {
  for (Modality m : kFeatureModalities) {
    if (!(ckpt.at(m) == archive.at(m))) {
      throw ValidationError(std::string("checkpoint and archive disagree on the ") + to_string(m) +
                            " feature spec: checkpoint wants " + std::to_string(ckpt.at(m).seq_len) +
                            "x" + std::to_string(ckpt.at(m).feat_dim) + ", archive has " +
                            std::to_string(archive.at(m).seq_len) + "x" +
                            std::to_string(archive.at(m).feat_dim));
    }
  }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::string out_dir;
  bool semi = false;
  std::int64_t seed = -1;
  std::vector<std::string> ablations;
  std::vector<std::string> overrides;
};

int cmd_train(const TrainArgs& args) {
  nlohmann::json raw;
  try {
    raw = nlohmann::json::parse(read_text_file(args.config_path, "config"));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + args.config_path + "' is not valid JSON: " + std::string(e.what()));
  }
  for (const std::string& assignment : args.overrides) apply_override(raw, assignment);
  RunConfig run = run_config_from_json(raw);
  if (args.semi) run.train.mode = TrainMode::semi;
  if (args.seed >= 0) run.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out_dir.empty()) run.output_dir = args.out_dir;
  apply_ablation(run.train, args.ablations);
  run.train.validate();
  run.model.validate();
  if (run.archive.empty()) throw ConfigError("config: 'archive' is required");
  if (run.output_dir.empty()) throw ConfigError("config: 'output_dir' is required");

  const Dataset dataset = load_archive(run.archive);
  std::filesystem::create_directories(run.output_dir);

  std::cout << "training mode=" << to_string(run.train.mode) << " seed=" << run.seed << " on "
            << dataset.stats().n_supervised() << " supervised / "
            << dataset.stats().n_unsupervised() << " unsupervised instances" << std::endl;

  TrainState<float> state = fit(dataset, run.model, run.train, run.seed);

  const auto out = [&](const std::string& name) {
    return (std::filesystem::path(run.output_dir) / name).string();
  };
  save_checkpoint(state, run.model, run.train, out("checkpoint.zip"));

  std::ostringstream history;
  for (const auto& rec : state.history) history << rec.dump() << "\n";
  write_text_file(out("history.jsonl"), history.str());

  const MetricsReport valid_m = evaluate(state.model, dataset, Split::valid,
                                         {Modality::multimodal}, "multimodal",
                                         run.train.batch_size)[0];
  nlohmann::json report;
  report["split"] = "valid";
  report["label_source"] = "multimodal";
  report["reports"] = nlohmann::json::array({metrics_to_json(valid_m)});
  write_text_file(out("valid_report.json"), report.dump(2) + "\n");
  write_text_file(out("run_config.json"), to_json(run).dump(2) + "\n");

  std::cout << "trained " << state.epoch << " epochs (best epoch " << state.best_epoch
            << ", best valid mae " << state.best_valid_mae << ")" << std::endl;
  std::cout << summary_line(valid_m) << std::endl;
  std::cout << "outputs in " << run.output_dir << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// eval / predict
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string archive;
  std::string split = "test";
  std::string tasks = "m";
  std::string label_source = "multimodal";
  std::string out_path;
};

int cmd_eval(const EvalArgs& args) {
  LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);
  const Dataset dataset = load_archive(args.archive);
  check_spec_compatibility(ckpt.state.model.specs, dataset.specs());
  const Split split = split_from_string(args.split);
  const std::vector<Modality> tasks = parse_tasks(args.tasks);

  const auto reports = evaluate(ckpt.state.model, dataset, split, tasks, args.label_source);
  nlohmann::json out;
  out["split"] = args.split;
  out["label_source"] = args.label_source;
  out["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    out["reports"].push_back(metrics_to_json(r));
    std::cout << summary_line(r) << std::endl;
  }
  if (!args.out_path.empty()) write_text_file(args.out_path, out.dump(2) + "\n");
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::string archive;
  std::string split = "test";
  std::string task = "m";
  std::string label_source = "multimodal";
  std::string out_path;
};

int cmd_predict(const PredictArgs& args) {
  LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);
  const Dataset dataset = load_archive(args.archive);
  check_spec_compatibility(ckpt.state.model.specs, dataset.specs());
  const auto records = collect_predictions(ckpt.state.model, dataset, split_from_string(args.split),
                                           modality_from_string(args.task), args.label_source);
  if (records.empty()) throw ValidationError("split '" + args.split + "' is empty");
  write_text_file(args.out_path, predictions_to_csv(records));
  std::cout << "wrote " << records.size() << " predictions to " << args.out_path << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_path;
  int n_labeled = 0;
  int n_unlabeled = 0;
  std::int64_t seed = 0;
  std::vector<std::string> spec_overrides;
};

PerFeature<FeatureSpec> parse_spec_overrides(const std::vector<std::string>& overrides) {
  PerFeature<FeatureSpec> specs = default_synthetic_specs();
  for (const std::string& s : overrides) {
    const auto eq = s.find('=');
    const auto x = s.find('x', eq == std::string::npos ? 0 : eq);
    if (eq == std::string::npos || x == std::string::npos) {
      throw ConfigError("--spec expects modality=LENxDIM, got '" + s + "'");
    }
    const Modality m = modality_from_string(s.substr(0, eq));
    FeatureSpec spec{m, std::stoi(s.substr(eq + 1, x - eq - 1)), std::stoi(s.substr(x + 1))};
    spec.validate();
    specs.at(m) = spec;
  }
  return specs;
}

int cmd_synth(const SynthArgs& args) {
  if (args.n_labeled < 0 || args.n_unlabeled < 0) {
    throw ConfigError("instance counts must be nonnegative");
  }
  const auto specs = parse_spec_overrides(args.spec_overrides);
  const Dataset dataset = generate_synthetic(args.n_labeled, args.n_unlabeled, specs,
                                             static_cast<std::uint64_t>(args.seed));
  write_archive(dataset, args.out_path);
  const DatasetStats& st = dataset.stats();
  std::cout << "wrote " << dataset.instances().size() << " instances (train " << st.n_train
            << ", valid " << st.n_valid << ", test " << st.n_test << ", unlabeled "
            << st.n_unlabeled << ") to " << args.out_path << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

struct AggregateArgs {
  std::string in_path;
  std::string out_path;
};

int cmd_aggregate(const AggregateArgs& args) {
  std::istringstream in(read_text_file(args.in_path, "scores CSV"));
  std::ostringstream out;
  std::string line;
  int line_no = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, field;
    if (!std::getline(ls, id, ',') || id.empty()) {
      throw FormatError("row " + std::to_string(line_no) + ": missing id");
    }
    AnnotationRecord rec;
    for (int k = 0; k < 7; ++k) {
      if (!std::getline(ls, field, ',')) {
        throw FormatError("row " + std::to_string(line_no) + ": expected 7 scores");
      }
      try {
        std::size_t used = 0;
        rec.scores[static_cast<std::size_t>(k)] = std::stoi(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw FormatError("row " + std::to_string(line_no) + ": score '" + field +
                          "' is not an integer");
      }
    }
    if (std::getline(ls, field, ',')) {
      throw FormatError("row " + std::to_string(line_no) + ": expected exactly 7 scores");
    }
    float label = 0.0f;
    try {
      label = aggregate_annotations(rec);
    } catch (const ValidationError& e) {
      throw ValidationError("row " + std::to_string(line_no) + ": " + e.what());
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f", static_cast<double>(label));
    out << id << "," << buf << "\n";
    ++rows;
  }
  write_text_file(args.out_path, out.str());
  std::cout << "aggregated " << rows << " rows to " << args.out_path << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised multimodal sentiment regression with acoustic-visual "
               "representation mixup"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model from a JSON run config");
  train->add_option("--config", train_args.config_path, "Run config JSON path")->required();
  train->add_flag("--semi", train_args.semi, "Use the semi-supervised two-phase schedule");
  train->add_option("--seed", train_args.seed, "Override the run seed");
  train->add_option("--out", train_args.out_dir, "Override the output directory");
  train->add_option("--ablate", train_args.ablations,
                    "Disable parts of the method: mixup-a, mixup-v, mixup-av, unimodal-tasks");
  train->add_option("--set", train_args.overrides,
                    "Override a config value by dotted path, e.g. train.learning_rate=0.01");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint path")->required();
  eval->add_option("--archive", eval_args.archive, "Feature archive path")->required();
  eval->add_option("--split", eval_args.split, "Split name (train/valid/test)");
  eval->add_option("--tasks", eval_args.tasks, "Comma-separated tasks, e.g. m,t,a,v");
  eval->add_option("--label-source", eval_args.label_source, "multimodal or unimodal");
  eval->add_option("--out", eval_args.out_path, "Write the metrics report JSON here");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Emit per-instance predictions as CSV");
  predict->add_option("--checkpoint", predict_args.checkpoint, "Checkpoint path")->required();
  predict->add_option("--archive", predict_args.archive, "Feature archive path")->required();
  predict->add_option("--split", predict_args.split, "Split name");
  predict->add_option("--task", predict_args.task, "Task (m/t/a/v)");
  predict->add_option("--label-source", predict_args.label_source, "multimodal or unimodal");
  predict->add_option("--out", predict_args.out_path, "Output CSV path")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic feature archive");
  synth->add_option("--out", synth_args.out_path, "Output archive path")->required();
  synth->add_option("--n-labeled", synth_args.n_labeled, "Labeled instance count")->required();
  synth->add_option("--n-unlabeled", synth_args.n_unlabeled, "Unlabeled instance count");
  synth->add_option("--seed", synth_args.seed, "Generator seed");
  synth->add_option("--spec", synth_args.spec_overrides,
                    "Override a modality geometry, e.g. text=12x32 (repeatable)");

  AggregateArgs agg_args;
  auto* agg = app.add_subcommand("aggregate", "Aggregate 7-annotator score CSV rows into labels");
  agg->add_option("--in", agg_args.in_path, "Input CSV of id,s1,...,s7")->required();
  agg->add_option("--out", agg_args.out_path, "Output CSV of id,label")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*eval) return cmd_eval(eval_args);
    if (*predict) return cmd_predict(predict_args);
    if (*synth) return cmd_synth(synth_args);
    if (*agg) return cmd_aggregate(agg_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const avmc::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 1;
}
