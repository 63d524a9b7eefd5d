// bsca — 4-class brain-slice classifier pipeline.
//
// Subcommands: train, evaluate, predict, gen-phantom, inspect-model.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "bsca/checkpoint.hpp"
#include "bsca/dataset.hpp"
#include "bsca/parallel.hpp"
#include "bsca/phantom.hpp"
#include "bsca/preprocess.hpp"
#include "bsca/select.hpp"
#include "bsca/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct RunSpec {
  bsca::TrainConfig train;
  int threads = 0;  // 0 = auto
  bool strip_optimizer = false;
};

void apply_config_file(RunSpec& spec, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw bsca::DataError("cannot open config file: " + path);
  json cfg;
  try {
    cfg = json::parse(is);
  } catch (const json::exception& e) {
    throw bsca::DataError(path + ": invalid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw bsca::DataError(path + ": config must be a JSON object");

  for (const auto& [key, value] : cfg.items()) {
    if (key == "lr") {
      spec.train.lr = value.get<double>();
    } else if (key == "batch_size") {
      spec.train.batch_size = value.get<int>();
    } else if (key == "epochs") {
      spec.train.epochs = value.get<int>();
    } else if (key == "folds") {
      spec.train.folds = value.get<int>();
    } else if (key == "seed") {
      spec.train.seed = value.get<std::uint64_t>();
    } else if (key == "image_size") {
      spec.train.image_size = value.get<int>();
    } else if (key == "threads") {
      spec.threads = value.get<int>();
    } else if (key == "manifest") {
      spec.train.manifest_path = value.get<std::string>();
    } else if (key == "out_dir") {
      spec.train.out_dir = value.get<std::string>();
    } else if (key == "strip_optimizer") {
      spec.strip_optimizer = value.get<bool>();
    } else if (key == "adam") {
      if (!value.is_object()) throw bsca::DataError(path + ": \"adam\" must be an object");
      for (const auto& [akey, avalue] : value.items()) {
        if (akey == "beta1") {
          spec.train.adam.beta1 = avalue.get<double>();
        } else if (akey == "beta2") {
          spec.train.adam.beta2 = avalue.get<double>();
        } else if (akey == "epsilon") {
          spec.train.adam.epsilon = avalue.get<double>();
        } else {
          throw bsca::DataError(path + ": unknown config key \"adam." + akey + "\"");
        }
      }
    } else {
      throw bsca::DataError(path + ": unknown config key \"" + key + "\"");
    }
  }
}

json config_json(const RunSpec& spec) {
  return json{{"lr", spec.train.lr},
              {"batch_size", spec.train.batch_size},
              {"epochs", spec.train.epochs},
              {"folds", spec.train.folds},
              {"seed", spec.train.seed},
              {"image_size", spec.train.image_size},
              {"threads", spec.threads},
              {"manifest", spec.train.manifest_path},
              {"out_dir", spec.train.out_dir},
              {"strip_optimizer", spec.strip_optimizer},
              {"adam", json{{"beta1", spec.train.adam.beta1},
                            {"beta2", spec.train.adam.beta2},
                            {"epsilon", spec.train.adam.epsilon}}}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw bsca::DataError("cannot open for writing: " + path.string());
  os << text;
  os.flush();
  if (!os) throw bsca::DataError("failed writing " + path.string());
}

void write_resolved_config(const fs::path& out_dir, const json& effective) {
  fs::create_directories(out_dir);
  write_text(out_dir / "resolved-config.json", effective.dump(2) + "\n");
}

void resolve_threads(int flag_value) {
  int threads = flag_value;
  if (threads <= 0) {
    if (const char* env = std::getenv("BSCA_THREADS")) {
      threads = std::atoi(env);
    }
  }
  if (threads > 0) bsca::set_max_threads(threads);
}

std::string manifest_base_dir(const std::string& manifest_path) {
  const fs::path parent = fs::path(manifest_path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

json metrics_json(const bsca::MetricsRecord& r) {
  return json{{"accuracy", r.accuracy}, {"loss", r.loss},       {"precision", r.precision},
              {"recall", r.recall},     {"f1", r.f1},           {"epoch", r.epoch}};
}

int run_train(const RunSpec& spec) {
  if (spec.train.manifest_path.empty()) throw bsca::DataError("train: --manifest is required");
  if (spec.train.out_dir.empty()) throw bsca::DataError("train: --out is required");
  const fs::path out_dir = spec.train.out_dir;
  json effective = config_json(spec);
  effective["subcommand"] = "train";
  write_resolved_config(out_dir, effective);

  const bsca::Manifest manifest = bsca::load_manifest(spec.train.manifest_path);
  const bsca::Dataset ds =
      bsca::load_dataset(manifest, manifest_base_dir(spec.train.manifest_path),
                         spec.train.image_size);
  std::cerr << "loaded " << ds.samples.size() << " slices at " << spec.train.image_size << "x"
            << spec.train.image_size << "\n";

  const bsca::TrainOutput result = bsca::train(spec.train, ds);
  write_text(out_dir / "metrics.csv", result.metrics_csv);

  int best = 0;
  for (std::size_t f = 0; f < result.folds.size(); ++f) {
    const auto& fr = result.folds[f];
    bsca::save_weights(fr.network, (out_dir / ("fold-" + std::to_string(fr.fold) + ".ckpt")).string(),
                       spec.train.image_size, !spec.strip_optimizer);
    if (fr.final_val.accuracy >
        result.folds[static_cast<std::size_t>(best)].final_val.accuracy) {
      best = static_cast<int>(f);
    }
  }
  bsca::save_weights(result.folds[static_cast<std::size_t>(best)].network,
                     (out_dir / "best.ckpt").string(), spec.train.image_size,
                     !spec.strip_optimizer);
  std::cerr << "wrote " << (out_dir / "metrics.csv").string() << " and "
            << result.folds.size() << " fold checkpoint(s); best fold " << best << "\n";
  return kExitOk;
}

int run_evaluate(const RunSpec& spec, const std::string& checkpoint_path) {
  if (spec.train.manifest_path.empty()) throw bsca::DataError("evaluate: --manifest is required");
  bsca::LoadedCheckpoint ckpt = bsca::load_weights(checkpoint_path);
  const int image_size = spec.train.image_size > 0 ? spec.train.image_size : ckpt.image_size;

  const fs::path out_dir = spec.train.out_dir.empty() ? fs::path(".") : fs::path(spec.train.out_dir);
  json effective = config_json(spec);
  effective["subcommand"] = "evaluate";
  effective["checkpoint"] = checkpoint_path;
  effective["image_size"] = image_size;
  write_resolved_config(out_dir, effective);

  const bsca::Manifest manifest = bsca::load_manifest(spec.train.manifest_path);
  const bsca::Dataset ds =
      bsca::load_dataset(manifest, manifest_base_dir(spec.train.manifest_path), image_size);
  const bsca::MetricsRecord record =
      bsca::evaluate(ckpt.network, ds, spec.train.batch_size);

  const json out = metrics_json(record);
  write_text(out_dir / "metrics.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int run_predict(const RunSpec& spec, const std::string& volume_path,
                const std::string& checkpoint_path, const std::string& mode_name,
                int axial_axis) {
  bsca::LoadedCheckpoint ckpt = bsca::load_weights(checkpoint_path);
  const int image_size = spec.train.image_size > 0 ? spec.train.image_size : ckpt.image_size;
  const bsca::SelectionMode mode = mode_name == "ordered" ? bsca::SelectionMode::ordered
                                                          : bsca::SelectionMode::unconstrained;

  const fs::path out_dir = spec.train.out_dir.empty() ? fs::path(".") : fs::path(spec.train.out_dir);
  json effective = config_json(spec);
  effective["subcommand"] = "predict";
  effective["volume"] = volume_path;
  effective["checkpoint"] = checkpoint_path;
  effective["mode"] = mode_name;
  effective["axial_axis"] = axial_axis;
  effective["image_size"] = image_size;
  write_resolved_config(out_dir, effective);

  bsca::Volume vol = bsca::load_nifti(volume_path);
  vol.axial_axis = axial_axis;
  const bsca::SelectionResult result = bsca::select_chips_slices(
      ckpt.network, vol, mode, image_size, spec.train.batch_size);

  json selections;
  for (int c = 0; c < bsca::kNumClasses; ++c) {
    const auto& pick = result.picks[static_cast<std::size_t>(c)];
    selections[std::string(1, bsca::class_to_char(c))] =
        json{{"index", pick.slice_index}, {"confidence", pick.confidence}};
  }
  const json out = {{"volume", volume_path},
                    {"mode", mode_name},
                    {"selections", selections},
                    {"ordering_violated", result.ordering_violated}};
  write_text(out_dir / "prediction.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int run_gen_phantom(const RunSpec& spec, const bsca::PhantomConfig& cfg) {
  if (spec.train.out_dir.empty()) throw bsca::DataError("gen-phantom: --out is required");
  const fs::path out_dir = spec.train.out_dir;
  fs::create_directories(out_dir);
  json effective = {{"subcommand", "gen-phantom"},
                    {"per_class", cfg.n_per_class},
                    {"size", cfg.size},
                    {"seed", cfg.seed},
                    {"noise", cfg.noise_level},
                    {"out_dir", spec.train.out_dir}};
  write_resolved_config(out_dir, effective);

  const bsca::PhantomSet set = bsca::gen_phantom(cfg);
  bsca::write_phantom(set, out_dir.string());
  std::cerr << "wrote " << set.volumes.size() << " volumes and manifest.csv to "
            << out_dir.string() << "\n";
  return kExitOk;
}

int run_inspect(const RunSpec& spec, const std::string& checkpoint_path) {
  bsca::Network net;
  int image_size = spec.train.image_size > 0 ? spec.train.image_size : 256;
  if (!checkpoint_path.empty()) {
    bsca::LoadedCheckpoint ckpt = bsca::load_weights(checkpoint_path);
    net = std::move(ckpt.network);
    if (spec.train.image_size <= 0 && ckpt.image_size > 0) image_size = ckpt.image_size;
    std::printf("checkpoint: %s (image size %d, steps %llu, optimizer state %s)\n\n",
                checkpoint_path.c_str(), ckpt.image_size,
                static_cast<unsigned long long>(net.step_count),
                ckpt.has_optimizer_state ? "present" : "stripped");
  } else {
    net = bsca::network_skeleton();
  }

  const auto rows = bsca::parameter_report(net);
  auto count_for = [&rows](const std::string& prefix) {
    std::int64_t total = 0;
    for (const auto& row : rows) {
      if (row.name.rfind(prefix, 0) == 0) total += row.count;
    }
    return total;
  };

  // Stage geometry for the requested input size.
  const int s1 = bsca::conv_out_extent(image_size, 7, 2, 3);
  const int s2 = bsca::conv_out_extent(s1, 3, 2, 1);
  const int l2 = bsca::conv_out_extent(s2, 3, 2, 1);
  const int l3 = bsca::conv_out_extent(l2, 3, 2, 1);
  const int l4 = bsca::conv_out_extent(l3, 3, 2, 1);

  auto shape3 = [](int c, int hw) {
    return std::to_string(c) + " x " + std::to_string(hw) + " x " + std::to_string(hw);
  };
  struct Row {
    std::string layer, operation, shape;
    std::int64_t params;
  };
  std::vector<Row> table;
  table.push_back({"input", "grayscale replicated to 3 channels", shape3(3, image_size), 0});
  table.push_back({"conv1", "Conv2d(3, 64, kernel=7, stride=2, padding=3)", shape3(64, s1),
                   count_for("conv1.")});
  table.push_back({"bn1", "BatchNorm2d(64)", shape3(64, s1), count_for("bn1.")});
  table.push_back({"relu", "ReLU", shape3(64, s1), 0});
  table.push_back({"maxpool", "MaxPool2d(kernel=3, stride=2, padding=1)", shape3(64, s2), 0});
  const int stage_hw[4] = {s2, l2, l3, l4};
  const int stage_ch[4] = {64, 128, 256, 512};
  for (int li = 0; li < 4; ++li) {
    const std::string name = "layer" + std::to_string(li + 1);
    table.push_back({name, "two residual blocks", shape3(stage_ch[li], stage_hw[li]),
                     count_for(name + ".")});
    for (int bi = 0; bi < 2; ++bi) {
      table.push_back({name + "." + std::to_string(bi), "conv-bn pair with shortcut",
                       shape3(stage_ch[li], stage_hw[li]),
                       count_for(name + "." + std::to_string(bi) + ".")});
    }
  }
  table.push_back({"avgpool", "AdaptiveAvgPool2d((1, 1))", shape3(512, 1), 0});
  table.push_back({"flatten", "reshape to 1-D", "512", 0});
  table.push_back({"fc", "Linear(512, 4 classes)", "4", count_for("fc.")});

  std::printf("%-12s %-46s %-16s %12s\n", "Layer", "Operation", "Output Shape", "Parameters");
  std::int64_t total = 0;
  for (const auto& row : table) {
    if (row.params > 0) {
      std::printf("%-12s %-46s %-16s %12lld\n", row.layer.c_str(), row.operation.c_str(),
                  row.shape.c_str(), static_cast<long long>(row.params));
    } else {
      std::printf("%-12s %-46s %-16s %12s\n", row.layer.c_str(), row.operation.c_str(),
                  row.shape.c_str(), "");
    }
    total += row.params;
  }
  std::printf("%-12s %-46s %-16s %12lld\n", "total", "", "",
              static_cast<long long>(bsca::total_parameter_count(net)));
  std::printf("\nnote: the fully connected layer is sometimes quoted at 205,004 parameters;\n"
              "Linear(512, 4) has 512*4 + 4 = 2,052.\n");
  (void)total;

  if (!spec.train.out_dir.empty()) {
    json effective = {{"subcommand", "inspect-model"},
                      {"checkpoint", checkpoint_path},
                      {"image_size", image_size}};
    write_resolved_config(spec.train.out_dir, effective);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"4-class axial-slice classifier: training, evaluation and slice selection"};
  app.require_subcommand(1);

  RunSpec spec;
  spec.train.image_size = 0;  // 0 = take the checkpoint value (inference subcommands)
  std::string config_path, checkpoint_path, volume_path;
  std::string mode_name = "unconstrained";
  int axial_axis = 2;
  int threads_flag = 0;
  bsca::PhantomConfig phantom_cfg;

  auto add_common = [&](CLI::App* cmd, bool with_train_keys) {
    cmd->add_option("--config", config_path, "JSON config file; flags override its values");
    cmd->add_option("--threads", threads_flag,
                    "worker thread budget (default: BSCA_THREADS or all cores)");
    cmd->add_option("--out", spec.train.out_dir, "output directory");
    cmd->add_option("--batch-size", spec.train.batch_size, "samples per forward batch");
    cmd->add_option("--image-size", spec.train.image_size,
                    "square input resolution fed to the network");
    if (with_train_keys) {
      cmd->add_option("--manifest", spec.train.manifest_path,
                      "CSV manifest (volume_path,slice_index,label)");
      cmd->add_option("--seed", spec.train.seed, "base seed for all randomness");
    }
  };

  CLI::App* train_cmd = app.add_subcommand("train", "cross-validated training run");
  add_common(train_cmd, true);
  train_cmd->add_option("--lr", spec.train.lr, "Adam step size");
  train_cmd->add_option("--epochs", spec.train.epochs, "epochs per fold");
  train_cmd->add_option("--folds", spec.train.folds, "fold count (1 = no holdout)");
  train_cmd->add_flag("--strip-optimizer", spec.strip_optimizer,
                      "write inference-only checkpoints (no Adam state)");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "metrics of a checkpoint on a manifest");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "trained model file")->required();

  CLI::App* predict_cmd =
      app.add_subcommand("predict", "select the four target slices from a volume");
  add_common(predict_cmd, false);
  predict_cmd->add_option("--volume", volume_path, "NIfTI-1 volume (.nii)")->required();
  predict_cmd->add_option("--checkpoint", checkpoint_path, "trained model file")->required();
  predict_cmd->add_option("--mode", mode_name, "unconstrained | ordered")
      ->check(CLI::IsMember({"unconstrained", "ordered"}));
  predict_cmd->add_option("--axial-axis", axial_axis, "volume axis that enumerates slices (0-2)")
      ->check(CLI::Range(0, 2));

  CLI::App* phantom_cmd =
      app.add_subcommand("gen-phantom", "write a synthetic 4-class dataset (volumes + manifest)");
  phantom_cmd->add_option("--out", spec.train.out_dir, "output directory")->required();
  phantom_cmd->add_option("--per-class", phantom_cfg.n_per_class, "volumes to generate");
  phantom_cmd->add_option("--size", phantom_cfg.size, "square slice extent");
  phantom_cmd->add_option("--seed", phantom_cfg.seed, "noise seed");
  phantom_cmd->add_option("--noise", phantom_cfg.noise_level, "additive Gaussian noise stddev");

  CLI::App* inspect_cmd = app.add_subcommand("inspect-model", "print the layer/parameter table");
  inspect_cmd->add_option("--checkpoint", checkpoint_path, "optional model file to describe");
  inspect_cmd->add_option("--image-size", spec.train.image_size,
                          "input resolution used for the output-shape column");
  inspect_cmd->add_option("--out", spec.train.out_dir,
                          "optional directory for resolved-config.json");

  try {
    app.parse(argc, argv);

    if (!config_path.empty()) {
      RunSpec from_file;
      from_file.train.image_size = 0;
      apply_config_file(from_file, config_path);
      // Flags win: re-parse writes flag values on top of the file values.
      spec.train.lr = from_file.train.lr;
      spec.train.batch_size = from_file.train.batch_size;
      spec.train.epochs = from_file.train.epochs;
      spec.train.folds = from_file.train.folds;
      spec.train.seed = from_file.train.seed;
      spec.train.image_size = from_file.train.image_size;
      spec.train.adam = from_file.train.adam;
      if (!from_file.train.manifest_path.empty()) {
        spec.train.manifest_path = from_file.train.manifest_path;
      }
      if (!from_file.train.out_dir.empty()) spec.train.out_dir = from_file.train.out_dir;
      spec.threads = from_file.threads;
      spec.strip_optimizer = from_file.strip_optimizer;
      // Second pass so explicit flags override the config file.
      app.clear();
      app.parse(argc, argv);
    }
    if (threads_flag > 0) spec.threads = threads_flag;
    resolve_threads(spec.threads);
    if (spec.train.image_size <= 0 &&
        (app.got_subcommand(train_cmd) || app.got_subcommand(phantom_cmd))) {
      spec.train.image_size = 256;
    }

    if (app.got_subcommand(train_cmd)) return run_train(spec);
    if (app.got_subcommand(eval_cmd)) return run_evaluate(spec, checkpoint_path);
    if (app.got_subcommand(predict_cmd)) {
      return run_predict(spec, volume_path, checkpoint_path, mode_name, axial_axis);
    }
    if (app.got_subcommand(phantom_cmd)) return run_gen_phantom(spec, phantom_cfg);
    if (app.got_subcommand(inspect_cmd)) return run_inspect(spec, checkpoint_path);
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const bsca::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const bsca::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const bsca::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
