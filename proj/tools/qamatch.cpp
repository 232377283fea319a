// qamatch command-line tool: generate | train | eval | report.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qamatch/qamatch.h"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct Failure {
  int code;
  std::string message;
};

int exit_code(qm_status s) {
  switch (s) {
    case QM_OK: return 0;
    case QM_ERROR_USAGE:
    case QM_ERROR_EXISTS: return kExitUsage;
    case QM_ERROR_DATA: return kExitData;
    case QM_ERROR_DIVERGENCE: return 4;
    default: return 1;
  }
}

void check(qm_status s) {
  if (s != QM_OK) throw Failure{exit_code(s), qm_last_error()};
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  qm_string_free(s);
  return out;
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using TrainConfigPtr = std::unique_ptr<qm_train_config, Deleter<qm_train_config, qm_train_config_destroy>>;
using SynthConfigPtr = std::unique_ptr<qm_synth_config, Deleter<qm_synth_config, qm_synth_config_destroy>>;
using DatasetPtr = std::unique_ptr<qm_dataset, Deleter<qm_dataset, qm_dataset_destroy>>;
using ModelPtr = std::unique_ptr<qm_model, Deleter<qm_model, qm_model_destroy>>;
using ReportPtr = std::unique_ptr<qm_report, Deleter<qm_report, qm_report_destroy>>;

DatasetPtr load_dataset(const std::string& path) {
  qm_dataset* ds = nullptr;
  check(qm_dataset_load(path.c_str(), &ds));
  return DatasetPtr(ds);
}

std::string sha256(const fs::path& path) {
  char* hex = nullptr;
  check(qm_file_sha256(path.string().c_str(), &hex));
  return take_string(hex);
}

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw Failure{kExitUsage, "--set expects key=value, got '" + s + "'"};
  return {s.substr(0, eq), s.substr(eq + 1)};
}

// "key = value" lines from a config dump, in order.
ordered_json dump_to_json(const std::string& text) {
  ordered_json out = ordered_json::object();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

ordered_json read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kExitData, "cannot open manifest " + path};
  try {
    return ordered_json::parse(in);
  } catch (const ordered_json::exception& e) {
    throw Failure{kExitData, "manifest " + path + ": " + e.what()};
  }
}

void write_manifest(const fs::path& path, const ordered_json& manifest) {
  std::ofstream out(path);
  out << manifest.dump(2) << '\n';
  if (!out) throw Failure{kExitData, "failed writing " + path.string()};
}

void refuse_existing(const std::vector<fs::path>& outputs, bool force) {
  if (force) return;
  for (const auto& p : outputs) {
    if (fs::exists(p)) throw Failure{kExitUsage, p.string() + " exists; pass --force to overwrite"};
  }
}

void verify_checksums(const ordered_json& expected, const std::map<std::string, fs::path>& files, const char* what) {
  for (const auto& [name, path] : files) {
    if (!expected.contains(name)) continue;
    const auto actual = sha256(path);
    if (actual != expected.at(name).get<std::string>()) {
      throw Failure{kExitData, std::string(what) + " " + path.string() + " does not match the manifest checksum"};
    }
  }
}

// ---- generate -------------------------------------------------------------

struct GenerateOptions {
  std::string config;
  std::string preset;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string replay;
  bool force = false;
  bool print_config = false;
};

const std::vector<std::string> kGeneratedFiles = {"train.jsonl", "validation.jsonl", "test.jsonl",
                                                  "unlabeled_truth.tsv"};

int run_generate(const GenerateOptions& o) {
  qm_synth_config* raw = nullptr;
  check(qm_synth_config_create(&raw));
  SynthConfigPtr cfg(raw);
  ordered_json replayed;
  if (!o.replay.empty()) {
    replayed = read_manifest(o.replay);
    for (const auto& [k, v] : replayed.at("config").items()) check(qm_synth_config_set(cfg.get(), k.c_str(), v.get<std::string>().c_str()));
  } else {
    if (!o.preset.empty()) check(qm_synth_config_set(cfg.get(), "preset", o.preset.c_str()));
    if (!o.config.empty()) check(qm_synth_config_load(cfg.get(), o.config.c_str()));
    for (const auto& s : o.sets) {
      const auto [k, v] = split_assignment(s);
      check(qm_synth_config_set(cfg.get(), k.c_str(), v.c_str()));
    }
    if (o.seed) check(qm_synth_config_set(cfg.get(), "seed", std::to_string(*o.seed).c_str()));
  }
  char* text = nullptr;
  check(qm_synth_config_dump(cfg.get(), &text));
  const auto dump = take_string(text);
  if (o.print_config) {
    std::cout << dump;
    return 0;
  }
  if (o.out.empty()) throw Failure{kExitUsage, "--out is required"};

  const fs::path out(o.out);
  std::vector<fs::path> outputs;
  for (const auto& f : kGeneratedFiles) outputs.push_back(out / f);
  outputs.push_back(out / "manifest.json");
  refuse_existing(outputs, o.force);
  check(qm_generate(cfg.get(), out.string().c_str(), 1));

  ordered_json manifest;
  manifest["command"] = "generate";
  manifest["version"] = qm_version();
  manifest["config"] = dump_to_json(dump);
  manifest["seed"] = std::stoull(manifest["config"].value("seed", "0"));
  manifest["output_dir"] = out.string();
  ordered_json sums = ordered_json::object();
  for (const auto& f : kGeneratedFiles) sums[f] = sha256(out / f);
  manifest["artifacts"] = sums;
  write_manifest(out / "manifest.json", manifest);

  if (!replayed.is_null()) {
    std::map<std::string, fs::path> files;
    for (const auto& f : kGeneratedFiles) files[f] = out / f;
    verify_checksums(replayed.at("artifacts"), files, "regenerated file");
    std::cout << "replay reproduced all " << files.size() << " artifacts\n";
  }
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainOptions {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool supervised_only = false;
  std::vector<std::string> ablate;
  std::string data_dir;
  std::string train;
  std::string validation;
  std::string truth;
  std::string out;
  std::string replay;
  bool force = false;
  bool print_config = false;
};

void resolve_data_paths(TrainOptions& o) {
  if (o.data_dir.empty()) return;
  const fs::path dir(o.data_dir);
  if (o.train.empty()) o.train = (dir / "train.jsonl").string();
  if (o.validation.empty() && fs::exists(dir / "validation.jsonl")) o.validation = (dir / "validation.jsonl").string();
  if (o.truth.empty() && fs::exists(dir / "unlabeled_truth.tsv")) o.truth = (dir / "unlabeled_truth.tsv").string();
}

int run_train(TrainOptions o) {
  qm_train_config* raw = nullptr;
  check(qm_train_config_create(&raw));
  TrainConfigPtr cfg(raw);
  ordered_json replayed;
  if (!o.replay.empty()) {
    replayed = read_manifest(o.replay);
    for (const auto& [k, v] : replayed.at("config").items()) check(qm_train_config_set(cfg.get(), k.c_str(), v.get<std::string>().c_str()));
    const auto& inputs = replayed.at("inputs");
    o.train = inputs.at("train").get<std::string>();
    o.validation = inputs.value("validation", "");
    o.truth = inputs.value("truth", "");
  } else {
    if (!o.config.empty()) check(qm_train_config_load(cfg.get(), o.config.c_str()));
    for (const auto& s : o.sets) {
      const auto [k, v] = split_assignment(s);
      check(qm_train_config_set(cfg.get(), k.c_str(), v.c_str()));
    }
    if (o.seed) check(qm_train_config_set(cfg.get(), "seed", std::to_string(*o.seed).c_str()));
    if (o.supervised_only) check(qm_train_config_set(cfg.get(), "use_unlabeled", "false"));
    for (const auto& a : o.ablate) check(qm_train_config_set(cfg.get(), a.c_str(), "false"));
    resolve_data_paths(o);
  }
  check(qm_train_config_validate(cfg.get()));
  char* text = nullptr;
  check(qm_train_config_dump(cfg.get(), &text));
  const auto dump = take_string(text);
  if (o.print_config) {
    std::cout << dump;
    return 0;
  }
  if (o.out.empty()) throw Failure{kExitUsage, "--out is required"};
  if (o.train.empty()) throw Failure{kExitUsage, "a training dataset is required (--train or --data)"};

  std::map<std::string, fs::path> inputs{{"train", o.train}};
  if (!o.validation.empty()) inputs["validation"] = o.validation;
  if (!o.truth.empty()) inputs["truth"] = o.truth;
  if (!replayed.is_null()) verify_checksums(replayed.at("input_checksums"), inputs, "input");

  const fs::path out(o.out);
  const fs::path model_path = out / "model.qam";
  const fs::path report_path = out / "report.jsonl";
  const fs::path manifest_path = out / "manifest.json";
  refuse_existing({model_path, report_path, manifest_path}, o.force);

  auto train = load_dataset(o.train);
  DatasetPtr validation;
  if (!o.validation.empty()) validation = load_dataset(o.validation);

  qm_model* model_raw = nullptr;
  qm_report* report_raw = nullptr;
  char* snapshot = nullptr;
  const qm_status s = qm_train(cfg.get(), train.get(), validation.get(), o.truth.empty() ? nullptr : o.truth.c_str(),
                               &model_raw, &report_raw, &snapshot);
  if (s == QM_ERROR_DIVERGENCE) {
    const std::string message = qm_last_error();
    fs::create_directories(out);
    const fs::path snap_path = out / "divergence.json";
    std::ofstream(snap_path) << take_string(snapshot) << '\n';
    throw Failure{exit_code(s), message + "\nsnapshot written to " + snap_path.string()};
  }
  check(s);
  ModelPtr model(model_raw);
  ReportPtr report(report_raw);

  fs::create_directories(out);
  check(qm_model_save(model.get(), model_path.string().c_str()));
  check(qm_report_save(report.get(), report_path.string().c_str()));

  ordered_json manifest;
  manifest["command"] = "train";
  manifest["version"] = qm_version();
  manifest["config"] = dump_to_json(dump);
  manifest["seed"] = std::stoull(manifest["config"].value("seed", "0"));
  ordered_json in_paths = ordered_json::object();
  ordered_json in_sums = ordered_json::object();
  for (const auto& [name, path] : inputs) {
    in_paths[name] = fs::absolute(path).string();
    in_sums[name] = sha256(path);
  }
  manifest["inputs"] = in_paths;
  manifest["input_checksums"] = in_sums;
  manifest["output_dir"] = out.string();
  manifest["artifacts"] = {{"model.qam", sha256(model_path)}, {"report.jsonl", sha256(report_path)}};
  write_manifest(manifest_path, manifest);

  if (!replayed.is_null()) {
    verify_checksums(replayed.at("artifacts"), {{"model.qam", model_path}, {"report.jsonl", report_path}},
                     "replayed artifact");
    std::cout << "replay reproduced model.qam and report.jsonl\n";
  }
  std::cout << "wrote " << model_path.string() << " and " << report_path.string() << '\n';
  return 0;
}

// ---- eval / report ----------------------------------------------------------

int run_eval(const std::string& model_path, const std::string& data_path) {
  qm_model* raw = nullptr;
  check(qm_model_load(model_path.c_str(), &raw));
  ModelPtr model(raw);
  auto ds = load_dataset(data_path);
  char* json = nullptr;
  check(qm_evaluate(model.get(), ds.get(), &json));
  std::cout << take_string(json) << '\n';
  return 0;
}

int run_report(const std::vector<std::string>& paths, bool as_json) {
  std::vector<const char*> c_paths;
  for (const auto& p : paths) c_paths.push_back(p.c_str());
  char* json = nullptr;
  check(qm_aggregate_reports(c_paths.data(), c_paths.size(), &json));
  const auto text = take_string(json);
  if (as_json) {
    std::cout << text << '\n';
    return 0;
  }
  const auto rows = ordered_json::parse(text);
  std::printf("%-24s %12s   %-10s %s\n", "metric", "mean", "std", "runs");
  for (const auto& r : rows) {
    std::printf("%-24s %12.6f ± %-10.6f %zu\n", r.at("metric").get<std::string>().c_str(), r.at("mean").get<double>(),
                r.at("std").get<double>(), r.at("runs").get<std::size_t>());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qamatch: imbalanced semi-supervised classification over dense representations"};
  app.set_version_flag("--version", std::string(qm_version()));
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic long-tail dataset");
  auto* g_replay = g->add_option("--replay", gen.replay, "Regenerate from a manifest and verify checksums")->check(CLI::ExistingFile);
  g->add_option("--config", gen.config, "key = value settings file")->check(CLI::ExistingFile)->excludes(g_replay);
  g->add_option("--preset", gen.preset, "scholarchemqa-shape | agnews-shape | longtail-3")->excludes(g_replay);
  g->add_option("--set", gen.sets, "Override one setting (key=value)")->excludes(g_replay);
  g->add_option("--seed", gen.seed, "Generator seed")->excludes(g_replay);
  g->add_option("--out", gen.out, "Output directory");
  g->add_flag("--force", gen.force, "Overwrite existing files");
  g->add_flag("--print-config", gen.print_config, "Print the resolved settings and exit");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a classifier");
  auto* t_replay = t->add_option("--replay", tr.replay, "Retrain from a manifest and verify checksums")->check(CLI::ExistingFile);
  t->add_option("--config", tr.config, "key = value settings file")->check(CLI::ExistingFile)->excludes(t_replay);
  t->add_option("--set", tr.sets, "Override one setting (key=value)")->excludes(t_replay);
  t->add_option("--seed", tr.seed, "Training seed")->excludes(t_replay);
  t->add_flag("--supervised-only", tr.supervised_only, "Train on labeled data only")->excludes(t_replay);
  t->add_option("--ablate", tr.ablate, "Disable a component")
      ->check(CLI::IsMember({"rebalance", "calibration", "softmix", "anchor"}))
      ->excludes(t_replay);
  t->add_option("--data", tr.data_dir, "Directory written by generate")->excludes(t_replay);
  t->add_option("--train", tr.train, "Training dataset (labeled + unlabeled)")->excludes(t_replay);
  t->add_option("--validation", tr.validation, "Validation dataset")->excludes(t_replay);
  t->add_option("--truth", tr.truth, "Unlabeled ground-truth sidecar")->excludes(t_replay);
  t->add_option("--out", tr.out, "Output directory");
  t->add_flag("--force", tr.force, "Overwrite existing files");
  t->add_flag("--print-config", tr.print_config, "Print the resolved settings and exit");

  std::string model_path, data_path;
  auto* e = app.add_subcommand("eval", "Evaluate a model on a labeled dataset");
  e->add_option("--model", model_path, "Model file")->required();
  e->add_option("--data", data_path, "Dataset file")->required();

  std::vector<std::string> reports;
  bool report_json = false;
  auto* r = app.add_subcommand("report", "Aggregate training reports (mean ± std)");
  r->add_option("reports", reports, "Report files")->required();
  r->add_flag("--json", report_json, "Print JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitUsage;
  }

  try {
    if (g->parsed()) return run_generate(gen);
    if (t->parsed()) return run_train(tr);
    if (e->parsed()) return run_eval(model_path, data_path);
    return run_report(reports, report_json);
  } catch (const Failure& f) {
    std::cerr << "qamatch: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& ex) {
    std::cerr << "qamatch: " << ex.what() << '\n';
    return 1;
  }
}
