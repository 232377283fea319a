#include "qamatch/qamatch.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>

#include "json.hpp"
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "qamatch/config.hpp"
#include "qamatch/data.hpp"
#include "qamatch/error.hpp"
#include "qamatch/model_io.hpp"
#include "qamatch/report.hpp"
#include "qamatch/trainer.hpp"

struct qm_train_config {
  qamatch::TrainConfig value;
};
struct qm_synth_config {
  qamatch::SynthConfig value;
};
struct qm_dataset {
  qamatch::Dataset value;
};
struct qm_model {
  qamatch::MlpClassifier value;
};
struct qm_report {
  qamatch::TrainReport value;
};

namespace {

thread_local std::string g_last_error;

void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("QAMATCH_LOG")) {
      auto level = spdlog::level::from_str(env);
      if (level != spdlog::level::off || std::strcmp(env, "off") == 0) spdlog::set_level(level);
    }
  });
}

qm_status fail(qm_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
qm_status guarded(F&& body) {
  configure_logging();
  try {
    body();
    return QM_OK;
  } catch (const qamatch::ParameterError& e) {
    return fail(QM_ERROR_USAGE, e.what());
  } catch (const qamatch::DivergenceError& e) {
    return fail(QM_ERROR_DIVERGENCE, e.what());
  } catch (const qamatch::Error& e) {
    return fail(QM_ERROR_DATA, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(QM_ERROR_DATA, e.what());
  } catch (const std::exception& e) {
    return fail(QM_ERROR_INTERNAL, e.what());
  } catch (...) {
    return fail(QM_ERROR_INTERNAL, "unknown error");
  }
}

char* duplicate(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename T>
void require(const T* p, const char* what) {
  if (!p) throw qamatch::ParameterError(std::string(what) + " must not be NULL");
}

template <typename Config>
std::string lookup(const Config& cfg, const char* key) {
  for (const auto& [k, v] : qamatch::entries(cfg))
    if (k == key) return v;
  throw qamatch::ParameterError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

extern "C" {

const char* qm_last_error(void) { return g_last_error.c_str(); }

const char* qm_version(void) { return "1.0.0"; }

void qm_string_free(char* s) { std::free(s); }

qm_status qm_train_config_create(qm_train_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new qm_train_config{};
  });
}

void qm_train_config_destroy(qm_train_config* cfg) { delete cfg; }

qm_status qm_train_config_load(qm_train_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    qamatch::apply(cfg->value, qamatch::load_key_values(path));
  });
}

qm_status qm_train_config_set(qm_train_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    qamatch::set_option(cfg->value, key, value);
  });
}

qm_status qm_train_config_get(const qm_train_config* cfg, const char* key, char** value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    *value = duplicate(lookup(cfg->value, key));
  });
}

qm_status qm_train_config_dump(const qm_train_config* cfg, char** text) {
  return guarded([&] {
    require(cfg, "cfg");
    require(text, "text");
    *text = duplicate(qamatch::format_key_values(qamatch::entries(cfg->value)));
  });
}

qm_status qm_train_config_validate(const qm_train_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->value.validate();
  });
}

qm_status qm_synth_config_create(qm_synth_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new qm_synth_config{};
  });
}

void qm_synth_config_destroy(qm_synth_config* cfg) { delete cfg; }

qm_status qm_synth_config_load(qm_synth_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    qamatch::apply(cfg->value, qamatch::load_key_values(path));
  });
}

qm_status qm_synth_config_set(qm_synth_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    qamatch::set_option(cfg->value, key, value);
  });
}

qm_status qm_synth_config_get(const qm_synth_config* cfg, const char* key, char** value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    *value = duplicate(lookup(cfg->value, key));
  });
}

qm_status qm_synth_config_dump(const qm_synth_config* cfg, char** text) {
  return guarded([&] {
    require(cfg, "cfg");
    require(text, "text");
    *text = duplicate(qamatch::format_key_values(qamatch::entries(cfg->value)));
  });
}

qm_status qm_generate(const qm_synth_config* cfg, const char* out_dir, int force) {
  namespace fs = std::filesystem;
  configure_logging();
  if (!cfg || !out_dir) return fail(QM_ERROR_USAGE, "cfg and out_dir must not be NULL");
  const fs::path dir(out_dir);
  const fs::path files[] = {dir / "train.jsonl", dir / "validation.jsonl", dir / "test.jsonl",
                            dir / "unlabeled_truth.tsv"};
  if (!force) {
    for (const auto& f : files) {
      if (fs::exists(f)) return fail(QM_ERROR_EXISTS, f.string() + " exists; pass force to overwrite");
    }
  }
  return guarded([&] {
    const auto splits = qamatch::synth_generate(cfg->value);
    fs::create_directories(dir);
    qamatch::write_dataset(splits.train, files[0]);
    qamatch::write_dataset(splits.validation, files[1]);
    qamatch::write_dataset(splits.test, files[2]);
    qamatch::write_truth_sidecar(splits.train, splits.unlabeled_truth, files[3]);
  });
}

qm_status qm_dataset_load(const char* path, qm_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new qm_dataset{qamatch::load_dataset(path)};
  });
}

void qm_dataset_destroy(qm_dataset* ds) { delete ds; }

qm_status qm_dataset_info(const qm_dataset* ds, size_t* dim, size_t* classes, size_t* labeled, size_t* unlabeled) {
  return guarded([&] {
    require(ds, "ds");
    if (dim) *dim = ds->value.header.dim;
    if (classes) *classes = ds->value.header.classes;
    if (labeled) *labeled = ds->value.labeled.size();
    if (unlabeled) *unlabeled = ds->value.unlabeled.size();
  });
}

qm_status qm_train(const qm_train_config* cfg, const qm_dataset* train, const qm_dataset* validation,
                   const char* truth_path, qm_model** model, qm_report** report, char** snapshot) {
  return guarded([&] {
    require(cfg, "cfg");
    require(train, "train");
    require(model, "model");
    require(report, "report");
    std::vector<std::size_t> truth;
    if (truth_path) truth = qamatch::load_truth_sidecar(train->value, truth_path);
    auto data = qamatch::make_training_data(train->value, truth, validation ? &validation->value : nullptr);
    try {
      auto result = qamatch::train(cfg->value, data);
      *model = new qm_model{std::move(result.model)};
      *report = new qm_report{std::move(result.report)};
    } catch (const qamatch::TrainingDivergence& e) {
      if (snapshot) {
        const auto& s = e.snapshot();
        nlohmann::ordered_json j;
        j["iteration"] = s.iteration;
        j["loss_bs"] = s.loss_bs;
        j["loss_m"] = s.loss_m;
        j["loss_c"] = s.loss_c;
        j["lambda"] = s.lambda ? nlohmann::ordered_json(*s.lambda) : nlohmann::ordered_json(nullptr);
        j["source"] = s.source ? nlohmann::ordered_json(std::string(qamatch::to_string(*s.source)))
                               : nlohmann::ordered_json(nullptr);
        j["reason"] = s.reason;
        *snapshot = duplicate(j.dump());
      }
      throw;
    }
  });
}

qm_status qm_report_save(const qm_report* report, const char* path) {
  return guarded([&] {
    require(report, "report");
    require(path, "path");
    qamatch::save_report(report->value, path);
  });
}

qm_status qm_report_size(const qm_report* report, size_t* records) {
  return guarded([&] {
    require(report, "report");
    require(records, "records");
    *records = report->value.records.size();
  });
}

void qm_report_destroy(qm_report* report) { delete report; }

qm_status qm_model_load(const char* path, qm_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new qm_model{qamatch::load_model(path)};
  });
}

qm_status qm_model_save(const qm_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    qamatch::save_model(model->value, path);
  });
}

void qm_model_destroy(qm_model* model) { delete model; }

qm_status qm_model_dims(const qm_model* model, size_t* input_dim, size_t* classes) {
  return guarded([&] {
    require(model, "model");
    if (input_dim) *input_dim = model->value.input_dim();
    if (classes) *classes = model->value.num_classes();
  });
}

qm_status qm_model_predict(const qm_model* model, const double* input, size_t input_len, double* probs,
                           size_t probs_len) {
  return guarded([&] {
    require(model, "model");
    require(input, "input");
    require(probs, "probs");
    if (probs_len != model->value.num_classes()) throw qamatch::ParameterError("probs buffer length differs from class count");
    if (input_len != model->value.input_dim()) {
      throw qamatch::ParameterError("input length " + std::to_string(input_len) + " differs from the model's " +
                                    std::to_string(model->value.input_dim()));
    }
    const auto p = model->value.forward(std::span<const double>(input, input_len));
    std::copy(p.probs().begin(), p.probs().end(), probs);
  });
}

qm_status qm_evaluate(const qm_model* model, const qm_dataset* ds, char** metrics_json) {
  return guarded([&] {
    require(model, "model");
    require(ds, "ds");
    require(metrics_json, "metrics_json");
    const auto& h = ds->value.header;
    if (2 * h.dim != model->value.input_dim() || h.classes != model->value.num_classes()) {
      throw qamatch::ShapeError("model expects input " + std::to_string(model->value.input_dim()) + " and " +
                                std::to_string(model->value.num_classes()) + " classes; dataset has 2*" +
                                std::to_string(h.dim) + " and " + std::to_string(h.classes));
    }
    const auto set = qamatch::labeled_set(ds->value);
    if (set.size() == 0) throw qamatch::DataError("dataset has no labeled records to evaluate");
    const auto m = qamatch::evaluate_dataset(model->value, set);
    *metrics_json = duplicate(qamatch::metrics_to_json(m, h.class_names));
  });
}

qm_status qm_aggregate_reports(const char* const* paths, size_t count, char** table_json) {
  return guarded([&] {
    require(table_json, "table_json");
    if (count == 0) throw qamatch::ParameterError("at least one report is required");
    require(paths, "paths");
    std::vector<std::filesystem::path> ps;
    for (size_t i = 0; i < count; ++i) {
      require(paths[i], "report path");
      ps.emplace_back(paths[i]);
    }
    *table_json = duplicate(qamatch::aggregate_to_json(qamatch::aggregate_reports(ps)));
  });
}

qm_status qm_file_sha256(const char* path, char** hex) {
  return guarded([&] {
    require(path, "path");
    require(hex, "hex");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw qamatch::DataError(std::string("cannot open ") + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    char buf[1 << 15];
    while (in) {
      in.read(buf, sizeof buf);
      if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[digest[i] >> 4];
      out += digits[digest[i] & 0xF];
    }
    *hex = duplicate(out);
  });
}

}  // extern "C"
