#include "qamatch/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "qamatch/error.hpp"

namespace qamatch {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kFormatName = "qamatch-dataset";
constexpr int kFormatVersion = 1;
constexpr const char* kUnlabeled = "unlabeled";

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

DatasetHeader parse_header(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError(at_line(1) + "header must be a JSON object");
  if (j.value("format", std::string{}) != kFormatName) throw DataError(at_line(1) + "not a qamatch dataset header");
  if (j.value("version", 0) != kFormatVersion) throw DataError(at_line(1) + "unsupported dataset version");
  DatasetHeader h;
  try {
    const auto dim = j.at("dim").get<std::int64_t>();
    const auto classes = j.at("num_classes").get<std::int64_t>();
    if (dim < 1) throw DataError(at_line(1) + "dim must be at least 1");
    if (classes < 2) throw DataError(at_line(1) + "num_classes must be at least 2");
    h.dim = static_cast<std::size_t>(dim);
    h.classes = static_cast<std::size_t>(classes);
    h.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& c : j.at("counts")) {
      if (!c.is_number_integer() || c.get<std::int64_t>() < 0) throw DataError(at_line(1) + "counts must be non-negative integers");
      h.counts.counts.push_back(c.get<std::uint64_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(at_line(1) + "malformed header: " + e.what());
  }
  if (h.class_names.size() != h.classes) throw DataError(at_line(1) + "class_names length differs from num_classes");
  if (h.counts.size() != h.classes) throw DataError(at_line(1) + "counts length differs from num_classes");
  std::set<std::string> unique(h.class_names.begin(), h.class_names.end());
  if (unique.size() != h.class_names.size()) throw DataError(at_line(1) + "duplicate class name");
  if (unique.count(kUnlabeled) || unique.count("")) throw DataError(at_line(1) + "invalid class name");
  return h;
}

Representation parse_vector(const nlohmann::json& j, const char* field, const std::string& id, std::size_t dim) {
  if (!j.is_array()) throw DataError("record '" + id + "': " + field + " must be an array");
  Representation v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw DataError("record '" + id + "': " + field + " holds a non-numeric entry");
    const double value = x.get<double>();
    if (!std::isfinite(value)) throw DataError("record '" + id + "': " + field + " holds a non-finite entry");
    v.push_back(value);
  }
  if (v.size() != dim) {
    throw DataError("record '" + id + "': " + field + " has length " + std::to_string(v.size()) +
                    ", expected " + std::to_string(dim));
  }
  return v;
}

ordered_json vector_json(const Representation& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<ExampleRecord> draw_records(const SynthConfig& cfg, const ClassCounts& counts, const std::string& prefix,
                                        bool augment, Rng& rng, std::vector<std::size_t>* labels) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ExampleRecord> out;
  std::size_t serial = 0;
  auto draw = [&](std::size_t k, double sigma) {
    Representation v(cfg.dim);
    for (std::size_t i = 0; i < cfg.dim; ++i) v[i] = (i == k ? cfg.separation : 0.0) + sigma * normal(rng);
    return v;
  };
  auto jitter = [&](const Representation& base) {
    Representation v(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) v[i] = base[i] + cfg.aug_sigma * normal(rng);
    return v;
  };
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::uint64_t n = 0; n < counts.counts[k]; ++n) {
      ExampleRecord r;
      std::ostringstream id;
      id << prefix << std::setw(6) << std::setfill('0') << serial++;
      r.id = id.str();
      r.label = k;
      r.q = draw(k, cfg.noise_sigma);
      r.c = draw(k, cfg.noise_sigma);
      if (augment) {
        r.q_aug = jitter(r.q);
        r.c_aug = jitter(r.c);
      }
      if (labels) labels->push_back(k);
      out.push_back(std::move(r));
    }
  }
  return out;
}

Dataset make_dataset(const SynthConfig& cfg, std::vector<ExampleRecord> labeled, std::vector<ExampleRecord> unlabeled,
                     const ClassCounts& counts) {
  Dataset ds;
  ds.header.dim = cfg.dim;
  ds.header.classes = cfg.classes;
  ds.header.class_names = cfg.resolved_class_names();
  ds.header.counts = counts;
  ds.labeled = std::move(labeled);
  ds.unlabeled = std::move(unlabeled);
  return ds;
}

ClassCounts balanced_counts(std::uint64_t total, std::size_t classes) {
  ClassCounts c;
  c.counts.assign(classes, total / classes);
  for (std::size_t k = 0; k < total % classes; ++k) ++c.counts[k];
  return c;
}

}  // namespace

Representation input_of(const ExampleRecord& r) { return concat(r.q, r.c); }

UnlabeledTriple triple_of(const ExampleRecord& r) {
  if (!r.has_augmentations()) throw DataError("record '" + r.id + "' lacks augmented representations");
  return UnlabeledTriple{concat(r.q, r.c), concat(r.q_aug, r.c), concat(r.q, r.c_aug)};
}

Dataset parse_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::map<std::string, std::size_t> name_to_class;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(at_line(line_no) + "malformed JSON: " + e.what());
    }
    if (!have_header) {
      if (line_no != 1) throw DataError(at_line(line_no) + "header must be the first line");
      ds.header = parse_header(j);
      for (std::size_t k = 0; k < ds.header.classes; ++k) name_to_class[ds.header.class_names[k]] = k;
      have_header = true;
      continue;
    }
    if (!j.is_object()) throw DataError(at_line(line_no) + "record must be a JSON object");
    ExampleRecord r;
    try {
      r.id = j.at("id").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw DataError(at_line(line_no) + "record lacks a string id");
    }
    if (r.id.empty()) throw DataError(at_line(line_no) + "record id is empty");
    if (!ids.insert(r.id).second) throw DataError(at_line(line_no) + "duplicate record id '" + r.id + "'");
    if (!j.contains("label") || !j["label"].is_string()) {
      throw DataError(at_line(line_no) + "record '" + r.id + "' lacks a string label");
    }
    const auto label = j["label"].get<std::string>();
    if (label != kUnlabeled) {
      auto it = name_to_class.find(label);
      if (it == name_to_class.end()) throw DataError(at_line(line_no) + "record '" + r.id + "' has unknown label '" + label + "'");
      r.label = it->second;
    }
    const std::size_t d = ds.header.dim;
    if (!j.contains("q") || !j.contains("c")) throw DataError("record '" + r.id + "': missing q or c");
    r.q = parse_vector(j["q"], "q", r.id, d);
    r.c = parse_vector(j["c"], "c", r.id, d);
    if (j.contains("q_aug")) r.q_aug = parse_vector(j["q_aug"], "q_aug", r.id, d);
    if (j.contains("c_aug")) r.c_aug = parse_vector(j["c_aug"], "c_aug", r.id, d);
    if (j.contains("q_aug") != j.contains("c_aug")) {
      throw DataError("record '" + r.id + "': q_aug and c_aug must appear together");
    }
    if (r.label) {
      ds.labeled.push_back(std::move(r));
    } else {
      if (!r.has_augmentations()) throw DataError("record '" + r.id + "': unlabeled records need q_aug and c_aug");
      ds.unlabeled.push_back(std::move(r));
    }
  }
  if (!have_header) throw DataError("dataset is empty (no header line)");
  std::vector<std::uint64_t> seen(ds.header.classes, 0);
  for (const auto& r : ds.labeled) ++seen[*r.label];
  if (seen != ds.header.counts.counts) throw DataError("header counts disagree with the labeled records");
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return parse_dataset(in);
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  ordered_json header;
  header["format"] = kFormatName;
  header["version"] = kFormatVersion;
  header["dim"] = ds.header.dim;
  header["num_classes"] = ds.header.classes;
  header["class_names"] = ds.header.class_names;
  header["counts"] = ds.header.counts.counts;
  out << header.dump() << '\n';
  auto emit = [&](const ExampleRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["label"] = r.label ? ds.header.class_names.at(*r.label) : std::string(kUnlabeled);
    j["q"] = vector_json(r.q);
    j["c"] = vector_json(r.c);
    if (r.has_augmentations()) {
      j["q_aug"] = vector_json(r.q_aug);
      j["c_aug"] = vector_json(r.c_aug);
    }
    out << j.dump() << '\n';
  };
  for (const auto& r : ds.labeled) emit(r);
  for (const auto& r : ds.unlabeled) emit(r);
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  write_dataset(ds, out);
  if (!out) throw DataError("failed writing " + path.string());
}

void write_truth_sidecar(const Dataset& ds, const std::vector<std::size_t>& truth, const std::filesystem::path& path) {
  if (truth.size() != ds.unlabeled.size()) throw ShapeError("truth labels do not match the unlabeled records");
  auto out = open_for_write(path);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out << ds.unlabeled[i].id << '\t' << ds.header.class_names.at(truth[i]) << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::size_t> load_truth_sidecar(const Dataset& ds, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open truth sidecar " + path.string());
  std::map<std::string, std::size_t> name_to_class;
  for (std::size_t k = 0; k < ds.header.classes; ++k) name_to_class[ds.header.class_names[k]] = k;
  std::map<std::string, std::size_t> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("truth sidecar " + at_line(line_no) + "expected id<TAB>label");
    const auto label = line.substr(tab + 1);
    auto it = name_to_class.find(label);
    if (it == name_to_class.end()) throw DataError("truth sidecar " + at_line(line_no) + "unknown label '" + label + "'");
    by_id[line.substr(0, tab)] = it->second;
  }
  std::vector<std::size_t> truth;
  truth.reserve(ds.unlabeled.size());
  for (const auto& r : ds.unlabeled) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw DataError("truth sidecar has no entry for '" + r.id + "'");
    truth.push_back(it->second);
  }
  return truth;
}

ClassCounts longtail_counts(std::uint64_t n_max, double gamma, std::size_t classes) {
  if (n_max < 1) throw ParameterError("n_max must be at least 1");
  if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw ParameterError("imbalance ratio gamma must be >= 1");
  if (classes < 2) throw ParameterError("at least two classes are required");
  ClassCounts out;
  const double span = static_cast<double>(classes - 1);
  for (std::size_t k = 0; k < classes; ++k) {
    const double exact = static_cast<double>(n_max) * std::pow(gamma, -static_cast<double>(k) / span);
    // Relative epsilon absorbs pow() rounding just below an integer.
    out.counts.push_back(static_cast<std::uint64_t>(std::floor(exact * (1.0 + 1e-12))));
  }
  if (out.counts.back() == 0) {
    throw ParameterError("smallest class would be empty; increase n_max (gamma " + std::to_string(gamma) + ")");
  }
  return out;
}

ClassCounts proportional_counts(std::uint64_t total, const std::vector<double>& proportions) {
  if (proportions.empty()) throw ParameterError("proportions must not be empty");
  double sum = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError("proportions must be non-negative");
    sum += p;
  }
  if (!(sum > 0.0)) throw ParameterError("proportions must not all be zero");
  ClassCounts out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::uint64_t assigned = 0;
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    const double exact = static_cast<double>(total) * proportions[k] / sum;
    const auto base = static_cast<std::uint64_t>(std::floor(exact + 1e-9));
    out.counts.push_back(base);
    assigned += base;
    remainders.emplace_back(exact - static_cast<double>(base), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out.counts[remainders[i % remainders.size()].second];
  return out;
}

void SynthConfig::validate() const {
  if (classes < 2) throw ParameterError("classes: at least two classes are required");
  if (dim < 1) throw ParameterError("dim: must be at least 1");
  if (dim < classes) throw ParameterError("dim: orthogonal class means need dim >= classes");
  if (!class_names.empty() && class_names.size() != classes) throw ParameterError("class_names: expected one name per class");
  if (!(noise_sigma > 0.0)) throw ParameterError("noise_sigma: must be positive");
  if (!(aug_sigma >= 0.0)) throw ParameterError("aug_sigma: must be non-negative");
  if (!std::isfinite(separation)) throw ParameterError("separation: must be finite");
  if (profile == CountProfile::longtail) {
    if (!(gamma_labeled >= 1.0)) throw ParameterError("gamma_labeled: must be >= 1");
    if (!(gamma_unlabeled >= 1.0)) throw ParameterError("gamma_unlabeled: must be >= 1");
    if (n_max_labeled < 1) throw ParameterError("n_max_labeled: must be >= 1");
  } else if (proportions.size() != classes) {
    throw ParameterError("proportions: expected one proportion per class");
  }
  if (n_validation == 0 || n_test == 0) throw ParameterError("n_validation/n_test: must be positive");
}

std::vector<std::string> SynthConfig::resolved_class_names() const {
  if (!class_names.empty()) return class_names;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < classes; ++k) names.push_back("class" + std::to_string(k));
  return names;
}

ClassCounts SynthConfig::labeled_counts() const {
  if (profile == CountProfile::proportions) return proportional_counts(n_labeled, proportions);
  return longtail_counts(n_max_labeled, gamma_labeled, classes);
}

ClassCounts SynthConfig::unlabeled_counts() const {
  if (profile == CountProfile::proportions) return proportional_counts(n_unlabeled, proportions);
  if (n_max_unlabeled == 0) return ClassCounts{std::vector<std::uint64_t>(classes, 0)};
  return longtail_counts(n_max_unlabeled, gamma_unlabeled, classes);
}

ClassCounts SynthConfig::validation_counts() const {
  if (eval_split == EvalSplit::balanced) return balanced_counts(n_validation, classes);
  const auto lc = labeled_counts();
  return proportional_counts(n_validation, std::vector<double>(lc.counts.begin(), lc.counts.end()));
}

ClassCounts SynthConfig::test_counts() const {
  if (eval_split == EvalSplit::balanced) return balanced_counts(n_test, classes);
  const auto lc = labeled_counts();
  return proportional_counts(n_test, std::vector<double>(lc.counts.begin(), lc.counts.end()));
}

void apply_preset(SynthConfig& cfg, const std::string& name) {
  if (name == "scholarchemqa-shape") {
    cfg.classes = 3;
    cfg.class_names = {"yes", "no", "maybe"};
    cfg.profile = CountProfile::proportions;
    cfg.proportions = {0.658, 0.212, 0.130};
    cfg.n_labeled = 500;
    cfg.n_unlabeled = 2000;
    cfg.eval_split = EvalSplit::labeled;
    cfg.n_validation = 50;
    cfg.n_test = 500;
  } else if (name == "agnews-shape") {
    cfg.classes = 4;
    cfg.class_names = {"world", "sports", "business", "scitech"};
    cfg.profile = CountProfile::longtail;
    cfg.n_max_labeled = 40;
    cfg.gamma_labeled = 5.0;
    cfg.n_max_unlabeled = 3000;
    cfg.gamma_unlabeled = 150.0;
    cfg.eval_split = EvalSplit::balanced;
    cfg.n_validation = 200;
    cfg.n_test = 800;
  } else if (name == "longtail-3") {
    const auto seed = cfg.seed;
    cfg = SynthConfig{};
    cfg.seed = seed;
  } else {
    throw ParameterError("preset: unknown preset '" + name + "'");
  }
  if (cfg.dim < cfg.classes) cfg.dim = cfg.classes;
}

SyntheticSplits synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SyntheticSplits out;
  const auto lc = cfg.labeled_counts();
  const auto uc = cfg.unlabeled_counts();
  const auto vc = cfg.validation_counts();
  const auto tc = cfg.test_counts();
  auto labeled = draw_records(cfg, lc, "L", false, rng, nullptr);
  auto unlabeled = draw_records(cfg, uc, "U", true, rng, &out.unlabeled_truth);
  for (auto& r : unlabeled) r.label.reset();
  out.train = make_dataset(cfg, std::move(labeled), std::move(unlabeled), lc);
  out.validation = make_dataset(cfg, draw_records(cfg, vc, "V", false, rng, nullptr), {}, vc);
  out.test = make_dataset(cfg, draw_records(cfg, tc, "T", false, rng, nullptr), {}, tc);
  return out;
}

}  // namespace qamatch
