#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qamatch/numerics.hpp"
#include "qamatch/rebalance.hpp"
#include "qamatch/softmix.hpp"

namespace qamatch {

/// First line of a dataset file. `counts` tallies the labeled records.
struct DatasetHeader {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<std::string> class_names;
  ClassCounts counts;
};

struct ExampleRecord {
  std::string id;
  std::optional<std::size_t> label;  // nullopt for unlabeled records
  Representation q;
  Representation c;
  Representation q_aug;  // empty when absent; required for unlabeled records
  Representation c_aug;

  bool has_augmentations() const { return !q_aug.empty() && !c_aug.empty(); }
};

struct Dataset {
  DatasetHeader header;
  std::vector<ExampleRecord> labeled;
  std::vector<ExampleRecord> unlabeled;
};

/// x = {q, c}.
Representation input_of(const ExampleRecord& r);
/// (x_u, x_a, x_b) = ({q, c}, {q_aug, c}, {q, c_aug}).
UnlabeledTriple triple_of(const ExampleRecord& r);

/// Parses the line-delimited JSON dataset format. Errors carry the line
/// number or the offending record id.
Dataset parse_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& ds, std::ostream& out);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);

/// Unlabeled ground truth, "id<TAB>class name" per line.
void write_truth_sidecar(const Dataset& ds, const std::vector<std::size_t>& truth, const std::filesystem::path& path);
/// Labels aligned with `ds.unlabeled`; every unlabeled id must be present.
std::vector<std::size_t> load_truth_sidecar(const Dataset& ds, const std::filesystem::path& path);

/// n_k = floor(n_max * gamma^(-k / (C - 1))) for k = 0..C-1.
ClassCounts longtail_counts(std::uint64_t n_max, double gamma, std::size_t classes);

/// Splits `total` by `proportions` with the largest-remainder rule.
ClassCounts proportional_counts(std::uint64_t total, const std::vector<double>& proportions);

enum class CountProfile { longtail, proportions };
enum class EvalSplit { balanced, labeled };

struct SynthConfig {
  std::size_t classes = 3;
  std::size_t dim = 16;
  std::vector<std::string> class_names;  // defaults to class0..class{C-1}

  CountProfile profile = CountProfile::longtail;
  std::uint64_t n_max_labeled = 43;
  double gamma_labeled = 10.0;
  std::uint64_t n_max_unlabeled = 1413;
  double gamma_unlabeled = 10.0;
  std::vector<double> proportions;  // used by CountProfile::proportions
  std::uint64_t n_labeled = 500;
  std::uint64_t n_unlabeled = 2000;

  EvalSplit eval_split = EvalSplit::balanced;
  std::uint64_t n_validation = 150;
  std::uint64_t n_test = 600;

  double separation = 1.5;
  double noise_sigma = 1.0;
  double aug_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<std::string> resolved_class_names() const;
  ClassCounts labeled_counts() const;
  ClassCounts unlabeled_counts() const;
  ClassCounts validation_counts() const;
  ClassCounts test_counts() const;
};

/// Replaces the fields covered by a named preset:
/// "scholarchemqa-shape", "agnews-shape" or "longtail-3".
void apply_preset(SynthConfig& cfg, const std::string& name);

struct SyntheticSplits {
  Dataset train;  // labeled + unlabeled records
  Dataset validation;
  Dataset test;
  std::vector<std::size_t> unlabeled_truth;  // aligned with train.unlabeled
};

/// Gaussian blobs with class means at separation * e_k (shared by q and c),
/// augmented copies jittered by aug_sigma. Pure function of the config.
SyntheticSplits synth_generate(const SynthConfig& cfg);

}  // namespace qamatch
