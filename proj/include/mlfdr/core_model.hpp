#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mlfdr {

// Feature and group indices are 0-based in memory. File formats and messages
// shown to users are 1-based.
using IndexSet = std::vector<std::size_t>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Raised for singular systems, failed factorizations and similar numerical
/// breakdowns (as opposed to std::invalid_argument for bad input).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw layer description before validation: layers -> groups -> feature indices.
using RawLayers = std::vector<std::vector<IndexSet>>;

struct PartitionViolation {
  enum class Kind { overlap, gap, empty_group, out_of_range, empty_layer };
  Kind kind;
  std::size_t layer = 0;
  std::size_t group = 0;
  std::size_t feature = 0;

  std::string describe() const;
};

struct ValidationReport {
  std::vector<PartitionViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

/// Checks that every layer is a complete, non-overlapping cover of [0, num_features).
ValidationReport validate_partition(std::size_t num_features, const RawLayers& layers);

/// The M resolutions over N features. Each layer is a disjoint cover of the
/// features; group_of(m, j) is the group containing feature j at layer m.
class LayerPartition {
 public:
  LayerPartition() = default;

  /// Throws std::invalid_argument listing the violations when the layers are
  /// not valid partitions.
  LayerPartition(std::size_t num_features, RawLayers layers,
                 std::vector<std::vector<std::string>> group_labels = {});

  static LayerPartition singleton(std::size_t num_features);
  /// Two layers: singletons, then consecutive blocks of `group_size`.
  static LayerPartition singleton_and_blocks(std::size_t num_features, std::size_t group_size);

  std::size_t num_features() const { return num_features_; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t group_count(std::size_t layer) const;
  std::size_t group_of(std::size_t layer, std::size_t feature) const;
  const IndexSet& members(std::size_t layer, std::size_t group) const;
  const std::vector<IndexSet>& groups(std::size_t layer) const;
  bool is_singleton_layer(std::size_t layer) const;

  /// Label for display; falls back to the 1-based group number.
  std::string group_label(std::size_t layer, std::size_t group) const;
  bool has_labels(std::size_t layer) const;

  /// The partition restricted to a single layer.
  LayerPartition layer_only(std::size_t layer) const;

 private:
  void check_layer(std::size_t layer) const;

  std::size_t num_features_ = 0;
  RawLayers layers_;
  std::vector<std::vector<std::size_t>> lookup_;
  std::vector<std::vector<std::string>> labels_;
};

struct Dataset {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  std::vector<std::string> feature_names;
  std::string response_name = "y";

  Dataset() = default;
  /// Throws std::invalid_argument unless n >= 2, N >= 1, shapes agree and all
  /// entries are finite.
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, std::vector<std::string> names = {});

  std::size_t num_samples() const { return static_cast<std::size_t>(design.rows()); }
  std::size_t num_features() const { return static_cast<std::size_t>(design.cols()); }
};

struct GroundTruth {
  IndexSet relevant_features;

  bool is_relevant(std::size_t feature) const;
  /// Groups at `layer` that intersect the relevant set (complement of the null groups).
  IndexSet non_null_groups(const LayerPartition& partition, std::size_t layer) const;
};

struct SelectionResult {
  IndexSet selected_features;
  std::vector<IndexSet> per_layer_groups;
  std::vector<double> thresholds;
  std::vector<double> per_layer_fdp_hat;
  std::size_t passes = 0;
};

/// {g : A_g^(m) intersects selected}. Throws std::out_of_range for a bad layer.
IndexSet induced_group_selection(const IndexSet& selected, const LayerPartition& partition,
                                 std::size_t layer);

/// Fills per_layer_groups from selected_features.
void attach_group_selections(SelectionResult& result, const LayerPartition& partition);

/// True when per_layer_groups is exactly induced by selected_features.
bool is_layer_consistent(const SelectionResult& result, const LayerPartition& partition);

struct LayerMetrics {
  double fdp = 0.0;
  double power = 0.0;
  std::size_t selected = 0;
  std::size_t false_selected = 0;
};

std::vector<LayerMetrics> evaluate_selection(const IndexSet& selected, const GroundTruth& truth,
                                             const LayerPartition& partition);
std::vector<LayerMetrics> evaluate_selection(const SelectionResult& result,
                                             const GroundTruth& truth,
                                             const LayerPartition& partition);

/// Sorts and removes duplicates.
IndexSet normalized(IndexSet s);

}  // namespace mlfdr
