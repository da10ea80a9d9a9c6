#include "mlfdr/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mlfdr {

std::string PartitionViolation::describe() const {
  std::ostringstream os;
  os << "layer " << layer + 1 << ": ";
  switch (kind) {
    case Kind::overlap:
      os << "overlap at feature " << feature + 1 << " (group " << group + 1 << ")";
      break;
    case Kind::gap:
      os << "feature " << feature + 1 << " uncovered";
      break;
    case Kind::empty_group:
      os << "group " << group + 1 << " is empty";
      break;
    case Kind::out_of_range:
      os << "group " << group + 1 << " has feature index " << feature + 1 << " out of range";
      break;
    case Kind::empty_layer:
      os << "layer has no groups";
      break;
  }
  return os.str();
}

std::string ValidationReport::summary() const {
  if (ok()) return "ok";
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.describe();
  }
  return out;
}

ValidationReport validate_partition(std::size_t num_features, const RawLayers& layers) {
  ValidationReport report;
  using Kind = PartitionViolation::Kind;
  for (std::size_t m = 0; m < layers.size(); ++m) {
    if (layers[m].empty()) {
      report.violations.push_back({Kind::empty_layer, m, 0, 0});
      continue;
    }
    std::vector<int> seen(num_features, 0);
    for (std::size_t g = 0; g < layers[m].size(); ++g) {
      const auto& group = layers[m][g];
      if (group.empty()) report.violations.push_back({Kind::empty_group, m, g, 0});
      for (std::size_t j : group) {
        if (j >= num_features) {
          report.violations.push_back({Kind::out_of_range, m, g, j});
          continue;
        }
        if (seen[j]++ == 1) report.violations.push_back({Kind::overlap, m, g, j});
      }
    }
    for (std::size_t j = 0; j < num_features; ++j) {
      if (seen[j] == 0) report.violations.push_back({Kind::gap, m, 0, j});
    }
  }
  return report;
}

LayerPartition::LayerPartition(std::size_t num_features, RawLayers layers,
                               std::vector<std::vector<std::string>> group_labels)
    : num_features_(num_features), layers_(std::move(layers)), labels_(std::move(group_labels)) {
  if (num_features_ == 0) throw std::invalid_argument("partition: no features");
  if (layers_.empty()) throw std::invalid_argument("partition: no layers");
  const auto report = validate_partition(num_features_, layers_);
  if (!report.ok()) throw std::invalid_argument("invalid partition: " + report.summary());
  labels_.resize(layers_.size());
  lookup_.assign(layers_.size(), std::vector<std::size_t>(num_features_));
  for (std::size_t m = 0; m < layers_.size(); ++m) {
    if (!labels_[m].empty() && labels_[m].size() != layers_[m].size())
      throw std::invalid_argument("partition: label count does not match group count");
    for (std::size_t g = 0; g < layers_[m].size(); ++g) {
      std::sort(layers_[m][g].begin(), layers_[m][g].end());
      for (std::size_t j : layers_[m][g]) lookup_[m][j] = g;
    }
  }
}

LayerPartition LayerPartition::singleton(std::size_t num_features) {
  RawLayers layers(1);
  layers[0].reserve(num_features);
  for (std::size_t j = 0; j < num_features; ++j) layers[0].push_back({j});
  return LayerPartition(num_features, std::move(layers));
}

LayerPartition LayerPartition::singleton_and_blocks(std::size_t num_features,
                                                    std::size_t group_size) {
  if (group_size == 0 || num_features % group_size != 0)
    throw std::invalid_argument("group size must divide the number of features");
  RawLayers layers(2);
  for (std::size_t j = 0; j < num_features; ++j) layers[0].push_back({j});
  for (std::size_t start = 0; start < num_features; start += group_size) {
    IndexSet block(group_size);
    for (std::size_t k = 0; k < group_size; ++k) block[k] = start + k;
    layers[1].push_back(std::move(block));
  }
  return LayerPartition(num_features, std::move(layers));
}

void LayerPartition::check_layer(std::size_t layer) const {
  if (layer >= layers_.size())
    throw std::out_of_range("layer " + std::to_string(layer + 1) + " out of range (M=" +
                            std::to_string(layers_.size()) + ")");
}

std::size_t LayerPartition::group_count(std::size_t layer) const {
  check_layer(layer);
  return layers_[layer].size();
}

std::size_t LayerPartition::group_of(std::size_t layer, std::size_t feature) const {
  check_layer(layer);
  return lookup_[layer].at(feature);
}

const IndexSet& LayerPartition::members(std::size_t layer, std::size_t group) const {
  check_layer(layer);
  return layers_[layer].at(group);
}

const std::vector<IndexSet>& LayerPartition::groups(std::size_t layer) const {
  check_layer(layer);
  return layers_[layer];
}

bool LayerPartition::is_singleton_layer(std::size_t layer) const {
  return group_count(layer) == num_features_;
}

bool LayerPartition::has_labels(std::size_t layer) const {
  check_layer(layer);
  return !labels_[layer].empty();
}

std::string LayerPartition::group_label(std::size_t layer, std::size_t group) const {
  check_layer(layer);
  if (!labels_[layer].empty()) return labels_[layer].at(group);
  return std::to_string(group + 1);
}

LayerPartition LayerPartition::layer_only(std::size_t layer) const {
  check_layer(layer);
  return LayerPartition(num_features_, RawLayers{layers_[layer]}, {labels_[layer]});
}

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, std::vector<std::string> names)
    : design(std::move(x)), response(std::move(y)), feature_names(std::move(names)) {
  if (design.rows() < 2) throw std::invalid_argument("dataset: need at least 2 samples");
  if (design.cols() < 1) throw std::invalid_argument("dataset: need at least 1 feature");
  if (response.size() != design.rows())
    throw std::invalid_argument("dataset: response length does not match design rows");
  if (!design.allFinite() || !response.allFinite())
    throw std::invalid_argument("dataset: non-finite entries");
  if (!feature_names.empty() && feature_names.size() != num_features())
    throw std::invalid_argument("dataset: feature name count does not match columns");
}

bool GroundTruth::is_relevant(std::size_t feature) const {
  return std::binary_search(relevant_features.begin(), relevant_features.end(), feature);
}

IndexSet GroundTruth::non_null_groups(const LayerPartition& partition, std::size_t layer) const {
  return induced_group_selection(relevant_features, partition, layer);
}

IndexSet induced_group_selection(const IndexSet& selected, const LayerPartition& partition,
                                 std::size_t layer) {
  const std::size_t G = partition.group_count(layer);
  std::vector<char> hit(G, 0);
  for (std::size_t j : selected) {
    if (j >= partition.num_features())
      throw std::out_of_range("selected feature " + std::to_string(j + 1) + " out of range");
    hit[partition.group_of(layer, j)] = 1;
  }
  IndexSet out;
  for (std::size_t g = 0; g < G; ++g)
    if (hit[g]) out.push_back(g);
  return out;
}

void attach_group_selections(SelectionResult& result, const LayerPartition& partition) {
  result.per_layer_groups.clear();
  for (std::size_t m = 0; m < partition.num_layers(); ++m)
    result.per_layer_groups.push_back(
        induced_group_selection(result.selected_features, partition, m));
}

bool is_layer_consistent(const SelectionResult& result, const LayerPartition& partition) {
  if (result.per_layer_groups.size() != partition.num_layers()) return false;
  for (std::size_t m = 0; m < partition.num_layers(); ++m) {
    if (result.per_layer_groups[m] !=
        induced_group_selection(result.selected_features, partition, m))
      return false;
  }
  return true;
}

std::vector<LayerMetrics> evaluate_selection(const IndexSet& selected, const GroundTruth& truth,
                                             const LayerPartition& partition) {
  std::vector<LayerMetrics> out;
  for (std::size_t m = 0; m < partition.num_layers(); ++m) {
    const IndexSet chosen = induced_group_selection(selected, partition, m);
    const IndexSet relevant = truth.non_null_groups(partition, m);
    std::size_t true_hits = 0;
    for (std::size_t g : chosen)
      if (std::binary_search(relevant.begin(), relevant.end(), g)) ++true_hits;
    LayerMetrics lm;
    lm.selected = chosen.size();
    lm.false_selected = chosen.size() - true_hits;
    lm.fdp = static_cast<double>(lm.false_selected) /
             static_cast<double>(std::max<std::size_t>(chosen.size(), 1));
    lm.power = static_cast<double>(true_hits) /
               static_cast<double>(std::max<std::size_t>(relevant.size(), 1));
    out.push_back(lm);
  }
  return out;
}

std::vector<LayerMetrics> evaluate_selection(const SelectionResult& result,
                                             const GroundTruth& truth,
                                             const LayerPartition& partition) {
  return evaluate_selection(result.selected_features, truth, partition);
}

IndexSet normalized(IndexSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace mlfdr
