#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlfdr/core_model.hpp"
#include "mlfdr/efilter.hpp"

namespace mlfdr {

/// Malformed or missing input files. Messages name the file, row and column
/// (1-based) where possible.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name, or nullopt.
  std::optional<std::size_t> column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
/// Fields containing commas, quotes or newlines are quoted.
std::string csv_escape(const std::string& field);
/// Shortest text that reads back to the same double (17 significant digits).
std::string format_real(double x);

/// Header row of feature names plus the response column (default "y").
Dataset read_dataset_csv(const std::string& path, const std::string& response_column = "y");
void write_dataset_csv(const std::string& path, const Dataset& data);

/// Group map with columns feature_id, layer, group_id. feature_id is a 1-based
/// index or a feature name. Layer 1 is the singleton partition unless listed.
LayerPartition read_group_map(const std::string& path, std::size_t num_features,
                              const std::vector<std::string>& feature_names = {});
void write_group_map(const std::string& path, const LayerPartition& partition);

struct LoadedData {
  Dataset data;
  LayerPartition partition;
};

LoadedData load_dataset(const std::string& csv_path,
                        const std::optional<std::string>& group_map_path,
                        const std::string& response_column = "y");

/// E-value table with columns layer, group_id, evalue. group_id is a group
/// label or a 1-based group number.
EValueTable read_evalues_csv(const std::string& path, const LayerPartition& partition);
void write_evalues_csv(const std::string& path, const EValueTable& table,
                       const LayerPartition& partition);

/// Number of features implied by an e-value file and an optional group map.
std::size_t infer_feature_count(const std::string& evalues_path,
                                const std::optional<std::string>& group_map_path);

/// Resistance panel before cleaning: response may be missing, features are
/// 0/1 indicators, each labelled with its position.
struct RawPanel {
  std::vector<std::optional<double>> response;
  std::vector<std::string> feature_names;
  std::vector<std::string> positions;
  std::vector<std::vector<int>> features;  // [row][feature]
  std::string response_name = "y";
};

/// Digits embedded in a mutation name, e.g. "P10F" -> "10". Empty when none.
std::string position_from_name(const std::string& feature_name);

/// Reads a panel CSV. Empty, "NA" or "." response cells are missing. Positions
/// come from `positions_path` (columns feature, position) when given,
/// otherwise from the digits in each column name.
RawPanel read_panel_csv(const std::string& path, const std::string& response_column,
                        const std::optional<std::string>& positions_path = {});

/// Drops rows without a response and features present at most `min_count`
/// times, then groups the surviving features by position.
LoadedData preprocess_panel(const RawPanel& raw, int min_count = 3);

}  // namespace mlfdr
