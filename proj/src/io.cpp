#include "mlfdr/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace mlfdr {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_record(const std::string& line, const std::string& path,
                                      std::size_t row) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw DataError(path + ": row " + std::to_string(row) + ": unterminated quote");
  out.push_back(trim(field));
  return out;
}

std::string where(const std::string& path, std::size_t row, std::size_t col) {
  return path + ": row " + std::to_string(row) + ", column " + std::to_string(col);
}

double parse_real(const std::string& s, const std::string& ctx) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last)
    throw DataError(ctx + ": cannot parse '" + s + "' as a number");
  return v;
}

long long parse_int(const std::string& s, const std::string& ctx) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw DataError(ctx + ": cannot parse '" + s + "' as an integer");
  return v;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "." || s == "NaN"; }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  return out;
}

std::size_t column_or_throw(const CsvTable& t, const std::string& name, const std::string& path) {
  const auto c = t.column(name);
  if (!c) throw DataError(path + ": missing column '" + name + "'");
  return *c;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  CsvTable t;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto rec = split_record(line, path, row);
    if (t.header.empty()) {
      t.header = std::move(rec);
      continue;
    }
    if (rec.size() != t.header.size())
      throw DataError(path + ": row " + std::to_string(row) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(rec.size()));
    t.rows.push_back(std::move(rec));
  }
  if (t.header.empty()) throw DataError(path + ": empty file");
  return t;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_real(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

Dataset read_dataset_csv(const std::string& path, const std::string& response_column) {
  const CsvTable t = read_csv(path);
  const std::size_t yc = column_or_throw(t, response_column, path);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto p = static_cast<Eigen::Index>(t.header.size() - 1);
  if (n < 2) throw DataError(path + ": need at least 2 data rows");
  if (p < 1) throw DataError(path + ": no feature columns");
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != yc) names.push_back(t.header[c]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = t.rows[static_cast<std::size_t>(i)];
    const std::size_t file_row = static_cast<std::size_t>(i) + 2;
    if (is_missing(rec[yc]))
      throw DataError(where(path, file_row, yc + 1) + ": missing response");
    y(i) = parse_real(rec[yc], where(path, file_row, yc + 1));
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < rec.size(); ++c) {
      if (c == yc) continue;
      X(i, j++) = parse_real(rec[c], where(path, file_row, c + 1));
    }
  }
  try {
    Dataset d(std::move(X), std::move(y), std::move(names));
    d.response_name = response_column;
    return d;
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  auto out = open_out(path);
  const std::size_t p = data.num_features();
  for (std::size_t j = 0; j < p; ++j)
    out << csv_escape(data.feature_names.empty() ? "x" + std::to_string(j + 1)
                                                 : data.feature_names[j])
        << ',';
  out << csv_escape(data.response_name) << '\n';
  for (Eigen::Index i = 0; i < data.design.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.design.cols(); ++j)
      out << format_real(data.design(i, j)) << ',';
    out << format_real(data.response(i)) << '\n';
  }
  if (!out) throw DataError(path + ": write failed");
}

LayerPartition read_group_map(const std::string& path, std::size_t num_features,
                              const std::vector<std::string>& feature_names) {
  const CsvTable t = read_csv(path);
  const std::size_t fc = column_or_throw(t, "feature_id", path);
  const std::size_t lc = column_or_throw(t, "layer", path);
  const std::size_t gc = column_or_throw(t, "group_id", path);

  // layer -> label -> members, keeping first-appearance order of labels.
  std::map<long long, std::vector<std::string>> label_order;
  std::map<long long, std::map<std::string, IndexSet>> members;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& rec = t.rows[r];
    const std::size_t file_row = r + 2;
    const long long layer = parse_int(rec[lc], where(path, file_row, lc + 1));
    if (layer < 1) throw DataError(where(path, file_row, lc + 1) + ": layer must be >= 1");
    std::size_t feature = 0;
    const std::string& fid = rec[fc];
    const auto named = std::find(feature_names.begin(), feature_names.end(), fid);
    if (named != feature_names.end()) {
      feature = static_cast<std::size_t>(named - feature_names.begin());
    } else {
      const long long k = parse_int(fid, where(path, file_row, fc + 1));
      if (k < 1 || static_cast<std::size_t>(k) > num_features)
        throw DataError(where(path, file_row, fc + 1) + ": feature " + fid + " out of range");
      feature = static_cast<std::size_t>(k - 1);
    }
    const std::string& label = rec[gc];
    if (label.empty()) throw DataError(where(path, file_row, gc + 1) + ": empty group_id");
    auto& lm = members[layer];
    if (lm.find(label) == lm.end()) label_order[layer].push_back(label);
    lm[label].push_back(feature);
  }

  RawLayers layers;
  std::vector<std::vector<std::string>> labels;
  if (members.find(1) == members.end()) {
    layers.push_back(LayerPartition::singleton(num_features).groups(0));
    labels.emplace_back();
  }
  long long expected = members.find(1) == members.end() ? 2 : 1;
  for (const auto& [layer, lm] : members) {
    if (layer != expected)
      throw DataError(path + ": layers must be numbered consecutively (missing layer " +
                      std::to_string(expected) + ")");
    ++expected;
    std::vector<IndexSet> groups;
    for (const auto& label : label_order[layer]) groups.push_back(lm.at(label));
    layers.push_back(std::move(groups));
    labels.push_back(label_order[layer]);
  }
  try {
    return LayerPartition(num_features, std::move(layers), std::move(labels));
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_group_map(const std::string& path, const LayerPartition& partition) {
  auto out = open_out(path);
  out << "feature_id,layer,group_id\n";
  for (std::size_t m = 0; m < partition.num_layers(); ++m) {
    if (m == 0 && partition.is_singleton_layer(0) && !partition.has_labels(0)) continue;
    for (std::size_t j = 0; j < partition.num_features(); ++j)
      out << j + 1 << ',' << m + 1 << ','
          << csv_escape(partition.group_label(m, partition.group_of(m, j))) << '\n';
  }
}

LoadedData load_dataset(const std::string& csv_path,
                        const std::optional<std::string>& group_map_path,
                        const std::string& response_column) {
  Dataset d = read_dataset_csv(csv_path, response_column);
  LayerPartition part = group_map_path
                            ? read_group_map(*group_map_path, d.num_features(), d.feature_names)
                            : LayerPartition::singleton(d.num_features());
  return {std::move(d), std::move(part)};
}

EValueTable read_evalues_csv(const std::string& path, const LayerPartition& partition) {
  const CsvTable t = read_csv(path);
  const std::size_t lc = column_or_throw(t, "layer", path);
  const std::size_t gc = column_or_throw(t, "group_id", path);
  const std::size_t ec = column_or_throw(t, "evalue", path);
  const std::size_t M = partition.num_layers();
  EValueTable table;
  std::vector<std::vector<char>> seen(M);
  for (std::size_t m = 0; m < M; ++m) {
    table.values.emplace_back(partition.group_count(m), 0.0);
    seen[m].assign(partition.group_count(m), 0);
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& rec = t.rows[r];
    const std::size_t file_row = r + 2;
    const long long layer = parse_int(rec[lc], where(path, file_row, lc + 1));
    if (layer < 1 || static_cast<std::size_t>(layer) > M)
      throw DataError(where(path, file_row, lc + 1) + ": layer " + rec[lc] + " out of range");
    const auto m = static_cast<std::size_t>(layer - 1);
    std::optional<std::size_t> g;
    if (partition.has_labels(m)) {
      for (std::size_t k = 0; k < partition.group_count(m); ++k)
        if (partition.group_label(m, k) == rec[gc]) g = k;
    }
    if (!g) {
      const long long k = parse_int(rec[gc], where(path, file_row, gc + 1));
      if (k < 1 || static_cast<std::size_t>(k) > partition.group_count(m))
        throw DataError(where(path, file_row, gc + 1) + ": group " + rec[gc] + " out of range");
      g = static_cast<std::size_t>(k - 1);
    }
    const double e = parse_real(rec[ec], where(path, file_row, ec + 1));
    if (!std::isfinite(e) || e < 0.0)
      throw DataError(where(path, file_row, ec + 1) + ": e-values must be finite and >= 0");
    if (seen[m][*g]) throw DataError(where(path, file_row, gc + 1) + ": duplicate group");
    seen[m][*g] = 1;
    table.values[m][*g] = e;
  }
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t g = 0; g < seen[m].size(); ++g)
      if (!seen[m][g])
        throw DataError(path + ": no e-value for layer " + std::to_string(m + 1) + ", group " +
                        partition.group_label(m, g));
  return table;
}

void write_evalues_csv(const std::string& path, const EValueTable& table,
                       const LayerPartition& partition) {
  auto out = open_out(path);
  out << "layer,group_id,evalue\n";
  for (std::size_t m = 0; m < table.values.size(); ++m)
    for (std::size_t g = 0; g < table.values[m].size(); ++g)
      out << m + 1 << ',' << csv_escape(partition.group_label(m, g)) << ','
          << format_real(table.values[m][g]) << '\n';
}

std::size_t infer_feature_count(const std::string& evalues_path,
                                const std::optional<std::string>& group_map_path) {
  std::size_t n = 0;
  const CsvTable e = read_csv(evalues_path);
  const std::size_t lc = column_or_throw(e, "layer", evalues_path);
  for (std::size_t r = 0; r < e.rows.size(); ++r)
    if (parse_int(e.rows[r][lc], where(evalues_path, r + 2, lc + 1)) == 1) ++n;
  if (group_map_path) {
    const CsvTable g = read_csv(*group_map_path);
    const std::size_t fc = column_or_throw(g, "feature_id", *group_map_path);
    const std::size_t glc = column_or_throw(g, "layer", *group_map_path);
    std::map<std::string, std::size_t> per_layer;
    for (const auto& rec : g.rows) ++per_layer[rec[glc]];
    for (const auto& [layer, count] : per_layer) n = std::max(n, count);
    for (std::size_t r = 0; r < g.rows.size(); ++r) {
      const long long k = parse_int(g.rows[r][fc], where(*group_map_path, r + 2, fc + 1));
      if (k > 0) n = std::max(n, static_cast<std::size_t>(k));
    }
  }
  if (n == 0) throw DataError(evalues_path + ": cannot determine the number of features");
  return n;
}

std::string position_from_name(const std::string& name) {
  std::string digits;
  for (char c : name) {
    if (std::isdigit(static_cast<unsigned char>(c)))
      digits += c;
    else if (!digits.empty())
      break;
  }
  return digits;
}

RawPanel read_panel_csv(const std::string& path, const std::string& response_column,
                        const std::optional<std::string>& positions_path) {
  const CsvTable t = read_csv(path);
  const std::size_t yc = column_or_throw(t, response_column, path);
  RawPanel raw;
  raw.response_name = response_column;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == yc) continue;
    cols.push_back(c);
    raw.feature_names.push_back(t.header[c]);
  }
  std::map<std::string, std::string> pos_map;
  if (positions_path) {
    const CsvTable pt = read_csv(*positions_path);
    const std::size_t f = column_or_throw(pt, "feature", *positions_path);
    const std::size_t p = column_or_throw(pt, "position", *positions_path);
    for (const auto& rec : pt.rows) pos_map[rec[f]] = rec[p];
  }
  for (const auto& name : raw.feature_names) {
    std::string pos;
    if (positions_path) {
      const auto it = pos_map.find(name);
      if (it == pos_map.end()) throw DataError(*positions_path + ": no position for '" + name + "'");
      pos = it->second;
    } else {
      pos = position_from_name(name);
    }
    if (pos.empty()) throw DataError(path + ": cannot derive a position for '" + name + "'");
    raw.positions.push_back(pos);
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& rec = t.rows[r];
    const std::size_t file_row = r + 2;
    raw.response.push_back(is_missing(rec[yc])
                               ? std::nullopt
                               : std::optional<double>(
                                     parse_real(rec[yc], where(path, file_row, yc + 1))));
    std::vector<int> row;
    for (std::size_t c : cols) {
      const long long v = parse_int(rec[c], where(path, file_row, c + 1));
      if (v != 0 && v != 1) throw DataError(where(path, file_row, c + 1) + ": expected 0 or 1");
      row.push_back(static_cast<int>(v));
    }
    raw.features.push_back(std::move(row));
  }
  return raw;
}

LoadedData preprocess_panel(const RawPanel& raw, int min_count) {
  const std::size_t p = raw.feature_names.size();
  if (raw.positions.size() != p) throw DataError("panel: one position per feature is required");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < raw.response.size(); ++i)
    if (raw.response[i]) rows.push_back(i);
  if (rows.empty()) throw DataError("panel: every response is missing");

  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < p; ++j) {
    long long count = 0;
    for (std::size_t i : rows) count += raw.features[i][j];
    if (count > min_count) keep.push_back(j);
  }
  if (keep.empty()) throw DataError("panel: no feature survives the frequency filter");
  if (rows.size() < 2) throw DataError("panel: fewer than 2 rows with a response");

  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(keep.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    y(static_cast<Eigen::Index>(a)) = *raw.response[rows[a]];
    for (std::size_t b = 0; b < keep.size(); ++b)
      X(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          raw.features[rows[a]][keep[b]];
  }
  std::vector<std::string> names;
  std::vector<std::string> order;
  std::map<std::string, IndexSet> by_pos;
  for (std::size_t b = 0; b < keep.size(); ++b) {
    names.push_back(raw.feature_names[keep[b]]);
    const std::string& pos = raw.positions[keep[b]];
    if (by_pos.find(pos) == by_pos.end()) order.push_back(pos);
    by_pos[pos].push_back(b);
  }
  RawLayers layers(2);
  for (std::size_t b = 0; b < keep.size(); ++b) layers[0].push_back({b});
  for (const auto& pos : order) layers[1].push_back(by_pos[pos]);
  Dataset d(std::move(X), std::move(y), names);
  d.response_name = raw.response_name;
  return {std::move(d), LayerPartition(keep.size(), std::move(layers), {names, order})};
}

}  // namespace mlfdr
