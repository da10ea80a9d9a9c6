#include "mlfdr/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlfdr/efilter.hpp"
#include "mlfdr/io.hpp"
#include "mlfdr/knockoff.hpp"
#include "mlfdr/mirror_ds.hpp"
#include "mlfdr/parallel.hpp"
#include "mlfdr/pipelines.hpp"
#include "mlfdr/simlab.hpp"

namespace mlfdr {

namespace {

using json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string method;
  std::vector<double> alpha;
  std::vector<double> alpha0;
  std::optional<double> c;
  std::optional<std::size_t> reps;
  std::string out;
  std::string format = "json";
  std::string preset;
  std::string evalues;
  std::string groups;
  std::string data;
  std::string response = "y";
  bool panel = false;
  std::string positions;
  int min_count = 3;
  std::optional<int> threads;
  bool serial = false;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

template <class T>
T pick(const std::optional<T>& flag, const json& section, const char* key, T fallback) {
  if (flag) return *flag;
  if (section.is_object() && section.contains(key)) {
    try {
      return section.at(key).get<T>();
    } catch (const json::exception& e) {
      throw DataError(std::string("config key '") + key + "': " + e.what());
    }
  }
  return fallback;
}

std::string pick_str(const std::string& flag, const json& section, const char* key,
                     const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (section.is_object() && section.contains(key) && section.at(key).is_string())
    return section.at(key).get<std::string>();
  return fallback;
}

std::vector<double> pick_alphas(const std::vector<double>& flag, const json& section,
                                std::size_t layers, double fallback) {
  std::vector<double> a = flag;
  if (a.empty() && section.is_object() && section.contains("alpha")) {
    const auto& v = section.at("alpha");
    if (v.is_array())
      a = v.get<std::vector<double>>();
    else
      a = {v.get<double>()};
  }
  if (a.empty()) a = {fallback};
  if (a.size() == 1) a.assign(layers, a[0]);
  if (a.size() != layers)
    throw UsageError("--alpha needs 1 or " + std::to_string(layers) + " values, got " +
                     std::to_string(a.size()));
  return a;
}

std::string threshold_text(double t) { return t == kInfinity ? "inf" : format_real(t); }

struct Analysis {
  std::string method;
  SelectionResult selection;
  std::vector<double> alphas;
  std::optional<EValueTable> evalues;
  std::vector<bool> existence;
  std::vector<std::string> diagnostics;
};

json selection_json(const Analysis& a, const LayerPartition& partition,
                    const std::vector<std::string>& names) {
  json j;
  j["method"] = a.method;
  j["alphas"] = a.alphas;
  json feats = json::array();
  for (std::size_t f : a.selection.selected_features)
    feats.push_back({{"id", f + 1},
                     {"name", names.empty() ? "x" + std::to_string(f + 1) : names[f]}});
  j["selected_features"] = feats;
  json layers = json::array();
  for (std::size_t m = 0; m < partition.num_layers(); ++m) {
    json l;
    l["layer"] = m + 1;
    l["alpha"] = a.alphas[m];
    l["threshold"] = threshold_text(a.selection.thresholds[m]);
    l["fdp_hat"] = a.selection.per_layer_fdp_hat[m];
    json groups = json::array();
    for (std::size_t g : a.selection.per_layer_groups[m])
      groups.push_back(partition.group_label(m, g));
    l["selected_groups"] = groups;
    if (m < a.existence.size()) l["existence_condition"] = static_cast<bool>(a.existence[m]);
    layers.push_back(l);
  }
  j["layers"] = layers;
  j["passes"] = a.selection.passes;
  j["diagnostics"] = a.diagnostics;
  return j;
}

std::string selection_csv(const Analysis& a, const LayerPartition& partition) {
  std::ostringstream os;
  os << "layer,group_id,threshold,members\n";
  for (std::size_t m = 0; m < partition.num_layers(); ++m) {
    for (std::size_t g : a.selection.per_layer_groups[m]) {
      std::string members;
      for (std::size_t f : partition.members(m, g))
        members += (members.empty() ? "" : " ") + std::to_string(f + 1);
      os << m + 1 << ',' << csv_escape(partition.group_label(m, g)) << ','
         << threshold_text(a.selection.thresholds[m]) << ',' << members << '\n';
    }
  }
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(path + ": cannot open for writing");
  f << text;
  if (!f) throw DataError(path + ": write failed");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(dir + ": " + ec.message());
}

void emit_analysis(const Options& o, const Analysis& a, const LayerPartition& partition,
                   const std::vector<std::string>& names, std::ostream& out) {
  if (!is_layer_consistent(a.selection, partition))
    throw std::logic_error("selection is not consistent across layers");
  const std::string body = o.format == "csv" ? selection_csv(a, partition)
                                             : selection_json(a, partition, names).dump(2) + "\n";
  if (o.out.empty()) {
    out << body;
    return;
  }
  ensure_dir(o.out);
  write_text(o.out + "/selection." + o.format, body);
  if (a.evalues) write_evalues_csv(o.out + "/evalues.csv", *a.evalues, partition);
}

Analysis from_report(const std::string& method, const PipelineReport& r) {
  return {method, r.selection, r.effective_alphas, r.evalues, r.existence_condition,
          r.diagnostics};
}

GroupStatMode mode_from(const std::string& s) {
  if (s == "mean") return GroupStatMode::mean;
  if (s == "max") return GroupStatMode::max;
  throw UsageError("unknown ds_mode '" + s + "' (mean, max)");
}

std::vector<LayerConfig> layers_from_json(const json& arr) {
  std::vector<LayerConfig> layers;
  for (const auto& l : arr) {
    LayerConfig lc;
    try {
      if (l.contains("base")) lc.base = base_procedure_from_string(l.at("base").get<std::string>());
      if (l.contains("alpha")) lc.alpha = l.at("alpha").get<double>();
      if (l.contains("alpha0")) lc.alpha0 = l.at("alpha0").get<double>();
      if (l.contains("replications")) lc.replications = l.at("replications").get<std::size_t>();
      if (l.contains("weights")) lc.weights = l.at("weights").get<std::vector<double>>();
      if (l.contains("ds_mode")) lc.ds_mode = mode_from(l.at("ds_mode").get<std::string>());
      if (l.contains("p_values")) lc.p_values = l.at("p_values").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw DataError(std::string("config layers: ") + e.what());
    }
    layers.push_back(std::move(lc));
  }
  return layers;
}

int run_analyze(const Options& o, std::ostream& out) {
  const json cfg = load_config(o.config);
  const json sec = cfg.value("analyze", json::object());
  const std::string data_path = pick_str(o.data, sec, "data", "");
  if (data_path.empty()) throw UsageError("analyze needs --data");
  const std::string groups_path = pick_str(o.groups, sec, "groups", "");
  const std::string response = pick_str(o.response == "y" ? "" : o.response, sec, "response", "y");

  LoadedData loaded = [&] {
    const bool panel = o.panel || sec.value("panel", false);
    if (panel) {
      const std::string pos = pick_str(o.positions, sec, "positions", "");
      const RawPanel raw = read_panel_csv(
          data_path, response, pos.empty() ? std::nullopt : std::optional<std::string>(pos));
      return preprocess_panel(raw, pick(std::optional<int>(), sec, "min_count", o.min_count));
    }
    return load_dataset(data_path,
                        groups_path.empty() ? std::nullopt : std::optional<std::string>(groups_path),
                        response);
  }();
  const LayerPartition& partition = loaded.partition;
  const Dataset& data = loaded.data;
  const std::size_t M = partition.num_layers();

  const std::string method = pick_str(o.method, sec, "method", "eds-gkf");
  const std::uint64_t seed = pick(o.seed, cfg, "seed", std::uint64_t{1});
  const double c = pick(o.c, sec, "c", 1.0);
  const std::size_t reps = pick(o.reps, sec, "reps", std::size_t{50});
  const std::vector<double> alphas = pick_alphas(o.alpha, sec, M, 0.2);
  std::vector<double> alpha0 = o.alpha0;
  if (alpha0.empty() && sec.contains("alpha0")) {
    const auto& v = sec.at("alpha0");
    alpha0 = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
  }
  if (alpha0.size() == 1) alpha0.assign(M, alpha0[0]);
  if (!alpha0.empty() && alpha0.size() != M)
    throw UsageError("--alpha0 needs 1 or " + std::to_string(M) + " values, got " +
                     std::to_string(alpha0.size()));
  const ExecutionPolicy policy = o.serial ? ExecutionPolicy::serial : ExecutionPolicy::parallel;

  auto configure = [&](PipelineConfig pc) {
    for (std::size_t m = 0; m < M; ++m) {
      pc.layers[m].alpha = alphas[m];
      pc.layers[m].alpha0 = alpha0.empty() ? alphas[m] / 2.0 : alpha0[m];
    }
    pc.policy = policy;
    pc.seed = seed;
    return pc;
  };
  const double a0 = alpha0.empty() ? alphas[0] / 2.0 : alpha0[0];

  Analysis result;
  if (method == "eds-gkf") {
    result = from_report(method, run_eds_gkf(data, configure(eds_gkf_config(partition, alphas[0],
                                                                            a0, reps, seed)),
                                             c));
  } else if (method == "eds-filter" || method == "fefp" || method == "alt-fefp" ||
             method == "alt-mkf") {
    const std::size_t r = method == "fefp" ? 1 : reps;
    PipelineConfig pc = configure(eds_config(partition, alphas[0], a0, r, seed));
    pc.expansion = c;
    if (method == "eds-filter")
      result = from_report(method, run_eds_filter(data, pc));
    else if (method == "fefp")
      result = from_report(method, run_fefp(data, pc));
    else if (method == "alt-fefp")
      result = from_report(method, run_alt_derand(data, pc, InnerProcedure::fefp));
    else {
      pc.expansion = 1.0;
      result = from_report(method, run_alt_derand(data, pc, InnerProcedure::mkf, c));
    }
  } else if (method == "mkf") {
    const MkfResult r = mkf_plus(data, partition, alphas, c);
    result = {method, r.selection, alphas, std::nullopt, {}, {}};
  } else if (method == "ds") {
    DsRun r = ds_detect(data, partition, 0, alphas[0], seed);
    SelectionResult s;
    s.selected_features = r.threshold.selected;
    s.thresholds.assign(M, kInfinity);
    s.thresholds[0] = r.threshold.threshold;
    s.per_layer_fdp_hat.assign(M, 0.0);
    attach_group_selections(s, partition);
    result = {method, s, alphas, std::nullopt, {}, {}};
  } else if (method == "config") {
    if (!sec.contains("layers")) throw UsageError("method 'config' needs analyze.layers");
    PipelineConfig pc;
    pc.partition = partition;
    pc.layers = layers_from_json(sec.at("layers"));
    if (pc.layers.size() != M)
      throw DataError("config has " + std::to_string(pc.layers.size()) + " layers, data has " +
                      std::to_string(M));
    pc.expansion = c;
    pc.seed = seed;
    pc.policy = policy;
    result = from_report(method, run_dfefp(data, pc));
  } else {
    throw UsageError("unknown method '" + method +
                     "' (eds-gkf, eds-filter, fefp, alt-fefp, alt-mkf, mkf, ds, config)");
  }
  emit_analysis(o, result, partition, data.feature_names, out);
  return 0;
}

int run_filter(const Options& o, std::ostream& out) {
  const json cfg = load_config(o.config);
  const json sec = cfg.value("filter", json::object());
  const std::string ev = pick_str(o.evalues, sec, "evalues", "");
  if (ev.empty()) throw UsageError("filter needs --evalues");
  const std::string gp = pick_str(o.groups, sec, "groups", "");
  const std::optional<std::string> groups =
      gp.empty() ? std::nullopt : std::optional<std::string>(gp);
  const std::size_t N = infer_feature_count(ev, groups);
  const LayerPartition partition =
      groups ? read_group_map(*groups, N) : LayerPartition::singleton(N);
  const EValueTable table = read_evalues_csv(ev, partition);
  const std::vector<double> alphas = pick_alphas(o.alpha, sec, partition.num_layers(), 0.2);
  const std::string method = pick_str(o.method, sec, "method", "efilter");

  Analysis a;
  a.method = method;
  a.alphas = alphas;
  a.evalues = table;
  if (method == "efilter") {
    a.selection = generalized_efilter(table, FilterLevels{alphas}, partition);
  } else if (method == "ebh") {
    if (partition.num_layers() != 1) throw UsageError("ebh takes a single layer");
    a.selection.selected_features = generalized_ebh(table.values[0], alphas[0]);
    const std::size_t k = a.selection.selected_features.size();
    a.selection.thresholds = {k == 0 ? kInfinity : grid_threshold(N, alphas[0], k)};
    a.selection.per_layer_fdp_hat = {fdp_hat_layer(table, a.selection.thresholds, partition, 0)};
    attach_group_selections(a.selection, partition);
  } else {
    throw UsageError("unknown filter method '" + method + "' (efilter, ebh)");
  }
  a.evalues.reset();
  emit_analysis(o, a, partition, {}, out);
  return 0;
}

std::string results_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "point,rho,delta,trial,method,layer,fdp,power,selected\n";
  for (const auto& x : r.records)
    os << x.point + 1 << ',' << format_real(x.rho) << ',' << format_real(x.delta) << ','
       << x.trial + 1 << ',' << x.method << ',' << x.layer + 1 << ',' << format_real(x.fdp)
       << ',' << format_real(x.power) << ',' << x.selected << '\n';
  return os.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "point,rho,delta,method,layer,trials,fdr,fdr_se,power,power_se\n";
  for (const auto& s : rows)
    os << s.point + 1 << ',' << format_real(s.rho) << ',' << format_real(s.delta) << ','
       << s.method << ',' << s.layer + 1 << ',' << s.trials << ',' << format_real(s.fdr) << ','
       << format_real(s.fdr_se) << ',' << format_real(s.power) << ',' << format_real(s.power_se)
       << '\n';
  return os.str();
}

json summary_json(const std::string& preset, const std::vector<SummaryRow>& rows,
                  const ExperimentResult& r) {
  json j;
  j["preset"] = preset;
  json arr = json::array();
  for (const auto& s : rows)
    arr.push_back({{"point", s.point + 1},
                   {"rho", s.rho},
                   {"delta", s.delta},
                   {"method", s.method},
                   {"layer", s.layer + 1},
                   {"trials", s.trials},
                   {"fdr", s.fdr},
                   {"fdr_se", s.fdr_se},
                   {"power", s.power},
                   {"power_se", s.power_se}});
  j["summary"] = arr;
  json fails = json::array();
  for (const auto& f : r.failures)
    fails.push_back(
        {{"point", f.point + 1}, {"trial", f.trial + 1}, {"method", f.method}, {"message", f.message}});
  j["excluded_trials"] = fails;
  return j;
}

void apply_design_overrides(SimDesign& d, const json& o) {
  try {
    if (o.contains("n")) d.n = o.at("n").get<std::size_t>();
    if (o.contains("N")) d.N = o.at("N").get<std::size_t>();
    if (o.contains("groups")) d.groups = o.at("groups").get<std::size_t>();
    if (o.contains("cov_blocks")) d.cov_blocks = o.at("cov_blocks").get<std::size_t>();
    if (o.contains("rho")) d.rho = o.at("rho").get<double>();
    if (o.contains("delta")) d.delta = o.at("delta").get<double>();
    if (o.contains("n_signals")) d.n_signals = o.at("n_signals").get<std::size_t>();
    if (o.contains("n_signal_groups")) d.n_signal_groups = o.at("n_signal_groups").get<std::size_t>();
    if (o.contains("noise_sd")) d.noise_sd = o.at("noise_sd").get<double>();
    if (o.contains("layers")) d.layers = o.at("layers").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("config design: ") + e.what());
  }
}

std::vector<std::string> split_methods(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::replace(item.begin(), item.end(), '-', '_');
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int run_simulate(const Options& o, std::ostream& out) {
  const json cfg = load_config(o.config);
  const json sec = cfg.value("simulate", json::object());
  const std::string preset = pick_str(o.preset, sec, "preset", "desk");
  std::vector<SimDesign> points;
  try {
    points = preset_designs(preset);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (sec.contains("design"))
    for (auto& p : points) apply_design_overrides(p, sec.at("design"));
  if (sec.contains("rho") || sec.contains("delta")) {
    const auto rhos = sec.contains("rho") ? sec.at("rho").get<std::vector<double>>()
                                          : std::vector<double>{points.front().rho};
    const auto deltas = sec.contains("delta") ? sec.at("delta").get<std::vector<double>>()
                                              : std::vector<double>{points.front().delta};
    const SimDesign base = points.front();
    points.clear();
    for (double r : rhos)
      for (double d : deltas) {
        SimDesign p = base;
        p.rho = r;
        p.delta = d;
        points.push_back(p);
      }
  }
  for (const auto& p : points) p.validate();

  std::vector<std::string> methods =
      o.method.empty() ? (sec.contains("methods") ? sec.at("methods").get<std::vector<std::string>>()
                                                  : known_methods())
                       : split_methods(o.method);
  for (auto& m : methods) {
    std::replace(m.begin(), m.end(), '-', '_');
    const auto known = known_methods();
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw UsageError("unknown simulation method '" + m + "'");
  }

  ExperimentSettings st;
  st.alpha = o.alpha.empty() ? sec.value("alpha", st.alpha) : o.alpha[0];
  st.alpha0 = o.alpha0.empty() ? sec.value("alpha0", st.alpha0) : o.alpha0[0];
  st.ds_reps = pick(o.reps, sec, "ds_reps", st.ds_reps);
  st.mds_reps = pick(std::optional<std::size_t>(), sec, "mds_reps", st.mds_reps);
  st.c_kn = pick(o.c, sec, "c_kn", st.c_kn);
  st.policy = o.serial ? ExecutionPolicy::serial : ExecutionPolicy::parallel;
  const std::size_t trials = pick(o.trials, sec, "trials", points.front().trials);
  const std::uint64_t seed = pick(o.seed, cfg, "seed", points.front().seed);

  const ExperimentResult r = run_experiment(points, methods, st, trials, seed);
  const auto rows = summarize(r);
  if (o.out.empty()) {
    out << (o.format == "json" ? summary_json(preset, rows, r).dump(2) + "\n" : summary_csv(rows));
    return 0;
  }
  ensure_dir(o.out);
  write_text(o.out + "/results.csv", results_csv(r));
  write_text(o.out + "/summary.csv", summary_csv(rows));
  write_text(o.out + "/summary.json", summary_json(preset, rows, r).dump(2) + "\n");
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '"', '\'');
  return s;
}

int fail(std::ostream& err, int code, const char* kind, const std::string& msg) {
  err << "error code=" << code << " kind=" << kind << " message=\"" << one_line(msg) << "\"\n";
  return code;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "JSON configuration file");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--method", o.method, "Procedure name");
  app->add_option("--alpha", o.alpha, "Target level(s), one per layer or shared")->delimiter(',');
  app->add_option("--out", o.out, "Output directory (default: stdout)");
  app->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app->add_option("--threads", o.threads, "OpenMP threads")->check(CLI::PositiveNumber);
  app->add_flag("--serial", o.serial, "Run the serial reference path");
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multilayer FDR control with e-values"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Run a simulation study");
  add_common(sim, o);
  sim->add_option("--preset", o.preset, "Named design grid");
  sim->add_option("--trials", o.trials, "Trials per grid point");
  sim->add_option("--alpha0", o.alpha0, "Original level of the base procedures")->delimiter(',');
  sim->add_option("--c", o.c, "Inflation factor for eds_gkf_ckn");
  sim->add_option("--reps", o.reps, "DS replications");

  auto* ana = app.add_subcommand("analyze", "Select features in a dataset");
  add_common(ana, o);
  ana->add_option("--data", o.data, "Dataset CSV");
  ana->add_option("--groups", o.groups, "Group map CSV");
  ana->add_option("--response", o.response, "Response column name");
  ana->add_flag("--panel", o.panel, "Treat --data as a raw mutation panel");
  ana->add_option("--positions", o.positions, "Feature to position map for --panel");
  ana->add_option("--min-count", o.min_count, "Panel frequency cutoff");
  ana->add_option("--alpha0", o.alpha0, "Original level(s) of the base procedures")->delimiter(',');
  ana->add_option("--c", o.c, "Level expansion factor");
  ana->add_option("--reps", o.reps, "Replications per layer");

  auto* fil = app.add_subcommand("filter", "Run the e-filter on precomputed e-values");
  add_common(fil, o);
  fil->add_option("--evalues", o.evalues, "E-value CSV");
  fil->add_option("--groups", o.groups, "Group map CSV");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(err, 1, "usage", e.what());
  }

  try {
    if (o.threads) set_thread_count(*o.threads);
    if (sim->parsed()) return run_simulate(o, out);
    if (ana->parsed()) return run_analyze(o, out);
    return run_filter(o, out);
  } catch (const UsageError& e) {
    return fail(err, 1, "usage", e.what());
  } catch (const NumericalError& e) {
    return fail(err, 3, "numerical", e.what());
  } catch (const DataError& e) {
    return fail(err, 2, "data", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(err, 2, "data", e.what());
  } catch (const json::exception& e) {
    return fail(err, 2, "data", e.what());
  } catch (const std::exception& e) {
    return fail(err, 3, "numerical", e.what());
  }
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace mlfdr
