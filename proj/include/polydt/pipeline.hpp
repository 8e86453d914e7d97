#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "polydt/cruise.hpp"
#include "polydt/dataset.hpp"
#include "polydt/domainkb.hpp"
#include "polydt/export.hpp"
#include "polydt/prettify.hpp"
#include "polydt/tree.hpp"

namespace polydt {

inline constexpr const char* kToolVersion = "0.1.0";

struct PipelineConfig {
  // Input: exactly one of a CSV path or the built-in generator.
  std::string input_path;
  bool generate_cruise = false;
  CruiseParams cruise;

  // Split generators and selection.
  bool axis = true;
  double axis_priority = 1.0;
  bool linear = false;
  double linear_priority = 1.0;
  bool poly = false;
  double poly_priority = 1.0;
  bool domain = false;
  double domain_priority = 1.0;
  ImpurityKind impurity = ImpurityKind::entropy;
  SvmConfig svm;
  bool prettify = true;

  // Domain knowledge base.
  std::string kb_path;
  int kb_iterations = 1;
  bool kb_sums = false;

  int max_depth = -1;
  double timeout_seconds = 10800.0;
  size_t min_node_size = 1;
  int threads = 1;
  uint64_t seed = 0;

  // Output files; the extension picks the format (.json, .dot, .c).
  std::vector<std::string> out_paths;
  std::string manifest_path;
};

struct PipelineResult {
  ControllerDataset dataset;  // after the variable screen
  RelevanceReport relevance;
  std::vector<std::string> kept_variables;
  std::vector<std::string> removed_variables;

  bool kb_used = false;
  PoolReport kb_report;

  DecisionTree tree;
  TreeStats stats;
  double error_rate = 0.0;

  std::string input_source;  // file path or "generated:cruise"
  std::string input_hash;    // content hash of the canonical CSV form
  std::map<std::string, double> timings;            // stage -> seconds
  std::map<std::string, std::string> outputs;       // path -> format
};

namespace detail {

class StageClock {
 public:
  explicit StageClock(std::map<std::string, double>& sink) : sink_(sink) {}

  template <typename Fn>
  auto time(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      sink_[stage] = seconds_since(start);
    } else {
      auto result = fn();
      sink_[stage] = seconds_since(start);
      return result;
    }
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  std::map<std::string, double>& sink_;
};

inline std::string file_format(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "json" || ext == "dot" || ext == "c") return ext;
  throw std::invalid_argument("unsupported output extension on '" + path +
                              "' (expected .json, .dot, or .c)");
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open output file: " + path);
  out << content;
  if (!out) throw io_error("failed writing output file: " + path);
}

}  // namespace detail

// Loads or generates the controller, screens useless variables, optionally
// prepares the expression pool, builds and verifies the tree, and writes
// the requested artifacts. All steps are deterministic for a fixed config,
// so repeated runs produce byte-identical files (the manifest's timing
// section aside). `log` gets progress lines when non-null.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  PipelineResult result;
  detail::StageClock clock(result.timings);
  auto note = [&](const std::string& line) {
    if (log) *log << "[polydt] " << line << "\n";
  };

  if (cfg.input_path.empty() == !cfg.generate_cruise)
    throw std::invalid_argument("pipeline: exactly one input source must be set");

  ControllerDataset full = clock.time("load", [&] {
    if (cfg.generate_cruise) {
      result.input_source = "generated:cruise";
      return synthesize_controller(cfg.cruise, cfg.threads);
    }
    result.input_source = cfg.input_path;
    std::ifstream in(cfg.input_path, std::ios::binary);
    if (!in) throw io_error("cannot open input file: " + cfg.input_path);
    return parse_controller_csv(in);
  });
  result.input_hash = fnv1a64_hex(serialize_controller_csv(full));
  note("input: " + std::to_string(full.num_rows()) + " states, " +
       std::to_string(full.num_vars()) + " variables, " +
       std::to_string(full.label_table.size()) + " action sets");

  clock.time("relevance", [&] {
    result.relevance = feature_relevance(full);
    result.dataset = result.relevance.removed.empty()
                         ? full
                         : drop_variables(full, result.relevance.removed);
  });
  for (size_t j = 0; j < full.num_vars(); ++j) {
    bool removed = false;
    for (size_t r : result.relevance.removed) removed = removed || r == j;
    (removed ? result.removed_variables : result.kept_variables)
        .push_back(full.variable_names[j]);
  }
  if (!result.removed_variables.empty()) {
    std::string names;
    for (const auto& n : result.removed_variables) names += (names.empty() ? "" : ", ") + n;
    note("variable screen dropped: " + names);
  }

  KnowledgeBase kb;
  Pool pool;
  if (cfg.domain) {
    if (cfg.kb_path.empty())
      throw std::invalid_argument("pipeline: domain generator needs a knowledge base path");
    clock.time("kb", [&] {
      kb = parse_kb_file(cfg.kb_path);
      GenerateOptions opts;
      opts.numeric_seed += cfg.seed;
      pool = generate_pool(kb, cfg.kb_iterations, cfg.kb_sums, opts, &result.kb_report);
    });
    result.kb_used = true;
    note("expression pool: " + std::to_string(result.kb_report.total_generated) +
         " generated, " + std::to_string(result.kb_report.numeric_unique) +
         " numerically unique");
  }

  BuildConfig build_cfg;
  build_cfg.impurity = cfg.impurity;
  build_cfg.axis = cfg.axis;
  build_cfg.axis_priority = cfg.axis_priority;
  build_cfg.linear = cfg.linear;
  build_cfg.linear_priority = cfg.linear_priority;
  build_cfg.poly = cfg.poly;
  build_cfg.poly_priority = cfg.poly_priority;
  build_cfg.domain = cfg.domain;
  build_cfg.domain_priority = cfg.domain_priority;
  build_cfg.svm = cfg.svm;
  build_cfg.prettify = cfg.prettify;
  build_cfg.kb_pool = cfg.domain ? &pool : nullptr;
  build_cfg.kb = cfg.domain ? &kb : nullptr;
  build_cfg.max_depth = cfg.max_depth;
  build_cfg.timeout_seconds = cfg.timeout_seconds;
  build_cfg.min_node_size = cfg.min_node_size;
  build_cfg.threads = cfg.threads;

  result.tree = clock.time("build", [&] { return build_tree(result.dataset, build_cfg); });
  result.stats = tree_stats(result.tree);
  note("tree: " + std::to_string(result.stats.total_nodes) + " nodes, depth " +
       std::to_string(result.stats.depth));
  if (result.tree.timed_out) note("build hit the timeout; tree is partial");

  result.error_rate = clock.time("verify", [&] { return verify_tree(result.tree, result.dataset); });
  note("verification error rate: " + format_double(result.error_rate));

  clock.time("export", [&] {
    for (const auto& path : cfg.out_paths) {
      std::string format = detail::file_format(path);
      if (format == "json")
        detail::write_file(path, export_json(result.tree));
      else if (format == "dot")
        detail::write_file(path, export_dot(result.tree));
      else
        detail::write_file(path, export_c(result.tree));
      result.outputs[path] = format;
      note("wrote " + format + ": " + path);
    }
  });
  return result;
}

// Machine-readable run record. Everything except the "timings" object is a
// pure function of the input content and configuration.
inline std::string manifest_json(const PipelineConfig& cfg, const PipelineResult& result) {
  ordered_json j;
  j["tool_version"] = kToolVersion;

  ordered_json input;
  input["source"] = result.input_source;
  input["content_hash"] = result.input_hash;
  if (cfg.generate_cruise) {
    ordered_json g;
    g["v_min"] = cfg.cruise.v_min;
    g["v_max"] = cfg.cruise.v_max;
    g["d_max"] = cfg.cruise.d_max;
    g["d_safe"] = cfg.cruise.d_safe;
    input["cruise"] = g;
  }
  j["input"] = input;

  ordered_json config;
  {
    ordered_json generators;
    auto gen = [&](const char* name, bool enabled, double priority) {
      ordered_json g;
      g["enabled"] = enabled;
      g["priority"] = priority;
      generators[name] = g;
    };
    gen("axis", cfg.axis, cfg.axis_priority);
    gen("linear", cfg.linear, cfg.linear_priority);
    gen("poly", cfg.poly, cfg.poly_priority);
    gen("dk", cfg.domain, cfg.domain_priority);
    config["generators"] = generators;
    config["impurity"] = cfg.impurity == ImpurityKind::entropy ? "entropy" : "mle";
    ordered_json svm;
    svm["cost"] = cfg.svm.cost;
    svm["tolerance"] = cfg.svm.tolerance;
    svm["max_epochs"] = cfg.svm.max_epochs;
    config["svm"] = svm;
    config["prettify"] = cfg.prettify;
    if (cfg.domain) {
      ordered_json kb;
      kb["path"] = cfg.kb_path;
      kb["iterations"] = cfg.kb_iterations;
      kb["sums"] = cfg.kb_sums;
      config["kb"] = kb;
    }
    config["max_depth"] = cfg.max_depth;
    config["timeout_seconds"] = cfg.timeout_seconds;
    config["threads"] = cfg.threads;
    config["seed"] = cfg.seed;
  }
  j["config"] = config;

  ordered_json relevance;
  relevance["collision_ratio"] = result.relevance.collision_ratio;
  relevance["removed"] = result.removed_variables;
  relevance["kept"] = result.kept_variables;
  j["relevance"] = relevance;

  if (result.kb_used) {
    ordered_json kb;
    kb["initial"] = result.kb_report.initial;
    kb["sums_added"] = result.kb_report.sums_added;
    kb["identities_added"] = result.kb_report.identities_added;
    kb["total_generated"] = result.kb_report.total_generated;
    kb["state_dependent"] = result.kb_report.state_dependent;
    kb["numeric_unique"] = result.kb_report.numeric_unique;
    j["expression_pool"] = kb;
  }

  ordered_json tree;
  tree["total_nodes"] = result.stats.total_nodes;
  tree["inner_nodes"] = result.stats.inner_nodes;
  tree["leaves"] = result.stats.leaves;
  tree["impure_leaves"] = result.stats.impure_leaves;
  tree["depth"] = result.stats.depth;
  ordered_json splits;
  splits["axis"] = result.stats.axis_splits;
  splits["linear"] = result.stats.linear_splits;
  splits["poly"] = result.stats.poly_splits;
  splits["dk"] = result.stats.domain_splits;
  tree["splits"] = splits;
  tree["timed_out"] = result.tree.timed_out;
  tree["depth_limited"] = result.tree.depth_limited;
  j["tree"] = tree;

  j["error_rate"] = result.error_rate;

  ordered_json outputs;
  for (const auto& [path, format] : result.outputs) outputs[path] = format;
  j["outputs"] = outputs;

  ordered_json timings;
  for (const auto& [stage, s] : result.timings) timings[stage] = s;
  j["timings"] = timings;

  return j.dump(2) + "\n";
}

}  // namespace polydt
