// polydt: compress a permissive controller into a small explainable
// decision tree. See README.md for the file formats and examples.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polydt/pipeline.hpp"

namespace {

// Exit codes, also documented in README.md.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitIo = 2;
constexpr int kExitParse = 3;
constexpr int kExitTimeout = 4;
constexpr int kExitImpure = 5;
constexpr int kExitUsage = 6;

int usage_error(const std::string& message) {
  std::cerr << "polydt: " << message << "\n";
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace polydt;

  CLI::App app{"compress permissive controllers into explainable decision trees"};
  app.set_version_flag("--version", std::string(kToolVersion));

  PipelineConfig cfg;
  std::string generate;
  std::string predicates = "axis";
  std::string impurity = "entropy";
  bool no_prettify = false;
  bool verbose = false;

  auto* opt_input = app.add_option("--input", cfg.input_path,
                                   "controller CSV file to compress");
  auto* opt_generate = app.add_option("--generate", generate,
                                      "synthesize a controller instead (choices: cruise)");
  opt_input->excludes(opt_generate);
  opt_generate->excludes(opt_input);

  app.add_option("--v-min", cfg.cruise.v_min, "cruise: minimum velocity")
      ->capture_default_str();
  app.add_option("--v-max", cfg.cruise.v_max, "cruise: maximum velocity")
      ->capture_default_str();
  app.add_option("--d-max", cfg.cruise.d_max, "cruise: maximum sensed distance")
      ->capture_default_str();
  app.add_option("--d-safe", cfg.cruise.d_safe, "cruise: required safety distance")
      ->capture_default_str();

  app.add_option("--predicates", predicates,
                 "comma list of split generators: axis, linear, poly, dk")
      ->capture_default_str();
  app.add_option("--impurity", impurity, "split impurity: entropy or mle")
      ->capture_default_str();
  app.add_option("--axis-priority", cfg.axis_priority,
                 "priority weight for axis splits, in (0, 1]")
      ->capture_default_str();
  app.add_option("--linear-priority", cfg.linear_priority,
                 "priority weight for linear splits, in (0, 1]")
      ->capture_default_str();
  app.add_option("--poly-priority", cfg.poly_priority,
                 "priority weight for polynomial splits, in (0, 1]")
      ->capture_default_str();
  app.add_option("--dk-priority", cfg.domain_priority,
                 "priority weight for knowledge-base splits, in (0, 1]")
      ->capture_default_str();

  app.add_option("--dk-kb", cfg.kb_path, "knowledge base file for the dk generator");
  app.add_option("--dk-iterations", cfg.kb_iterations,
                 "knowledge base expansion rounds")
      ->capture_default_str();
  app.add_flag("--dk-sums", cfg.kb_sums,
               "also form pairwise sums and differences during expansion");

  app.add_option("--max-depth", cfg.max_depth, "depth cap, -1 for unlimited")
      ->capture_default_str();
  app.add_option("--timeout", cfg.timeout_seconds,
                 "build time budget in seconds; on expiry open branches become leaves")
      ->capture_default_str();
  app.add_option("--min-node-size", cfg.min_node_size,
                 "do not split nodes with fewer states than this")
      ->capture_default_str();

  app.add_option("--svm-cost", cfg.svm.cost, "hyperplane training cost parameter")
      ->capture_default_str();
  app.add_option("--svm-tolerance", cfg.svm.tolerance,
                 "hyperplane training stopping tolerance")
      ->capture_default_str();
  app.add_option("--svm-max-epochs", cfg.svm.max_epochs,
                 "hyperplane training epoch cap")
      ->capture_default_str();
  app.add_flag("--no-prettify", no_prettify,
               "keep raw hyperplane coefficients (skip zeroing, scaling, rounding)");

  app.add_option("--out", cfg.out_paths,
                 "output files; format by extension (.json, .dot, .c)")
      ->delimiter(',');
  app.add_option("--manifest", cfg.manifest_path, "write a JSON run record here");
  app.add_option("--threads", cfg.threads, "worker threads (results are identical)")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "seed offset for randomized internals")
      ->capture_default_str();
  app.add_flag("--verbose", verbose, "progress lines on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "polydt: " << e.what() << "\n";
    return kExitUsage;
  }

  if (!generate.empty()) {
    if (generate != "cruise") return usage_error("unknown generator: " + generate);
    cfg.generate_cruise = true;
  }
  if (cfg.input_path.empty() && !cfg.generate_cruise)
    return usage_error("need --input FILE or --generate cruise");

  cfg.prettify = !no_prettify;
  cfg.axis = cfg.linear = cfg.poly = cfg.domain = false;
  for (const auto& token : split(predicates, ',')) {
    std::string name{trim(token)};
    if (name == "axis") cfg.axis = true;
    else if (name == "linear") cfg.linear = true;
    else if (name == "poly") cfg.poly = true;
    else if (name == "dk") cfg.domain = true;
    else if (!name.empty()) return usage_error("unknown predicate generator: " + name);
  }
  if (!cfg.axis && !cfg.linear && !cfg.poly && !cfg.domain)
    return usage_error("--predicates selected no generators");

  if (impurity == "entropy") cfg.impurity = ImpurityKind::entropy;
  else if (impurity == "mle") cfg.impurity = ImpurityKind::min_label_entropy;
  else return usage_error("unknown impurity: " + impurity);

  try {
    PipelineResult result = run_pipeline(cfg, verbose ? &std::cerr : nullptr);
    if (!cfg.manifest_path.empty())
      detail::write_file(cfg.manifest_path, manifest_json(cfg, result));

    std::cout << "tree: " << result.stats.total_nodes << " nodes, depth "
              << result.stats.depth << ", " << result.stats.impure_leaves
              << " impure leaves, error rate " << format_double(result.error_rate)
              << "\n";

    if (result.tree.timed_out) {
      std::cerr << "polydt: timeout expired before the tree was finished\n";
      return kExitTimeout;
    }
    if (result.error_rate > 0.0) {
      std::cerr << "polydt: tree does not reproduce the controller exactly\n";
      return kExitImpure;
    }
    return kExitOk;
  } catch (const io_error& e) {
    std::cerr << "polydt: " << e.what() << "\n";
    return kExitIo;
  } catch (const parse_error& e) {
    std::cerr << "polydt: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  } catch (const std::exception& e) {
    std::cerr << "polydt: " << e.what() << "\n";
    return kExitFailure;
  }
}
