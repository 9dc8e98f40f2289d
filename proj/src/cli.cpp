#include "aucmcf/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aucmcf/analyze.hpp"
#include "aucmcf/data_model.hpp"
#include "aucmcf/simulation.hpp"
#include "aucmcf/types.hpp"

namespace aucmcf {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

double round_digits(double x, int digits) {
  if (digits < 0 || !std::isfinite(x)) return x;
  const double scale = std::pow(10.0, digits);
  return std::round(x * scale) / scale;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open output file " + path);
  f << content;
}

std::vector<std::string> split_list(const std::string& list) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream ss(list);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

ordered_json result_to_json(const InferenceResult& r, int digits) {
  ordered_json j;
  j["estimand"] = to_string(r.estimand);
  j["adjusted"] = r.adjusted;
  j["point"] = round_digits(r.point, digits);
  j["se"] = round_digits(r.se, digits);
  j["ci_lower"] = round_digits(r.ci_lower, digits);
  j["ci_upper"] = round_digits(r.ci_upper, digits);
  j["z"] = round_digits(r.z, digits);
  j["p_value"] = round_digits(r.p_value, digits);
  j["tau"] = r.tau;
  j["alpha"] = r.alpha;
  j["n0"] = r.n0;
  j["n1"] = r.n1;
  j["warnings"] = r.warnings;
  return j;
}

std::string results_to_csv(const std::vector<InferenceResult>& results,
                           int digits) {
  std::ostringstream os;
  os << "estimand,adjusted,point,se,ci_lower,ci_upper,z,p_value,tau,alpha,n0,"
        "n1\n";
  for (const InferenceResult& r : results) {
    os << to_string(r.estimand) << ',' << (r.adjusted ? 1 : 0) << ','
       << format_double(r.point, digits) << ',' << format_double(r.se, digits)
       << ',' << format_double(r.ci_lower, digits) << ','
       << format_double(r.ci_upper, digits) << ','
       << format_double(r.z, digits) << ','
       << format_double(r.p_value, digits) << ','
       << format_double(r.tau, digits) << ','
       << format_double(r.alpha, digits) << ',' << r.n0 << ',' << r.n1 << '\n';
  }
  return os.str();
}

struct AnalyzeFlags {
  std::string subjects, events, covariates, estimand = "both",
              endpoint = "auc", format = "json", output = "-";
  double tau = 0.0, alpha = 0.05;
  int digits = -1;
};

int cmd_analyze(const AnalyzeFlags& f) {
  std::ifstream subjects(f.subjects);
  if (!subjects) throw DataError("cannot open subjects file " + f.subjects);
  std::ifstream events(f.events);
  if (!events) throw DataError("cannot open events file " + f.events);
  const Cohort cohort = ingest_cohort(subjects, events);

  std::vector<int> columns;
  for (const std::string& name : split_list(f.covariates)) {
    int found = -1;
    for (int k = 0; k < static_cast<int>(cohort.covariate_names.size()); ++k) {
      if (cohort.covariate_names[k] == name) {
        found = k;
        break;
      }
    }
    if (found < 0) {
      throw UsageError("covariate '" + name + "' not found in subjects header");
    }
    columns.push_back(found);
  }

  AnalysisConfig config;
  config.tau = f.tau;
  config.alpha = f.alpha;
  config.endpoint = f.endpoint == "rmst" ? Endpoint::rmst : Endpoint::auc;
  EstimandChoice choice = EstimandChoice::both;
  if (f.estimand == "difference") choice = EstimandChoice::difference;
  if (f.estimand == "ratio") choice = EstimandChoice::ratio;

  const AnalysisOutput out = analyze_cohort(cohort, config, choice, columns);
  for (const std::string& w : out.warnings) {
    std::cerr << "warning: " << one_line(w) << "\n";
  }

  if (f.format == "csv") {
    write_output(f.output, results_to_csv(out.results, f.digits));
  } else {
    ordered_json doc;
    doc["config"] = {{"subjects", f.subjects},
                     {"events", f.events},
                     {"covariates", split_list(f.covariates)},
                     {"tau", f.tau},
                     {"alpha", f.alpha},
                     {"estimand", f.estimand},
                     {"endpoint", f.endpoint}};
    doc["warnings"] = out.warnings;
    doc["results"] = ordered_json::array();
    for (const InferenceResult& r : out.results) {
      doc["results"].push_back(result_to_json(r, f.digits));
    }
    write_output(f.output, doc.dump(2) + "\n");
  }
  return 0;
}

struct SimulateFlags {
  std::string endpoint = "auc", scheme = "simple", format = "json",
              output = "-", dump_replicates;
  int case_id = 1, n = 400, reps = 1000, threads = 1, digits = -1;
  double theta = 0.0, tau = 2.0, alpha = 0.05;
  std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateFlags& f) {
  ScenarioSpec spec;
  spec.endpoint = f.endpoint == "rmst" ? Endpoint::rmst : Endpoint::auc;
  spec.case_id = f.case_id;
  spec.theta = f.theta;
  spec.n = f.n;
  spec.scheme = f.scheme == "spb" ? Scheme::spb : Scheme::simple;
  spec.tau = f.tau;
  spec.replicates = f.reps;
  spec.base_seed = f.seed;
  spec.alpha = f.alpha;
  spec.threads = f.threads;
  spec.validate();

  std::vector<ReplicateResult> dump;
  const bool want_dump = !f.dump_replicates.empty();
  const SummaryTable table = run_study(spec, want_dump ? &dump : nullptr);
  if (table.replicates_failed > 0) {
    std::cerr << "warning: " << table.replicates_failed
              << " replicate(s) failed and were excluded\n";
  }
  if (want_dump) {
    std::ofstream df(f.dump_replicates, std::ios::binary);
    if (!df) {
      throw DataError("cannot open dump file " + f.dump_replicates);
    }
    df << replicates_to_csv(dump, f.digits);
  }
  if (f.format == "csv") {
    write_output(f.output, summary_to_csv(table, f.digits));
  } else {
    write_output(f.output, summary_to_json(table, f.digits));
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "Nonparametric estimation and covariate-adjusted inference for the "
      "area under the mean cumulative function of recurrent events, with a "
      "restricted-mean-survival-time analogue and a Monte Carlo study "
      "harness"};
  app.require_subcommand(1);

  AnalyzeFlags af;
  CLI::App* analyze = app.add_subcommand("analyze", "Analyze a two-arm cohort");
  analyze->add_option("--subjects", af.subjects, "Subjects CSV path")
      ->required();
  analyze->add_option("--events", af.events, "Events CSV path")->required();
  analyze->add_option("--covariates", af.covariates,
                      "Comma-separated covariate columns to adjust on");
  analyze->add_option("--tau", af.tau, "Analysis horizon")->required();
  analyze->add_option("--alpha", af.alpha, "Two-sided significance level");
  analyze->add_option("--estimand", af.estimand, "difference, ratio, or both")
      ->check(CLI::IsMember({"difference", "ratio", "both"}));
  analyze->add_option("--endpoint", af.endpoint, "auc or rmst")
      ->check(CLI::IsMember({"auc", "rmst"}));
  analyze->add_option("--format", af.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  analyze->add_option("--output", af.output, "Output path, or - for stdout");
  analyze->add_option("--digits", af.digits,
                      "Round serialized numbers to this many decimals");

  SimulateFlags sf;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Run a Monte Carlo study");
  simulate->add_option("--endpoint", sf.endpoint, "auc or rmst")
      ->check(CLI::IsMember({"auc", "rmst"}));
  simulate->add_option("--case", sf.case_id, "Scenario case number");
  simulate->add_option("--theta", sf.theta, "Treatment effect parameter");
  simulate->add_option("--n", sf.n, "Subjects per replicate");
  simulate->add_option("--scheme", sf.scheme, "simple or spb")
      ->check(CLI::IsMember({"simple", "spb"}));
  simulate->add_option("--reps", sf.reps, "Number of replicates");
  simulate->add_option("--seed", sf.seed, "Base seed");
  simulate->add_option("--tau", sf.tau, "Analysis horizon");
  simulate->add_option("--alpha", sf.alpha, "Two-sided significance level");
  simulate->add_option("--threads", sf.threads,
                       "Worker threads (0 = hardware concurrency)");
  simulate->add_option("--dump-replicates", sf.dump_replicates,
                       "Write per-replicate records to this CSV path");
  simulate->add_option("--format", sf.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  simulate->add_option("--output", sf.output, "Output path, or - for stdout");
  simulate->add_option("--digits", sf.digits,
                       "Round serialized numbers to this many decimals");

  try {
    app.parse(argc, argv);
    if (analyze->parsed()) return cmd_analyze(af);
    return cmd_simulate(sf);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace aucmcf
