#pragma once
// Monte Carlo trial harness: synthetic-data generators for five recurrent-event
// cases and two survival-only cases, a replicated analysis loop, and the
// summary aggregation (Est / Bias / mean SE / median SE / MC SD / CP / power).
//
// Generators (all times in years):
//   baseline covariates   X1 ~ Bernoulli(1/2), X2, X3 ~ Normal(0, sd 2)
//   death                 D = 5/365 + Exponential(rate 0.05 exp(0.1 sum X))
//   censoring             C ~ Uniform(1, 2), administrative cap at 2 years
//   follow-up             T = min(D, C, 2), delta = I(D <= min(C, 2))
//   cases 1-4             conditional Poisson process on (0, T) with intensity
//                         rho0(t) exp(theta_case(t) * arm + 0.2 sum X),
//                         rho0(t) = 0.48 t, sampled by thinning against the
//                         exact maximum of the intensity (closed-form vertex
//                         analysis of the quadratic exponent)
//   case 5 (gap times)    gap = exp(-theta * arm + 0.18 sum X - 0.60)
//                               + Exponential(mean 0.62), cumulated while < T
//   survival-only case 1  hazard log(2) exp(-theta * arm + 0.5 sum X),
//                         X three iid standard normals, C ~ Uniform(10, 40)
//   survival-only case 2  D = exp(theta * arm + 0.5 sum X) + Exponential(1),
//                         same censoring
//
// Each replicate r draws its own RNG stream seeded by a SplitMix64-mixed
// counter (base_seed, r), so serial and parallel execution agree bit-for-bit.
// Within a replicate the draw order is fixed: covariates, randomization,
// death/censoring, recurrent events.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "aucmcf/types.hpp"

namespace aucmcf {

struct ScenarioSpec {
  Endpoint endpoint = Endpoint::auc;
  int case_id = 1;
  double theta = 0.0;
  int n = 400;            // total subjects per replicate
  Scheme scheme = Scheme::simple;
  double tau = 2.0;
  int replicates = 1000;
  std::uint64_t base_seed = 1;
  double alpha = 0.05;
  int threads = 1;        // 0 = use hardware concurrency

  void validate() const;
};

// Reads a flat key-value scenario config ("key = value" lines, '#' comments).
// Keys: endpoint, case, theta, n, scheme, tau, replicates, seed, alpha, threads.
ScenarioSpec scenario_from_config(std::istream& in);

// Cells in fixed order; percentages are on the 0-100 scale.
enum Cell : int {
  cell_diff_unadj = 0,
  cell_diff_adj = 1,
  cell_ratio_unadj = 2,
  cell_ratio_adj = 3,
};
inline const char* cell_name(int cell) {
  static const char* names[] = {"diff_unadj", "diff_adj", "ratio_unadj",
                                "ratio_adj"};
  return names[cell];
}

struct CellSummary {
  double est = 0;        // MC mean of the estimand's unadjusted points
  double bias = 0;       // MC mean of this cell's points minus est
  double mean_se = 0;
  double median_se = 0;
  double mc_sd = 0;      // sample SD (denominator used-1) of this cell's points
  double cp = 0;         // % of CIs point -/+ z(alpha/2) se covering est
  double power = 0;      // % of |point / se| > z(alpha/2)
};

struct SummaryTable {
  ScenarioSpec spec;
  std::array<CellSummary, 4> cells;
  int replicates_used = 0;
  int replicates_failed = 0;
  std::vector<std::string> failure_messages;  // at most a handful, for reports
};

struct ReplicateResult {
  bool ok = false;
  std::array<double, 4> point{};  // indexed by Cell
  std::array<double, 4> se{};
  std::array<double, 2> sigma2_L{};   // [difference, ratio]
  std::array<double, 2> sigma2_CL{};  // componentwise <= sigma2_L
  double events_per_subject = 0;
  std::string error;
};

// --- generators (exposed for direct testing and reuse) ---

std::uint64_t replicate_seed(std::uint64_t base_seed, std::uint64_t replicate);

// Stable scalar samplers over mt19937_64 (kept version-independent on purpose:
// the standard library's distributions are implementation-specified).
double draw_unit(std::mt19937_64& rng);                  // U[0, 1)
double draw_exponential(std::mt19937_64& rng, double mean);
double draw_normal(std::mt19937_64& rng);                // standard normal

Eigen::MatrixXd gen_baseline(int n, std::mt19937_64& rng);
Eigen::MatrixXd gen_rmst_baseline(int n, std::mt19937_64& rng);

struct DeathCensor {
  Eigen::VectorXd death, censor, followup;
  std::vector<std::uint8_t> terminal;
};
DeathCensor gen_death_censor(const Eigen::MatrixXd& X, std::mt19937_64& rng);
DeathCensor gen_rmst_case(int case_id, double theta,
                          const std::vector<int>& arm,
                          const Eigen::MatrixXd& X, std::mt19937_64& rng);

// Flattened recurrent events across subjects.
struct EventList {
  std::vector<int> subject;
  std::vector<double> time;
};

// Time profile of the treatment effect on the log intensity.
double theta_profile(int case_id, double theta, double t);

// Exact supremum over (0, T] of 0.48 t exp(theta_case(t) * arm + offset).
double intensity_envelope(int case_id, double theta, int arm, double offset,
                          double T);

EventList gen_recurrent(int case_id, double theta, const std::vector<int>& arm,
                        const Eigen::MatrixXd& X,
                        const Eigen::VectorXd& exposure, std::mt19937_64& rng);
EventList gen_recurrent_gap(double theta, const std::vector<int>& arm,
                            const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& exposure,
                            std::mt19937_64& rng);

// --- study loop ---

ReplicateResult run_replicate(const ScenarioSpec& spec, std::uint64_t replicate);

// Runs all replicates (optionally multi-threaded), aggregates the summary, and
// optionally hands back every per-replicate record in index order.  Aborts
// with NumericError when more than 1% of replicates fail.
SummaryTable run_study(const ScenarioSpec& spec,
                       std::vector<ReplicateResult>* replicate_dump = nullptr);

// --- serialization ---

// digits < 0 means full shortest-round-trip precision.
std::string format_double(double x, int digits = -1);
std::string summary_to_csv(const SummaryTable& table, int digits = -1);
std::string summary_to_json(const SummaryTable& table, int digits = -1);
std::string replicates_to_csv(const std::vector<ReplicateResult>& rows,
                              int digits = -1);

}  // namespace aucmcf
