#pragma once
// Whole-cohort analysis driver: splits arms, fits estimators and influence
// values at the horizon, and produces unadjusted and covariate-adjusted
// inference for the requested estimands.
//
// Covariate hygiene before adjustment:
//   - columns with zero pooled variance are excluded (warning),
//   - columns constant within either arm are excluded (warning),
//   - if either arm has fewer than p + 2 subjects for the p retained columns,
//     or no usable columns remain, the adjusted analysis downgrades to the
//     unadjusted one (warning, result flagged adjusted = false).

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "aucmcf/data_model.hpp"
#include "aucmcf/inference.hpp"
#include "aucmcf/types.hpp"

namespace aucmcf {

struct AnalysisOutput {
  std::vector<InferenceResult> results;
  std::vector<std::string> warnings;
};

inline std::vector<Estimand> estimand_list(EstimandChoice choice) {
  switch (choice) {
    case EstimandChoice::difference: return {Estimand::difference};
    case EstimandChoice::ratio: return {Estimand::ratio};
    default: return {Estimand::difference, Estimand::ratio};
  }
}

// covariate_columns: indices into the cohort's covariate matrix to adjust on;
// empty means unadjusted-only output.
inline AnalysisOutput analyze_cohort(const Cohort& cohort,
                                     const AnalysisConfig& config,
                                     EstimandChoice choice,
                                     const std::vector<int>& covariate_columns) {
  config.validate();
  validate_cohort(cohort);
  AnalysisOutput out;

  auto [treated_view, control_view] = split_arms(cohort);
  const ArmAnalysis<double> treated =
      analyze_arm(std::move(treated_view.sample), config.tau, config.endpoint);
  const ArmAnalysis<double> control =
      analyze_arm(std::move(control_view.sample), config.tau, config.endpoint);

  const bool adjust_requested = !covariate_columns.empty();
  Eigen::MatrixXd X1, X0;
  bool adjust_usable = false;
  if (adjust_requested) {
    const CenteredCovariates centered = center_covariates(cohort);
    std::vector<int> keep;
    for (int col : covariate_columns) {
      if (col < 0 || col >= cohort.p) {
        throw UsageError("covariate index out of range");
      }
      const std::string name = col < static_cast<int>(cohort.covariate_names.size())
                                   ? cohort.covariate_names[col]
                                   : "x" + std::to_string(col + 1);
      if (std::find(centered.zero_variance.begin(), centered.zero_variance.end(),
                    col) != centered.zero_variance.end()) {
        out.warnings.push_back("covariate " + name +
                               " has zero variance; excluded from adjustment");
        continue;
      }
      bool constant_in_arm = false;
      for (const auto* view : {&treated_view, &control_view}) {
        double lo = centered.X(view->cohort_rows.front(), col), hi = lo;
        for (int row : view->cohort_rows) {
          lo = std::min(lo, centered.X(row, col));
          hi = std::max(hi, centered.X(row, col));
        }
        if (lo == hi) constant_in_arm = true;
      }
      if (constant_in_arm) {
        out.warnings.push_back("covariate " + name +
                               " is constant within one arm; excluded from adjustment");
        continue;
      }
      keep.push_back(col);
    }
    const int p = static_cast<int>(keep.size());
    if (p == 0) {
      out.warnings.push_back(
          "no usable covariates; reporting unadjusted inference");
    } else if (treated.n() < p + 2 || control.n() < p + 2) {
      out.warnings.push_back(
          "arm too small to adjust for " + std::to_string(p) +
          " covariate(s); reporting unadjusted inference");
    } else {
      X1 = covariate_rows(centered.X, treated_view.cohort_rows, keep);
      X0 = covariate_rows(centered.X, control_view.cohort_rows, keep);
      adjust_usable = true;
    }
  }

  for (Estimand estimand : estimand_list(choice)) {
    out.results.push_back(unadjusted_inference(treated, control, estimand,
                                               config.tau, config.alpha));
    if (!adjust_requested) continue;
    if (adjust_usable) {
      out.results.push_back(adjusted_inference(treated, control, X1, X0,
                                               estimand, config.tau,
                                               config.alpha));
    } else {
      InferenceResult downgraded = unadjusted_inference(
          treated, control, estimand, config.tau, config.alpha);
      downgraded.warnings = out.warnings;
      out.results.push_back(std::move(downgraded));
    }
  }
  return out;
}

}  // namespace aucmcf
