#pragma once
// Subject-level recurrent-event data: validated records, CSV ingestion and
// serialization, pooled covariate centering, and risk-set queries.
//
// File formats (comma-separated, UTF-8, header row required):
//   subjects: id,arm,followup,terminal,<covariate columns...>
//   events:   id,time
// Every events row must reference a subjects id.  Validation failures are
// reported with the 1-based physical line number (the header is line 1).

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "aucmcf/estimators.hpp"
#include "aucmcf/types.hpp"

namespace aucmcf {

struct SubjectRecord {
  std::string id;
  int arm = 0;         // 1 = treatment
  double followup = 0;  // T_i = min(death, censoring)
  int terminal = 0;     // 1 = death observed at followup
  std::vector<double> events;  // strictly increasing, within [0, followup]
  Eigen::VectorXd covariates;
};

struct Cohort {
  std::vector<SubjectRecord> subjects;
  int p = 0;  // covariate dimension, shared by all subjects
  std::vector<std::string> covariate_names;

  int n() const { return static_cast<int>(subjects.size()); }
  int n_arm(int arm) const;
};

struct CenteredCovariates {
  Eigen::MatrixXd X;            // n x p, pooled-centered
  Eigen::RowVectorXd means;     // pooled column means of the raw covariates
  std::vector<int> zero_variance;  // column indices with zero pooled variance
};

// Validates one record's internal invariants (event ordering and bounds,
// terminal/recurrence tie exclusion, flag domains).  Throws DataError.
void validate_record(const SubjectRecord& record);

// Validates cross-record invariants (unique ids, shared covariate dimension).
void validate_cohort(const Cohort& cohort);

// Parses and validates the two-file representation described above.
Cohort ingest_cohort(std::istream& subjects_file, std::istream& events_file);

// Writes the cohort in the same two-file representation at full precision,
// so that ingest(serialize(c)) reproduces c exactly.
void serialize_cohort(const Cohort& cohort, std::ostream& subjects_file,
                      std::ostream& events_file);

// Pooled-mean centering across both arms; flags zero-variance columns.
CenteredCovariates center_covariates(const Cohort& cohort);

// Number of subjects still at risk at u, i.e. with followup >= u.
int risk_set_count(const std::vector<SubjectRecord>& records, double u);

// One arm of a cohort in the flattened estimator layout, plus the cohort row
// index of each of the arm's subjects (for covariate alignment).
struct ArmView {
  ArmSample<double> sample;
  std::vector<int> cohort_rows;
};

// Splits a cohort into treated (arm 1) and control (arm 0) views.
std::pair<ArmView, ArmView> split_arms(const Cohort& cohort);

// Rows of a centered covariate matrix for one arm, keeping only the listed
// columns.
Eigen::MatrixXd covariate_rows(const Eigen::MatrixXd& X,
                               const std::vector<int>& cohort_rows,
                               const std::vector<int>& keep_columns);

}  // namespace aucmcf
