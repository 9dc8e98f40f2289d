#pragma once
// Shared enums, configuration records, and the error taxonomy.
//
// Error classes map one-to-one onto CLI exit codes:
//   UsageError  -> 1 (bad flags / invalid scenario combination)
//   DataError   -> 2 (malformed or inconsistent input data)
//   NumericError-> 3 (estimator degeneracy, e.g. horizon beyond observed risk)

#include <stdexcept>
#include <string>

namespace aucmcf {

enum class Estimand { difference, ratio };
enum class EstimandChoice { difference, ratio, both };
enum class Endpoint { auc, rmst };
enum class Scheme { simple, spb };

// What to do when the analysis horizon tau exceeds the arm's largest observed
// follow-up.  `strict` raises the "horizon beyond observed risk" error (the
// default for user-supplied data, where a horizon past the risk set is almost
// always a mistake).  `flat_extension` keeps every step function constant past
// the last observation, the convention needed when a design caps follow-up at
// the horizon but continuous censoring stops just short of it almost surely.
enum class HorizonPolicy { strict, flat_extension };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Analysis configuration shared by the library entry points and the CLI.
struct AnalysisConfig {
  double tau = 0.0;       // horizon; must be > 0
  double alpha = 0.05;    // two-sided significance level in (0,1)
  Endpoint endpoint = Endpoint::auc;

  void validate() const {
    if (!(tau > 0.0)) throw DataError("tau must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must be in (0,1)");
  }
};

inline std::string to_string(Estimand e) {
  return e == Estimand::difference ? "difference" : "ratio";
}
inline std::string to_string(Endpoint e) {
  return e == Endpoint::auc ? "auc" : "rmst";
}
inline std::string to_string(Scheme s) {
  return s == Scheme::simple ? "simple" : "spb";
}

}  // namespace aucmcf
