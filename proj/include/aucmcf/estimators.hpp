#pragma once
// Per-arm nonparametric estimators for recurrent events with a terminal event.
//
// Notation (one treatment arm, subjects i = 1..m):
//   T_i      observed follow-up, delta_i death indicator at T_i
//   N_i(t)   recurrent-event counting process, observed on (0, T_i]
//   Y(u)     risk-set size #{i : T_i >= u}
//   dA^D(u)  terminal-event (death) hazard increment: deaths(u) / Y(u)
//   S(u)     Kaplan-Meier survival, right-continuous product-limit estimate;
//            the left limit S(u-) estimates P(D >= u)
//   dR(u)    recurrent-event rate increment: sum_i dN_i(u) / Y(u)
//   mu(t)    mean cumulative function  sum_{u_k <= t} S(u_k-) dR(u_k)
//   U(tau)   area under mu on [0, tau]:
//            AUC  form: sum_{u_k <= tau} (tau - u_k) S(u_k-) dR(u_k)
//            RMST form: integral of S itself (for survival-only analyses)
//
// All integrals are exact sums over observed step functions; there is no
// discretization grid and no tolerance anywhere in this header.

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aucmcf/types.hpp"

namespace aucmcf {

// One arm's numeric data. Events are stored flattened: event k belongs to
// subject event_subject[k] (an index into followup) and happened at
// event_time[k]. No ordering is assumed.
template <typename Scalar>
struct ArmSample {
  Eigen::VectorX<Scalar> followup;
  std::vector<std::uint8_t> terminal;
  std::vector<int> event_subject;
  Eigen::VectorX<Scalar> event_time;

  int size() const { return static_cast<int>(followup.size()); }
};

// A right-continuous step function: value(t) = values[k] for the largest k
// with times[k] <= t, and `initial` for t < times[0].
template <typename Scalar>
struct StepFunction {
  Scalar initial{};
  Eigen::VectorX<Scalar> times;   // strictly increasing
  Eigen::VectorX<Scalar> values;  // value on [times[k], times[k+1])

  Scalar value_at(Scalar t) const {
    const Scalar* beg = times.data();
    const Scalar* end = beg + times.size();
    auto it = std::upper_bound(beg, end, t);
    if (it == beg) return initial;
    return values[static_cast<Eigen::Index>(it - beg) - 1];
  }

  // Left limit value(t-): only jumps strictly before t count.
  Scalar value_at_left(Scalar t) const {
    const Scalar* beg = times.data();
    const Scalar* end = beg + times.size();
    auto it = std::lower_bound(beg, end, t);
    if (it == beg) return initial;
    return values[static_cast<Eigen::Index>(it - beg) - 1];
  }

  // Tabular (time, value) text for plotting, one knot per line.
  std::string to_table() const {
    std::ostringstream os;
    os.precision(17);
    os << "time,value\n";
    for (Eigen::Index k = 0; k < times.size(); ++k) {
      os << times[k] << "," << values[k] << "\n";
    }
    return os.str();
  }
};

// All per-arm estimator ingredients, evaluated at the distinct observed
// recurrent-event times and death times of the arm.
template <typename Scalar>
struct ArmEstimators {
  int n_arm = 0;
  Eigen::VectorX<Scalar> sorted_followup;  // ascending copy of T_i

  // Distinct recurrent-event times (ascending) and aligned quantities.
  Eigen::VectorX<Scalar> event_times;
  Eigen::VectorX<Scalar> rate_increments;     // dR(u_k)
  Eigen::VectorX<Scalar> surv_left_events;    // S(u_k-)
  Eigen::VectorX<Scalar> mcf_increments;      // d mu(u_k) = S(u_k-) dR(u_k)
  Eigen::VectorX<Scalar> mcf_values;          // mu(u_k), cumulative

  // Distinct death times (ascending) and aligned quantities.
  Eigen::VectorX<Scalar> death_times;
  Eigen::VectorX<Scalar> terminal_increments;  // dA^D(d_k)
  Eigen::VectorX<Scalar> surv_left_deaths;     // S(d_k-)
  Eigen::VectorX<Scalar> surv_at_deaths;       // S(d_k)

  // Y(u) = #{ T_i >= u }.
  int risk_at(Scalar u) const {
    const Scalar* beg = sorted_followup.data();
    const Scalar* end = beg + sorted_followup.size();
    return n_arm - static_cast<int>(std::lower_bound(beg, end, u) - beg);
  }

  Scalar max_followup() const {
    return n_arm == 0 ? Scalar(0) : sorted_followup[n_arm - 1];
  }

  // Kaplan-Meier survival as a right-continuous step function.
  StepFunction<Scalar> survival() const {
    return StepFunction<Scalar>{Scalar(1), death_times, surv_at_deaths};
  }

  // Mean cumulative function as a right-continuous step function.
  StepFunction<Scalar> mcf() const {
    return StepFunction<Scalar>{Scalar(0), event_times, mcf_values};
  }
};

namespace detail {

// Distinct sorted values of `x` with multiplicities.
template <typename Scalar>
void distinct_counts(std::vector<Scalar> x, Eigen::VectorX<Scalar>& uniq,
                     std::vector<int>& count) {
  std::sort(x.begin(), x.end());
  std::vector<Scalar> u;
  count.clear();
  for (const Scalar& v : x) {
    if (u.empty() || v != u.back()) {
      u.push_back(v);
      count.push_back(1);
    } else {
      ++count.back();
    }
  }
  uniq = Eigen::Map<const Eigen::VectorX<Scalar>>(u.data(),
                                                  static_cast<Eigen::Index>(u.size()));
}

// Index of the first element of the sorted vector expression `v` that is
// >= t, as an Eigen::Index.  Requires a contiguous expression (vector or
// head/segment of one).
template <typename Derived>
Eigen::Index first_geq(const Eigen::DenseBase<Derived>& v,
                       typename Derived::Scalar t) {
  const auto* beg = v.derived().data();
  return std::lower_bound(beg, beg + v.size(), t) - beg;
}

// Index one past the last element <= t.
template <typename Derived>
Eigen::Index first_greater(const Eigen::DenseBase<Derived>& v,
                           typename Derived::Scalar t) {
  const auto* beg = v.derived().data();
  return std::upper_bound(beg, beg + v.size(), t) - beg;
}

}  // namespace detail

// Builds every per-arm estimator in one pass: Kaplan-Meier survival (with left
// limits at both event and death times), Nelson-Aalen rate increments for the
// recurrent process, the terminal-event hazard increments, and the MCF.
template <typename Scalar>
ArmEstimators<Scalar> fit_arm_estimators(const ArmSample<Scalar>& arm) {
  ArmEstimators<Scalar> est;
  const int m = arm.size();
  if (m == 0) throw DataError("empty arm");
  est.n_arm = m;

  est.sorted_followup = arm.followup;
  std::sort(est.sorted_followup.data(), est.sorted_followup.data() + m);

  // Terminal process: distinct death times, hazard increments, KM curve.
  std::vector<Scalar> death_raw;
  for (int i = 0; i < m; ++i) {
    if (arm.terminal[i]) death_raw.push_back(arm.followup[i]);
  }
  std::vector<int> death_count;
  detail::distinct_counts(death_raw, est.death_times, death_count);
  const Eigen::Index nd = est.death_times.size();
  est.terminal_increments.resize(nd);
  est.surv_left_deaths.resize(nd);
  est.surv_at_deaths.resize(nd);
  Scalar surv = Scalar(1);
  for (Eigen::Index k = 0; k < nd; ++k) {
    const int y = est.risk_at(est.death_times[k]);
    est.surv_left_deaths[k] = surv;
    est.terminal_increments[k] = Scalar(death_count[k]) / Scalar(y);
    surv *= Scalar(1) - est.terminal_increments[k];
    est.surv_at_deaths[k] = surv;
  }

  // Recurrent process: distinct event times, rate increments, MCF.
  std::vector<Scalar> event_raw(arm.event_time.data(),
                                arm.event_time.data() + arm.event_time.size());
  std::vector<int> event_count;
  detail::distinct_counts(event_raw, est.event_times, event_count);
  const Eigen::Index ne = est.event_times.size();
  est.rate_increments.resize(ne);
  est.surv_left_events.resize(ne);
  est.mcf_increments.resize(ne);
  est.mcf_values.resize(ne);
  Scalar cum = Scalar(0);
  for (Eigen::Index k = 0; k < ne; ++k) {
    const Scalar u = est.event_times[k];
    const int y = est.risk_at(u);
    // S(u-) = product over deaths strictly before u; deaths at u do not count.
    const Eigen::Index dk = detail::first_geq(est.death_times, u);
    est.surv_left_events[k] = dk == 0 ? Scalar(1) : est.surv_at_deaths[dk - 1];
    est.rate_increments[k] = Scalar(event_count[k]) / Scalar(y);
    est.mcf_increments[k] = est.surv_left_events[k] * est.rate_increments[k];
    cum += est.mcf_increments[k];
    est.mcf_values[k] = cum;
  }
  return est;
}

namespace detail {

template <typename Scalar>
void require_horizon(const ArmEstimators<Scalar>& est, Scalar tau,
                     HorizonPolicy policy) {
  if (policy == HorizonPolicy::strict && tau > est.max_followup()) {
    throw NumericError("horizon beyond observed risk");
  }
}

}  // namespace detail

// Area under the MCF: U(tau) = sum_{u_k <= tau} (tau - u_k) S(u_k-) dR(u_k).
// Equals the exact step-function integral of mu over [0, tau].
template <typename Scalar>
Scalar auc(const ArmEstimators<Scalar>& est, Scalar tau,
           HorizonPolicy policy = HorizonPolicy::strict) {
  detail::require_horizon(est, tau, policy);
  Scalar total = Scalar(0);
  const Eigen::Index stop = detail::first_greater(est.event_times, tau);
  for (Eigen::Index k = 0; k < stop; ++k) {
    total += (tau - est.event_times[k]) * est.mcf_increments[k];
  }
  return total;
}

// Restricted mean survival time: the exact integral of the right-continuous
// Kaplan-Meier curve over [0, tau].
template <typename Scalar>
Scalar rmst(const ArmEstimators<Scalar>& est, Scalar tau,
            HorizonPolicy policy = HorizonPolicy::strict) {
  detail::require_horizon(est, tau, policy);
  Scalar total = Scalar(0);
  Scalar level = Scalar(1);
  Scalar last = Scalar(0);
  for (Eigen::Index k = 0; k < est.death_times.size(); ++k) {
    const Scalar d = est.death_times[k];
    if (d >= tau) break;
    total += level * (d - last);
    level = est.surv_at_deaths[k];
    last = d;
  }
  total += level * (tau - last);
  return total;
}

}  // namespace aucmcf
