#pragma once
// Per-subject influence values for the AUC-of-MCF and RMST estimators.
//
// AUC influence, one arm of size m, horizon tau:
//   psi_i = P_i - Q_i
//   P_i = sum over distinct event times u <= tau of
//           (tau - u) S(u-) / {Y(u)/m} * dM_i(u),
//         dM_i(u) = dN_i(u) - I(T_i >= u) dR(u)
//   Q_i = sum over distinct death times s <= tau of
//           [ sum_{v in (s, tau]} (tau - v) dmu(v) ] / {Y(s)/m} * dM_i^D(s),
//         dM_i^D(s) = dN_i^D(s) - I(T_i >= s) dA^D(s)
//
// Both sums are computed in O((m + #events) log m) via prefix sums: the
// compensator part of dM_i integrates a nonnegative weight over u <= min(T_i,
// tau), so one cumulative array evaluated at min(T_i, tau) serves every
// subject; the dN_i part touches only subject i's own events (or death).
//
// RMST influence (survival-only):
//   psi_i = - sum over death times s <= tau of
//             { integral_s^tau S(u) du } / S(s-) * dM_i^D(s)
// stored with P_i := 0 and Q_i := -psi_i so the downstream covariate
// adjustment treats both endpoints through one code path.

#include <Eigen/Core>

#include "aucmcf/estimators.hpp"
#include "aucmcf/types.hpp"

namespace aucmcf {

template <typename Scalar>
struct InfluenceSet {
  Eigen::VectorX<Scalar> P, Q, psi;
};

template <typename Scalar>
InfluenceSet<Scalar> influence_auc(const ArmSample<Scalar>& arm,
                                   const ArmEstimators<Scalar>& est, Scalar tau,
                                   HorizonPolicy policy = HorizonPolicy::strict) {
  detail::require_horizon(est, tau, policy);
  const int m = arm.size();
  const Scalar ms = Scalar(m);

  // Event-time weights w_k = (tau - u_k) S(u_k-) / (Y(u_k)/m) and the
  // compensator prefix W(t) = sum_{u_k <= t} w_k dR(u_k).
  const Eigen::Index ne = detail::first_greater(est.event_times, tau);
  Eigen::VectorX<Scalar> w(ne), Wcum(ne);
  Scalar wrun = Scalar(0);
  for (Eigen::Index k = 0; k < ne; ++k) {
    const Scalar u = est.event_times[k];
    w[k] = (tau - u) * est.surv_left_events[k] * ms / Scalar(est.risk_at(u));
    wrun += w[k] * est.rate_increments[k];
    Wcum[k] = wrun;
  }

  // Death-time weights g_k = [sum_{v in (d_k, tau]} (tau - v) dmu(v)] /
  // (Y(d_k)/m) and the compensator prefix G(t) = sum_{d_k <= t} g_k dA^D(d_k).
  // The inner sum is a suffix of (tau - v) dmu(v) over event times, evaluated
  // strictly after d_k.
  Eigen::VectorX<Scalar> loss_suffix(ne + 1);
  loss_suffix[ne] = Scalar(0);
  for (Eigen::Index k = ne; k-- > 0;) {
    loss_suffix[k] = loss_suffix[k + 1] +
                     (tau - est.event_times[k]) * est.mcf_increments[k];
  }
  const Eigen::Index nd = detail::first_greater(est.death_times, tau);
  Eigen::VectorX<Scalar> g(nd), Gcum(nd);
  Scalar grun = Scalar(0);
  for (Eigen::Index k = 0; k < nd; ++k) {
    const Scalar s = est.death_times[k];
    const Eigen::Index after = detail::first_greater(est.event_times.head(ne), s);
    g[k] = loss_suffix[after] * ms / Scalar(est.risk_at(s));
    grun += g[k] * est.terminal_increments[k];
    Gcum[k] = grun;
  }

  InfluenceSet<Scalar> out;
  out.P = Eigen::VectorX<Scalar>::Zero(m);
  out.Q = Eigen::VectorX<Scalar>::Zero(m);

  // dN_i parts: each subject's own events / own death.
  for (Eigen::Index e = 0; e < arm.event_time.size(); ++e) {
    const Scalar t = arm.event_time[e];
    if (t > tau) continue;
    const Eigen::Index k = detail::first_geq(est.event_times, t);
    out.P[arm.event_subject[e]] += w[k];
  }
  for (int i = 0; i < m; ++i) {
    const Scalar ti = arm.followup[i];
    if (arm.terminal[i] && ti <= tau) {
      const Eigen::Index k = detail::first_geq(est.death_times, ti);
      out.Q[i] += g[k];
    }
    // Compensator parts: integrate up to min(T_i, tau).
    const Scalar stop = ti < tau ? ti : tau;
    const Eigen::Index ke = detail::first_greater(est.event_times.head(ne), stop);
    if (ke > 0) out.P[i] -= Wcum[ke - 1];
    const Eigen::Index kd = detail::first_greater(est.death_times.head(nd), stop);
    if (kd > 0) out.Q[i] -= Gcum[kd - 1];
  }
  out.psi = out.P - out.Q;
  return out;
}

template <typename Scalar>
InfluenceSet<Scalar> influence_rmst(const ArmSample<Scalar>& arm,
                                    const ArmEstimators<Scalar>& est, Scalar tau,
                                    HorizonPolicy policy = HorizonPolicy::strict) {
  detail::require_horizon(est, tau, policy);
  const int m = arm.size();

  // Suffix areas A_k = integral_{d_k}^{tau} S(u) du over death times <= tau,
  // then r_k = A_k / S(d_k-) and the compensator prefix of r_k dA^D(d_k).
  const Eigen::Index nd = detail::first_greater(est.death_times, tau);
  Eigen::VectorX<Scalar> r(nd), Rcum(nd);
  {
    Scalar area = Scalar(0);
    Scalar upper = tau;
    for (Eigen::Index k = nd; k-- > 0;) {
      // S is constant at surv_at_deaths[k] on [d_k, next death or tau).
      area += est.surv_at_deaths[k] * (upper - est.death_times[k]);
      upper = est.death_times[k];
      if (est.surv_left_deaths[k] <= Scalar(0)) {
        throw NumericError("survival vanished before horizon");
      }
      r[k] = area / est.surv_left_deaths[k];
    }
    Scalar run = Scalar(0);
    for (Eigen::Index k = 0; k < nd; ++k) {
      run += r[k] * est.terminal_increments[k];
      Rcum[k] = run;
    }
  }

  InfluenceSet<Scalar> out;
  out.psi = Eigen::VectorX<Scalar>::Zero(m);
  for (int i = 0; i < m; ++i) {
    const Scalar ti = arm.followup[i];
    Scalar own = Scalar(0);
    if (arm.terminal[i] && ti <= tau) {
      const Eigen::Index k = detail::first_geq(est.death_times, ti);
      own = r[k];
    }
    const Scalar stop = ti < tau ? ti : tau;
    const Eigen::Index kd = detail::first_greater(est.death_times.head(nd), stop);
    const Scalar comp = kd > 0 ? Rcum[kd - 1] : Scalar(0);
    out.psi[i] = -(own - comp);
  }
  // Uniform downstream handling: psi = P - Q with P := 0.
  out.P = Eigen::VectorX<Scalar>::Zero(m);
  out.Q = -out.psi;
  return out;
}

}  // namespace aucmcf
