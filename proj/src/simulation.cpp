#include "aucmcf/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <sstream>
#include <thread>

#include "aucmcf/inference.hpp"
#include "aucmcf/normal.hpp"
#include "aucmcf/randomization.hpp"

namespace aucmcf {

namespace {

constexpr double kBaselineSlope = 0.48;   // rho0(t) = kBaselineSlope * t
constexpr double kEventCovariateCoef = 0.2;
constexpr double kGapCovariateCoef = 0.18;
constexpr double kGapShift = 0.60;
constexpr double kGapNoiseMean = 0.62;
constexpr double kDeathOffsetYears = 5.0 / 365.0;
constexpr double kDeathRateScale = 0.05;
constexpr double kDeathCovariateCoef = 0.1;
constexpr double kFollowupCap = 2.0;
constexpr double kRmstCovariateCoef = 0.5;

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t replicate_seed(std::uint64_t base_seed, std::uint64_t replicate) {
  // Counter construction: mix the base seed once, fold in the replicate
  // counter scaled by the SplitMix64 increment, and mix again.
  return mix64(mix64(base_seed) ^ ((replicate + 1) * 0x9e3779b97f4a7c15ULL));
}

double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double draw_exponential(std::mt19937_64& rng, double mean) {
  // 1 - U lies in (0, 1], so the log is finite.
  return -mean * std::log(1.0 - draw_unit(rng));
}

double draw_normal(std::mt19937_64& rng) {
  // Box-Muller, uncached so that the draw count per call is fixed.
  const double u1 = 1.0 - draw_unit(rng);  // (0, 1]
  const double u2 = draw_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Eigen::MatrixXd gen_baseline(int n, std::mt19937_64& rng) {
  Eigen::MatrixXd X(n, 3);
  for (int i = 0; i < n; ++i) X(i, 0) = draw_unit(rng) < 0.5 ? 1.0 : 0.0;
  for (int i = 0; i < n; ++i) X(i, 1) = 2.0 * draw_normal(rng);
  for (int i = 0; i < n; ++i) X(i, 2) = 2.0 * draw_normal(rng);
  return X;
}

Eigen::MatrixXd gen_rmst_baseline(int n, std::mt19937_64& rng) {
  Eigen::MatrixXd X(n, 3);
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < n; ++i) X(i, k) = draw_normal(rng);
  }
  return X;
}

DeathCensor gen_death_censor(const Eigen::MatrixXd& X, std::mt19937_64& rng) {
  const int n = static_cast<int>(X.rows());
  DeathCensor dc;
  dc.death.resize(n);
  dc.censor.resize(n);
  dc.followup.resize(n);
  dc.terminal.resize(n);
  for (int i = 0; i < n; ++i) {
    const double rate =
        kDeathRateScale * std::exp(kDeathCovariateCoef * X.row(i).sum());
    dc.death[i] = kDeathOffsetYears + draw_exponential(rng, 1.0 / rate);
  }
  for (int i = 0; i < n; ++i) dc.censor[i] = 1.0 + draw_unit(rng);
  for (int i = 0; i < n; ++i) {
    const double censor_cap = std::min(dc.censor[i], kFollowupCap);
    dc.followup[i] = std::min(dc.death[i], censor_cap);
    dc.terminal[i] = dc.death[i] <= censor_cap ? 1 : 0;
  }
  return dc;
}

DeathCensor gen_rmst_case(int case_id, double theta,
                          const std::vector<int>& arm,
                          const Eigen::MatrixXd& X, std::mt19937_64& rng) {
  const int n = static_cast<int>(X.rows());
  DeathCensor dc;
  dc.death.resize(n);
  dc.censor.resize(n);
  dc.followup.resize(n);
  dc.terminal.resize(n);
  for (int i = 0; i < n; ++i) {
    const double lin = kRmstCovariateCoef * X.row(i).sum();
    if (case_id == 1) {
      const double hazard = std::log(2.0) * std::exp(-theta * arm[i] + lin);
      dc.death[i] = draw_exponential(rng, 1.0 / hazard);
    } else {
      dc.death[i] =
          std::exp(theta * arm[i] + lin) + draw_exponential(rng, 1.0);
    }
  }
  for (int i = 0; i < n; ++i) dc.censor[i] = 10.0 + 30.0 * draw_unit(rng);
  for (int i = 0; i < n; ++i) {
    dc.followup[i] = std::min(dc.death[i], dc.censor[i]);
    dc.terminal[i] = dc.death[i] <= dc.censor[i] ? 1 : 0;
  }
  return dc;
}

double theta_profile(int case_id, double theta, double t) {
  switch (case_id) {
    case 1: return theta;
    case 2: return -0.25 * theta * t * t + theta * t;
    case 3: return -theta * t * t + 2.0 * theta * t;
    case 4: return -0.25 * theta * t * t + theta;
    default: throw UsageError("invalid recurrent-event case");
  }
}

double intensity_envelope(int case_id, double theta, int arm, double offset,
                          double T) {
  const auto lambda = [&](double t) {
    return kBaselineSlope * t *
           std::exp(theta_profile(case_id, theta, t) * arm + offset);
  };
  double best = lambda(T);
  if (arm != 0) {
    // Exponent is a + b t + c t^2 in t; interior critical points of
    // log lambda = log t + (exponent) solve 2 c t^2 + b t + 1 = 0.
    double b = 0.0, c = 0.0;
    switch (case_id) {
      case 1: break;
      case 2: b = theta; c = -0.25 * theta; break;
      case 3: b = 2.0 * theta; c = -theta; break;
      case 4: c = -0.25 * theta; break;
      default: throw UsageError("invalid recurrent-event case");
    }
    const auto consider = [&](double t) {
      if (t > 0.0 && t < T) best = std::max(best, lambda(t));
    };
    if (c != 0.0) {
      const double disc = b * b - 8.0 * c;
      if (disc >= 0.0) {
        const double root = std::sqrt(disc);
        consider((-b + root) / (4.0 * c));
        consider((-b - root) / (4.0 * c));
      }
    } else if (b < 0.0) {
      consider(-1.0 / b);
    }
  }
  return best;
}

EventList gen_recurrent(int case_id, double theta, const std::vector<int>& arm,
                        const Eigen::MatrixXd& X,
                        const Eigen::VectorXd& exposure, std::mt19937_64& rng) {
  const int n = static_cast<int>(X.rows());
  EventList events;
  for (int i = 0; i < n; ++i) {
    const double T = exposure[i];
    if (!(T > 0.0)) continue;
    const double offset = kEventCovariateCoef * X.row(i).sum();
    const double M = intensity_envelope(case_id, theta, arm[i], offset, T);
    // Thinning: homogeneous candidates at rate M on (0, T), each kept with
    // probability lambda(t) / M (exact because M is the true supremum).
    double t = 0.0;
    while (true) {
      t += draw_exponential(rng, 1.0 / M);
      if (!(t < T)) break;
      const double lam =
          kBaselineSlope * t *
          std::exp(theta_profile(case_id, theta, t) * arm[i] + offset);
      if (draw_unit(rng) < lam / M) {
        events.subject.push_back(i);
        events.time.push_back(t);
      }
    }
  }
  return events;
}

EventList gen_recurrent_gap(double theta, const std::vector<int>& arm,
                            const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& exposure,
                            std::mt19937_64& rng) {
  const int n = static_cast<int>(X.rows());
  EventList events;
  for (int i = 0; i < n; ++i) {
    const double det = std::exp(-theta * arm[i] +
                                kGapCovariateCoef * X.row(i).sum() - kGapShift);
    double v = 0.0;
    while (true) {
      v += det + draw_exponential(rng, kGapNoiseMean);
      if (!(v < exposure[i])) break;
      events.subject.push_back(i);
      events.time.push_back(v);
    }
  }
  return events;
}

void ScenarioSpec::validate() const {
  const int max_case = endpoint == Endpoint::auc ? 5 : 2;
  if (case_id < 1 || case_id > max_case) {
    throw UsageError("invalid case " + std::to_string(case_id) + " for endpoint " +
                     to_string(endpoint));
  }
  if (n < 2) throw UsageError("n must be at least 2");
  if (replicates < 1) throw UsageError("replicates must be at least 1");
  if (!(tau > 0.0)) throw UsageError("tau must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must be in (0,1)");
  if (threads < 0) throw UsageError("threads must be nonnegative");
  if (!std::isfinite(theta)) throw UsageError("theta must be finite");
}

ScenarioSpec scenario_from_config(std::istream& in) {
  ScenarioSpec spec;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    if (strip(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("scenario config line " + std::to_string(line_no) +
                      " is not key = value");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    try {
      if (key == "endpoint") {
        if (value == "auc") spec.endpoint = Endpoint::auc;
        else if (value == "rmst") spec.endpoint = Endpoint::rmst;
        else throw DataError("endpoint must be auc or rmst");
      } else if (key == "scheme") {
        if (value == "simple") spec.scheme = Scheme::simple;
        else if (value == "spb") spec.scheme = Scheme::spb;
        else throw DataError("scheme must be simple or spb");
      } else if (key == "case") {
        spec.case_id = std::stoi(value);
      } else if (key == "theta") {
        spec.theta = std::stod(value);
      } else if (key == "n") {
        spec.n = std::stoi(value);
      } else if (key == "tau") {
        spec.tau = std::stod(value);
      } else if (key == "replicates") {
        spec.replicates = std::stoi(value);
      } else if (key == "seed") {
        spec.base_seed = std::stoull(value);
      } else if (key == "alpha") {
        spec.alpha = std::stod(value);
      } else if (key == "threads") {
        spec.threads = std::stoi(value);
      } else {
        throw DataError("unknown scenario key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw DataError("bad value for scenario key '" + key + "' on line " +
                      std::to_string(line_no));
    } catch (const std::out_of_range&) {
      throw DataError("bad value for scenario key '" + key + "' on line " +
                      std::to_string(line_no));
    }
  }
  spec.validate();
  return spec;
}

namespace {

// Splits generated cohort-level arrays into one arm's flattened sample.
ArmSample<double> build_arm_sample(int arm_label, const std::vector<int>& arm,
                                   const DeathCensor& dc,
                                   const EventList& events,
                                   std::vector<int>& cohort_rows) {
  const int n = static_cast<int>(arm.size());
  cohort_rows.clear();
  std::vector<int> local(n, -1);
  std::vector<double> followup;
  ArmSample<double> sample;
  for (int i = 0; i < n; ++i) {
    if (arm[i] != arm_label) continue;
    local[i] = static_cast<int>(cohort_rows.size());
    cohort_rows.push_back(i);
    followup.push_back(dc.followup[i]);
    sample.terminal.push_back(dc.terminal[i]);
  }
  std::vector<double> etime;
  for (size_t k = 0; k < events.subject.size(); ++k) {
    const int i = events.subject[k];
    if (arm[i] != arm_label) continue;
    sample.event_subject.push_back(local[i]);
    etime.push_back(events.time[k]);
  }
  sample.followup = Eigen::Map<const Eigen::VectorXd>(
      followup.data(), static_cast<Eigen::Index>(followup.size()));
  sample.event_time = Eigen::Map<const Eigen::VectorXd>(
      etime.data(), static_cast<Eigen::Index>(etime.size()));
  return sample;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& X,
                            const std::vector<int>& rows) {
  Eigen::MatrixXd out(rows.size(), X.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(i) = X.row(rows[i]);
  return out;
}

}  // namespace

ReplicateResult run_replicate(const ScenarioSpec& spec,
                              std::uint64_t replicate) {
  ReplicateResult res;
  try {
    std::mt19937_64 rng(replicate_seed(spec.base_seed, replicate));

    Eigen::MatrixXd X = spec.endpoint == Endpoint::auc
                            ? gen_baseline(spec.n, rng)
                            : gen_rmst_baseline(spec.n, rng);
    std::vector<int> arm;
    if (spec.scheme == Scheme::simple) {
      arm = simple_randomize(spec.n, 0.5, rng);
    } else {
      Eigen::VectorXd x_binary;
      if (spec.endpoint == Endpoint::auc) {
        x_binary = X.col(0);
      } else {
        // Continuous first covariate: dichotomize at its population median 0.
        x_binary = (X.col(0).array() >= 0.0).cast<double>();
      }
      const Eigen::VectorXd x_cont = X.col(1);
      arm = spb_randomize<double>(x_binary, x_cont, rng);
    }

    DeathCensor dc;
    EventList events;
    if (spec.endpoint == Endpoint::auc) {
      dc = gen_death_censor(X, rng);
      if (spec.case_id == 5) {
        events = gen_recurrent_gap(spec.theta, arm, X, dc.followup, rng);
      } else {
        events = gen_recurrent(spec.case_id, spec.theta, arm, X, dc.followup,
                               rng);
      }
    } else {
      dc = gen_rmst_case(spec.case_id, spec.theta, arm, X, rng);
    }

    std::vector<int> rows1, rows0;
    ArmSample<double> s1 = build_arm_sample(1, arm, dc, events, rows1);
    ArmSample<double> s0 = build_arm_sample(0, arm, dc, events, rows0);

    const ArmAnalysis<double> treated = analyze_arm(
        std::move(s1), spec.tau, spec.endpoint, HorizonPolicy::flat_extension);
    const ArmAnalysis<double> control = analyze_arm(
        std::move(s0), spec.tau, spec.endpoint, HorizonPolicy::flat_extension);

    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const Eigen::MatrixXd X1 = select_rows(Xc, rows1);
    const Eigen::MatrixXd X0 = select_rows(Xc, rows0);

    for (Estimand estimand : {Estimand::difference, Estimand::ratio}) {
      const int base =
          estimand == Estimand::difference ? cell_diff_unadj : cell_ratio_unadj;
      const int which = estimand == Estimand::difference ? 0 : 1;
      const InferenceResult unadj = unadjusted_inference(
          treated, control, estimand, spec.tau, spec.alpha);
      const AdjustedComputation adj = adjusted_inference_detail(
          treated, control, X1, X0, estimand, spec.tau, spec.alpha);
      if (adj.sigma2_CL > adj.sigma2_L) {
        throw NumericError("adjusted variance exceeded unadjusted variance");
      }
      res.point[base] = unadj.point;
      res.se[base] = unadj.se;
      res.point[base + 1] = adj.result.point;
      res.se[base + 1] = adj.result.se;
      res.sigma2_L[which] = adj.sigma2_L;
      res.sigma2_CL[which] = adj.sigma2_CL;
    }
    res.events_per_subject =
        static_cast<double>(events.subject.size()) / spec.n;
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  return res;
}

SummaryTable run_study(const ScenarioSpec& spec,
                       std::vector<ReplicateResult>* replicate_dump) {
  spec.validate();
  const int reps = spec.replicates;
  std::vector<ReplicateResult> results(reps);

  int threads = spec.threads;
  if (threads == 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
  }
  threads = std::min(threads, reps);
  if (threads <= 1) {
    for (int r = 0; r < reps; ++r) {
      results[r] = run_replicate(spec, static_cast<std::uint64_t>(r));
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (int r = t; r < reps; r += threads) {
          results[r] = run_replicate(spec, static_cast<std::uint64_t>(r));
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  SummaryTable table;
  table.spec = spec;
  for (const ReplicateResult& r : results) {
    if (r.ok) {
      ++table.replicates_used;
    } else {
      ++table.replicates_failed;
      if (table.failure_messages.size() < 5) {
        table.failure_messages.push_back(r.error);
      }
    }
  }
  if (table.replicates_failed > 0.01 * reps || table.replicates_used == 0) {
    std::ostringstream os;
    os << "replicate failures exceed 1% (" << table.replicates_failed << " of "
       << reps << ")";
    for (const std::string& msg : table.failure_messages) os << "; " << msg;
    throw NumericError(os.str());
  }

  const double zq = normal_quantile(1.0 - spec.alpha / 2.0);
  for (int cell = 0; cell < 4; ++cell) {
    const int unadj_cell = cell < 2 ? cell_diff_unadj : cell_ratio_unadj;
    double est = 0.0;
    for (const auto& r : results) {
      if (r.ok) est += r.point[unadj_cell];
    }
    est /= table.replicates_used;

    std::vector<double> ses;
    ses.reserve(table.replicates_used);
    double mean_pt = 0.0, mean_se = 0.0;
    int covered = 0, rejected = 0;
    for (const auto& r : results) {
      if (!r.ok) continue;
      const double pt = r.point[cell], se = r.se[cell];
      mean_pt += pt;
      mean_se += se;
      ses.push_back(se);
      if (pt - zq * se <= est && est <= pt + zq * se) ++covered;
      if (std::abs(pt / se) > zq) ++rejected;
    }
    const int used = table.replicates_used;
    mean_pt /= used;
    mean_se /= used;
    double ss = 0.0;
    for (const auto& r : results) {
      if (r.ok) ss += (r.point[cell] - mean_pt) * (r.point[cell] - mean_pt);
    }
    std::sort(ses.begin(), ses.end());
    CellSummary& c = table.cells[cell];
    c.est = est;
    c.bias = mean_pt - est;
    c.mean_se = mean_se;
    c.median_se = used % 2 == 1
                      ? ses[used / 2]
                      : 0.5 * (ses[used / 2 - 1] + ses[used / 2]);
    c.mc_sd = used > 1 ? std::sqrt(ss / (used - 1)) : 0.0;
    c.cp = 100.0 * covered / used;
    c.power = 100.0 * rejected / used;
  }

  if (replicate_dump) *replicate_dump = std::move(results);
  return table;
}

std::string format_double(double x, int digits) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (digits >= 0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
  }
  char buf[64];
  const auto out = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, out.ptr);
}

std::string summary_to_csv(const SummaryTable& table, int digits) {
  std::ostringstream os;
  os << "estimand,adjusted,Est,Bias,Mean,Median,MC,CP,Power\n";
  for (int cell = 0; cell < 4; ++cell) {
    const CellSummary& c = table.cells[cell];
    os << (cell < 2 ? "difference" : "ratio") << ','
       << (cell % 2 == 1 ? 1 : 0) << ',' << format_double(c.est, digits) << ','
       << format_double(c.bias, digits) << ','
       << format_double(c.mean_se, digits) << ','
       << format_double(c.median_se, digits) << ','
       << format_double(c.mc_sd, digits) << ',' << format_double(c.cp, digits)
       << ',' << format_double(c.power, digits) << '\n';
  }
  return os.str();
}

std::string summary_to_json(const SummaryTable& table, int digits) {
  const auto num = [&](double x) { return format_double(x, digits); };
  std::ostringstream os;
  const ScenarioSpec& s = table.spec;
  os << "{\n  \"scenario\": {"
     << "\"endpoint\": \"" << to_string(s.endpoint) << "\", "
     << "\"case\": " << s.case_id << ", "
     << "\"theta\": " << format_double(s.theta) << ", "
     << "\"n\": " << s.n << ", "
     << "\"scheme\": \"" << to_string(s.scheme) << "\", "
     << "\"tau\": " << format_double(s.tau) << ", "
     << "\"replicates\": " << s.replicates << ", "
     << "\"seed\": " << s.base_seed << ", "
     << "\"alpha\": " << format_double(s.alpha) << "},\n"
     << "  \"replicates_used\": " << table.replicates_used << ",\n"
     << "  \"replicates_failed\": " << table.replicates_failed << ",\n"
     << "  \"cells\": [\n";
  for (int cell = 0; cell < 4; ++cell) {
    const CellSummary& c = table.cells[cell];
    os << "    {\"estimand\": \"" << (cell < 2 ? "difference" : "ratio")
       << "\", \"adjusted\": " << (cell % 2 == 1 ? "true" : "false")
       << ", \"Est\": " << num(c.est) << ", \"Bias\": " << num(c.bias)
       << ", \"Mean\": " << num(c.mean_se) << ", \"Median\": " << num(c.median_se)
       << ", \"MC\": " << num(c.mc_sd) << ", \"CP\": " << num(c.cp)
       << ", \"Power\": " << num(c.power) << "}" << (cell < 3 ? "," : "")
       << "\n";
  }
  os << "  ]\n}\n";
  return os.str();
}

std::string replicates_to_csv(const std::vector<ReplicateResult>& rows,
                              int digits) {
  std::ostringstream os;
  os << "replicate,ok";
  for (int cell = 0; cell < 4; ++cell) {
    os << ',' << cell_name(cell) << "_point," << cell_name(cell) << "_se";
  }
  os << ",sigma2_L_diff,sigma2_CL_diff,sigma2_L_ratio,sigma2_CL_ratio,"
        "events_per_subject,error\n";
  for (size_t r = 0; r < rows.size(); ++r) {
    const ReplicateResult& row = rows[r];
    os << r << ',' << (row.ok ? 1 : 0);
    for (int cell = 0; cell < 4; ++cell) {
      if (row.ok) {
        os << ',' << format_double(row.point[cell], digits) << ','
           << format_double(row.se[cell], digits);
      } else {
        os << ",,";
      }
    }
    if (row.ok) {
      os << ',' << format_double(row.sigma2_L[0], digits) << ','
         << format_double(row.sigma2_CL[0], digits) << ','
         << format_double(row.sigma2_L[1], digits) << ','
         << format_double(row.sigma2_CL[1], digits) << ','
         << format_double(row.events_per_subject, digits) << ',';
    } else {
      os << ",,,,,,";
    }
    std::string err = row.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    os << err << '\n';
  }
  return os.str();
}

}  // namespace aucmcf
