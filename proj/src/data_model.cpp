#include "aucmcf/data_model.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace aucmcf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

[[noreturn]] void fail(const std::string& what, const char* file, long line) {
  std::ostringstream os;
  os << what << " (" << file << " row " << line << ")";
  throw DataError(os.str());
}

double parse_double(const std::string& field, const char* file, long line) {
  const std::string t = trim(field);
  if (t.empty()) fail("missing numeric field", file, line);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    fail("non-numeric field '" + t + "'", file, line);
  }
  return v;
}

int parse_binary(const std::string& field, const char* what, const char* file,
                 long line) {
  const std::string t = trim(field);
  if (t == "0") return 0;
  if (t == "1") return 1;
  fail(std::string(what) + " must be 0 or 1, got '" + t + "'", file, line);
}

}  // namespace

int Cohort::n_arm(int arm) const {
  int c = 0;
  for (const auto& s : subjects) c += s.arm == arm ? 1 : 0;
  return c;
}

void validate_record(const SubjectRecord& record) {
  if (record.arm != 0 && record.arm != 1) {
    throw DataError("arm must be 0 or 1 for subject " + record.id);
  }
  if (record.terminal != 0 && record.terminal != 1) {
    throw DataError("terminal must be 0 or 1 for subject " + record.id);
  }
  if (!(record.followup >= 0.0) || !std::isfinite(record.followup)) {
    throw DataError("follow-up must be a nonnegative real for subject " +
                    record.id);
  }
  double prev = -std::numeric_limits<double>::infinity();
  for (double t : record.events) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw DataError("event time must be a nonnegative real for subject " +
                      record.id);
    }
    if (t > record.followup) {
      throw DataError("event after follow-up for subject " + record.id);
    }
    if (t <= prev) {
      throw DataError("tied or decreasing event times within subject " +
                      record.id);
    }
    if (record.terminal == 1 && t == record.followup) {
      throw DataError("recurrent event at the terminal-event time for subject " +
                      record.id);
    }
    prev = t;
  }
}

void validate_cohort(const Cohort& cohort) {
  std::unordered_set<std::string> seen;
  for (const auto& s : cohort.subjects) {
    if (!seen.insert(s.id).second) throw DataError("duplicate id " + s.id);
    if (static_cast<int>(s.covariates.size()) != cohort.p) {
      throw DataError("covariate dimension mismatch for subject " + s.id);
    }
    validate_record(s);
  }
}

Cohort ingest_cohort(std::istream& subjects_file, std::istream& events_file) {
  Cohort cohort;
  std::string line;

  // --- subjects ---
  if (!std::getline(subjects_file, line)) {
    throw DataError("empty subjects file");
  }
  std::vector<std::string> header = split_csv(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "arm" ||
      header[2] != "followup" || header[3] != "terminal") {
    throw DataError("subjects header must start with id,arm,followup,terminal");
  }
  cohort.p = static_cast<int>(header.size()) - 4;
  cohort.covariate_names.assign(header.begin() + 4, header.end());

  std::unordered_map<std::string, int> index;
  long row = 1;
  while (std::getline(subjects_file, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (static_cast<long>(f.size()) != 4 + cohort.p) {
      fail("expected " + std::to_string(4 + cohort.p) + " fields, got " +
               std::to_string(f.size()),
           "subjects", row);
    }
    SubjectRecord rec;
    rec.id = f[0];
    if (rec.id.empty()) fail("empty id", "subjects", row);
    rec.arm = parse_binary(f[1], "arm", "subjects", row);
    rec.followup = parse_double(f[2], "subjects", row);
    rec.terminal = parse_binary(f[3], "terminal", "subjects", row);
    rec.covariates.resize(cohort.p);
    for (int k = 0; k < cohort.p; ++k) {
      rec.covariates[k] = parse_double(f[4 + k], "subjects", row);
    }
    if (!index.emplace(rec.id, cohort.n()).second) {
      fail("duplicate id " + rec.id, "subjects", row);
    }
    cohort.subjects.push_back(std::move(rec));
  }

  // --- events ---
  if (!std::getline(events_file, line)) {
    throw DataError("empty events file");
  }
  header = split_csv(line);
  if (header.size() != 2 || header[0] != "id" || header[1] != "time") {
    throw DataError("events header must be id,time");
  }
  row = 1;
  // Remember each event's source row so post-sort validation can point at it.
  std::vector<std::vector<std::pair<double, long>>> per_subject(
      cohort.subjects.size());
  while (std::getline(events_file, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 2) fail("expected 2 fields", "events", row);
    const auto it = index.find(f[0]);
    if (it == index.end()) fail("unknown id " + f[0], "events", row);
    const double t = parse_double(f[1], "events", row);
    per_subject[it->second].emplace_back(t, row);
  }
  for (size_t i = 0; i < per_subject.size(); ++i) {
    auto& ev = per_subject[i];
    std::sort(ev.begin(), ev.end());
    SubjectRecord& rec = cohort.subjects[i];
    rec.events.reserve(ev.size());
    for (const auto& [t, source_row] : ev) {
      if (t > rec.followup) fail("event after follow-up", "events", source_row);
      if (!rec.events.empty() && t <= rec.events.back()) {
        fail("tied event time within subject " + rec.id, "events", source_row);
      }
      if (rec.terminal == 1 && t == rec.followup) {
        fail("recurrent event at the terminal-event time", "events", source_row);
      }
      rec.events.push_back(t);
    }
  }

  validate_cohort(cohort);
  return cohort;
}

void serialize_cohort(const Cohort& cohort, std::ostream& subjects_file,
                      std::ostream& events_file) {
  subjects_file.precision(std::numeric_limits<double>::max_digits10);
  events_file.precision(std::numeric_limits<double>::max_digits10);
  subjects_file << "id,arm,followup,terminal";
  for (int k = 0; k < cohort.p; ++k) {
    subjects_file << ','
                  << (k < static_cast<int>(cohort.covariate_names.size())
                          ? cohort.covariate_names[k]
                          : "x" + std::to_string(k + 1));
  }
  subjects_file << '\n';
  events_file << "id,time\n";
  for (const auto& s : cohort.subjects) {
    subjects_file << s.id << ',' << s.arm << ',' << s.followup << ','
                  << s.terminal;
    for (int k = 0; k < cohort.p; ++k) subjects_file << ',' << s.covariates[k];
    subjects_file << '\n';
    for (double t : s.events) events_file << s.id << ',' << t << '\n';
  }
}

CenteredCovariates center_covariates(const Cohort& cohort) {
  if (cohort.p == 0) throw DataError("no covariates to adjust for");
  const int n = cohort.n();
  CenteredCovariates out;
  out.X.resize(n, cohort.p);
  for (int i = 0; i < n; ++i) out.X.row(i) = cohort.subjects[i].covariates;
  out.means = out.X.colwise().mean();
  out.X.rowwise() -= out.means;
  for (int k = 0; k < cohort.p; ++k) {
    if (out.X.col(k).cwiseAbs().maxCoeff() == 0.0) {
      out.zero_variance.push_back(k);
    }
  }
  return out;
}

int risk_set_count(const std::vector<SubjectRecord>& records, double u) {
  int c = 0;
  for (const auto& r : records) c += r.followup >= u ? 1 : 0;
  return c;
}

std::pair<ArmView, ArmView> split_arms(const Cohort& cohort) {
  ArmView treated, control;
  for (int arm : {1, 0}) {
    ArmView& view = arm == 1 ? treated : control;
    std::vector<double> followup, event_time;
    std::vector<int> event_subject;
    for (int i = 0; i < cohort.n(); ++i) {
      const SubjectRecord& s = cohort.subjects[i];
      if (s.arm != arm) continue;
      const int local = static_cast<int>(view.cohort_rows.size());
      view.cohort_rows.push_back(i);
      followup.push_back(s.followup);
      view.sample.terminal.push_back(static_cast<uint8_t>(s.terminal));
      for (double t : s.events) {
        event_subject.push_back(local);
        event_time.push_back(t);
      }
    }
    view.sample.followup =
        Eigen::Map<const Eigen::VectorXd>(followup.data(), followup.size());
    view.sample.event_time =
        Eigen::Map<const Eigen::VectorXd>(event_time.data(), event_time.size());
    view.sample.event_subject = std::move(event_subject);
  }
  if (treated.sample.size() == 0 || control.sample.size() == 0) {
    throw DataError("both arms must be nonempty");
  }
  return {std::move(treated), std::move(control)};
}

Eigen::MatrixXd covariate_rows(const Eigen::MatrixXd& X,
                               const std::vector<int>& cohort_rows,
                               const std::vector<int>& keep_columns) {
  Eigen::MatrixXd out(cohort_rows.size(), keep_columns.size());
  for (size_t i = 0; i < cohort_rows.size(); ++i) {
    for (size_t k = 0; k < keep_columns.size(); ++k) {
      out(i, k) = X(cohort_rows[i], keep_columns[k]);
    }
  }
  return out;
}

}  // namespace aucmcf
