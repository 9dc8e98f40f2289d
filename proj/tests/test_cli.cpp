#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#ifndef AUCMCF_CLI_PATH
#error "AUCMCF_CLI_PATH must point at the built command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

const std::string kCli = AUCMCF_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string out, err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("aucmcf_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  f << content;
}

RunResult run(const std::string& args) {
  const fs::path out = work_dir() / "cmd_out.txt";
  const fs::path err = work_dir() / "cmd_err.txt";
  const std::string cmd =
      kCli + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n' ? 1 : 0;
  return n;
}

// Twelve subjects, six per arm, three informative covariates, a few deaths,
// and enough events in both arms that every estimand is defined at tau = 1.
fs::path fixture_subjects() {
  static const fs::path p = [] {
    const fs::path path = work_dir() / "subjects.csv";
    spit(path,
         "id,arm,followup,terminal,x1,x2,x3\n"
         "a1,1,1.8,0,1,0.4,-1.2\n"
         "a2,1,1.3,1,0,-0.9,0.3\n"
         "a3,1,2.0,0,1,1.7,0.8\n"
         "a4,1,1.5,0,0,0.2,-0.5\n"
         "a5,1,1.9,1,1,-1.1,1.4\n"
         "a6,1,1.2,0,0,0.8,-2.0\n"
         "b1,0,1.7,0,1,-0.3,0.9\n"
         "b2,0,1.4,1,0,1.2,-0.7\n"
         "b3,0,2.0,0,0,-1.5,1.1\n"
         "b4,0,1.6,0,1,0.6,0.2\n"
         "b5,0,1.1,0,0,-0.2,-1.6\n"
         "b6,0,1.9,1,1,1.0,0.5\n");
    return path;
  }();
  return p;
}

fs::path fixture_events() {
  static const fs::path p = [] {
    const fs::path path = work_dir() / "events.csv";
    spit(path,
         "id,time\n"
         "a1,0.4\n"
         "a1,0.9\n"
         "a3,0.6\n"
         "a4,0.3\n"
         "a5,0.8\n"
         "b1,0.2\n"
         "b2,0.5\n"
         "b3,0.35\n"
         "b4,0.95\n"
         "b6,0.7\n");
    return path;
  }();
  return p;
}

std::string analyze_base() {
  return "analyze --subjects " + fixture_subjects().string() + " --events " +
         fixture_events().string();
}

}  // namespace

TEST_CASE("analyze smoke run emits two unadjusted results as JSON") {
  const RunResult r = run(analyze_base() + " --tau 1 --estimand both");
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.empty());
  const auto doc = nlohmann::json::parse(r.out);
  REQUIRE(doc["results"].size() == 2);
  for (const auto& res : doc["results"]) {
    CHECK(res["adjusted"] == false);
    CHECK(res["tau"] == 1.0);
    CHECK(res["n0"] == 6);
    CHECK(res["n1"] == 6);
    CHECK(res["se"].get<double>() > 0.0);
  }
  CHECK(doc["results"][0]["estimand"] == "difference");
  CHECK(doc["results"][1]["estimand"] == "ratio");
  CHECK(doc["config"]["tau"] == 1.0);
}

TEST_CASE("requesting covariates doubles the result set") {
  const RunResult r =
      run(analyze_base() + " --tau 1 --covariates x1,x2,x3");
  REQUIRE(r.exit_code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  REQUIRE(doc["results"].size() == 4);
  const std::vector<bool> want = {false, true, false, true};
  for (int k = 0; k < 4; ++k) {
    CHECK(doc["results"][k]["adjusted"] == want[k]);
  }
  CHECK(doc["results"][0]["estimand"] == "difference");
  CHECK(doc["results"][2]["estimand"] == "ratio");
  CHECK(doc["config"]["covariates"].size() == 3);
}

TEST_CASE("a single estimand can be selected") {
  const RunResult r = run(analyze_base() + " --tau 1 --estimand ratio");
  REQUIRE(r.exit_code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  REQUIRE(doc["results"].size() == 1);
  CHECK(doc["results"][0]["estimand"] == "ratio");
}

TEST_CASE("analyze writes CSV with the documented header") {
  const RunResult r = run(analyze_base() + " --tau 1 --format csv");
  REQUIRE(r.exit_code == 0);
  std::istringstream is(r.out);
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "estimand,adjusted,point,se,ci_lower,ci_upper,z,p_value,tau,alpha,n0,n1");
  CHECK(count_lines(r.out) == 3);  // header + difference + ratio
  std::string row;
  std::getline(is, row);
  CHECK(row.substr(0, 13) == "difference,0,");
}

TEST_CASE("digits rounding applies at serialization time") {
  const RunResult r =
      run(analyze_base() + " --tau 1 --format csv --digits 3");
  REQUIRE(r.exit_code == 0);
  std::istringstream is(r.out);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  // The point field ("difference,0,<point>,...") carries exactly 3 decimals.
  std::istringstream fields(row);
  std::string f;
  std::getline(fields, f, ',');
  std::getline(fields, f, ',');
  std::getline(fields, f, ',');
  const auto dot = f.find('.');
  REQUIRE(dot != std::string::npos);
  CHECK(f.size() - dot - 1 == 3);
}

TEST_CASE("the survival endpoint accepts an event-free cohort") {
  const fs::path empty_events = work_dir() / "no_events.csv";
  spit(empty_events, "id,time\n");
  // Deaths must fall inside the horizon or the survival curve is flat and the
  // estimate has no variance.
  const fs::path subjects = work_dir() / "subjects_surv.csv";
  spit(subjects,
       "id,arm,followup,terminal\n"
       "a1,1,0.3,1\n"
       "a2,1,0.6,1\n"
       "a3,1,1.8,0\n"
       "a4,1,1.5,0\n"
       "a5,1,0.9,1\n"
       "a6,1,1.2,0\n"
       "b1,0,0.45,1\n"
       "b2,0,0.8,1\n"
       "b3,0,2.0,0\n"
       "b4,0,1.6,0\n"
       "b5,0,1.1,0\n"
       "b6,0,0.7,1\n");
  const RunResult r = run("analyze --subjects " + subjects.string() +
                          " --events " + empty_events.string() +
                          " --tau 1 --endpoint rmst");
  REQUIRE(r.exit_code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  REQUIRE(doc["results"].size() == 2);
  for (const auto& res : doc["results"]) {
    CHECK(res["se"].get<double>() > 0.0);
  }
}

TEST_CASE("covariate hygiene warnings go to the error stream") {
  const fs::path subjects = work_dir() / "subjects_flat.csv";
  // x3 is constant, so adjustment drops it with a warning.
  std::string content = slurp(fixture_subjects());
  std::istringstream is(content);
  std::ostringstream os;
  std::string line;
  std::getline(is, line);
  os << line << "\n";
  while (std::getline(is, line)) {
    const auto last = line.rfind(',');
    os << line.substr(0, last) << ",9.9\n";
  }
  spit(subjects, os.str());
  const RunResult r = run("analyze --subjects " + subjects.string() +
                          " --events " + fixture_events().string() +
                          " --tau 1 --covariates x1,x2,x3");
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("warning:") != std::string::npos);
  CHECK(r.err.find("x3 has zero variance") != std::string::npos);
  const auto doc = nlohmann::json::parse(r.out);  // stdout stays clean JSON
  CHECK(doc["warnings"].size() == 1);
  REQUIRE(doc["results"].size() == 4);
  CHECK(doc["results"][1]["adjusted"] == true);  // adjusted on x1, x2
}

TEST_CASE("error mapping: usage, data, and numeric failures") {
  SUBCASE("missing required flag") {
    const RunResult r = run(analyze_base());
    CHECK(r.exit_code == 1);
    CHECK(r.err.substr(0, 7) == "error: ");
    CHECK(r.out.empty());
  }
  SUBCASE("unknown covariate name") {
    const RunResult r = run(analyze_base() + " --tau 1 --covariates zz");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("covariate 'zz' not found in subjects header") !=
          std::string::npos);
  }
  SUBCASE("nonexistent input file") {
    const RunResult r = run("analyze --subjects /nonexistent.csv --events " +
                            fixture_events().string() + " --tau 1");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("cannot open subjects file") != std::string::npos);
  }
  SUBCASE("malformed subjects row") {
    const fs::path bad = work_dir() / "bad_subjects.csv";
    spit(bad,
         "id,arm,followup,terminal,x1\n"
         "s1,1,1.5,0,0.2\n"
         "s2,2,1.5,0,0.4\n");
    const RunResult r = run("analyze --subjects " + bad.string() +
                            " --events " + fixture_events().string() +
                            " --tau 1");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("arm must be 0 or 1, got '2' (subjects row 3)") !=
          std::string::npos);
    CHECK(r.out.empty());
  }
  SUBCASE("horizon beyond the observed data") {
    const RunResult r = run(analyze_base() + " --tau 99");
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("error: horizon beyond observed risk") !=
          std::string::npos);
    CHECK(r.out.empty());
  }
  SUBCASE("invalid simulation case") {
    const RunResult r = run("simulate --case 9 --tau 2");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("invalid case 9 for endpoint auc") != std::string::npos);
  }
}

TEST_CASE("help is printed on request") {
  const RunResult r = run("--help");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("analyze") != std::string::npos);
  CHECK(r.out.find("simulate") != std::string::npos);
  CHECK(r.err.empty());
}

TEST_CASE("simulate smoke run, determinism, and dump") {
  const fs::path out1 = work_dir() / "sim1.csv";
  const fs::path out2 = work_dir() / "sim2.csv";
  const fs::path out3 = work_dir() / "sim3.csv";
  const fs::path dump = work_dir() / "reps.csv";
  const std::string base =
      "simulate --endpoint auc --case 1 --theta -0.32 --n 120 --scheme spb "
      "--reps 80 --seed 7 --tau 2 --format csv";

  const RunResult r1 = run(base + " --output " + out1.string());
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.out.empty());  // results went to the file
  const RunResult r2 = run(base + " --output " + out2.string());
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(out1).substr(0, 44) ==
        "estimand,adjusted,Est,Bias,Mean,Median,MC,CP");

  // Same study on several threads, with a per-replicate dump.
  const RunResult r3 = run(base + " --threads 3 --output " + out3.string() +
                           " --dump-replicates " + dump.string());
  REQUIRE(r3.exit_code == 0);
  CHECK(slurp(out1) == slurp(out3));
  CHECK(count_lines(slurp(dump)) == 81);  // header + one row per replicate

  // A different seed must change the results.
  const fs::path out4 = work_dir() / "sim4.csv";
  const RunResult r4 = run(
      "simulate --endpoint auc --case 1 --theta -0.32 --n 120 --scheme spb "
      "--reps 80 --seed 8 --tau 2 --format csv --output " + out4.string());
  REQUIRE(r4.exit_code == 0);
  CHECK(slurp(out4) != slurp(out1));
}

TEST_CASE("simulate JSON output carries the scenario and four cells") {
  const RunResult r = run(
      "simulate --endpoint rmst --case 2 --theta 0.1 --n 100 --scheme simple "
      "--reps 40 --seed 7 --tau 5 --digits 4");
  REQUIRE(r.exit_code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["scenario"]["seed"] == 7);
  CHECK(doc["scenario"]["endpoint"] == "rmst");
  CHECK(doc["scenario"]["case"] == 2);
  CHECK(doc["replicates_used"] == 40);
  REQUIRE(doc["cells"].size() == 4);
  CHECK(doc["cells"][3]["estimand"] == "ratio");
  CHECK(doc["cells"][3]["adjusted"] == true);
}

TEST_CASE("dump rounding follows the digits flag") {
  const fs::path dump = work_dir() / "reps_digits.csv";
  const RunResult r = run(
      "simulate --endpoint auc --case 1 --theta 0 --n 80 --scheme simple "
      "--reps 10 --seed 3 --tau 2 --digits 4 --format csv --output - "
      "--dump-replicates " + dump.string());
  REQUIRE(r.exit_code == 0);
  std::istringstream is(slurp(dump));
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  // Third field is the first cell's point, fixed to 4 decimals.
  std::istringstream fields(row);
  std::string f;
  std::getline(fields, f, ',');
  std::getline(fields, f, ',');
  std::getline(fields, f, ',');
  const auto dot = f.find('.');
  REQUIRE(dot != std::string::npos);
  CHECK(f.size() - dot - 1 == 4);
}
