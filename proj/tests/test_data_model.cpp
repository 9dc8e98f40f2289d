#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>
#include <string>

#include "aucmcf/data_model.hpp"
#include "test_support.hpp"

using aucmcf::Cohort;
using aucmcf::DataError;
using aucmcf::ingest_cohort;
using testsup::make_cohort;
using testsup::subject;

namespace {

Cohort ingest(const std::string& subjects, const std::string& events) {
  std::istringstream s(subjects), e(events);
  return ingest_cohort(s, e);
}

std::string ingest_error(const std::string& subjects, const std::string& events) {
  try {
    ingest(subjects, events);
  } catch (const DataError& err) {
    return err.what();
  }
  return "";
}

constexpr const char* kEventsHeader = "id,time\n";

}  // namespace

TEST_CASE("ingests the two-file representation") {
  const Cohort cohort = ingest(
      "id,arm,followup,terminal,x1,x2\n"
      "a,1,2.0,0,1.5,0\n"
      "b,0,1.5,1,-0.5,1\n",
      "id,time\n"
      "a,1.25\n"
      "a,0.5\n");
  CHECK(cohort.n() == 2);
  CHECK(cohort.p == 2);
  CHECK(cohort.covariate_names == std::vector<std::string>{"x1", "x2"});
  CHECK(cohort.n_arm(1) == 1);
  CHECK(cohort.n_arm(0) == 1);
  REQUIRE(cohort.subjects[0].events.size() == 2);
  CHECK(cohort.subjects[0].events[0] == 0.5);  // sorted on ingest
  CHECK(cohort.subjects[0].events[1] == 1.25);
  CHECK(cohort.subjects[1].events.empty());
  CHECK(cohort.subjects[1].covariates[0] == -0.5);
  CHECK(cohort.subjects[0].terminal == 0);
  CHECK(cohort.subjects[1].terminal == 1);
}

TEST_CASE("blank lines and a missing covariate block are fine") {
  const Cohort cohort = ingest(
      "id,arm,followup,terminal\n"
      "a,1,2,0\n"
      "\n"
      "b,0,1,0\n",
      kEventsHeader);
  CHECK(cohort.n() == 2);
  CHECK(cohort.p == 0);
}

TEST_CASE("ingestion failures name the offending row") {
  const std::string good_subjects =
      "id,arm,followup,terminal\n"
      "a,1,2,0\n"
      "b,0,1.5,1\n";

  SUBCASE("bad subjects header") {
    CHECK(ingest_error("id,followup\na,1\n", kEventsHeader) ==
          "subjects header must start with id,arm,followup,terminal");
  }
  SUBCASE("bad events header") {
    CHECK(ingest_error(good_subjects, "id,when\n") ==
          "events header must be id,time");
  }
  SUBCASE("empty files") {
    CHECK(ingest_error("", kEventsHeader) == "empty subjects file");
    CHECK(ingest_error(good_subjects, "") == "empty events file");
  }
  SUBCASE("wrong field count points at the physical line") {
    const std::string err = ingest_error(
        "id,arm,followup,terminal,x1\n"
        "a,1,2,0,0.5\n"
        "b,0,1.5,1\n",
        kEventsHeader);
    CHECK(err == "expected 5 fields, got 4 (subjects row 3)");
  }
  SUBCASE("non-numeric follow-up") {
    CHECK(ingest_error("id,arm,followup,terminal\na,1,soon,0\n",
                       kEventsHeader) ==
          "non-numeric field 'soon' (subjects row 2)");
  }
  SUBCASE("arm outside the binary domain") {
    CHECK(ingest_error("id,arm,followup,terminal\na,2,1,0\n", kEventsHeader) ==
          "arm must be 0 or 1, got '2' (subjects row 2)");
  }
  SUBCASE("duplicate subject id") {
    CHECK(ingest_error("id,arm,followup,terminal\na,1,2,0\na,0,1,0\n",
                       kEventsHeader) == "duplicate id a (subjects row 3)");
  }
  SUBCASE("event for an unknown subject") {
    CHECK(ingest_error(good_subjects, "id,time\nzz,0.5\n") ==
          "unknown id zz (events row 2)");
  }
  SUBCASE("event after the follow-up end") {
    CHECK(ingest_error(good_subjects, "id,time\na,2.5\n") ==
          "event after follow-up (events row 2)");
  }
  SUBCASE("tied events within one subject name the later row") {
    CHECK(ingest_error(good_subjects, "id,time\na,0.5\na,0.5\n") ==
          "tied event time within subject a (events row 3)");
  }
  SUBCASE("recurrent event at the death time") {
    // Subject b dies at 1.5; an event exactly there is contradictory.
    CHECK(ingest_error(good_subjects, "id,time\nb,1.5\n") ==
          "recurrent event at the terminal-event time (events row 2)");
  }
  SUBCASE("negative follow-up") {
    CHECK(ingest_error("id,arm,followup,terminal\na,1,-1,0\n", kEventsHeader) ==
          "follow-up must be a nonnegative real for subject a");
  }
}

TEST_CASE("an event at a censoring time is legitimate") {
  const Cohort cohort = ingest(
      "id,arm,followup,terminal\n"
      "a,1,2,0\n"
      "b,0,1,0\n",
      "id,time\n"
      "a,2\n");  // censored exactly at the event
  CHECK(cohort.subjects[0].events == std::vector<double>{2.0});
}

TEST_CASE("round trip through serialization") {
  std::mt19937_64 rng(99);
  const Cohort cohort = testsup::random_cohort(rng, 40, 3);
  std::ostringstream subjects, events;
  serialize_cohort(cohort, subjects, events);
  const Cohort again = ingest(subjects.str(), events.str());

  REQUIRE(again.n() == cohort.n());
  REQUIRE(again.p == cohort.p);
  CHECK(again.covariate_names == cohort.covariate_names);
  for (int i = 0; i < cohort.n(); ++i) {
    const auto& a = cohort.subjects[i];
    const auto& b = again.subjects[i];
    CHECK(a.id == b.id);
    CHECK(a.arm == b.arm);
    CHECK(a.terminal == b.terminal);
    CHECK(a.followup == b.followup);  // bit-exact via max_digits10
    REQUIRE(a.events.size() == b.events.size());
    for (size_t k = 0; k < a.events.size(); ++k) CHECK(a.events[k] == b.events[k]);
    for (int k = 0; k < cohort.p; ++k) CHECK(a.covariates[k] == b.covariates[k]);
  }
}

TEST_CASE("pooled centering") {
  const Cohort cohort = make_cohort({
      subject("a", 1, 2, 0, {}, {1.0, 5.0}),
      subject("b", 0, 1, 0, {}, {3.0, 5.0}),
  });
  const auto centered = aucmcf::center_covariates(cohort);
  CHECK(centered.X(0, 0) == -1.0);
  CHECK(centered.X(1, 0) == 1.0);
  CHECK(centered.means[0] == 2.0);
  // The constant column centers to zero and is flagged.
  CHECK(centered.X(0, 1) == 0.0);
  CHECK(centered.X(1, 1) == 0.0);
  REQUIRE(centered.zero_variance == std::vector<int>{1});

  std::mt19937_64 rng(3);
  const Cohort big = testsup::random_cohort(rng, 200, 3);
  const auto c2 = aucmcf::center_covariates(big);
  for (int k = 0; k < big.p; ++k) {
    CHECK(std::abs(c2.X.col(k).sum()) <= 1e-10);
  }
  CHECK(c2.zero_variance.empty());
}

TEST_CASE("centering requires covariates") {
  const Cohort cohort = make_cohort({subject("a", 1, 2, 0, {})});
  CHECK_THROWS_WITH_AS(aucmcf::center_covariates(cohort),
                       "no covariates to adjust for", DataError);
}

TEST_CASE("risk set counting") {
  const Cohort cohort = make_cohort({
      subject("a", 1, 1.0, 0, {}),
      subject("b", 1, 2.0, 1, {}),
      subject("c", 0, 2.0, 0, {}),
      subject("d", 0, 3.0, 1, {}),
  });
  CHECK(aucmcf::risk_set_count(cohort.subjects, 0.0) == 4);
  CHECK(aucmcf::risk_set_count(cohort.subjects, 1.0) == 4);
  CHECK(aucmcf::risk_set_count(cohort.subjects, 2.0) == 3);
  CHECK(aucmcf::risk_set_count(cohort.subjects, 2.5) == 1);
  CHECK(aucmcf::risk_set_count(cohort.subjects, 3.5) == 0);
}

TEST_CASE("record validation guards the tie conventions") {
  // Event at the censoring boundary: allowed when the subject is censored.
  CHECK_NOTHROW(aucmcf::validate_record(subject("a", 1, 2.0, 0, {2.0})));
  // Same time but a death: rejected.
  CHECK_THROWS_AS(aucmcf::validate_record(subject("a", 1, 2.0, 1, {2.0})),
                  DataError);
  CHECK_THROWS_AS(aucmcf::validate_record(subject("a", 1, 2.0, 0, {0.5, 0.5})),
                  DataError);
  CHECK_THROWS_AS(aucmcf::validate_record(subject("a", 3, 2.0, 0, {})),
                  DataError);
}

TEST_CASE("cohort validation catches cross-record faults") {
  Cohort dup = make_cohort({
      subject("a", 1, 2, 0, {}),
      subject("a", 0, 1, 0, {}),
  });
  CHECK_THROWS_WITH_AS(aucmcf::validate_cohort(dup), "duplicate id a", DataError);

  Cohort mismatch = make_cohort({
      subject("a", 1, 2, 0, {}, {1.0, 2.0}),
      subject("b", 0, 1, 0, {}, {1.0}),
  });
  CHECK_THROWS_WITH_AS(aucmcf::validate_cohort(mismatch),
                       "covariate dimension mismatch for subject b", DataError);
}

TEST_CASE("arm splitting preserves rows and events") {
  const Cohort cohort = make_cohort({
      subject("a", 1, 2.0, 0, {0.5, 1.0}),
      subject("b", 0, 1.5, 1, {0.7}),
      subject("c", 1, 1.0, 1, {}),
      subject("d", 0, 2.0, 0, {1.9}),
  });
  const auto [treated, control] = aucmcf::split_arms(cohort);
  CHECK(treated.cohort_rows == std::vector<int>{0, 2});
  CHECK(control.cohort_rows == std::vector<int>{1, 3});
  CHECK(treated.sample.size() == 2);
  REQUIRE(treated.sample.event_time.size() == 2);
  CHECK(treated.sample.event_subject == std::vector<int>{0, 0});
  CHECK(control.sample.event_subject == std::vector<int>{0, 1});
  CHECK(control.sample.event_time[1] == 1.9);
  CHECK(treated.sample.terminal == std::vector<std::uint8_t>{0, 1});

  const Cohort single = make_cohort({subject("a", 1, 2.0, 0, {})});
  CHECK_THROWS_WITH_AS(aucmcf::split_arms(single), "both arms must be nonempty",
                       DataError);
}

TEST_CASE("covariate row selection") {
  Eigen::MatrixXd X(3, 3);
  X << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Eigen::MatrixXd picked = aucmcf::covariate_rows(X, {2, 0}, {1, 2});
  REQUIRE(picked.rows() == 2);
  REQUIRE(picked.cols() == 2);
  CHECK(picked(0, 0) == 8);
  CHECK(picked(0, 1) == 9);
  CHECK(picked(1, 0) == 2);
  CHECK(picked(1, 1) == 3);
}
