#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "p3lm/selfcheck.hpp"

using namespace p3lm;

TEST_CASE("all selfcheck suites pass and report deterministically") {
  std::vector<CheckResult> a = run_all_selfchecks(123);
  REQUIRE(a.size() == 5);
  for (const auto& r : a) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.pass);
    CHECK(!r.detail.empty());
  }
  CHECK(a[0].name == "mask-oracle");
  CHECK(a[1].name == "leakage");
  CHECK(a[2].name == "vanilla-equivalence");
  CHECK(a[3].name == "gradient-check");
  CHECK(a[4].name == "sampler-statistics");

  // identical seed, identical report text (byte for byte)
  std::vector<CheckResult> b = run_all_selfchecks(123);
  CHECK(format_selfcheck_report(a) == format_selfcheck_report(b));

  const std::string report = format_selfcheck_report(a);
  CHECK(report.find("PASS mask-oracle") != std::string::npos);
  CHECK(report.find("all suites passed") != std::string::npos);
  CHECK(report.find("FAIL") == std::string::npos);
}

TEST_CASE("failure formatting surfaces the failing suite") {
  std::vector<CheckResult> fake = {{"mask-oracle", true, "ok"},
                                   {"leakage", false, "3 leaked"}};
  const std::string report = format_selfcheck_report(fake);
  CHECK(report.find("FAIL leakage: 3 leaked") != std::string::npos);
  CHECK(report.find("1 suite(s) failed") != std::string::npos);
}

TEST_CASE("individual suites accept their knobs") {
  CheckResult tiny = check_leakage(5, 7);
  CHECK(tiny.pass);
  CHECK(tiny.detail.find("5 probes") != std::string::npos);
  CheckResult v = check_vanilla(2, 9);
  CHECK(v.pass);
  // an absurd tolerance fails honestly instead of throwing
  CheckResult strict = check_vanilla(2, 9, 0.0);
  CHECK(!strict.pass);
}
