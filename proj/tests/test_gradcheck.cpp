#include <gtest/gtest.h>

#include "rfsnn/gradcheck.hpp"

using namespace rfsnn;

TEST(RelativeError, FloorAndScale) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0, 1e-12), 0.0);
  EXPECT_NEAR(relative_error(1.0, 1.001, 1e-12), 1e-3 / 1.001, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-15, 1e-12), 1e-3);
}

TEST(GradientSuite, DefaultsPass) {
  const auto results = run_gradient_suite({});
  ASSERT_GE(results.size(), 8u);
  bool saw_network = false;
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed) << r.name << " " << r.max_rel_error;
    EXPECT_GT(r.checked, 0u) << r.name;
    if (r.name.find("network") != std::string::npos) {
      saw_network = true;
      EXPECT_DOUBLE_EQ(r.tolerance, 1e-4);
    } else {
      EXPECT_DOUBLE_EQ(r.tolerance, 1e-5);
    }
  }
  EXPECT_TRUE(saw_network);
}

TEST(GradientSuite, InjectedFaultIsCaught) {
  GradCheckOptions o;
  o.inject_fault = true;
  bool any_failed = false;
  for (const auto& r : run_gradient_suite(o)) any_failed = any_failed || !r.passed;
  EXPECT_TRUE(any_failed);
}

TEST(GradientSuite, ImpossibleToleranceFails) {
  GradCheckOptions o;
  o.tolerance = 1e-30;
  bool any_failed = false;
  for (const auto& r : run_gradient_suite(o)) any_failed = any_failed || !r.passed;
  EXPECT_TRUE(any_failed);
}
