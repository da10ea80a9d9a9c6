#include <gtest/gtest.h>

#include "mlfdr/efilter.hpp"

namespace {

// Every threshold descent in the process must finish within sum(G) + 1 passes.
class TerminationBound : public ::testing::Environment {
 public:
  void TearDown() override {
    const auto d = mlfdr::efilter_diagnostics();
    if (d.invocations > 0) {
      EXPECT_GE(d.min_slack, 0) << "a descent exceeded its pass bound";
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::AddGlobalTestEnvironment(new TerminationBound);
  return RUN_ALL_TESTS();
}
