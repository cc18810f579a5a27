#pragma once

#include <functional>
#include <string>
#include <vector>

namespace topdep::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

/// In the order they are reported.
const std::vector<Criterion>& criteria();

}  // namespace topdep::acceptance
