#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace kkv {

// Integrator saw a non-finite derivative or state. Carries the offending
// flat-state component and the last time the state was known good.
class IntegrationFault : public std::runtime_error {
 public:
  IntegrationFault(const std::string& what, int component, double last_valid_time)
      : std::runtime_error(what), component(component), last_valid_time(last_valid_time) {}
  int component = -1;
  double last_valid_time = 0.0;
};

// Rigid-body propagation hit a singular configuration (e.g. singular inertia).
class DynamicsFault : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Zero-range or otherwise undefined line-of-sight geometry.
class DegenerateGeometry : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// No collision triangle exists for the drawn engagement parameters.
class InfeasibleGeometry : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scenario generation exhausted its retry budget.
class InfeasibleConfig : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reconstructed line of sight left the seeker field of view.
class FovFault : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Weight-file deserialization failure; names the first offending tensor when known.
class LoadFault : public std::runtime_error {
 public:
  explicit LoadFault(const std::string& what, std::string tensor = {})
      : std::runtime_error(what), tensor(std::move(tensor)) {}
  std::string tensor;
};

// Invalid or unsatisfiable run configuration.
class ConfigFault : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kkv
