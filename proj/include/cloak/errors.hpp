#pragma once

#include <stdexcept>
#include <string>

namespace cloak {

// Bad arguments: non-finite inputs, malformed densities, grids, configs.
class invalid_input_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Evaluation outside a function's domain (e.g. Hankel at z = 0).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Requested precision unattainable; carries the estimated relative error.
class accuracy_loss_error : public std::runtime_error {
 public:
  accuracy_loss_error(const std::string& what, double estimate)
      : std::runtime_error(what), estimate_(estimate) {}
  double error_estimate() const { return estimate_; }

 private:
  double estimate_;
};

// Argument sits at/near a zero of J_n; caller should switch branch.
class pole_proximity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Denominator collapse in a mode solve: omega too close to an interior
// eigenvalue of the relevant boundary-value problem.
class near_resonance_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense-solve oracle outside its trustworthy conditioning envelope.
class oracle_unreliable_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mode sum failed to converge under the hard cap.
class truncation_unconverged_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Orientation-reversing Jacobian passed to a push-forward.
class orientation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cloak
