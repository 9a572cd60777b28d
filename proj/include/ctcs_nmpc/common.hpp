// Copyright 2026 The ctcs-nmpc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace ctcs_nmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Thrown for inconsistent dimensions or invalid parameter values.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// An integrator produced a non-finite state. `time()` is the start of the
// step that failed and `segment()` the shooting interval, or -1 if unknown.
class PropagationDiverged : public std::runtime_error {
 public:
  PropagationDiverged(double time, int segment = -1)
      : std::runtime_error(Describe(time, segment)),
        time_(time),
        segment_(segment) {}

  double time() const { return time_; }
  int segment() const { return segment_; }

  PropagationDiverged WithSegment(int segment) const {
    return PropagationDiverged(time_, segment);
  }

 private:
  static std::string Describe(double time, int segment) {
    std::string msg = "propagation diverged at t=" + std::to_string(time);
    if (segment >= 0) msg += " (segment " + std::to_string(segment) + ")";
    return msg;
  }

  double time_;
  int segment_;
};

inline void Require(bool condition, const std::string& what) {
  if (!condition) throw ConfigurationError(what);
}

inline bool AllFinite(const Vector& v) { return v.allFinite(); }

}  // namespace ctcs_nmpc
