// Copyright 2026 The PB-DSR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PBDSR_ERROR_HPP_
#define PBDSR_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace pbdsr {

// Error categories. The CLI maps these onto exit codes 2, 3 and 4.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised by the CTC loss when the frame count cannot host the target.
class AlignmentInfeasible : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace pbdsr

#endif  // PBDSR_ERROR_HPP_
