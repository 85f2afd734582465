// Copyright 2026 The nflfed Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#ifndef NFLFED_COMMON_HPP_
#define NFLFED_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nflfed {

using Vec = std::vector<double>;

enum class ErrorCode {
  kEmptyInput,
  kMisalignedSupport,
  kAbsoluteContinuityViolated,
  kInvalidDistribution,
  kInsufficientKernelCoverage,
  kUnsupportedClosedForm,
  kDimensionMismatch,
  kNonpositiveVariance,
  kNonpositiveSigma,
  kInvalidPrimes,
  kGeneratorOrderInvalid,
  kPlaintextOutOfRange,
  kCiphertextInvalid,
  kMagnitudeOverflow,
  kProbabilityOutOfRange,
  kUnsupportedPair,
  kInvalidConfig,
  kEmptyGrid,
  kLikelihoodUndefined,
  kNoNegativeCoordinate,
  kDegenerateCalibration,
  kNonFiniteLoss,
  kRatioUnbounded,
  kUnsupportedMechanism,
  kDeltaRequired,
  kXiGammaRequired,
  kInfeasible,
  kMechanismIncompatible,
  kReplicateCountTooSmall,
  kInvalidSpec,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Derives an independent 64-bit stream seed from a master seed and a path of
// tags (round, client, purpose, ...). splitmix64 finalizer over each tag.
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> tags);

using Rng = std::mt19937_64;

// Worker thread cap; honours NFLFED_THREADS, defaults to hardware threads.
unsigned worker_threads();

}  // namespace nflfed

#endif  // NFLFED_COMMON_HPP_
