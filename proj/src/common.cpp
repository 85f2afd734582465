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

#include "nflfed/common.hpp"

#include <cstdlib>
#include <thread>

namespace nflfed {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kMisalignedSupport: return "MisalignedSupport";
    case ErrorCode::kAbsoluteContinuityViolated: return "AbsoluteContinuityViolated";
    case ErrorCode::kInvalidDistribution: return "InvalidDistribution";
    case ErrorCode::kInsufficientKernelCoverage: return "InsufficientKernelCoverage";
    case ErrorCode::kUnsupportedClosedForm: return "UnsupportedClosedForm";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonpositiveVariance: return "NonpositiveVariance";
    case ErrorCode::kNonpositiveSigma: return "NonpositiveSigma";
    case ErrorCode::kInvalidPrimes: return "InvalidPrimes";
    case ErrorCode::kGeneratorOrderInvalid: return "GeneratorOrderInvalid";
    case ErrorCode::kPlaintextOutOfRange: return "PlaintextOutOfRange";
    case ErrorCode::kCiphertextInvalid: return "CiphertextInvalid";
    case ErrorCode::kMagnitudeOverflow: return "MagnitudeOverflow";
    case ErrorCode::kProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::kUnsupportedPair: return "UnsupportedPair";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kEmptyGrid: return "EmptyGrid";
    case ErrorCode::kLikelihoodUndefined: return "LikelihoodUndefined";
    case ErrorCode::kNoNegativeCoordinate: return "NoNegativeCoordinate";
    case ErrorCode::kDegenerateCalibration: return "DegenerateCalibration";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kRatioUnbounded: return "RatioUnbounded";
    case ErrorCode::kUnsupportedMechanism: return "UnsupportedMechanism";
    case ErrorCode::kDeltaRequired: return "DeltaRequired";
    case ErrorCode::kXiGammaRequired: return "XiGammaRequired";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kMechanismIncompatible: return "MechanismIncompatible";
    case ErrorCode::kReplicateCountTooSmall: return "ReplicateCountTooSmall";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

namespace {
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix(master);
  for (auto t : tags) h = splitmix(h ^ splitmix(t + 0x632be59bd9b4e019ULL));
  return h;
}

unsigned worker_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("NFLFED_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v) < hw ? static_cast<unsigned>(v) : hw;
  }
  return hw;
}

}  // namespace nflfed
