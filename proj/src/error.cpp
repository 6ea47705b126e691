// Licensed under the Apache License, Version 2.0 (the 'License');
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an 'AS IS' BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ctxsum/error.hpp"

namespace ctxsum {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kReservedToken: return "ReservedToken";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kFormatError: return "FormatError";
    case ErrorKind::kEmptyCorpus: return "EmptyCorpus";
    case ErrorKind::kDimMismatch: return "DimMismatch";
    case ErrorKind::kDuplicateWord: return "DuplicateWord";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kUnknownSourceWord: return "UnknownSourceWord";
    case ErrorKind::kEmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorKind::kBadOrder: return "BadOrder";
    case ErrorKind::kBadDiscount: return "BadDiscount";
    case ErrorKind::kUnknownWord: return "UnknownWord";
    case ErrorKind::kPartitionMismatch: return "PartitionMismatch";
    case ErrorKind::kNonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorKind::kUnknownToken: return "UnknownToken";
    case ErrorKind::kMissingPrecomputedState: return "MissingPrecomputedState";
    case ErrorKind::kEmptyPrefix: return "EmptyPrefix";
    case ErrorKind::kComboUnsupported: return "ComboUnsupported";
    case ErrorKind::kNotInCandidates: return "NotInCandidates";
    case ErrorKind::kNoFinishedHypothesis: return "NoFinishedHypothesis";
    case ErrorKind::kDegenerateLength: return "DegenerateLength";
    case ErrorKind::kEmptyPool: return "EmptyPool";
    case ErrorKind::kLineCountMismatch: return "LineCountMismatch";
    case ErrorKind::kEmptyWindow: return "EmptyWindow";
    case ErrorKind::kBadArgument: return "BadArgument";
  }
  return "Unknown";
}

}  // namespace ctxsum
