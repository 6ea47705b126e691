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
//
// Sentence-level summary metrics. All scores are F1 values in [0, 1]; corpus
// reports are macro averages over pairs.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "ctxsum/corpus.hpp"

namespace ctxsum {

using TokenSpan = std::span<const std::string>;

// Clipped n-gram overlap F1; 0 when either side has no n-grams.
double rouge_n_f1(TokenSpan candidate, TokenSpan reference, int n);
// LCS-based F1.
double rouge_l_f1(TokenSpan candidate, TokenSpan reference);
// Multiset token overlap F1.
double token_f1(TokenSpan candidate, TokenSpan reference);
// Candidate length over the source's content length (end marker excluded).
double compression_rate(TokenSpan candidate, const SourceSequence &source);

std::size_t lcs_length(TokenSpan a, TokenSpan b);

enum class Metric { kRouge1, kRouge2, kRougeL, kTokenF1 };

Metric parse_metric(std::string_view text);
std::string_view metric_name(Metric metric);
double metric_value(Metric metric, TokenSpan candidate, TokenSpan reference);

struct MetricReport {
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
  double token_f1 = 0.0;
  double cr = 0.0;
  std::size_t pairs = 0;
  // Pairs that contributed to cr (a source was available).
  std::size_t cr_pairs = 0;
};

class MetricAccumulator {
 public:
  void add(TokenSpan candidate, TokenSpan reference, const SourceSequence *source = nullptr);
  MetricReport report() const;

 private:
  MetricReport sums_;
};

}  // namespace ctxsum
