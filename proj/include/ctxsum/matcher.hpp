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
// Contextual matching expert. Each candidate word is scored by the best cosine
// similarity between the extended target prefix and a source prefix that ends
// strictly after the previous alignment.

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ctxsum/corpus.hpp"
#include "ctxsum/embeddings.hpp"
#include "ctxsum/encoder.hpp"
#include "ctxsum/fluency.hpp"

namespace ctxsum {

// Prefix vectors of x_{1:1} .. x_{1:m+1}, the last one ending at the end marker.
class SourcePrefixBank {
 public:
  SourcePrefixBank(std::vector<std::vector<double>> vectors, LayerCombo combo);

  std::size_t size() const { return vectors_.size(); }
  // 1-based prefix length j.
  std::span<const double> at(std::size_t j) const { return vectors_.at(j - 1); }
  LayerCombo combo() const { return combo_; }

 private:
  std::vector<std::vector<double>> vectors_;
  LayerCombo combo_;
};

SourcePrefixBank build_source_bank(const Encoder &encoder, const SourceSequence &x, LayerCombo combo);

struct MatchStep {
  // q_cm over the candidate set (softmax of `scores`).
  StepDistribution dist;
  std::vector<double> log_probs;
  // Greedy alignment score s_w of each candidate.
  std::vector<double> scores;
  // Smallest source prefix length attaining s_w; always > z_prev.
  std::vector<std::size_t> argmax_pos;
  // Target state after appending each candidate, kept for the next step.
  std::vector<EncoderState> next_states;
};

// z_prev is the previous alignment (0 before the first word) and must be
// below bank.size().
MatchStep match_step(const SourcePrefixBank &bank, const EncoderState &target_state,
                     const CandidateSet &candidates, std::size_t z_prev, const Encoder &encoder,
                     LayerCombo combo);

double cm_log_prob(const MatchStep &step, const CandidateSet &candidates, std::string_view chosen);

// Numerically stable log-softmax.
std::vector<double> log_softmax(std::span<const double> scores);

}  // namespace ctxsum
