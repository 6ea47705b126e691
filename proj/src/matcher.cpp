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

#include "ctxsum/matcher.hpp"

#include <algorithm>
#include <cmath>

#include "ctxsum/error.hpp"

namespace ctxsum {

SourcePrefixBank::SourcePrefixBank(std::vector<std::vector<double>> vectors, LayerCombo combo)
    : vectors_(std::move(vectors)), combo_(combo) {
  for (const auto &v : vectors_)
    if (v.size() != vectors_.front().size())
      throw Error(ErrorKind::kDimMismatch, "source prefix vectors differ in length");
}

SourcePrefixBank build_source_bank(const Encoder &encoder, const SourceSequence &x, LayerCombo combo) {
  check_combo(combo, encoder.layers());
  std::vector<std::vector<double>> vectors;
  vectors.reserve(x.tokens().size());
  EncoderState state = encoder.begin_sequence();
  for (const auto &tok : x.tokens()) {
    state = encoder.advance(state, tok);
    vectors.push_back(prefix_vector(state, combo));
  }
  return SourcePrefixBank(std::move(vectors), combo);
}

std::vector<double> log_softmax(std::span<const double> scores) {
  double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - top);
  double log_z = top + std::log(z);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - log_z;
  return out;
}

MatchStep match_step(const SourcePrefixBank &bank, const EncoderState &target_state,
                     const CandidateSet &candidates, std::size_t z_prev, const Encoder &encoder,
                     LayerCombo combo) {
  if (z_prev >= bank.size())
    throw Error(ErrorKind::kEmptyWindow, "no source prefix longer than " + std::to_string(z_prev));
  MatchStep step;
  const std::size_t n = candidates.size();
  step.scores.resize(n);
  step.argmax_pos.resize(n);
  step.next_states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    step.next_states.push_back(encoder.advance(target_state, candidates[i]));
    std::vector<double> target = prefix_vector(step.next_states.back(), combo);
    std::size_t best_j = z_prev + 1;
    double best = cosine(bank.at(best_j), target);
    for (std::size_t j = z_prev + 2; j <= bank.size(); ++j) {
      double sim = cosine(bank.at(j), target);
      if (sim > best) {
        best = sim;
        best_j = j;
      }
    }
    step.scores[i] = best;
    step.argmax_pos[i] = best_j;
  }
  step.log_probs = log_softmax(step.scores);
  step.dist.probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) step.dist.probs[i] = std::exp(step.log_probs[i]);
  step.dist.normalized = true;
  return step;
}

double cm_log_prob(const MatchStep &step, const CandidateSet &candidates, std::string_view chosen) {
  auto i = candidates.index_of(chosen);
  if (!i) throw Error(ErrorKind::kNotInCandidates, std::string(chosen));
  return step.log_probs.at(*i);
}

}  // namespace ctxsum
