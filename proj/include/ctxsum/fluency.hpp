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
// Domain fluency expert: adapts the language model's next-word distribution
// over the full vocabulary to the candidate set of one sentence.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxsum/embeddings.hpp"
#include "ctxsum/ngram_lm.hpp"

namespace ctxsum {

struct Smoothing {
  enum class Kind { kCluster, kTemperature, kNone };
  Kind kind = Kind::kCluster;
  double temperature = 1.0;

  static Smoothing cluster() { return {}; }
  static Smoothing temp(double t) { return {Kind::kTemperature, t}; }
  static Smoothing none() { return {Kind::kNone, 1.0}; }

  // "cs", "temp:<T>" or "na".
  static Smoothing parse(std::string_view text);
  std::string to_string() const;
};

// Next-word probabilities aligned with the candidate set's order.
struct StepDistribution {
  std::vector<double> probs;
  bool normalized = true;

  double sum() const;
};

class FluencyModel {
 public:
  // `partition` must be built from `candidates` when smoothing is cluster
  // smoothing; it is ignored otherwise. All references must outlive the model.
  FluencyModel(const NgramLM &lm, const CandidateSet &candidates,
               const VoronoiPartition *partition, Smoothing smoothing);

  // `history` is y_<n without any boundary symbol; "<s>" is prepended here.
  StepDistribution step(std::span<const std::string> history) const;

  const CandidateSet &candidates() const { return candidates_; }
  Smoothing smoothing() const { return smoothing_; }
  // True when some LM mass has no cell and the distribution gets renormalized.
  bool has_unassigned_mass() const { return has_unassigned_; }

 private:
  std::vector<WordId> lm_history(std::span<const std::string> history) const;

  const NgramLM &lm_;
  const CandidateSet &candidates_;
  Smoothing smoothing_;
  // Cluster smoothing: candidate owning each LM word id, or kNoCell.
  std::vector<std::size_t> cell_of_id_;
  bool has_unassigned_ = false;
  // Temperature / none: LM id of each candidate.
  std::vector<WordId> candidate_ids_;
};

StepDistribution fluency_step_dist(const NgramLM &lm, std::span<const std::string> history,
                                   const CandidateSet &candidates,
                                   const VoronoiPartition *partition, Smoothing smoothing);

}  // namespace ctxsum
