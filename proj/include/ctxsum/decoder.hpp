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
// Product-of-experts beam search. A hypothesis accumulates
//   log q_cm(y_n) + lambda * log p_fm(y_n)
// per step; it finishes when its newest word aligns to the end-marker prefix
// m+1. Finished hypotheses are re-ranked by score / (|y| + alpha).

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ctxsum/embeddings.hpp"
#include "ctxsum/encoder.hpp"
#include "ctxsum/eval.hpp"
#include "ctxsum/fluency.hpp"
#include "ctxsum/matcher.hpp"

namespace ctxsum {

struct DecoderConfig {
  double lambda = 0.11;
  double alpha = 0.0;
  std::size_t beam = 10;
  Smoothing smoothing;
  LayerCombo combo = LayerCombo::kCat;
  // 0 means m+1, the longest sequence the alignment windows allow.
  std::size_t max_steps = 0;
};

// Fluency values below this are clamped before taking the log.
inline constexpr double kFluencyFloor = 1e-300;

struct Hypothesis {
  explicit Hypothesis(EncoderState s) : state(std::move(s)) {}

  std::vector<std::string> tokens;
  // 1-based source prefix lengths, strictly increasing.
  std::vector<std::size_t> alignments;
  double cm_logprob = 0.0;
  double fm_logprob = 0.0;
  EncoderState state;
  bool finished = false;

  double score(double lambda) const { return cm_logprob + lambda * fm_logprob; }
  std::size_t last_alignment() const { return alignments.empty() ? 0 : alignments.back(); }
  // Tokens with a final end marker removed.
  std::vector<std::string> emitted(const std::string &end_marker) const;
};

struct MatchingExpert {
  const Encoder &encoder;
  const SourcePrefixBank &bank;
  LayerCombo combo;
};

struct Experts {
  MatchingExpert matcher;
  // Null disables the fluency expert entirely.
  const FluencyModel *fluency = nullptr;
};

struct PoolEntry {
  Hypothesis hypothesis;
  double normalized_score;
};

struct DecodeResult {
  // Finished hypotheses, best normalized score first.
  std::vector<PoolEntry> pool;
  // Fluency values that had to be clamped to kFluencyFloor.
  std::size_t clamped_fluency = 0;

  const Hypothesis &best() const { return pool.front().hypothesis; }
  double best_score() const { return pool.front().normalized_score; }
};

// One child per candidate, in candidate order. `fluency` may be null.
// `end_position` is m+1.
std::vector<Hypothesis> step_extend(const Hypothesis &h, const CandidateSet &candidates,
                                    const MatchStep &step, const StepDistribution *fluency,
                                    const DecoderConfig &cfg, std::size_t end_position,
                                    std::size_t *clamped = nullptr);

// A child may only carry the end marker when it aligns to m+1, and a child at
// position m+1 must be the end marker; this keeps emitted summaries within m
// tokens.
bool is_admissible(const Hypothesis &child, const std::string &end_marker, std::size_t end_position);

double length_normalized_score(const Hypothesis &h, const DecoderConfig &cfg);

DecodeResult beam_search(const SourceSequence &x, const CandidateSet &candidates,
                         const Experts &experts, const DecoderConfig &cfg);

// Best pool entry under `metric` against `reference`; ties go to the higher
// normalized score (pool order).
const PoolEntry &oracle_select(const std::vector<PoolEntry> &pool,
                               const std::vector<std::string> &reference, Metric metric,
                               const std::string &end_marker = std::string(kEndMarker));

// (n, z_n) for every emitted token, n 1-based.
std::vector<std::pair<std::size_t, std::size_t>> alignment_trace(const Hypothesis &h,
                                                                 const SourceSequence &x);

}  // namespace ctxsum
