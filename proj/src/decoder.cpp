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

#include "ctxsum/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "ctxsum/error.hpp"

namespace ctxsum {

std::vector<std::string> Hypothesis::emitted(const std::string &end_marker) const {
  std::vector<std::string> out = tokens;
  if (!out.empty() && out.back() == end_marker) out.pop_back();
  return out;
}

std::vector<Hypothesis> step_extend(const Hypothesis &h, const CandidateSet &candidates,
                                    const MatchStep &step, const StepDistribution *fluency,
                                    const DecoderConfig &cfg, std::size_t end_position,
                                    std::size_t *clamped) {
  (void)cfg;
  if (h.finished) throw Error(ErrorKind::kBadArgument, "cannot extend a finished hypothesis");
  std::vector<Hypothesis> children;
  children.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Hypothesis child(step.next_states[i]);
    child.tokens = h.tokens;
    child.tokens.push_back(candidates[i]);
    child.alignments = h.alignments;
    child.alignments.push_back(step.argmax_pos[i]);
    child.cm_logprob = h.cm_logprob + step.log_probs[i];
    child.fm_logprob = h.fm_logprob;
    if (fluency) {
      double p = fluency->probs[i];
      if (!(p >= kFluencyFloor)) {
        p = kFluencyFloor;
        if (clamped) ++*clamped;
      }
      child.fm_logprob += std::log(p);
    }
    child.finished = step.argmax_pos[i] == end_position;
    children.push_back(std::move(child));
  }
  return children;
}

bool is_admissible(const Hypothesis &child, const std::string &end_marker, std::size_t end_position) {
  bool is_end = child.tokens.back() == end_marker;
  if (is_end && child.last_alignment() != end_position) return false;
  if (child.tokens.size() >= end_position && !is_end) return false;
  return true;
}

double length_normalized_score(const Hypothesis &h, const DecoderConfig &cfg) {
  double denom = static_cast<double>(h.tokens.size()) + cfg.alpha;
  if (!(denom > 0.0))
    throw Error(ErrorKind::kDegenerateLength, "|y| + alpha = " + std::to_string(denom));
  return h.score(cfg.lambda) / denom;
}

namespace {

bool ranks_before(double score_a, const Hypothesis &a, double score_b, const Hypothesis &b) {
  if (score_a != score_b) return score_a > score_b;
  return a.tokens < b.tokens;
}

}  // namespace

DecodeResult beam_search(const SourceSequence &x, const CandidateSet &candidates,
                         const Experts &experts, const DecoderConfig &cfg) {
  if (cfg.beam < 1) throw Error(ErrorKind::kBadArgument, "beam must be at least 1");
  const MatchingExpert &cm = experts.matcher;
  const std::size_t end_position = cm.bank.size();
  if (end_position != x.tokens().size())
    throw Error(ErrorKind::kDimMismatch, "source bank does not match the source sequence");
  const std::size_t max_steps = cfg.max_steps ? cfg.max_steps : end_position;
  const std::string &end_marker = candidates.end_marker();

  DecodeResult result;
  std::vector<Hypothesis> beam;
  beam.emplace_back(cm.encoder.begin_sequence());

  for (std::size_t t = 0; t < max_steps && !beam.empty(); ++t) {
    std::vector<Hypothesis> expanded;
    for (const Hypothesis &h : beam) {
      MatchStep step = match_step(cm.bank, h.state, candidates, h.last_alignment(), cm.encoder, cm.combo);
      std::optional<StepDistribution> fdist;
      if (experts.fluency) fdist = experts.fluency->step(h.tokens);
      for (Hypothesis &child : step_extend(h, candidates, step, fdist ? &*fdist : nullptr, cfg,
                                           end_position, &result.clamped_fluency))
        if (is_admissible(child, end_marker, end_position)) expanded.push_back(std::move(child));
    }
    std::vector<std::size_t> order(expanded.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t keep = std::min(cfg.beam, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return ranks_before(expanded[a].score(cfg.lambda), expanded[a],
                                            expanded[b].score(cfg.lambda), expanded[b]);
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      Hypothesis &h = expanded[order[i]];
      if (h.finished) {
        double normalized = length_normalized_score(h, cfg);
        result.pool.push_back(PoolEntry{std::move(h), normalized});
      } else {
        next.push_back(std::move(h));
      }
    }
    beam = std::move(next);
  }

  if (result.pool.empty())
    throw Error(ErrorKind::kNoFinishedHypothesis, "no hypothesis aligned to the end of the source");
  std::stable_sort(result.pool.begin(), result.pool.end(), [](const PoolEntry &a, const PoolEntry &b) {
    return ranks_before(a.normalized_score, a.hypothesis, b.normalized_score, b.hypothesis);
  });
  return result;
}

const PoolEntry &oracle_select(const std::vector<PoolEntry> &pool,
                               const std::vector<std::string> &reference, Metric metric,
                               const std::string &end_marker) {
  if (pool.empty()) throw Error(ErrorKind::kEmptyPool, "oracle selection needs a finished hypothesis");
  const PoolEntry *best = nullptr;
  double best_value = -1.0;
  for (const auto &entry : pool) {
    double v = metric_value(metric, entry.hypothesis.emitted(end_marker), reference);
    if (v > best_value || (v == best_value && entry.normalized_score > best->normalized_score)) {
      best_value = v;
      best = &entry;
    }
  }
  return *best;
}

std::vector<std::pair<std::size_t, std::size_t>> alignment_trace(const Hypothesis &h,
                                                                 const SourceSequence &x) {
  std::size_t emitted = h.emitted(x.end_marker()).size();
  std::vector<std::pair<std::size_t, std::size_t>> trace;
  trace.reserve(emitted);
  for (std::size_t n = 0; n < emitted; ++n) trace.emplace_back(n + 1, h.alignments[n]);
  return trace;
}

}  // namespace ctxsum
