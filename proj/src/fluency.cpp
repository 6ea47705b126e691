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

#include "ctxsum/fluency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ctxsum/error.hpp"

namespace ctxsum {

Smoothing Smoothing::parse(std::string_view text) {
  if (text == "cs") return cluster();
  if (text == "na") return none();
  if (text.rfind("temp:", 0) == 0) {
    std::string num(text.substr(5));
    std::size_t used = 0;
    double t = 0.0;
    try {
      t = std::stod(num, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != num.size())
      throw Error(ErrorKind::kBadArgument, "bad temperature in '" + std::string(text) + "'");
    if (!(t > 0.0)) throw Error(ErrorKind::kNonPositiveTemperature, num);
    return temp(t);
  }
  throw Error(ErrorKind::kBadArgument,
              "smoothing must be cs, na or temp:<T>, got '" + std::string(text) + "'");
}

std::string Smoothing::to_string() const {
  switch (kind) {
    case Kind::kCluster: return "cs";
    case Kind::kNone: return "na";
    case Kind::kTemperature: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "temp:%g", temperature);
      return buf;
    }
  }
  return "?";
}

double StepDistribution::sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

FluencyModel::FluencyModel(const NgramLM &lm, const CandidateSet &candidates,
                           const VoronoiPartition *partition, Smoothing smoothing)
    : lm_(lm), candidates_(candidates), smoothing_(smoothing) {
  if (smoothing.kind == Smoothing::Kind::kTemperature && !(smoothing.temperature > 0.0))
    throw Error(ErrorKind::kNonPositiveTemperature, std::to_string(smoothing.temperature));

  if (smoothing.kind == Smoothing::Kind::kCluster) {
    if (!partition || !partition->built_from(candidates))
      throw Error(ErrorKind::kPartitionMismatch, "partition was not built from this candidate set");
    cell_of_id_.assign(lm.vocabulary().size(), VoronoiPartition::kNoCell);
    for (WordId id = 0; id < static_cast<WordId>(lm.vocabulary().size()); ++id) {
      if (id == lm.bos_id()) continue;
      const std::string &w = lm.word(id);
      std::size_t cell = VoronoiPartition::kNoCell;
      if (w == candidates.end_marker()) {
        cell = candidates.end_index();
      } else if (auto owner = partition->owner(w)) {
        cell = *owner;
      } else {
        has_unassigned_ = true;
      }
      cell_of_id_[static_cast<std::size_t>(id)] = cell;
    }
    return;
  }

  candidate_ids_.reserve(candidates.size());
  for (const auto &w : candidates.words()) {
    WordId id = w == candidates.end_marker() ? lm.eos_id() : lm.id(w);
    if (id == kNoWord) id = lm.unk_id();
    if (id == kNoWord) throw Error(ErrorKind::kUnknownWord, w);
    candidate_ids_.push_back(id);
  }
}

std::vector<WordId> FluencyModel::lm_history(std::span<const std::string> history) const {
  std::vector<WordId> ids;
  ids.reserve(history.size() + 1);
  ids.push_back(lm_.bos_id());
  std::vector<WordId> mapped = lm_.map_words(history);
  ids.insert(ids.end(), mapped.begin(), mapped.end());
  return ids;
}

StepDistribution FluencyModel::step(std::span<const std::string> history) const {
  StepDistribution out;
  out.probs.assign(candidates_.size(), 0.0);
  std::vector<WordId> h = lm_history(history);

  switch (smoothing_.kind) {
    case Smoothing::Kind::kCluster: {
      std::vector<double> dist = lm_.distribution(h);
      for (std::size_t id = 0; id < dist.size(); ++id) {
        std::size_t cell = cell_of_id_[id];
        if (cell != VoronoiPartition::kNoCell) out.probs[cell] += dist[id];
      }
      if (has_unassigned_) {
        double total = out.sum();
        if (total > 0.0)
          for (double &p : out.probs) p /= total;
      }
      break;
    }
    case Smoothing::Kind::kTemperature: {
      std::vector<double> logits(candidates_.size());
      for (std::size_t i = 0; i < logits.size(); ++i)
        logits[i] = std::log(lm_.probability(candidate_ids_[i], h)) / smoothing_.temperature;
      double top = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (std::size_t i = 0; i < logits.size(); ++i) z += out.probs[i] = std::exp(logits[i] - top);
      for (double &p : out.probs) p /= z;
      break;
    }
    case Smoothing::Kind::kNone:
      for (std::size_t i = 0; i < candidate_ids_.size(); ++i)
        out.probs[i] = lm_.probability(candidate_ids_[i], h);
      out.normalized = false;
      break;
  }
  return out;
}

StepDistribution fluency_step_dist(const NgramLM &lm, std::span<const std::string> history,
                                   const CandidateSet &candidates,
                                   const VoronoiPartition *partition, Smoothing smoothing) {
  return FluencyModel(lm, candidates, partition, smoothing).step(history);
}

}  // namespace ctxsum
