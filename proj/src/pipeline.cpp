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

#include "ctxsum/pipeline.hpp"

#include <optional>

#include "ctxsum/error.hpp"

namespace ctxsum {

CandidateMode parse_candidate_mode(std::string_view text) {
  if (text == "abstractive") return CandidateMode::kAbstractive;
  if (text == "extractive") return CandidateMode::kExtractive;
  throw Error(ErrorKind::kBadArgument, "mode must be abstractive or extractive");
}

std::string_view candidate_mode_name(CandidateMode mode) {
  return mode == CandidateMode::kAbstractive ? "abstractive" : "extractive";
}

SentenceSummary summarize_sentence(const SummarizerResources &resources,
                                   const SummarizerOptions &options, const std::string &raw) {
  SourceSequence x = preprocess(raw);
  CandidateSet candidates = options.mode == CandidateMode::kExtractive
                                ? extractive_candidates(x)
                                : knn_candidates(x, options.k, *resources.input_embeddings,
                                                 options.unknown_source_words,
                                                 resources.neighbors.get());

  std::optional<VoronoiPartition> partition;
  std::optional<FluencyModel> fluency;
  if (options.use_fluency) {
    if (options.decoder.smoothing.kind == Smoothing::Kind::kCluster) {
      const auto &table = resources.output_embeddings ? *resources.output_embeddings
                                                      : *resources.input_embeddings;
      partition.emplace(voronoi_partition(table, candidates));
    }
    fluency.emplace(*resources.lm, candidates, partition ? &*partition : nullptr,
                    options.decoder.smoothing);
  }

  SourcePrefixBank bank = build_source_bank(*resources.encoder, x, options.decoder.combo);
  Experts experts{MatchingExpert{*resources.encoder, bank, options.decoder.combo},
                  fluency ? &*fluency : nullptr};
  DecodeResult result = beam_search(x, candidates, experts, options.decoder);

  SentenceSummary out{x, candidates, std::move(result), {}, {}};
  out.summary = out.result.best().emitted(x.end_marker());
  out.trace = alignment_trace(out.result.best(), x);
  return out;
}

}  // namespace ctxsum
