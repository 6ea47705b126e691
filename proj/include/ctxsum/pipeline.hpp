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
// End-to-end summarization of one raw sentence with shared, immutable
// resources. Safe to call concurrently.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ctxsum/decoder.hpp"
#include "ctxsum/embeddings.hpp"
#include "ctxsum/encoder.hpp"
#include "ctxsum/ngram_lm.hpp"

namespace ctxsum {

enum class CandidateMode { kAbstractive, kExtractive };

CandidateMode parse_candidate_mode(std::string_view text);
std::string_view candidate_mode_name(CandidateMode mode);

struct SummarizerResources {
  // Candidate construction (K nearest neighbours).
  std::shared_ptr<const EmbeddingTable> input_embeddings;
  // Voronoi partition for cluster smoothing; defaults to input_embeddings.
  std::shared_ptr<const EmbeddingTable> output_embeddings;
  std::shared_ptr<const NgramLM> lm;
  std::shared_ptr<const Encoder> encoder;
  std::shared_ptr<const NeighborCache> neighbors;
};

struct SummarizerOptions {
  DecoderConfig decoder;
  CandidateMode mode = CandidateMode::kAbstractive;
  std::size_t k = 6;
  bool use_fluency = true;
  UnknownWordPolicy unknown_source_words = UnknownWordPolicy::kKeepWithoutNeighbors;
};

struct SentenceSummary {
  SourceSequence source;
  CandidateSet candidates;
  DecodeResult result;
  std::vector<std::string> summary;
  std::vector<std::pair<std::size_t, std::size_t>> trace;
};

SentenceSummary summarize_sentence(const SummarizerResources &resources,
                                   const SummarizerOptions &options, const std::string &raw);

}  // namespace ctxsum
