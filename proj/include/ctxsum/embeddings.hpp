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
// Word embeddings, candidate-set construction and the Voronoi partition of the
// vocabulary around a candidate set.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxsum/corpus.hpp"

namespace ctxsum {

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  // Throws DimMismatch or DuplicateWord.
  void add(std::string word, std::span<const double> vec);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string> &words() const { return words_; }
  std::optional<std::size_t> find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word).has_value(); }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

 private:
  std::size_t dim_;
  std::vector<std::string> words_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Text format: `word v1 ... vD` per line. A leading `count dim` header line
// (word2vec/fastText style) is skipped.
EmbeddingTable load_embeddings(const std::filesystem::path &path);

// Cosine similarity; 0 when either vector has zero norm.
double cosine(std::span<const double> u, std::span<const double> v);

enum class CandidateOrigin { kExtractive, kAbstractive };

class CandidateSet {
 public:
  CandidateSet() = default;
  CandidateSet(std::vector<std::string> words, CandidateOrigin origin, std::size_t k = 0,
               std::string end_marker = std::string(kEndMarker));

  const std::vector<std::string> &words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  const std::string &operator[](std::size_t i) const { return words_[i]; }
  std::optional<std::size_t> index_of(std::string_view word) const;
  bool contains(std::string_view word) const { return index_of(word).has_value(); }
  std::size_t end_index() const { return end_index_; }
  const std::string &end_marker() const { return words_[end_index_]; }
  CandidateOrigin origin() const { return origin_; }
  std::size_t k() const { return k_; }

  bool operator==(const CandidateSet &other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  CandidateOrigin origin_ = CandidateOrigin::kExtractive;
  std::size_t k_ = 0;
  std::size_t end_index_ = 0;
};

enum class UnknownWordPolicy { kError, kKeepWithoutNeighbors };

// Precomputed neighbor lists, `word: n1 n2 ... nK` per line, nearest first.
using NeighborCache = std::unordered_map<std::string, std::vector<std::string>>;
NeighborCache load_neighbor_cache(const std::filesystem::path &path);

// The k most cosine-similar vocabulary words of `word` (itself first). Ties are
// broken lexicographically. Reserved markers are never returned as neighbors.
std::vector<std::string> nearest_words(const EmbeddingTable &table, std::string_view word,
                                       std::size_t k);

CandidateSet knn_candidates(const SourceSequence &x, std::size_t k, const EmbeddingTable &table,
                            UnknownWordPolicy policy = UnknownWordPolicy::kError,
                            const NeighborCache *cache = nullptr);

CandidateSet extractive_candidates(const SourceSequence &x);

// Assignment of every embedded vocabulary word to its most cosine-similar
// candidate. Candidates without an embedding (the end marker, unknown source
// words) own singleton cells and attract nothing. Reserved markers present in
// the table are not part of V.
class VoronoiPartition {
 public:
  static constexpr std::size_t kNoCell = static_cast<std::size_t>(-1);

  VoronoiPartition(std::vector<std::string> candidates, std::vector<std::size_t> cell_of_row,
                   std::vector<std::vector<std::string>> cells,
                   std::unordered_map<std::string, std::size_t> owner);

  const std::vector<std::string> &candidates() const { return candidates_; }
  // Candidate index owning table row i, or kNoCell for reserved rows.
  std::size_t cell_of_row(std::size_t row) const { return cell_of_row_[row]; }
  const std::vector<std::size_t> &cell_of_rows() const { return cell_of_row_; }
  // Candidate index owning `word` (embedded words and unembedded candidates).
  std::optional<std::size_t> owner(std::string_view word) const;
  const std::vector<std::string> &cell(std::size_t candidate) const { return cells_[candidate]; }
  std::size_t cell_count() const { return cells_.size(); }
  bool built_from(const CandidateSet &c) const { return c.words() == candidates_; }

 private:
  std::vector<std::string> candidates_;
  std::vector<std::size_t> cell_of_row_;
  std::vector<std::vector<std::string>> cells_;
  std::unordered_map<std::string, std::size_t> owner_;
};

VoronoiPartition voronoi_partition(const EmbeddingTable &table, const CandidateSet &c);


}  // namespace ctxsum
