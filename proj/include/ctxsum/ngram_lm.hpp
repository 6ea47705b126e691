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
// Interpolated absolute-discount n-gram model. The model is held directly in
// ARPA backoff form: explicit n-grams carry their final interpolated
// probability and contexts carry a backoff weight, so
//
//   p(w | h) = prob(h w)                 if (h w) is explicit
//            = backoff(h) * p(w | h')    otherwise (h' drops the oldest word)
//
// Training mixes a tiny weight `floor_weight` into every order so that all
// probabilities stay strictly positive, even with discount 0.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxsum/corpus.hpp"

namespace ctxsum {

using WordId = std::int32_t;
inline constexpr WordId kNoWord = -1;
inline constexpr std::string_view kUnknownWord = "<unk>";

struct NgramTrainingOptions {
  int order = 3;
  double discount = 0.75;
  // Adds "<unk>" as a zero-count type that absorbs out-of-vocabulary queries.
  bool unknown_bucket = true;
  // Extra zero-count types, e.g. the vocabulary of an embedding table.
  std::vector<std::string> extra_vocabulary;
  double floor_weight = 1e-10;
};

using Ngram = std::vector<WordId>;

struct NgramHash {
  std::size_t operator()(const Ngram &ngram) const noexcept;
};

class NgramLM {
 public:
  struct Entry {
    double prob = 0.0;
    double backoff = 1.0;
  };

  int order() const { return static_cast<int>(tables_.size()); }
  const std::vector<std::string> &vocabulary() const { return words_; }
  WordId id(std::string_view word) const;
  const std::string &word(WordId id) const { return words_[static_cast<std::size_t>(id)]; }
  WordId bos_id() const { return bos_; }
  WordId eos_id() const { return eos_; }
  WordId unk_id() const { return unk_; }
  bool has_unknown_bucket() const { return unk_ != kNoWord; }
  // Number of predictable types, i.e. V plus the sentence end (excludes "<s>").
  std::size_t predictable_size() const { return words_.size() - 1; }

  // Maps words to ids. Unknown words become "<unk>" when the bucket exists,
  // kNoWord otherwise (which blocks any context reaching past them).
  std::vector<WordId> map_words(std::span<const std::string> words) const;

  double probability(WordId word, std::span<const WordId> history) const;
  // Throws UnknownWord when `word` is outside the vocabulary and there is no
  // unknown bucket.
  double conditional_prob(std::string_view word, std::span<const std::string> history) const;
  // Full conditional distribution indexed by WordId ("<s>" gets 0).
  std::vector<double> distribution(std::span<const WordId> history) const;

  std::size_t ngram_count(int order) const { return tables_.at(order - 1).size(); }
  const std::unordered_map<Ngram, Entry, NgramHash> &table(int order) const {
    return tables_.at(order - 1);
  }

  void write_arpa(std::ostream &out) const;
  void save_arpa(const std::filesystem::path &path) const;
  static NgramLM read_arpa(std::istream &in);
  static NgramLM load_arpa(const std::filesystem::path &path);

 private:
  friend NgramLM train_ngram_lm(const Corpus &, const NgramTrainingOptions &);

  WordId intern(const std::string &word);
  void finalize();
  std::span<const WordId> effective_history(std::span<const WordId> history) const;

  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> ids_;
  WordId bos_ = kNoWord, eos_ = kNoWord, unk_ = kNoWord;
  // tables_[k-1] holds the explicit k-grams.
  std::vector<std::unordered_map<Ngram, Entry, NgramHash>> tables_;
  // successors_[k-1] maps a (k-1)-word context to the words completing an
  // explicit k-gram; index 0 is unused.
  std::vector<std::unordered_map<Ngram, std::vector<WordId>, NgramHash>> successors_;
  std::vector<double> unigram_;
};

NgramLM train_ngram_lm(const Corpus &corpus, const NgramTrainingOptions &options);
inline NgramLM train_ngram_lm(const Corpus &corpus, int order, double discount) {
  NgramTrainingOptions options;
  options.order = order;
  options.discount = discount;
  return train_ngram_lm(corpus, options);
}

struct PerplexityReport {
  double perplexity = 0.0;
  std::size_t scored_tokens = 0;
  std::size_t oov_tokens = 0;
};

// Scores every sentence including its end; OOV tokens without an unknown
// bucket are skipped and counted.
PerplexityReport perplexity(const NgramLM &lm, const Corpus &corpus);

}  // namespace ctxsum
