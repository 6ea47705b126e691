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
// Tokenization and corpus ingestion. Inputs are assumed pre-tokenized, so
// tokens are whitespace-delimited and never split further.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctxsum {

inline constexpr std::string_view kEndMarker = "</s>";
inline constexpr std::string_view kBeginMarker = "<s>";

inline bool is_reserved_marker(std::string_view word) {
  return word == kEndMarker || word == kBeginMarker;
}

struct PreprocessOptions {
  bool lowercase = true;
  bool strip_periods = true;
  bool append_eos = true;
  std::string end_marker = std::string(kEndMarker);
};

// A preprocessed source sentence. When the end marker was appended it occupies
// the last position and eos_index is its 1-based position (content length + 1).
class SourceSequence {
 public:
  SourceSequence() = default;
  SourceSequence(std::vector<std::string> tokens, bool has_eos,
                 std::string end_marker = std::string(kEndMarker));

  const std::vector<std::string> &tokens() const { return tokens_; }
  // Number of content tokens m (excludes the end marker).
  std::size_t content_length() const { return has_eos_ ? tokens_.size() - 1 : tokens_.size(); }
  std::size_t eos_index() const { return content_length() + 1; }
  bool has_eos() const { return has_eos_; }
  const std::string &end_marker() const { return end_marker_; }
  std::vector<std::string> content() const;

  // 1-based access, positions 1..tokens().size().
  const std::string &at(std::size_t position) const { return tokens_.at(position - 1); }

  bool operator==(const SourceSequence &) const = default;

 private:
  std::vector<std::string> tokens_;
  bool has_eos_ = false;
  std::string end_marker_ = std::string(kEndMarker);
};

SourceSequence preprocess(std::string_view raw, const PreprocessOptions &options = {});

// Splits on ASCII whitespace.
std::vector<std::string> split_whitespace(std::string_view text);

std::string join_tokens(const std::vector<std::string> &tokens, std::string_view sep = " ");

class Corpus {
 public:
  void add_sentence(std::vector<std::string> tokens);

  const std::vector<std::vector<std::string>> &sentences() const { return sentences_; }
  // Word types in first-seen order.
  const std::vector<std::string> &types() const { return types_; }
  std::size_t count(const std::string &word) const;
  std::size_t token_count() const { return token_count_; }
  std::size_t skipped_lines() const { return skipped_lines_; }
  void note_skipped_line() { ++skipped_lines_; }
  bool empty() const { return sentences_.empty(); }

 private:
  std::vector<std::vector<std::string>> sentences_;
  std::vector<std::string> types_;
  std::unordered_map<std::string, std::size_t> counts_;
  std::size_t token_count_ = 0;
  std::size_t skipped_lines_ = 0;
};

// One sentence per line; lowercased and period-stripped, no end marker.
// Blank lines (and lines that preprocess to nothing) are skipped and counted.
Corpus load_corpus(const std::filesystem::path &path);
Corpus corpus_from_lines(const std::vector<std::string> &lines);

// Reads a text file line by line, stripping a trailing CR.
std::vector<std::string> read_lines(const std::filesystem::path &path);

}  // namespace ctxsum
