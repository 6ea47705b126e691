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

#include "ctxsum/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "ctxsum/error.hpp"

namespace ctxsum {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

SourceSequence::SourceSequence(std::vector<std::string> tokens, bool has_eos,
                               std::string end_marker)
    : tokens_(std::move(tokens)), has_eos_(has_eos), end_marker_(std::move(end_marker)) {
  if (has_eos_ && (tokens_.empty() || tokens_.back() != end_marker_))
    throw Error(ErrorKind::kFormatError, "source sequence does not end with the end marker");
  if (content_length() == 0) throw Error(ErrorKind::kEmptyInput, "source has no content tokens");
}

std::vector<std::string> SourceSequence::content() const {
  return {tokens_.begin(), tokens_.begin() + static_cast<std::ptrdiff_t>(content_length())};
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(const std::vector<std::string> &tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

SourceSequence preprocess(std::string_view raw, const PreprocessOptions &options) {
  std::vector<std::string> raw_tokens = split_whitespace(raw);
  // A single trailing marker is what our own output looks like; accept it so
  // that preprocessing is idempotent.
  bool already_terminated = !raw_tokens.empty() && raw_tokens.back() == options.end_marker;
  if (already_terminated) raw_tokens.pop_back();

  std::vector<std::string> tokens;
  tokens.reserve(raw_tokens.size() + 1);
  for (auto &tok : raw_tokens) {
    if (tok == options.end_marker)
      throw Error(ErrorKind::kReservedToken, "input contains the reserved marker " + tok);
    if (options.strip_periods && tok == ".") continue;
    tokens.push_back(options.lowercase ? to_lower(std::move(tok)) : std::move(tok));
  }
  if (tokens.empty()) throw Error(ErrorKind::kEmptyInput, "no tokens survive preprocessing");

  bool eos = options.append_eos || already_terminated;
  if (eos) tokens.push_back(options.end_marker);
  return SourceSequence(std::move(tokens), eos, options.end_marker);
}

void Corpus::add_sentence(std::vector<std::string> tokens) {
  for (const auto &tok : tokens) {
    auto [it, inserted] = counts_.try_emplace(tok, 0);
    if (inserted) types_.push_back(tok);
    ++it->second;
  }
  token_count_ += tokens.size();
  sentences_.push_back(std::move(tokens));
}

std::size_t Corpus::count(const std::string &word) const {
  auto it = counts_.find(word);
  return it == counts_.end() ? 0 : it->second;
}

std::vector<std::string> read_lines(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) throw Error(ErrorKind::kIoError, "read failure on " + path.string());
  return lines;
}

Corpus corpus_from_lines(const std::vector<std::string> &lines) {
  PreprocessOptions opts;
  opts.append_eos = false;
  Corpus corpus;
  for (const auto &line : lines) {
    if (split_whitespace(line).empty()) {
      corpus.note_skipped_line();
      continue;
    }
    try {
      corpus.add_sentence(preprocess(line, opts).content());
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::kEmptyInput) throw;
      corpus.note_skipped_line();
    }
  }
  if (corpus.empty()) throw Error(ErrorKind::kEmptyCorpus, "corpus has no usable lines");
  return corpus;
}

Corpus load_corpus(const std::filesystem::path &path) {
  return corpus_from_lines(read_lines(path));
}

}  // namespace ctxsum
