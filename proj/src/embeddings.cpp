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

#include "ctxsum/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ctxsum/error.hpp"

namespace ctxsum {

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorKind::kDimMismatch, "embedding dimension must be positive");
}

void EmbeddingTable::add(std::string word, std::span<const double> vec) {
  if (vec.size() != dim_)
    throw Error(ErrorKind::kDimMismatch, "row for '" + word + "' has " +
                                             std::to_string(vec.size()) + " values, expected " +
                                             std::to_string(dim_));
  if (index_.count(word)) throw Error(ErrorKind::kDuplicateWord, word);
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

bool parse_double(std::string_view s, double &out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool is_count_header(const std::vector<std::string> &fields) {
  if (fields.size() != 2) return false;
  return std::all_of(fields.begin(), fields.end(), [](const std::string &f) {
    return !f.empty() && std::all_of(f.begin(), f.end(), [](char c) { return c >= '0' && c <= '9'; });
  });
}

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path &path) {
  std::vector<std::string> lines = read_lines(path);
  std::optional<EmbeddingTable> table;
  std::vector<double> vec;
  for (std::size_t lineno = 0; lineno < lines.size(); ++lineno) {
    std::vector<std::string> fields = split_whitespace(lines[lineno]);
    if (fields.empty()) continue;
    if (!table && lineno == 0 && is_count_header(fields)) continue;
    std::string where = path.string() + ":" + std::to_string(lineno + 1);
    if (fields.size() < 2) throw Error(ErrorKind::kFormatError, where + ": row has no values");
    vec.assign(fields.size() - 1, 0.0);
    for (std::size_t i = 1; i < fields.size(); ++i)
      if (!parse_double(fields[i], vec[i - 1]))
        throw Error(ErrorKind::kFormatError, where + ": bad number '" + fields[i] + "'");
    if (!table) table.emplace(vec.size());
    if (vec.size() != table->dim())
      throw Error(ErrorKind::kDimMismatch, where + ": expected " + std::to_string(table->dim()) +
                                               " values, got " + std::to_string(vec.size()));
    table->add(fields[0], vec);
  }
  if (!table || table->size() < 2)
    throw Error(ErrorKind::kFormatError, path.string() + ": need at least 2 embedding rows");
  return std::move(*table);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error(ErrorKind::kLengthMismatch,
                std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

CandidateSet::CandidateSet(std::vector<std::string> words, CandidateOrigin origin, std::size_t k,
                           std::string end_marker)
    : words_(std::move(words)), origin_(origin), k_(k) {
  bool found_end = false;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second)
      throw Error(ErrorKind::kDuplicateWord, "candidate '" + words_[i] + "' listed twice");
    if (words_[i] == end_marker) {
      found_end = true;
      end_index_ = i;
    }
  }
  if (words_.empty()) throw Error(ErrorKind::kEmptyCandidateSet, "no candidates");
  if (!found_end)
    throw Error(ErrorKind::kFormatError, "candidate set lacks the end marker " + end_marker);
}

std::optional<std::size_t> CandidateSet::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NeighborCache load_neighbor_cache(const std::filesystem::path &path) {
  NeighborCache cache;
  std::vector<std::string> lines = read_lines(path);
  for (std::size_t lineno = 0; lineno < lines.size(); ++lineno) {
    const std::string &line = lines[lineno];
    if (split_whitespace(line).empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorKind::kFormatError,
                  path.string() + ":" + std::to_string(lineno + 1) + ": missing ':'");
    std::vector<std::string> key = split_whitespace(std::string_view(line).substr(0, colon));
    if (key.size() != 1)
      throw Error(ErrorKind::kFormatError,
                  path.string() + ":" + std::to_string(lineno + 1) + ": bad key");
    cache[key[0]] = split_whitespace(std::string_view(line).substr(colon + 1));
  }
  return cache;
}

std::vector<std::string> nearest_words(const EmbeddingTable &table, std::string_view word,
                                       std::size_t k) {
  auto self = table.find(word);
  if (!self) throw Error(ErrorKind::kUnknownSourceWord, std::string(word));
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(table.size());
  auto query = table.row(*self);
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (i == *self || is_reserved_marker(table.words()[i])) continue;
    scored.emplace_back(cosine(query, table.row(i)), i);
  }
  std::size_t take = std::min(k > 0 ? k - 1 : 0, scored.size());
  auto better = [&](const auto &a, const auto &b) {
    if (a.first != b.first) return a.first > b.first;
    return table.words()[a.second] < table.words()[b.second];
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), better);
  std::vector<std::string> out;
  if (k == 0) return out;
  out.emplace_back(word);
  for (std::size_t i = 0; i < take; ++i) out.push_back(table.words()[scored[i].second]);
  return out;
}

CandidateSet knn_candidates(const SourceSequence &x, std::size_t k, const EmbeddingTable &table,
                            UnknownWordPolicy policy, const NeighborCache *cache) {
  if (k == 0) throw Error(ErrorKind::kBadArgument, "K must be at least 1");
  std::vector<std::string> words;
  std::unordered_map<std::string, bool> seen;
  auto push = [&](const std::string &w) {
    if (w != x.end_marker() && seen.emplace(w, true).second) words.push_back(w);
  };
  for (const auto &tok : x.content()) {
    if (seen.count(tok)) continue;
    if (!table.contains(tok)) {
      if (policy == UnknownWordPolicy::kError) throw Error(ErrorKind::kUnknownSourceWord, tok);
      push(tok);
      continue;
    }
    std::vector<std::string> neighbors;
    if (cache) {
      auto it = cache->find(tok);
      if (it != cache->end()) {
        neighbors.push_back(tok);
        for (const auto &n : it->second) {
          if (neighbors.size() >= k) break;
          if (n != tok && table.contains(n) && !is_reserved_marker(n)) neighbors.push_back(n);
        }
      }
    }
    if (neighbors.empty()) neighbors = nearest_words(table, tok, k);
    for (const auto &n : neighbors) push(n);
  }
  words.push_back(x.end_marker());
  return CandidateSet(std::move(words), CandidateOrigin::kAbstractive, k, x.end_marker());
}

CandidateSet extractive_candidates(const SourceSequence &x) {
  std::vector<std::string> words;
  std::unordered_map<std::string, bool> seen;
  for (const auto &tok : x.content())
    if (seen.emplace(tok, true).second) words.push_back(tok);
  words.push_back(x.end_marker());
  return CandidateSet(std::move(words), CandidateOrigin::kExtractive, 0, x.end_marker());
}

VoronoiPartition::VoronoiPartition(std::vector<std::string> candidates,
                                   std::vector<std::size_t> cell_of_row,
                                   std::vector<std::vector<std::string>> cells,
                                   std::unordered_map<std::string, std::size_t> owner)
    : candidates_(std::move(candidates)),
      cell_of_row_(std::move(cell_of_row)),
      cells_(std::move(cells)),
      owner_(std::move(owner)) {}

std::optional<std::size_t> VoronoiPartition::owner(std::string_view word) const {
  auto it = owner_.find(std::string(word));
  if (it == owner_.end()) return std::nullopt;
  return it->second;
}

VoronoiPartition voronoi_partition(const EmbeddingTable &table, const CandidateSet &c) {
  if (c.size() == 0) throw Error(ErrorKind::kEmptyCandidateSet, "no candidates");
  // (candidate index, table row) for candidates that have an embedding.
  std::vector<std::pair<std::size_t, std::size_t>> embedded;
  for (std::size_t ci = 0; ci < c.size(); ++ci) {
    if (is_reserved_marker(c[ci])) continue;
    if (auto row = table.find(c[ci])) embedded.emplace_back(ci, *row);
  }
  if (embedded.empty())
    throw Error(ErrorKind::kEmptyCandidateSet, "no candidate has an embedding");

  std::vector<std::size_t> cell_of_row(table.size(), VoronoiPartition::kNoCell);
  std::vector<std::vector<std::string>> cells(c.size());
  std::unordered_map<std::string, std::size_t> owner;
  for (std::size_t row = 0; row < table.size(); ++row) {
    const std::string &word = table.words()[row];
    if (is_reserved_marker(word)) continue;
    std::size_t best;
    if (auto self = c.index_of(word)) {
      best = *self;
    } else {
      best = embedded.front().first;
      double best_sim = cosine(table.row(row), table.row(embedded.front().second));
      for (std::size_t e = 1; e < embedded.size(); ++e) {
        double sim = cosine(table.row(row), table.row(embedded[e].second));
        if (sim > best_sim) {
          best_sim = sim;
          best = embedded[e].first;
        }
      }
    }
    cell_of_row[row] = best;
    cells[best].push_back(word);
    owner.emplace(word, best);
  }
  for (std::size_t ci = 0; ci < c.size(); ++ci) {
    if (cells[ci].empty()) {
      cells[ci].push_back(c[ci]);
      owner.emplace(c[ci], ci);
    }
  }
  return VoronoiPartition(c.words(), std::move(cell_of_row), std::move(cells), std::move(owner));
}

}  // namespace ctxsum
