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

#include "ctxsum/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ctxsum/error.hpp"

namespace ctxsum {

namespace {

constexpr double kArpaLogZero = -99.0;

std::string format_log10(double p) {
  char buf[64];
  double lp = p > 0.0 ? std::log10(p) : kArpaLogZero;
  if (lp < kArpaLogZero) lp = kArpaLogZero;
  std::snprintf(buf, sizeof buf, "%.12g", lp);
  return buf;
}

double parse_log10(const std::string &field, const std::string &where) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception &) {
    throw Error(ErrorKind::kFormatError, where + ": bad number '" + field + "'");
  }
  if (used != field.size())
    throw Error(ErrorKind::kFormatError, where + ": bad number '" + field + "'");
  return v <= kArpaLogZero ? 0.0 : std::pow(10.0, v);
}

}  // namespace

std::size_t NgramHash::operator()(const Ngram &ngram) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (WordId w : ngram) {
    h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(w));
    h *= 1099511628211ull;
  }
  return h;
}

WordId NgramLM::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kNoWord : it->second;
}

WordId NgramLM::intern(const std::string &word) {
  auto [it, inserted] = ids_.try_emplace(word, static_cast<WordId>(words_.size()));
  if (inserted) words_.push_back(word);
  return it->second;
}

std::vector<WordId> NgramLM::map_words(std::span<const std::string> words) const {
  std::vector<WordId> out;
  out.reserve(words.size());
  for (const auto &w : words) {
    WordId i = id(w);
    out.push_back(i == kNoWord ? unk_ : i);
  }
  return out;
}

std::span<const WordId> NgramLM::effective_history(std::span<const WordId> history) const {
  std::size_t keep = std::min<std::size_t>(history.size(), static_cast<std::size_t>(order() - 1));
  auto h = history.subspan(history.size() - keep);
  for (std::size_t i = h.size(); i > 0; --i)
    if (h[i - 1] == kNoWord) return h.subspan(i);
  return h;
}

double NgramLM::probability(WordId word, std::span<const WordId> history) const {
  auto h = effective_history(history);
  double scale = 1.0;
  Ngram key;
  while (!h.empty()) {
    key.assign(h.begin(), h.end());
    key.push_back(word);
    const auto &explicit_table = tables_[h.size()];
    if (auto it = explicit_table.find(key); it != explicit_table.end()) return scale * it->second.prob;
    key.pop_back();
    const auto &context_table = tables_[h.size() - 1];
    if (auto it = context_table.find(key); it != context_table.end()) scale *= it->second.backoff;
    h = h.subspan(1);
  }
  return scale * unigram_[static_cast<std::size_t>(word)];
}

double NgramLM::conditional_prob(std::string_view word, std::span<const std::string> history) const {
  WordId w = id(word);
  if (w == kNoWord) w = unk_;
  if (w == kNoWord || w == bos_) throw Error(ErrorKind::kUnknownWord, std::string(word));
  std::vector<WordId> h = map_words(history);
  return probability(w, h);
}

std::vector<double> NgramLM::distribution(std::span<const WordId> history) const {
  auto h = effective_history(history);
  if (h.empty()) return unigram_;
  std::vector<double> dist = distribution(h.subspan(1));
  Ngram key(h.begin(), h.end());
  const auto &context_table = tables_[h.size() - 1];
  if (auto it = context_table.find(key); it != context_table.end() && it->second.backoff != 1.0)
    for (double &p : dist) p *= it->second.backoff;
  const auto &succ = successors_[h.size()];
  if (auto it = succ.find(key); it != succ.end()) {
    const auto &explicit_table = tables_[h.size()];
    key.push_back(0);
    for (WordId w : it->second) {
      key.back() = w;
      dist[static_cast<std::size_t>(w)] = explicit_table.at(key).prob;
    }
  }
  return dist;
}

void NgramLM::finalize() {
  successors_.assign(tables_.size(), {});
  for (std::size_t k = 1; k < tables_.size(); ++k) {
    for (const auto &[ngram, entry] : tables_[k]) {
      Ngram context(ngram.begin(), ngram.end() - 1);
      successors_[k][context].push_back(ngram.back());
    }
    for (auto &[context, words] : successors_[k]) std::sort(words.begin(), words.end());
  }
  unigram_.assign(words_.size(), 0.0);
  for (const auto &[ngram, entry] : tables_[0]) unigram_[static_cast<std::size_t>(ngram[0])] = entry.prob;
  unigram_[static_cast<std::size_t>(bos_)] = 0.0;
}

NgramLM train_ngram_lm(const Corpus &corpus, const NgramTrainingOptions &options) {
  if (corpus.empty()) throw Error(ErrorKind::kEmptyCorpus, "cannot train on an empty corpus");
  if (options.order < 1 || options.order > 5)
    throw Error(ErrorKind::kBadOrder, "order must be in 1..5, got " + std::to_string(options.order));
  if (!(options.discount >= 0.0 && options.discount < 1.0))
    throw Error(ErrorKind::kBadDiscount, "discount must be in [0, 1)");
  const double discount = options.discount;
  const double phi = options.floor_weight;

  NgramLM lm;
  lm.bos_ = lm.intern(std::string(kBeginMarker));
  lm.eos_ = lm.intern(std::string(kEndMarker));
  for (const auto &w : corpus.types()) lm.intern(w);
  for (const auto &w : options.extra_vocabulary)
    if (!is_reserved_marker(w)) lm.intern(w);
  if (options.unknown_bucket) lm.unk_ = lm.intern(std::string(kUnknownWord));
  else lm.unk_ = lm.id(kUnknownWord);

  const auto order = static_cast<std::size_t>(options.order);
  std::vector<std::map<Ngram, double>> counts(order);
  std::vector<WordId> ids;
  for (const auto &sentence : corpus.sentences()) {
    ids.clear();
    ids.push_back(lm.bos_);
    for (const auto &w : sentence) ids.push_back(lm.id(w));
    ids.push_back(lm.eos_);
    for (std::size_t i = 1; i < ids.size(); ++i)
      for (std::size_t k = 1; k <= order && k <= i + 1; ++k)
        counts[k - 1][Ngram(ids.begin() + static_cast<std::ptrdiff_t>(i + 1 - k),
                            ids.begin() + static_cast<std::ptrdiff_t>(i + 1))] += 1.0;
  }

  lm.tables_.assign(order, {});
  // Unigrams: discounted counts interpolated with the uniform distribution
  // over every predictable type.
  const double types = static_cast<double>(lm.predictable_size());
  double total = 0.0, seen = 0.0;
  for (const auto &[ngram, c] : counts[0]) {
    total += c;
    seen += 1.0;
  }
  const double gamma0 = discount * seen / total;
  for (WordId w = 0; w < static_cast<WordId>(lm.words_.size()); ++w) {
    NgramLM::Entry e;
    if (w != lm.bos_) {
      auto it = counts[0].find(Ngram{w});
      double c = it == counts[0].end() ? 0.0 : it->second;
      double p = std::max(c - discount, 0.0) / total + gamma0 / types;
      e.prob = (1.0 - phi) * p + phi / types;
    }
    lm.tables_[0].emplace(Ngram{w}, e);
  }
  lm.finalize();

  for (std::size_t k = 2; k <= order; ++k) {
    std::map<Ngram, std::pair<double, double>> context_stats;  // total count, distinct successors
    for (const auto &[ngram, c] : counts[k - 1]) {
      auto &stats = context_stats[Ngram(ngram.begin(), ngram.end() - 1)];
      stats.first += c;
      stats.second += 1.0;
    }
    for (const auto &[context, stats] : context_stats)
      lm.tables_[k - 2].at(context).backoff = (1.0 - phi) * discount * stats.second / stats.first + phi;
    for (const auto &[ngram, c] : counts[k - 1]) {
      Ngram context(ngram.begin(), ngram.end() - 1);
      const auto &stats = context_stats.at(context);
      double lower = lm.probability(ngram.back(), std::span<const WordId>(context).subspan(1));
      double p = (1.0 - phi) * std::max(c - discount, 0.0) / stats.first +
                 lm.tables_[k - 2].at(context).backoff * lower;
      lm.tables_[k - 1].emplace(ngram, NgramLM::Entry{p, 1.0});
    }
    lm.finalize();
  }
  return lm;
}

void NgramLM::write_arpa(std::ostream &out) const {
  out << "\n\\data\\\n";
  for (int k = 1; k <= order(); ++k) out << "ngram " << k << "=" << ngram_count(k) << "\n";
  for (int k = 1; k <= order(); ++k) {
    out << "\n\\" << k << "-grams:\n";
    std::vector<const std::pair<const Ngram, Entry> *> sorted;
    sorted.reserve(tables_[k - 1].size());
    for (const auto &item : tables_[k - 1]) sorted.push_back(&item);
    std::sort(sorted.begin(), sorted.end(), [](auto *a, auto *b) { return a->first < b->first; });
    for (const auto *item : sorted) {
      out << format_log10(item->second.prob);
      for (WordId w : item->first) out << ' ' << word(w);
      if (k < order()) out << ' ' << format_log10(item->second.backoff);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

void NgramLM::save_arpa(const std::filesystem::path &path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  write_arpa(out);
  if (!out) throw Error(ErrorKind::kIoError, "write failure on " + path.string());
}

NgramLM NgramLM::read_arpa(std::istream &in) {
  NgramLM lm;
  std::string line;
  std::size_t lineno = 0;
  auto where = [&] { return "arpa line " + std::to_string(lineno); };
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!split_whitespace(line).empty()) return true;
    }
    return false;
  };

  while (next() && line != "\\data\\") {}
  if (line != "\\data\\") throw Error(ErrorKind::kFormatError, "missing \\data\\ section");
  std::vector<std::size_t> expected;
  while (next() && line.rfind("ngram ", 0) == 0) {
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kFormatError, where() + ": bad ngram count");
    int k = std::stoi(line.substr(6, eq - 6));
    if (k != static_cast<int>(expected.size()) + 1)
      throw Error(ErrorKind::kFormatError, where() + ": ngram orders out of sequence");
    expected.push_back(std::stoul(line.substr(eq + 1)));
  }
  if (expected.empty() || expected.size() > 5)
    throw Error(ErrorKind::kBadOrder, "ARPA model order must be in 1..5");
  const int order = static_cast<int>(expected.size());
  lm.tables_.assign(expected.size(), {});

  for (int k = 1; k <= order; ++k) {
    if (line != "\\" + std::to_string(k) + "-grams:")
      throw Error(ErrorKind::kFormatError, where() + ": expected \\" + std::to_string(k) + "-grams:");
    for (std::size_t n = 0; n < expected[k - 1]; ++n) {
      if (!next()) throw Error(ErrorKind::kFormatError, "truncated " + std::to_string(k) + "-grams");
      std::vector<std::string> fields = split_whitespace(line);
      std::size_t want = static_cast<std::size_t>(k) + 1;
      if (fields.size() != want && fields.size() != want + 1)
        throw Error(ErrorKind::kFormatError, where() + ": wrong field count");
      Entry e;
      e.prob = parse_log10(fields[0], where());
      if (fields.size() == want + 1) e.backoff = parse_log10(fields[want], where());
      Ngram ngram;
      for (int i = 1; i <= k; ++i) {
        const std::string &w = fields[static_cast<std::size_t>(i)];
        if (k == 1) {
          ngram.push_back(lm.intern(w));
        } else {
          WordId wid = lm.id(w);
          if (wid == kNoWord) throw Error(ErrorKind::kFormatError, where() + ": word '" + w + "' not in unigrams");
          ngram.push_back(wid);
        }
      }
      if (!lm.tables_[k - 1].emplace(std::move(ngram), e).second)
        throw Error(ErrorKind::kFormatError, where() + ": duplicate n-gram");
    }
    if (!next()) throw Error(ErrorKind::kFormatError, "missing \\end\\");
  }
  if (line != "\\end\\") throw Error(ErrorKind::kFormatError, where() + ": expected \\end\\");
  lm.bos_ = lm.id(kBeginMarker);
  lm.eos_ = lm.id(kEndMarker);
  lm.unk_ = lm.id(kUnknownWord);
  if (lm.bos_ == kNoWord || lm.eos_ == kNoWord)
    throw Error(ErrorKind::kFormatError, "ARPA model must contain <s> and </s>");
  lm.finalize();
  return lm;
}

NgramLM NgramLM::load_arpa(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  return read_arpa(in);
}

PerplexityReport perplexity(const NgramLM &lm, const Corpus &corpus) {
  PerplexityReport report;
  double log_sum = 0.0;
  std::vector<WordId> history;
  for (const auto &sentence : corpus.sentences()) {
    history.assign(1, lm.bos_id());
    std::vector<WordId> ids = lm.map_words(sentence);
    ids.push_back(lm.eos_id());
    for (WordId w : ids) {
      if (w == kNoWord) {
        ++report.oov_tokens;
      } else {
        log_sum += std::log(lm.probability(w, history));
        ++report.scored_tokens;
      }
      history.push_back(w);
    }
  }
  report.perplexity = report.scored_tokens ? std::exp(-log_sum / static_cast<double>(report.scored_tokens)) : 0.0;
  return report;
}

}  // namespace ctxsum
