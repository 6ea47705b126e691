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

#include "ctxsum/eval.hpp"

#include <algorithm>
#include <map>
#include <vector>

#include "ctxsum/error.hpp"

namespace ctxsum {

namespace {

double f1(double overlap, double candidate_total, double reference_total) {
  if (overlap <= 0.0 || candidate_total <= 0.0 || reference_total <= 0.0) return 0.0;
  double p = overlap / candidate_total;
  double r = overlap / reference_total;
  return 2.0 * p * r / (p + r);
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(TokenSpan tokens, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

double clipped_overlap_f1(TokenSpan candidate, TokenSpan reference, std::size_t n) {
  if (candidate.size() < n || reference.size() < n) return 0.0;
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  double overlap = 0.0;
  for (const auto &[gram, c] : cand)
    if (auto it = ref.find(gram); it != ref.end()) overlap += static_cast<double>(std::min(c, it->second));
  return f1(overlap, static_cast<double>(candidate.size() - n + 1),
            static_cast<double>(reference.size() - n + 1));
}

}  // namespace

double rouge_n_f1(TokenSpan candidate, TokenSpan reference, int n) {
  if (n < 1) throw Error(ErrorKind::kBadArgument, "ROUGE-N needs n >= 1");
  return clipped_overlap_f1(candidate, reference, static_cast<std::size_t>(n));
}

std::size_t lcs_length(TokenSpan a, TokenSpan b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(TokenSpan candidate, TokenSpan reference) {
  return f1(static_cast<double>(lcs_length(candidate, reference)),
            static_cast<double>(candidate.size()), static_cast<double>(reference.size()));
}

double token_f1(TokenSpan candidate, TokenSpan reference) {
  return clipped_overlap_f1(candidate, reference, 1);
}

double compression_rate(TokenSpan candidate, const SourceSequence &source) {
  return static_cast<double>(candidate.size()) / static_cast<double>(source.content_length());
}

Metric parse_metric(std::string_view text) {
  if (text == "rouge-1" || text == "r1") return Metric::kRouge1;
  if (text == "rouge-2" || text == "r2") return Metric::kRouge2;
  if (text == "rouge-l" || text == "rl") return Metric::kRougeL;
  if (text == "token-f1" || text == "f1") return Metric::kTokenF1;
  throw Error(ErrorKind::kBadArgument, "unknown metric '" + std::string(text) + "'");
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::kRouge1: return "rouge-1";
    case Metric::kRouge2: return "rouge-2";
    case Metric::kRougeL: return "rouge-l";
    case Metric::kTokenF1: return "token-f1";
  }
  return "?";
}

double metric_value(Metric metric, TokenSpan candidate, TokenSpan reference) {
  switch (metric) {
    case Metric::kRouge1: return rouge_n_f1(candidate, reference, 1);
    case Metric::kRouge2: return rouge_n_f1(candidate, reference, 2);
    case Metric::kRougeL: return rouge_l_f1(candidate, reference);
    case Metric::kTokenF1: return token_f1(candidate, reference);
  }
  return 0.0;
}

void MetricAccumulator::add(TokenSpan candidate, TokenSpan reference, const SourceSequence *source) {
  sums_.r1 += rouge_n_f1(candidate, reference, 1);
  sums_.r2 += rouge_n_f1(candidate, reference, 2);
  sums_.rl += rouge_l_f1(candidate, reference);
  sums_.token_f1 += token_f1(candidate, reference);
  ++sums_.pairs;
  if (source) {
    sums_.cr += compression_rate(candidate, *source);
    ++sums_.cr_pairs;
  }
}

MetricReport MetricAccumulator::report() const {
  MetricReport r = sums_;
  if (r.pairs) {
    const auto n = static_cast<double>(r.pairs);
    r.r1 /= n;
    r.r2 /= n;
    r.rl /= n;
    r.token_f1 /= n;
  }
  if (r.cr_pairs) r.cr /= static_cast<double>(r.cr_pairs);
  return r;
}

}  // namespace ctxsum
