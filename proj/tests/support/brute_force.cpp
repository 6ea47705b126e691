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

#include "brute_force.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace ctxsum::testing {

double reference_cosine(const std::vector<double> &a, const std::vector<double> &b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return static_cast<double>(dot / std::sqrt(na * nb));
}

std::vector<double> reference_cluster_step(const NgramLM &lm, const EmbeddingTable &table,
                                           const std::vector<std::string> &candidates,
                                           const std::vector<std::string> &history) {
  std::vector<std::string> h{"<s>"};
  h.insert(h.end(), history.begin(), history.end());
  std::vector<double> mass(candidates.size(), 0.0);
  double assigned = 0.0;
  for (const auto &w : lm.vocabulary()) {
    if (w == "<s>") continue;
    double p = lm.conditional_prob(w, h);
    std::ptrdiff_t owner = -1;
    auto self = std::find(candidates.begin(), candidates.end(), w);
    if (self != candidates.end()) {
      owner = self - candidates.begin();
    } else if (auto row = table.find(w); row && !is_reserved_marker(w)) {
      std::vector<double> v(table.row(*row).begin(), table.row(*row).end());
      double best = 0;
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        auto crow = table.find(candidates[j]);
        if (!crow || is_reserved_marker(candidates[j])) continue;
        std::vector<double> c(table.row(*crow).begin(), table.row(*crow).end());
        double s = reference_cosine(v, c);
        if (owner < 0 || s > best) best = s, owner = static_cast<std::ptrdiff_t>(j);
      }
    }
    if (owner >= 0) {
      mass[static_cast<std::size_t>(owner)] += p;
      assigned += p;
    }
  }
  bool all_assigned = true;
  for (const auto &w : lm.vocabulary()) {
    if (w == "<s>") continue;
    bool ok = std::find(candidates.begin(), candidates.end(), w) != candidates.end() ||
              (table.contains(w) && !is_reserved_marker(w));
    all_assigned = all_assigned && ok;
  }
  if (!all_assigned)
    for (double &m : mass) m /= assigned;
  return mass;
}

namespace {

std::vector<double> vector_of(const Encoder &enc, const std::vector<std::string> &tokens, LayerCombo combo) {
  return prefix_vector(enc.encode(tokens), combo);
}

}  // namespace

BruteResult brute_force_decode(const BruteInstance &in) {
  const Encoder &enc = *in.encoder;
  const auto &x = in.source.tokens();
  const std::size_t end = x.size();
  const std::string end_marker = in.source.end_marker();
  const auto &cands = in.candidates;

  std::vector<std::vector<double>> bank;
  for (std::size_t j = 1; j <= end; ++j)
    bank.push_back(vector_of(enc, std::vector<std::string>(x.begin(), x.begin() + static_cast<long>(j)), in.combo));

  BruteResult result;
  for (std::size_t n = 1, pow = cands.size(); n <= end; ++n, pow *= cands.size()) result.search_space += pow;

  std::vector<std::string> y;
  std::vector<std::size_t> z;
  std::function<void(double)> walk = [&](double objective) {
    const std::size_t z_prev = z.empty() ? 0 : z.back();
    std::vector<double> scores(cands.size());
    std::vector<std::size_t> argmax(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      std::vector<std::string> ext = y;
      ext.push_back(cands[i]);
      std::vector<double> t = vector_of(enc, ext, in.combo);
      double best = 0;
      std::size_t best_j = 0;
      for (std::size_t j = z_prev + 1; j <= end; ++j) {
        double s = reference_cosine(bank[j - 1], t);
        if (best_j == 0 || s > best) best = s, best_j = j;
      }
      scores[i] = best;
      argmax[i] = best_j;
    }
    double top = *std::max_element(scores.begin(), scores.end());
    long double zsum = 0;
    for (double s : scores) zsum += std::exp(static_cast<long double>(s - top));

    std::vector<double> fluency(cands.size(), 1.0);
    if (in.lm) {
      std::vector<std::string> h{"<s>"};
      h.insert(h.end(), y.begin(), y.end());
      auto lm_prob = [&](const std::string &w) {
        std::string q = in.lm->id(w) < 0 && in.lm->has_unknown_bucket() ? "<unk>" : w;
        return in.lm->conditional_prob(q, h);
      };
      switch (in.smoothing.kind) {
        case Smoothing::Kind::kCluster:
          fluency = reference_cluster_step(*in.lm, *in.table, cands, y);
          break;
        case Smoothing::Kind::kTemperature: {
          long double zt = 0;
          for (std::size_t i = 0; i < cands.size(); ++i)
            zt += fluency[i] = std::pow(lm_prob(cands[i]), 1.0 / in.smoothing.temperature);
          for (double &f : fluency) f = static_cast<double>(f / zt);
          break;
        }
        case Smoothing::Kind::kNone:
          for (std::size_t i = 0; i < cands.size(); ++i) fluency[i] = lm_prob(cands[i]);
          break;
      }
    }

    for (std::size_t i = 0; i < cands.size(); ++i) {
      const bool is_end = cands[i] == end_marker;
      const bool finished = argmax[i] == end;
      const std::size_t len = y.size() + 1;
      if (is_end && !finished) continue;
      if (len >= end && !is_end) continue;
      double step = static_cast<double>(scores[i] - top - std::log(zsum));
      if (in.lm) step += in.lambda * std::log(std::max(fluency[i], 1e-300));
      y.push_back(cands[i]);
      z.push_back(argmax[i]);
      if (finished) {
        BruteSequence seq{y, z, objective + step, 0.0};
        seq.normalized = seq.objective / (static_cast<double>(len) + in.alpha);
        result.complete.push_back(std::move(seq));
      } else if (len < end) {
        walk(objective + step);
      }
      y.pop_back();
      z.pop_back();
    }
  };
  walk(0.0);
  std::sort(result.complete.begin(), result.complete.end(), [](const BruteSequence &a, const BruteSequence &b) {
    if (a.normalized != b.normalized) return a.normalized > b.normalized;
    return a.tokens < b.tokens;
  });
  return result;
}

DecoderInstance make_decoder_instance(std::uint64_t seed, std::size_t max_m, std::size_t max_c) {
  ToyWorldParams params;
  params.seed = seed;
  params.vocab = 12;
  DecoderInstance inst;
  inst.world = make_toy_world(params);
  std::mt19937_64 rng(seed * 7919 + 1);
  BuiltinEncoderOptions opts;
  opts.seed = seed;
  opts.layers = 3;
  opts.bottom = inst.world.table;
  inst.encoder = std::make_shared<BuiltinEncoder>(opts);

  std::vector<std::string> src = markov_sentence(rng, params.vocab, 1 + uniform_index(rng, max_m));
  inst.source = preprocess(join_tokens(src));
  std::size_t size = 2 + uniform_index(rng, max_c - 1);
  std::vector<std::string> words;
  while (words.size() + 1 < size) {
    // favour source words so extractive-looking candidates are common
    std::string w = uniform_index(rng, 2) == 0 ? src[uniform_index(rng, src.size())]
                                               : toy_word(uniform_index(rng, params.vocab));
    if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
  }
  words.insert(words.begin() + static_cast<long>(uniform_index(rng, words.size() + 1)), std::string(kEndMarker));
  inst.candidates = CandidateSet(words, CandidateOrigin::kAbstractive);
  inst.partition = std::make_shared<VoronoiPartition>(voronoi_partition(*inst.world.table, inst.candidates));
  return inst;
}

DecodeResult decode_instance(const DecoderInstance &inst, const DecoderConfig &cfg, bool use_fluency) {
  SourcePrefixBank bank = build_source_bank(*inst.encoder, inst.source, cfg.combo);
  std::unique_ptr<FluencyModel> fm;
  if (use_fluency) fm = std::make_unique<FluencyModel>(*inst.world.lm, inst.candidates, inst.partition.get(), cfg.smoothing);
  Experts experts{MatchingExpert{*inst.encoder, bank, cfg.combo}, fm.get()};
  return beam_search(inst.source, inst.candidates, experts, cfg);
}

BruteInstance brute_instance(const DecoderInstance &inst, const DecoderConfig &cfg, bool use_fluency) {
  BruteInstance b;
  b.encoder = inst.encoder.get();
  b.source = inst.source;
  b.candidates = inst.candidates.words();
  b.lm = use_fluency ? inst.world.lm.get() : nullptr;
  b.table = inst.world.table.get();
  b.smoothing = cfg.smoothing;
  b.lambda = cfg.lambda;
  b.alpha = cfg.alpha;
  b.combo = cfg.combo;
  return b;
}

}  // namespace ctxsum::testing
