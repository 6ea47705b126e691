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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ctxsum/error.hpp"
#include "ctxsum/fluency.hpp"
#include "toy_world.hpp"

using namespace ctxsum;
using Tokens = std::vector<std::string>;

namespace {

ErrorKind kind_of(auto &&fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.kind();
  }
  FAIL("expected an ctxsum::Error");
  return ErrorKind::kBadArgument;
}

double ref_cos(std::span<const double> a, std::span<const double> b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += (long double)a[i] * b[i];
    na += (long double)a[i] * a[i];
    nb += (long double)b[i] * b[i];
  }
  return static_cast<double>(dot / std::sqrt(na * nb));
}

// Sum of LM probability over the words closest to each candidate, found by
// scanning the table directly.
std::vector<double> brute_cluster_mass(const EmbeddingTable &table, const NgramLM &lm,
                                       const Tokens &cands, const Tokens &history) {
  std::vector<double> mass(cands.size(), 0.0);
  Tokens h{"<s>"};
  h.insert(h.end(), history.begin(), history.end());
  for (const auto &w : table.words()) {
    std::size_t best = 0;
    double best_sim = -2;
    for (std::size_t j = 0; j < cands.size(); ++j) {
      if (cands[j] == "</s>") continue;
      double s = w == cands[j] ? 1.0 : ref_cos(table.row(*table.find(w)), table.row(*table.find(cands[j])));
      if (s > best_sim) best_sim = s, best = j;
    }
    mass[best] += lm.conditional_prob(w, h);
  }
  auto end = std::find(cands.begin(), cands.end(), "</s>") - cands.begin();
  mass[static_cast<std::size_t>(end)] += lm.conditional_prob("</s>", h);
  return mass;
}

Tokens random_history(std::mt19937_64 &rng, const EmbeddingTable &table) {
  Tokens h;
  for (std::size_t i = testing::uniform_index(rng, 4); i > 0; --i)
    h.push_back(table.words()[testing::uniform_index(rng, table.size())]);
  return h;
}

}  // namespace

TEST_CASE("smoothing parse") {
  CHECK(Smoothing::parse("cs").kind == Smoothing::Kind::kCluster);
  CHECK(Smoothing::parse("na").kind == Smoothing::Kind::kNone);
  Smoothing t = Smoothing::parse("temp:2.5");
  CHECK(t.kind == Smoothing::Kind::kTemperature);
  CHECK(t.temperature == 2.5);
  CHECK(t.to_string() == "temp:2.5");
  CHECK(kind_of([] { Smoothing::parse("temp:0"); }) == ErrorKind::kNonPositiveTemperature);
  CHECK(kind_of([] { Smoothing::parse("temp:-1"); }) == ErrorKind::kNonPositiveTemperature);
  CHECK(kind_of([] { Smoothing::parse("temp:x"); }) == ErrorKind::kBadArgument);
  CHECK(kind_of([] { Smoothing::parse("zz"); }) == ErrorKind::kBadArgument);
}

TEST_CASE("cluster smoothing with C = V reproduces the LM") {
  testing::ToyWorld world = testing::make_toy_world({.seed = 3, .vocab = 12, .corpus_lines = 30});
  Tokens words = world.table->words();
  words.push_back("</s>");
  CandidateSet c(words, CandidateOrigin::kAbstractive);
  VoronoiPartition part = voronoi_partition(*world.table, c);
  FluencyModel fm(*world.lm, c, &part, Smoothing::cluster());
  CHECK_FALSE(fm.has_unassigned_mass());
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tokens h = random_history(rng, *world.table);
    Tokens full{"<s>"};
    full.insert(full.end(), h.begin(), h.end());
    StepDistribution d = fm.step(h);
    for (std::size_t i = 0; i < c.size(); ++i)
      CHECK(std::abs(d.probs[i] - world.lm->conditional_prob(c[i], full)) < 1e-12);
  }
}

TEST_CASE("cluster smoothing on a six-word vocabulary") {
  // Two candidates; the other four words split by hand-checkable geometry.
  EmbeddingTable table(2);
  table.add("north", std::vector<double>{0, 1});
  table.add("south", std::vector<double>{0, -1});
  table.add("up", std::vector<double>{0.1, 1});
  table.add("high", std::vector<double>{-0.2, 0.9});
  table.add("down", std::vector<double>{0.3, -1});
  table.add("low", std::vector<double>{-0.1, -0.5});
  Corpus corpus = corpus_from_lines({"north up high", "south down", "low low north", "up down"});
  NgramTrainingOptions opts;
  opts.order = 2;
  opts.unknown_bucket = false;
  NgramLM lm = train_ngram_lm(corpus, opts);
  CandidateSet c({"north", "south", "</s>"}, CandidateOrigin::kAbstractive);
  VoronoiPartition part = voronoi_partition(table, c);
  CHECK(part.cell(0) == Tokens{"north", "up", "high"});
  CHECK(part.cell(1) == Tokens{"south", "down", "low"});
  for (const Tokens &h : {Tokens{}, Tokens{"up"}, Tokens{"low"}, Tokens{"south", "down"}}) {
    StepDistribution d = fluency_step_dist(lm, h, c, &part, Smoothing::cluster());
    Tokens full{"<s>"};
    full.insert(full.end(), h.begin(), h.end());
    auto p = [&](const char *w) { return lm.conditional_prob(w, full); };
    CHECK(std::abs(d.probs[0] - (p("north") + p("up") + p("high"))) < 1e-12);
    CHECK(std::abs(d.probs[1] - (p("south") + p("down") + p("low"))) < 1e-12);
    CHECK(std::abs(d.probs[2] - p("</s>")) < 1e-12);
    CHECK(std::abs(d.sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("cluster smoothing matches brute force and conserves mass") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    testing::ToyWorld world = testing::make_toy_world({.seed = seed, .vocab = 30, .corpus_lines = 40});
    std::mt19937_64 rng(seed);
    Tokens cands;
    while (cands.size() < 1 + testing::uniform_index(rng, 6)) {
      const std::string &w = world.table->words()[testing::uniform_index(rng, world.table->size())];
      if (std::find(cands.begin(), cands.end(), w) == cands.end()) cands.push_back(w);
    }
    cands.insert(cands.begin() + static_cast<long>(testing::uniform_index(rng, cands.size() + 1)), "</s>");
    CandidateSet c(cands, CandidateOrigin::kAbstractive);
    VoronoiPartition part = voronoi_partition(*world.table, c);
    FluencyModel fm(*world.lm, c, &part, Smoothing::cluster());
    for (int trial = 0; trial < 10; ++trial) {
      Tokens h = random_history(rng, *world.table);
      StepDistribution d = fm.step(h);
      std::vector<double> expect = brute_cluster_mass(*world.table, *world.lm, cands, h);
      for (std::size_t i = 0; i < cands.size(); ++i) CHECK(std::abs(d.probs[i] - expect[i]) < 1e-12);
      CHECK(d.normalized);
      CHECK(std::abs(d.sum() - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("temperature smoothing") {
  testing::ToyWorld world = testing::make_toy_world({.seed = 9, .vocab = 15, .corpus_lines = 30});
  CandidateSet c({world.table->words()[0], world.table->words()[3], world.table->words()[7], "</s>"},
                 CandidateOrigin::kAbstractive);
  Tokens h{world.table->words()[2]};
  Tokens full{"<s>", h[0]};

  StepDistribution flat = fluency_step_dist(*world.lm, h, c, nullptr, Smoothing::temp(1e6));
  for (double p : flat.probs) CHECK(std::abs(p - 0.25) < 1e-4);

  StepDistribution t1 = fluency_step_dist(*world.lm, h, c, nullptr, Smoothing::temp(1.0));
  double z = 0;
  for (const auto &w : c.words()) z += world.lm->conditional_prob(w, full);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(std::abs(t1.probs[i] - world.lm->conditional_prob(c[i], full) / z) < 1e-12);

  StepDistribution t2 = fluency_step_dist(*world.lm, h, c, nullptr, Smoothing::temp(2.0));
  double z2 = 0;
  for (const auto &w : c.words()) z2 += std::sqrt(world.lm->conditional_prob(w, full));
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(std::abs(t2.probs[i] - std::sqrt(world.lm->conditional_prob(c[i], full)) / z2) < 1e-12);

  CHECK(kind_of([&] { FluencyModel(*world.lm, c, nullptr, Smoothing::temp(0.0)); }) ==
        ErrorKind::kNonPositiveTemperature);
}

TEST_CASE("no smoothing returns raw, unnormalized LM probabilities") {
  testing::ToyWorld world = testing::make_toy_world({.seed = 5, .vocab = 15, .corpus_lines = 30});
  CandidateSet c({world.table->words()[1], world.table->words()[4], "</s>"}, CandidateOrigin::kAbstractive);
  StepDistribution d = fluency_step_dist(*world.lm, Tokens{}, c, nullptr, Smoothing::none());
  CHECK_FALSE(d.normalized);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(d.probs[i] == world.lm->conditional_prob(c[i], Tokens{"<s>"}));
  CHECK(d.sum() < 1.0);
}

TEST_CASE("out-of-vocabulary candidates") {
  Corpus corpus = corpus_from_lines({"a b", "b a"});
  NgramLM with_unk = train_ngram_lm(corpus, 2, 0.5);
  CandidateSet c({"a", "zebra", "</s>"}, CandidateOrigin::kExtractive);
  StepDistribution d = fluency_step_dist(with_unk, Tokens{}, c, nullptr, Smoothing::none());
  CHECK(d.probs[1] == with_unk.conditional_prob("<unk>", Tokens{"<s>"}));

  NgramTrainingOptions opts;
  opts.order = 2;
  opts.unknown_bucket = false;
  NgramLM closed = train_ngram_lm(corpus, opts);
  CHECK(kind_of([&] { FluencyModel(closed, c, nullptr, Smoothing::temp(1.0)); }) == ErrorKind::kUnknownWord);
}

TEST_CASE("partition must come from the same candidate set") {
  testing::ToyWorld world = testing::make_toy_world({.seed = 2, .vocab = 10});
  CandidateSet a({world.table->words()[0], "</s>"}, CandidateOrigin::kAbstractive);
  CandidateSet b({world.table->words()[1], "</s>"}, CandidateOrigin::kAbstractive);
  VoronoiPartition pa = voronoi_partition(*world.table, a);
  CHECK(kind_of([&] { FluencyModel(*world.lm, b, &pa, Smoothing::cluster()); }) == ErrorKind::kPartitionMismatch);
  CHECK(kind_of([&] { FluencyModel(*world.lm, b, nullptr, Smoothing::cluster()); }) == ErrorKind::kPartitionMismatch);
}

TEST_CASE("candidate order only permutes the distribution") {
  testing::ToyWorld world = testing::make_toy_world({.seed = 6, .vocab = 20, .corpus_lines = 30});
  const auto &w = world.table->words();
  Tokens order1{w[0], w[5], "</s>", w[11], w[17]};
  Tokens order2{w[17], "</s>", w[0], w[11], w[5]};
  CandidateSet c1(order1, CandidateOrigin::kAbstractive), c2(order2, CandidateOrigin::kAbstractive);
  VoronoiPartition p1 = voronoi_partition(*world.table, c1), p2 = voronoi_partition(*world.table, c2);
  Tokens h{w[3], w[8]};
  for (Smoothing s : {Smoothing::cluster(), Smoothing::temp(1.5), Smoothing::none()}) {
    StepDistribution d1 = fluency_step_dist(*world.lm, h, c1, &p1, s);
    StepDistribution d2 = fluency_step_dist(*world.lm, h, c2, &p2, s);
    for (std::size_t i = 0; i < order1.size(); ++i)
      CHECK(std::abs(d1.probs[i] - d2.probs[*c2.index_of(order1[i])]) < 1e-12);
  }
}
