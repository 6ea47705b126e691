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

#include <cmath>
#include <optional>
#include <random>

#include "brute_force.hpp"
#include "ctxsum/decoder.hpp"
#include "ctxsum/error.hpp"

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

BuiltinEncoder hashed_encoder(std::uint64_t seed) {
  BuiltinEncoderOptions o;
  o.seed = seed;
  o.layers = 3;
  o.dim = 8;
  return BuiltinEncoder(o);
}

Hypothesis finished_with(double cm, std::size_t length) {
  Hypothesis h(EncoderState(1, 1));
  h.tokens.assign(length, "w");
  h.cm_logprob = cm;
  h.finished = true;
  return h;
}

DecoderConfig exhaustive_config(const testing::DecoderInstance &inst) {
  DecoderConfig cfg;
  std::size_t space = 0;
  for (std::size_t n = 1, p = inst.candidates.size(); n <= inst.source.tokens().size(); ++n, p *= inst.candidates.size())
    space += p;
  cfg.beam = space;
  return cfg;
}

}  // namespace

TEST_CASE("step_extend accumulates both experts") {
  testing::DecoderInstance inst = testing::make_decoder_instance(3, 4, 3);
  DecoderConfig cfg;
  SourcePrefixBank bank = build_source_bank(*inst.encoder, inst.source, cfg.combo);
  FluencyModel fm(*inst.world.lm, inst.candidates, inst.partition.get(), cfg.smoothing);
  Hypothesis root(inst.encoder->begin_sequence());
  root.cm_logprob = -0.25;
  root.fm_logprob = -1.5;
  MatchStep step = match_step(bank, root.state, inst.candidates, 0, *inst.encoder, cfg.combo);
  StepDistribution f = fm.step(root.tokens);
  auto children = step_extend(root, inst.candidates, step, &f, cfg, bank.size());
  REQUIRE(children.size() == inst.candidates.size());
  for (std::size_t i = 0; i < children.size(); ++i) {
    const Hypothesis &c = children[i];
    CHECK(c.tokens == Tokens{inst.candidates[i]});
    CHECK(c.alignments == std::vector<std::size_t>{step.argmax_pos[i]});
    CHECK(std::abs(c.cm_logprob - (-0.25 + std::log(step.dist.probs[i]))) < 1e-12);
    CHECK(std::abs(c.fm_logprob - (-1.5 + std::log(f.probs[i]))) < 1e-12);
    CHECK(std::abs(c.score(0.11) - (-0.25 + std::log(step.dist.probs[i]) + 0.11 * (-1.5 + std::log(f.probs[i])))) < 1e-12);
    CHECK(c.finished == (step.argmax_pos[i] == bank.size()));
  }
  // a zero fluency value is clamped, not propagated as -inf
  StepDistribution zero = f;
  zero.probs.assign(zero.probs.size(), 0.0);
  std::size_t clamped = 0;
  auto floored = step_extend(root, inst.candidates, step, &zero, cfg, bank.size(), &clamped);
  CHECK(clamped == inst.candidates.size());
  CHECK(floored[0].fm_logprob == -1.5 + std::log(kFluencyFloor));

  Hypothesis done = children[0];
  done.finished = true;
  CHECK(kind_of([&] { step_extend(done, inst.candidates, step, &f, cfg, bank.size()); }) == ErrorKind::kBadArgument);
}

TEST_CASE("lambda zero ranks children by the matching expert alone") {
  testing::DecoderInstance inst = testing::make_decoder_instance(8, 4, 3);
  DecoderConfig cfg;
  cfg.lambda = 0.0;
  SourcePrefixBank bank = build_source_bank(*inst.encoder, inst.source, cfg.combo);
  Hypothesis root(inst.encoder->begin_sequence());
  MatchStep step = match_step(bank, root.state, inst.candidates, 0, *inst.encoder, cfg.combo);
  StepDistribution f = fluency_step_dist(*inst.world.lm, Tokens{}, inst.candidates, inst.partition.get(), cfg.smoothing);
  auto children = step_extend(root, inst.candidates, step, &f, cfg, bank.size());
  for (std::size_t i = 0; i < children.size(); ++i)
    for (std::size_t j = 0; j < children.size(); ++j)
      CHECK((children[i].score(0.0) < children[j].score(0.0)) == (step.dist.probs[i] < step.dist.probs[j]));
}

TEST_CASE("length-normalized score") {
  DecoderConfig cfg;
  cfg.lambda = 0.0;
  CHECK(length_normalized_score(finished_with(-2.0, 4), cfg) == -0.5);
  Hypothesis h = finished_with(-2.0, 4);
  h.fm_logprob = -10.0;
  cfg.lambda = 0.1;
  CHECK(length_normalized_score(h, cfg) == doctest::Approx(-3.0 / 4.0));

  cfg.lambda = 0.0;
  cfg.alpha = -0.1;
  double short_score = length_normalized_score(finished_with(-3.0, 3), cfg);
  double long_score = length_normalized_score(finished_with(-3.0, 5), cfg);
  CHECK(short_score == doctest::Approx(-3.0 / 2.9));
  CHECK(long_score == doctest::Approx(-3.0 / 4.9));
  CHECK(short_score < long_score);
  CHECK(length_normalized_score(finished_with(3.0, 3), cfg) > length_normalized_score(finished_with(3.0, 5), cfg));

  cfg.alpha = -1.0;
  CHECK(kind_of([&] { length_normalized_score(finished_with(-1.0, 1), cfg); }) == ErrorKind::kDegenerateLength);
}

TEST_CASE("admissibility") {
  Hypothesis h(EncoderState(1, 1));
  h.tokens = {"a", "</s>"};
  h.alignments = {1, 3};
  CHECK(is_admissible(h, "</s>", 3));
  h.alignments = {1, 2};
  CHECK_FALSE(is_admissible(h, "</s>", 3));
  h.tokens = {"a", "b"};
  h.alignments = {1, 3};
  CHECK(is_admissible(h, "</s>", 3));
  h.tokens = {"a", "b", "c"};
  h.alignments = {1, 2, 3};
  CHECK_FALSE(is_admissible(h, "</s>", 3));
}

TEST_CASE("beam search matches exhaustive enumeration") {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    testing::DecoderInstance inst = testing::make_decoder_instance(seed, 3, 3);
    for (Smoothing s : {Smoothing::cluster(), Smoothing::temp(2.0), Smoothing::none()}) {
      DecoderConfig cfg = exhaustive_config(inst);
      cfg.smoothing = s;
      cfg.alpha = seed % 2 ? 0.0 : 0.5;
      DecodeResult got = testing::decode_instance(inst, cfg, true);
      testing::BruteResult ref = testing::brute_force_decode(testing::brute_instance(inst, cfg, true));
      REQUIRE_FALSE(ref.complete.empty());
      CHECK(got.best().tokens == ref.complete.front().tokens);
      CHECK(got.best().alignments == ref.complete.front().alignments);
      CHECK(std::abs(got.best_score() - ref.complete.front().normalized) < 1e-9);
      CHECK(got.pool.size() == ref.complete.size());
      ++checked;
    }
  }
  CHECK(checked == 120);
}

TEST_CASE("beam of one is greedy decoding") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    testing::DecoderInstance inst = testing::make_decoder_instance(seed, 4, 3);
    DecoderConfig cfg;
    cfg.beam = 1;
    DecodeResult got = testing::decode_instance(inst, cfg, true);

    SourcePrefixBank bank = build_source_bank(*inst.encoder, inst.source, cfg.combo);
    FluencyModel fm(*inst.world.lm, inst.candidates, inst.partition.get(), cfg.smoothing);
    Hypothesis h(inst.encoder->begin_sequence());
    for (;;) {
      MatchStep step = match_step(bank, h.state, inst.candidates, h.last_alignment(), *inst.encoder, cfg.combo);
      StepDistribution f = fm.step(h.tokens);
      std::optional<Hypothesis> best;
      for (auto &c : step_extend(h, inst.candidates, step, &f, cfg, bank.size())) {
        if (!is_admissible(c, "</s>", bank.size())) continue;
        if (!best || c.score(cfg.lambda) > best->score(cfg.lambda) ||
            (c.score(cfg.lambda) == best->score(cfg.lambda) && c.tokens < best->tokens))
          best = c;
      }
      REQUIRE(best);
      h = *best;
      if (h.finished) break;
    }
    CHECK(got.pool.size() == 1);
    CHECK(got.best().tokens == h.tokens);
  }
}

TEST_CASE("pool invariants and the length bound") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    testing::DecoderInstance inst = testing::make_decoder_instance(seed, 6, 4);
    DecoderConfig cfg;
    cfg.beam = 4;
    DecodeResult r = testing::decode_instance(inst, cfg, true);
    const std::size_t m = inst.source.content_length();
    for (std::size_t i = 0; i < r.pool.size(); ++i) {
      const Hypothesis &h = r.pool[i].hypothesis;
      CHECK(h.finished);
      CHECK(h.tokens.size() <= m + 1);
      CHECK(h.emitted("</s>").size() <= m);
      CHECK(h.alignments.back() == m + 1);
      for (std::size_t k = 1; k < h.alignments.size(); ++k) CHECK(h.alignments[k] > h.alignments[k - 1]);
      if (i) CHECK(r.pool[i - 1].normalized_score >= r.pool[i].normalized_score);
      CHECK(r.pool[i].normalized_score == length_normalized_score(h, cfg));
    }
  }
}

TEST_CASE("lambda zero equals decoding without fluency") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    testing::DecoderInstance inst = testing::make_decoder_instance(seed, 5, 4);
    DecoderConfig cfg;
    cfg.lambda = 0.0;
    DecodeResult with = testing::decode_instance(inst, cfg, true);
    DecodeResult without = testing::decode_instance(inst, cfg, false);
    CHECK(with.best().tokens == without.best().tokens);
  }
}

TEST_CASE("oracle selection") {
  std::vector<PoolEntry> pool;
  auto entry = [](Tokens toks, double score) {
    Hypothesis h(EncoderState(1, 1));
    h.tokens = std::move(toks);
    return PoolEntry{std::move(h), score};
  };
  CHECK(kind_of([&] { oracle_select(pool, Tokens{"a"}, Metric::kRouge1); }) == ErrorKind::kEmptyPool);
  pool.push_back(entry({"x", "</s>"}, -1.0));
  CHECK(&oracle_select(pool, Tokens{"a"}, Metric::kRouge1) == &pool[0]);

  pool.push_back(entry({"a", "b", "</s>"}, -2.0));
  pool.push_back(entry({"a", "c", "b"}, -3.0));
  Tokens ref{"a", "b"};
  CHECK(oracle_select(pool, ref, Metric::kRouge1).hypothesis.tokens == Tokens{"a", "b", "</s>"});
  // rouge-2 against "a c": 0, 0 and 2/3
  CHECK(oracle_select(pool, Tokens{"a", "c"}, Metric::kRouge2).hypothesis.tokens == Tokens{"a", "c", "b"});
  // ties on the metric go to the better normalized score
  CHECK(oracle_select(pool, Tokens{"q"}, Metric::kRougeL).hypothesis.tokens == Tokens{"x", "</s>"});
}

TEST_CASE("alignment trace of an extractive identity") {
  BuiltinEncoder enc = hashed_encoder(4);
  SourceSequence x = preprocess("ko ri sa ne");
  CandidateSet c = extractive_candidates(x);
  DecoderConfig cfg;
  cfg.combo = LayerCombo::kBot;
  SourcePrefixBank bank = build_source_bank(enc, x, cfg.combo);
  Hypothesis h(enc.begin_sequence());
  for (const auto &w : x.tokens()) {
    MatchStep step = match_step(bank, h.state, c, h.last_alignment(), enc, cfg.combo);
    h = step_extend(h, c, step, nullptr, cfg, bank.size())[*c.index_of(w)];
  }
  CHECK(h.finished);
  auto trace = alignment_trace(h, x);
  REQUIRE(trace.size() == 4);
  for (std::size_t n = 0; n < 4; ++n) CHECK(trace[n] == std::pair<std::size_t, std::size_t>{n + 1, n + 1});
}

TEST_CASE("decoding is deterministic") {
  testing::DecoderInstance inst = testing::make_decoder_instance(77, 6, 4);
  DecoderConfig cfg;
  DecodeResult a = testing::decode_instance(inst, cfg, true);
  DecodeResult b = testing::decode_instance(inst, cfg, true);
  REQUIRE(a.pool.size() == b.pool.size());
  for (std::size_t i = 0; i < a.pool.size(); ++i) {
    CHECK(a.pool[i].hypothesis.tokens == b.pool[i].hypothesis.tokens);
    CHECK(a.pool[i].normalized_score == b.pool[i].normalized_score);
  }
}
