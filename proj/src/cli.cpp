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

#include "ctxsum/cli.hpp"

#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctxsum/error.hpp"
#include "ctxsum/eval.hpp"
#include "ctxsum/pipeline.hpp"

namespace ctxsum {

namespace {

using nlohmann::json;

// Thrown for problems with arguments or inputs detected before work begins.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string &path, const std::string &what) {
  if (!std::filesystem::is_regular_file(path))
    throw UsageError(what + " not found: " + path);
}

json alignments_json(const std::vector<std::pair<std::size_t, std::size_t>> &trace) {
  json a = json::array();
  for (auto [n, z] : trace) a.push_back({n, z});
  return a;
}

// Reference tokens use the corpus normalization; an unusable line is empty.
std::vector<std::string> reference_tokens(const std::string &line) {
  PreprocessOptions opts;
  opts.append_eos = false;
  try {
    return preprocess(line, opts).content();
  } catch (const Error &) {
    return {};
  }
}

// ---------------------------------------------------------------- train-lm

struct TrainArgs {
  std::string corpus;
  std::string out;
  int order = 3;
  double discount = 0.75;
  std::string dev;
  std::string vocab;
  bool no_unk = false;
};

int run_train_lm(const TrainArgs &args, std::ostream &out) {
  require_file(args.corpus, "corpus");
  if (!args.dev.empty()) require_file(args.dev, "dev file");
  if (!args.vocab.empty()) require_file(args.vocab, "vocabulary embeddings");

  Corpus corpus = load_corpus(args.corpus);
  NgramTrainingOptions opts;
  opts.order = args.order;
  opts.discount = args.discount;
  opts.unknown_bucket = !args.no_unk;
  if (!args.vocab.empty()) opts.extra_vocabulary = load_embeddings(args.vocab).words();
  NgramLM lm = train_ngram_lm(corpus, opts);
  lm.save_arpa(args.out);

  out << "vocab_size " << lm.predictable_size() << "\n";
  out << "order " << lm.order() << "\n";
  if (corpus.skipped_lines()) out << "skipped_lines " << corpus.skipped_lines() << "\n";
  if (!args.dev.empty()) {
    PerplexityReport ppl = perplexity(lm, load_corpus(args.dev));
    out << "dev_perplexity " << std::setprecision(6) << ppl.perplexity << "\n";
    if (ppl.oov_tokens) out << "dev_oov " << ppl.oov_tokens << "\n";
  }
  return kExitOk;
}

// --------------------------------------------------------------- summarize

struct SummarizeArgs {
  std::string input;
  std::string embeddings;
  std::string lm;
  std::string output_embeddings;
  std::string neighbors;
  std::string encoder = "builtin";
  std::uint64_t seed = 1;
  std::size_t layers = 3;
  std::size_t dim = 512;
  std::string bottom = "embeddings";
  std::string mode = "abstractive";
  double lambda = 0.11;
  double alpha = 0.0;
  std::size_t beam = 10;
  std::size_t k = 6;
  std::string combo = "cat";
  std::string smoothing = "cs";
  std::size_t max_steps = 0;
  bool no_fluency = false;
  std::string oracle;
  std::string oracle_metric = "rouge-1";
  std::string dump_pool;
  std::size_t jobs = 1;
  std::string out;
};

struct SentenceOutcome {
  json record;
  json pool;
};

SentenceOutcome summarize_one(const SummarizerResources &resources, const SummarizerOptions &options,
                              const std::string &line, std::size_t index,
                              const std::vector<std::string> *reference, Metric oracle_metric) {
  SentenceOutcome outcome;
  json &rec = outcome.record;
  try {
    SentenceSummary s = summarize_sentence(resources, options, line);
    const Hypothesis &best = s.result.best();
    rec["source"] = join_tokens(s.source.content());
    rec["summary"] = join_tokens(s.summary);
    rec["normalized_score"] = s.result.best_score();
    rec["cm_logprob"] = best.cm_logprob;
    rec["fm_logprob"] = best.fm_logprob;
    rec["alignments"] = alignments_json(s.trace);
    rec["finished_pool_size"] = s.result.pool.size();
    if (reference) {
      const PoolEntry &o = oracle_select(s.result.pool, *reference, oracle_metric, s.source.end_marker());
      rec["oracle_summary"] = join_tokens(o.hypothesis.emitted(s.source.end_marker()));
    }
    json pool = json::array();
    for (const auto &entry : s.result.pool) {
      const Hypothesis &h = entry.hypothesis;
      pool.push_back({{"summary", join_tokens(h.emitted(s.source.end_marker()))},
                      {"tokens", h.tokens},
                      {"normalized_score", entry.normalized_score},
                      {"cm_logprob", h.cm_logprob},
                      {"fm_logprob", h.fm_logprob},
                      {"alignments", alignments_json(alignment_trace(h, s.source))}});
    }
    outcome.pool = {{"index", index}, {"source", rec["source"]}, {"pool", std::move(pool)}};
  } catch (const Error &e) {
    rec = {{"source", line}, {"error", e.what()}};
    outcome.pool = {{"index", index}, {"source", line}, {"error", e.what()}};
  }
  return outcome;
}

int run_summarize(const SummarizeArgs &args, std::ostream &out, std::ostream &err) {
  require_file(args.input, "input");
  require_file(args.embeddings, "embeddings");
  require_file(args.lm, "language model");
  if (!args.output_embeddings.empty()) require_file(args.output_embeddings, "output embeddings");
  if (!args.neighbors.empty()) require_file(args.neighbors, "neighbor cache");
  if (!args.oracle.empty()) require_file(args.oracle, "oracle references");
  if (args.encoder != "builtin") require_file(args.encoder, "precomputed encoder states");

  SummarizerOptions options;
  try {
    options.mode = parse_candidate_mode(args.mode);
    options.decoder.combo = parse_layer_combo(args.combo);
    options.decoder.smoothing = Smoothing::parse(args.smoothing);
    if (args.bottom != "embeddings" && args.bottom != "hashed")
      throw Error(ErrorKind::kBadArgument, "--bottom must be embeddings or hashed");
    parse_metric(args.oracle_metric);
  } catch (const Error &e) {
    throw UsageError(e.what());
  }
  options.decoder.lambda = args.lambda;
  options.decoder.alpha = args.alpha;
  options.decoder.beam = args.beam;
  options.decoder.max_steps = args.max_steps;
  options.k = args.k;
  options.use_fluency = !args.no_fluency;
  Metric oracle_metric = parse_metric(args.oracle_metric);

  SummarizerResources res;
  auto input_table = std::make_shared<const EmbeddingTable>(load_embeddings(args.embeddings));
  res.input_embeddings = input_table;
  res.output_embeddings = args.output_embeddings.empty()
                              ? input_table
                              : std::make_shared<const EmbeddingTable>(load_embeddings(args.output_embeddings));
  res.lm = std::make_shared<const NgramLM>(NgramLM::load_arpa(args.lm));
  if (!args.neighbors.empty())
    res.neighbors = std::make_shared<const NeighborCache>(load_neighbor_cache(args.neighbors));
  if (args.encoder == "builtin") {
    BuiltinEncoderOptions enc;
    enc.seed = args.seed;
    enc.layers = args.layers;
    enc.dim = args.dim;
    if (args.bottom == "embeddings") enc.bottom = input_table;
    res.encoder = std::make_shared<const BuiltinEncoder>(enc);
  } else {
    res.encoder = PrecomputedEncoder::load(args.encoder);
  }
  check_combo(options.decoder.combo, res.encoder->layers());

  std::vector<std::string> lines = read_lines(args.input);
  std::vector<std::vector<std::string>> references;
  if (!args.oracle.empty()) {
    std::vector<std::string> ref_lines = read_lines(args.oracle);
    if (ref_lines.size() != lines.size())
      throw Error(ErrorKind::kLineCountMismatch, std::to_string(lines.size()) + " inputs vs " +
                                                     std::to_string(ref_lines.size()) + " references");
    for (const auto &l : ref_lines) references.push_back(reference_tokens(l));
  }

  err << "# summarize mode=" << candidate_mode_name(options.mode) << " lambda=" << options.decoder.lambda
      << " alpha=" << options.decoder.alpha << " beam=" << options.decoder.beam << " k=" << options.k
      << " combo=" << layer_combo_name(options.decoder.combo)
      << " smoothing=" << options.decoder.smoothing.to_string()
      << " fluency=" << (options.use_fluency ? "on" : "off") << " jobs=" << args.jobs << "\n";

  std::vector<SentenceOutcome> outcomes(lines.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < lines.size(); i = next++)
      outcomes[i] = summarize_one(res, options, lines[i], i,
                                  references.empty() ? nullptr : &references[i], oracle_metric);
  };
  std::size_t jobs = std::max<std::size_t>(1, std::min(args.jobs, lines.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto &t : threads) t.join();
  }

  std::ofstream file_out;
  std::ostream *sink = &out;
  if (!args.out.empty()) {
    file_out.open(args.out);
    if (!file_out) throw Error(ErrorKind::kIoError, "cannot write " + args.out);
    sink = &file_out;
  }
  std::size_t failures = 0;
  for (const auto &o : outcomes) {
    if (o.record.contains("error")) ++failures;
    *sink << o.record.dump() << '\n';
  }
  if (!args.dump_pool.empty()) {
    std::ofstream pool_out(args.dump_pool);
    if (!pool_out) throw Error(ErrorKind::kIoError, "cannot write " + args.dump_pool);
    for (const auto &o : outcomes) pool_out << o.pool.dump() << '\n';
  }
  if (failures) err << "# " << failures << " of " << lines.size() << " sentences failed\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string predictions;
  std::string references;
  std::string source;
  std::string out;
};

std::string text_field(const std::string &line) {
  if (line.empty() || line.front() != '{') return line;
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::kFormatError, "bad JSON line: " + line);
  for (const char *key : {"summary", "reference", "text"})
    if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
  return "";
}

int run_eval(const EvalArgs &args, std::ostream &out, std::ostream &err) {
  require_file(args.predictions, "predictions");
  require_file(args.references, "references");
  if (!args.source.empty()) require_file(args.source, "source");
  std::vector<std::string> preds = read_lines(args.predictions);
  std::vector<std::string> refs = read_lines(args.references);
  if (preds.size() != refs.size())
    throw UsageError("LineCountMismatch: " + std::to_string(preds.size()) + " predictions vs " +
                     std::to_string(refs.size()) + " references");
  std::vector<std::string> sources;
  if (!args.source.empty()) {
    sources = read_lines(args.source);
    if (sources.size() != preds.size())
      throw UsageError("LineCountMismatch: " + std::to_string(sources.size()) + " sources vs " +
                       std::to_string(preds.size()) + " predictions");
  }

  MetricAccumulator acc;
  std::ostringstream table;
  table << std::left << std::setw(6) << "pair" << std::right << std::setw(9) << "R1" << std::setw(9)
        << "R2" << std::setw(9) << "RL" << std::setw(9) << "F1" << std::setw(9) << "CR" << "\n";
  table << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::vector<std::string> cand = split_whitespace(text_field(preds[i]));
    std::vector<std::string> ref = split_whitespace(text_field(refs[i]));
    std::optional<SourceSequence> src;
    if (!sources.empty()) src = preprocess(text_field(sources[i]));
    acc.add(cand, ref, src ? &*src : nullptr);
    table << std::left << std::setw(6) << i + 1 << std::right << std::setw(9)
          << rouge_n_f1(cand, ref, 1) << std::setw(9) << rouge_n_f1(cand, ref, 2) << std::setw(9)
          << rouge_l_f1(cand, ref) << std::setw(9) << token_f1(cand, ref) << std::setw(9);
    if (src) table << compression_rate(cand, *src);
    else table << "-";
    table << "\n";
  }
  MetricReport r = acc.report();
  table << std::left << std::setw(6) << "mean" << std::right << std::setw(9) << r.r1 << std::setw(9)
        << r.r2 << std::setw(9) << r.rl << std::setw(9) << r.token_f1 << std::setw(9);
  if (r.cr_pairs) table << r.cr;
  else table << "-";
  table << "\n";

  json report = {{"r1", r.r1}, {"r2", r.r2}, {"rl", r.rl}, {"token_f1", r.token_f1}, {"pairs", r.pairs}};
  if (r.cr_pairs) report["cr"] = r.cr;
  else report["cr"] = nullptr;
  if (args.out.empty()) {
    out << report.dump() << "\n";
  } else {
    std::ofstream f(args.out);
    if (!(f << report.dump() << "\n")) throw Error(ErrorKind::kIoError, "cannot write " + args.out);
  }
  err << table.str();
  return kExitOk;
}

// Fills options that were not given on the command line from `key=value`
// lines; keys are long option names without dashes.
void apply_config_file(CLI::App *cmd, const std::string &path) {
  require_file(path, "config file");
  std::ifstream in(path);
  for (const CLI::ConfigItem &item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;
    CLI::Option *opt = cmd->get_option_no_throw("--" + item.name);
    if (!opt || item.name == "config") throw UsageError("unknown key '" + item.name + "' in " + path);
    if (opt->count() > 0) continue;
    if (opt->get_type_size() == 0) {
      if (item.inputs.size() != 1 || (item.inputs[0] != "true" && item.inputs[0] != "false"))
        throw UsageError("flag '" + item.name + "' needs true or false in " + path);
      if (item.inputs[0] == "false") continue;
    }
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

}  // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Unsupervised sentence summarization by contextual matching", "ctxsum"};
  app.require_subcommand(1);

  TrainArgs train;
  auto *train_cmd = app.add_subcommand("train-lm", "Train an n-gram fluency model and write ARPA");
  train_cmd->add_option("corpus", train.corpus, "Training sentences, one per line")->required();
  train_cmd->add_option("-o,--out", train.out, "Output ARPA file")->capture_default_str();
  train_cmd->add_option("--order", train.order, "N-gram order")->check(CLI::Range(1, 5))->capture_default_str();
  train_cmd->add_option("--discount", train.discount, "Absolute discount in [0, 1)")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  train_cmd->add_option("--dev", train.dev, "Held-out sentences for perplexity");
  train_cmd->add_option("--vocab", train.vocab, "Embedding file whose words join the vocabulary");
  train_cmd->add_flag("--no-unk", train.no_unk, "Do not add an <unk> bucket");
  train.out = "lm.arpa";

  SummarizeArgs sum;
  auto *sum_cmd = app.add_subcommand("summarize", "Summarize sentences, one JSON object per line");
  std::string sum_config;
  sum_cmd->add_option("--config", sum_config, "key=value file; flags given on the command line win");
  sum_cmd->add_option("input", sum.input, "Source sentences, one per line")->required();
  sum_cmd->add_option("embeddings", sum.embeddings, "Word embeddings (candidate search)")->required();
  sum_cmd->add_option("lm", sum.lm, "ARPA fluency language model")->required();
  sum_cmd->add_option("--output-embeddings", sum.output_embeddings, "Embeddings for the Voronoi partition");
  sum_cmd->add_option("--neighbors", sum.neighbors, "Precomputed neighbor lists");
  sum_cmd->add_option("--encoder", sum.encoder, "'builtin' or a precomputed state file")->capture_default_str();
  sum_cmd->add_option("--seed", sum.seed, "Builtin encoder seed")->capture_default_str();
  sum_cmd->add_option("--layers", sum.layers, "Builtin encoder layers")->check(CLI::PositiveNumber)->capture_default_str();
  sum_cmd->add_option("--dim", sum.dim, "Builtin encoder width without an embedding bottom")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sum_cmd->add_option("--bottom", sum.bottom, "Builtin bottom layer: embeddings|hashed")->capture_default_str();
  sum_cmd->add_option("--mode", sum.mode, "abstractive|extractive")->capture_default_str();
  sum_cmd->add_option("--lambda", sum.lambda, "Fluency expert exponent")->check(CLI::NonNegativeNumber)->capture_default_str();
  sum_cmd->add_option("--alpha", sum.alpha, "Length penalty offset")->capture_default_str();
  sum_cmd->add_option("--beam", sum.beam, "Beam size")->check(CLI::PositiveNumber)->capture_default_str();
  sum_cmd->add_option("--k", sum.k, "Neighbours per source word")->check(CLI::PositiveNumber)->capture_default_str();
  sum_cmd->add_option("--combo", sum.combo, "cat|avg|top|mid|bot")->capture_default_str();
  sum_cmd->add_option("--smoothing", sum.smoothing, "cs|temp:<T>|na")->capture_default_str();
  sum_cmd->add_option("--max-steps", sum.max_steps, "Step limit, 0 for m+1")->capture_default_str();
  sum_cmd->add_flag("--no-fluency", sum.no_fluency, "Drop the fluency expert");
  sum_cmd->add_option("--oracle", sum.oracle, "References for oracle selection");
  sum_cmd->add_option("--oracle-metric", sum.oracle_metric, "rouge-1|rouge-2|rouge-l|token-f1")->capture_default_str();
  sum_cmd->add_option("--dump-pool", sum.dump_pool, "Write all finished hypotheses here");
  sum_cmd->add_option("--jobs", sum.jobs, "Sentences decoded in parallel")->check(CLI::PositiveNumber)->capture_default_str();
  sum_cmd->add_option("-o,--out", sum.out, "Output file (default stdout)");

  EvalArgs ev;
  auto *eval_cmd = app.add_subcommand("eval", "Score predictions against references");
  eval_cmd->add_option("predictions", ev.predictions, "Predicted summaries (text or JSON lines)")->required();
  eval_cmd->add_option("references", ev.references, "Reference summaries")->required();
  eval_cmd->add_option("--source", ev.source, "Source sentences, enables compression rate");
  eval_cmd->add_option("-o,--out", ev.out, "Write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*sum_cmd && !sum_config.empty()) apply_config_file(sum_cmd, sum_config);
  } catch (const CLI::ParseError &e) {
    err << "error: " << sum_config << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError &e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*train_cmd) return run_train_lm(train, out);
    if (*sum_cmd) return run_summarize(sum, out, err);
    if (*eval_cmd) return run_eval(ev, out, err);
  } catch (const UsageError &e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    bool usage = e.kind() == ErrorKind::kBadOrder || e.kind() == ErrorKind::kBadDiscount ||
                 e.kind() == ErrorKind::kBadArgument || e.kind() == ErrorKind::kComboUnsupported ||
                 e.kind() == ErrorKind::kLineCountMismatch;
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ctxsum
