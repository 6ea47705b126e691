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
// Left-contextual prefix encoders. An EncoderState holds one hidden vector per
// layer (layer 0 is the context-free bottom layer) after consuming a prefix.
// States are plain values: advancing returns a new state and never touches the
// input, so beam hypotheses can branch freely.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ctxsum/embeddings.hpp"

namespace ctxsum {

enum class LayerCombo { kCat, kAvg, kTop, kMid, kBot };

LayerCombo parse_layer_combo(std::string_view text);
std::string_view layer_combo_name(LayerCombo combo);

class EncoderState {
 public:
  // Zero state with nothing consumed.
  EncoderState(std::size_t layers, std::size_t dim);
  EncoderState(std::size_t layers, std::size_t dim, std::vector<double> values, std::size_t count,
               std::string prefix_key = {});

  std::size_t layers() const { return layers_; }
  std::size_t dim() const { return dim_; }
  std::size_t count() const { return count_; }
  // Layer l in 0..layers()-1, bottom first.
  std::span<const double> layer(std::size_t l) const { return {values_.data() + l * dim_, dim_}; }
  std::span<double> layer(std::size_t l) { return {values_.data() + l * dim_, dim_}; }
  const std::vector<double> &values() const { return values_; }
  // Space-joined consumed tokens; maintained by backends that look states up.
  const std::string &prefix_key() const { return prefix_key_; }

  bool operator==(const EncoderState &) const = default;

 private:
  std::size_t layers_;
  std::size_t dim_;
  std::vector<double> values_;
  std::size_t count_ = 0;
  std::string prefix_key_;
};

// Throws ComboUnsupported when `combo` needs more layers than `layers`.
void check_combo(LayerCombo combo, std::size_t layers);

// cat: all layers concatenated; avg: elementwise mean; top/mid/bot: one layer.
std::vector<double> prefix_vector(const EncoderState &state, LayerCombo combo);

class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual std::size_t layers() const = 0;
  virtual std::size_t dim() const = 0;

  EncoderState start() const { return EncoderState(layers(), dim()); }
  // Start state after absorbing the begin-of-sentence symbol (count stays 0).
  virtual EncoderState begin_sequence() const = 0;
  virtual EncoderState advance(const EncoderState &state, std::string_view token) const = 0;

  EncoderState encode(std::span<const std::string> tokens) const;
};

struct BuiltinEncoderOptions {
  std::uint64_t seed = 1;
  std::size_t layers = 3;
  // Ignored when `bottom` is set; the table's dimension wins.
  std::size_t dim = 512;
  // Bottom-layer embeddings; without a table every word gets a seeded
  // pseudo-random vector.
  std::shared_ptr<const EmbeddingTable> bottom;
  // With a table: map words outside it to one seeded unknown-word vector
  // instead of failing.
  bool unknown_vector = true;
  double spectral_radius = 0.9;
};

// Echo-state style network with fixed random weights:
//   h_0(t) = embed(x_t)
//   h_l(t) = tanh(W_l h_l(t-1) + U_l h_{l-1}(t) + b_l),  l = 1..L-1
// W_l is scaled to the configured spectral radius.
class BuiltinEncoder : public Encoder {
 public:
  explicit BuiltinEncoder(BuiltinEncoderOptions options);

  std::size_t layers() const override { return options_.layers; }
  std::size_t dim() const override { return dim_; }
  EncoderState begin_sequence() const override;
  EncoderState advance(const EncoderState &state, std::string_view token) const override;

  std::vector<double> embed(std::string_view token) const;

  // Weights of recurrent layer l in 1..layers()-1.
  const Eigen::MatrixXd &recurrent_weights(std::size_t l) const { return recurrent_[l - 1]; }
  const Eigen::MatrixXd &input_weights(std::size_t l) const { return input_[l - 1]; }
  const Eigen::VectorXd &bias(std::size_t l) const { return bias_[l - 1]; }

 private:
  std::vector<double> seeded_vector(std::string_view word, std::uint64_t salt) const;

  BuiltinEncoderOptions options_;
  std::size_t dim_;
  std::vector<Eigen::MatrixXd> recurrent_;
  std::vector<Eigen::MatrixXd> input_;
  std::vector<Eigen::VectorXd> bias_;
};

// Binary prefix-state file:
//   header   "PFXS" | version u16 | layers u16 | dim u32 | sequences u32
//   sequence count u32 | count x (len u32, utf-8 bytes) | count*layers*dim f32
// All integers and floats little-endian. States are stored position-major,
// then layer, then dimension. A companion "<file>.idx" text file lists
// `<hash hex> <byte offset>` per sequence.
struct PrecomputedSequence {
  std::vector<std::string> tokens;
  std::vector<float> states;
};

struct PrecomputedFile {
  std::uint16_t layers = 0;
  std::uint32_t dim = 0;
  std::vector<PrecomputedSequence> sequences;
};

inline constexpr std::uint16_t kPrecomputedVersion = 1;

// FNV-1a 64 over the tokens joined by single spaces.
std::uint64_t sequence_hash(std::span<const std::string> tokens);

void write_precomputed_states(const std::filesystem::path &path, const PrecomputedFile &file);
PrecomputedFile read_precomputed_states(const std::filesystem::path &path);
std::filesystem::path precomputed_index_path(const std::filesystem::path &path);

// Serves exported states by exact token prefix. Any prefix of any exported
// sequence is available; other prefixes raise MissingPrecomputedState.
class PrecomputedEncoder : public Encoder {
 public:
  explicit PrecomputedEncoder(const PrecomputedFile &file);
  static std::unique_ptr<PrecomputedEncoder> load(const std::filesystem::path &path);

  std::size_t layers() const override { return layers_; }
  std::size_t dim() const override { return dim_; }
  EncoderState begin_sequence() const override { return start(); }
  EncoderState advance(const EncoderState &state, std::string_view token) const override;

  std::size_t prefix_count() const { return prefixes_.size(); }

 private:
  std::size_t layers_;
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> prefixes_;
};

struct PrecomputedBackend {
  std::filesystem::path path;
};

using EncoderBackend = std::variant<BuiltinEncoderOptions, PrecomputedBackend>;

std::unique_ptr<Encoder> make_encoder(const EncoderBackend &backend);

}  // namespace ctxsum
