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

#include "ctxsum/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ctxsum/error.hpp"

namespace ctxsum {

LayerCombo parse_layer_combo(std::string_view text) {
  if (text == "cat") return LayerCombo::kCat;
  if (text == "avg") return LayerCombo::kAvg;
  if (text == "top") return LayerCombo::kTop;
  if (text == "mid") return LayerCombo::kMid;
  if (text == "bot") return LayerCombo::kBot;
  throw Error(ErrorKind::kBadArgument, "unknown layer combination '" + std::string(text) + "'");
}

std::string_view layer_combo_name(LayerCombo combo) {
  switch (combo) {
    case LayerCombo::kCat: return "cat";
    case LayerCombo::kAvg: return "avg";
    case LayerCombo::kTop: return "top";
    case LayerCombo::kMid: return "mid";
    case LayerCombo::kBot: return "bot";
  }
  return "?";
}

EncoderState::EncoderState(std::size_t layers, std::size_t dim)
    : layers_(layers), dim_(dim), values_(layers * dim, 0.0) {}

EncoderState::EncoderState(std::size_t layers, std::size_t dim, std::vector<double> values,
                           std::size_t count, std::string prefix_key)
    : layers_(layers), dim_(dim), values_(std::move(values)), count_(count),
      prefix_key_(std::move(prefix_key)) {
  if (values_.size() != layers * dim)
    throw Error(ErrorKind::kDimMismatch, "encoder state needs layers*dim values");
}

void check_combo(LayerCombo combo, std::size_t layers) {
  if ((combo == LayerCombo::kAvg || combo == LayerCombo::kMid) && layers < 3)
    throw Error(ErrorKind::kComboUnsupported, std::string(layer_combo_name(combo)) +
                                                  " needs at least 3 layers, encoder has " +
                                                  std::to_string(layers));
}

std::vector<double> prefix_vector(const EncoderState &state, LayerCombo combo) {
  if (state.count() == 0) throw Error(ErrorKind::kEmptyPrefix, "no token consumed yet");
  check_combo(combo, state.layers());
  const std::size_t top = state.layers() - 1;
  auto copy = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  switch (combo) {
    case LayerCombo::kCat: return state.values();
    case LayerCombo::kBot: return copy(state.layer(0));
    case LayerCombo::kTop: return copy(state.layer(top));
    case LayerCombo::kMid: return copy(state.layer(top / 2));
    case LayerCombo::kAvg: {
      std::vector<double> out(state.dim(), 0.0);
      for (std::size_t l = 0; l < state.layers(); ++l) {
        auto layer = state.layer(l);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += layer[i];
      }
      for (double &v : out) v /= static_cast<double>(state.layers());
      return out;
    }
  }
  return {};
}

EncoderState Encoder::encode(std::span<const std::string> tokens) const {
  EncoderState state = begin_sequence();
  for (const auto &t : tokens) state = advance(state, t);
  return state;
}

// Builtin encoder

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Uniform in [-1, 1); independent of the standard library's distributions so
// that weights are identical on every platform.
double symmetric_uniform(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

Eigen::MatrixXd random_matrix(std::mt19937_64 &rng, std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = symmetric_uniform(rng);
  return m;
}

constexpr std::uint64_t kWordSalt = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kUnknownSalt = 0xc2b2ae3d27d4eb4full;

}  // namespace

BuiltinEncoder::BuiltinEncoder(BuiltinEncoderOptions options) : options_(std::move(options)) {
  if (options_.layers < 1) throw Error(ErrorKind::kBadArgument, "encoder needs at least one layer");
  dim_ = options_.bottom ? options_.bottom->dim() : options_.dim;
  if (dim_ < 1) throw Error(ErrorKind::kBadArgument, "encoder dimension must be positive");

  std::mt19937_64 rng(options_.seed);
  const double input_scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (std::size_t l = 1; l < options_.layers; ++l) {
    Eigen::MatrixXd w = random_matrix(rng, dim_, dim_);
    double radius = Eigen::EigenSolver<Eigen::MatrixXd>(w, false).eigenvalues().cwiseAbs().maxCoeff();
    if (radius > 0.0) w *= options_.spectral_radius / radius;
    recurrent_.push_back(std::move(w));
    input_.push_back(random_matrix(rng, dim_, dim_) * input_scale);
    Eigen::VectorXd b(static_cast<Eigen::Index>(dim_));
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * symmetric_uniform(rng);
    bias_.push_back(std::move(b));
  }
}

std::vector<double> BuiltinEncoder::seeded_vector(std::string_view word, std::uint64_t salt) const {
  std::mt19937_64 rng(options_.seed ^ (fnv1a(word) * salt));
  std::vector<double> v(dim_);
  for (double &x : v) x = symmetric_uniform(rng);
  return v;
}

std::vector<double> BuiltinEncoder::embed(std::string_view token) const {
  if (!options_.bottom) return seeded_vector(token, kWordSalt);
  if (auto row = options_.bottom->find(token)) {
    auto r = options_.bottom->row(*row);
    return {r.begin(), r.end()};
  }
  if (is_reserved_marker(token)) return seeded_vector(token, kWordSalt);
  if (!options_.unknown_vector) throw Error(ErrorKind::kUnknownToken, std::string(token));
  return seeded_vector("<unk>", kUnknownSalt);
}

EncoderState BuiltinEncoder::begin_sequence() const {
  EncoderState s = advance(start(), kBeginMarker);
  return EncoderState(s.layers(), s.dim(), s.values(), 0);
}

EncoderState BuiltinEncoder::advance(const EncoderState &state, std::string_view token) const {
  if (state.layers() != layers() || state.dim() != dim_)
    throw Error(ErrorKind::kDimMismatch, "state does not belong to this encoder");
  std::vector<double> values(state.values().size());
  std::vector<double> bottom = embed(token);
  std::copy(bottom.begin(), bottom.end(), values.begin());
  using Vec = Eigen::Map<const Eigen::VectorXd>;
  const auto n = static_cast<Eigen::Index>(dim_);
  for (std::size_t l = 1; l < layers(); ++l) {
    Vec prev_self(state.values().data() + l * dim_, n);
    Vec below(values.data() + (l - 1) * dim_, n);
    Eigen::Map<Eigen::VectorXd> out(values.data() + l * dim_, n);
    out = (recurrent_[l - 1] * prev_self + input_[l - 1] * below + bias_[l - 1]).array().tanh().matrix();
  }
  return EncoderState(layers(), dim_, std::move(values), state.count() + 1);
}

// Precomputed states

namespace {

constexpr char kMagic[4] = {'P', 'F', 'X', 'S'};

template <typename T>
void put_le(std::string &buf, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string &data, std::string where) : data_(data), where_(std::move(where)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  float get_float() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n)
      throw Error(ErrorKind::kFormatError, where_ + ": truncated at byte " + std::to_string(pos_));
  }
  const std::string &data_;
  std::string where_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::uint64_t sequence_hash(std::span<const std::string> tokens) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) {
      h ^= static_cast<unsigned char>(' ');
      h *= 1099511628211ull;
    }
    for (unsigned char c : tokens[i]) {
      h ^= c;
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::filesystem::path precomputed_index_path(const std::filesystem::path &path) {
  return path.string() + ".idx";
}

void write_precomputed_states(const std::filesystem::path &path, const PrecomputedFile &file) {
  std::string buf(kMagic, 4);
  put_le<std::uint16_t>(buf, kPrecomputedVersion);
  put_le<std::uint16_t>(buf, file.layers);
  put_le<std::uint32_t>(buf, file.dim);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(file.sequences.size()));
  std::ostringstream index;
  for (const auto &seq : file.sequences) {
    if (seq.states.size() != seq.tokens.size() * file.layers * file.dim)
      throw Error(ErrorKind::kFormatError, "sequence state count does not match tokens x layers x dim");
    index << std::hex << std::setw(16) << std::setfill('0') << sequence_hash(seq.tokens)
          << std::dec << ' ' << buf.size() << '\n';
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(seq.tokens.size()));
    for (const auto &tok : seq.tokens) {
      put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(tok.size()));
      buf += tok;
    }
    for (float f : seq.states) put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(f));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out.write(buf.data(), static_cast<std::streamsize>(buf.size())))
    throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  std::ofstream idx(precomputed_index_path(path));
  if (!(idx << index.str())) throw Error(ErrorKind::kIoError, "cannot write index for " + path.string());
}

PrecomputedFile read_precomputed_states(const std::filesystem::path &path) {
  std::string data = read_file(path);
  ByteReader in(data, path.string());
  if (in.get_bytes(4) != std::string(kMagic, 4))
    throw Error(ErrorKind::kFormatError, path.string() + ": bad magic");
  if (auto version = in.get<std::uint16_t>(); version != kPrecomputedVersion)
    throw Error(ErrorKind::kFormatError, path.string() + ": unsupported version " + std::to_string(version));
  PrecomputedFile file;
  file.layers = in.get<std::uint16_t>();
  file.dim = in.get<std::uint32_t>();
  if (file.layers == 0 || file.dim == 0)
    throw Error(ErrorKind::kFormatError, path.string() + ": zero layers or dim in header");
  auto count = in.get<std::uint32_t>();
  std::unordered_map<std::uint64_t, std::size_t> offsets;
  for (std::uint32_t s = 0; s < count; ++s) {
    std::size_t offset = in.pos();
    PrecomputedSequence seq;
    auto n = in.get<std::uint32_t>();
    for (std::uint32_t t = 0; t < n; ++t) seq.tokens.push_back(in.get_bytes(in.get<std::uint32_t>()));
    seq.states.resize(static_cast<std::size_t>(n) * file.layers * file.dim);
    for (float &f : seq.states) f = in.get_float();
    offsets.emplace(sequence_hash(seq.tokens), offset);
    file.sequences.push_back(std::move(seq));
  }
  if (!in.done())
    throw Error(ErrorKind::kFormatError, path.string() + ": trailing bytes after the last sequence");

  auto idx_path = precomputed_index_path(path);
  if (std::filesystem::exists(idx_path)) {
    for (const auto &line : read_lines(idx_path)) {
      auto fields = split_whitespace(line);
      if (fields.empty()) continue;
      if (fields.size() != 2) throw Error(ErrorKind::kFormatError, idx_path.string() + ": bad line");
      std::uint64_t hash = std::stoull(fields[0], nullptr, 16);
      auto it = offsets.find(hash);
      if (it == offsets.end() || it->second != std::stoull(fields[1]))
        throw Error(ErrorKind::kFormatError, idx_path.string() + ": index does not match data file");
    }
  }
  return file;
}

PrecomputedEncoder::PrecomputedEncoder(const PrecomputedFile &file)
    : layers_(file.layers), dim_(file.dim) {
  const std::size_t stride = layers_ * dim_;
  for (const auto &seq : file.sequences) {
    std::string key;
    for (std::size_t j = 0; j < seq.tokens.size(); ++j) {
      if (j) key += ' ';
      key += seq.tokens[j];
      std::vector<double> state(seq.states.begin() + static_cast<std::ptrdiff_t>(j * stride),
                                seq.states.begin() + static_cast<std::ptrdiff_t>((j + 1) * stride));
      auto [it, inserted] = prefixes_.try_emplace(key, state);
      if (!inserted && it->second != state)
        throw Error(ErrorKind::kFormatError, "two exports disagree on prefix '" + key + "'");
    }
  }
}

std::unique_ptr<PrecomputedEncoder> PrecomputedEncoder::load(const std::filesystem::path &path) {
  return std::make_unique<PrecomputedEncoder>(read_precomputed_states(path));
}

EncoderState PrecomputedEncoder::advance(const EncoderState &state, std::string_view token) const {
  std::string key = state.count() == 0 ? std::string(token) : state.prefix_key() + ' ' + std::string(token);
  auto it = prefixes_.find(key);
  if (it == prefixes_.end()) throw Error(ErrorKind::kMissingPrecomputedState, key);
  return EncoderState(layers_, dim_, it->second, state.count() + 1, std::move(key));
}

std::unique_ptr<Encoder> make_encoder(const EncoderBackend &backend) {
  if (const auto *builtin = std::get_if<BuiltinEncoderOptions>(&backend))
    return std::make_unique<BuiltinEncoder>(*builtin);
  return PrecomputedEncoder::load(std::get<PrecomputedBackend>(backend).path);
}

}  // namespace ctxsum
