#include "avatar/model.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "avatar/error.h"

namespace avatar {

namespace {

constexpr double kMaskedScore = -1e30;  // finite, underflows to weight 0

std::string layer_name(const std::string& stem, int l) {
  return stem + "." + std::to_string(l);
}

void add_block_shapes(std::map<std::string, std::vector<int>>& out,
                      const std::string& base, int d, int ff, bool cross) {
  auto attn = [&](const std::string& a) {
    out[base + "." + a + ".wq"] = {d, d};
    out[base + "." + a + ".wk"] = {d, d};
    out[base + "." + a + ".wv"] = {d, d};
    out[base + "." + a + ".wo"] = {d, d};
    out[base + "." + a + ".bq"] = {d};
    out[base + "." + a + ".bk"] = {d};
    out[base + "." + a + ".bv"] = {d};
    out[base + "." + a + ".bo"] = {d};
  };
  out[base + ".ln1.g"] = {d};
  out[base + ".ln1.b"] = {d};
  attn(cross ? "self" : "attn");
  out[base + ".ln2.g"] = {d};
  out[base + ".ln2.b"] = {d};
  if (cross) {
    attn("cross");
    out[base + ".ln3.g"] = {d};
    out[base + ".ln3.b"] = {d};
  }
  out[base + ".ff.w1"] = {d, ff};
  out[base + ".ff.b1"] = {ff};
  out[base + ".ff.w2"] = {ff, d};
  out[base + ".ff.b2"] = {d};
}

Tensor ln(const Tensor& x, const Params& p, const std::string& base) {
  return layer_norm(x, p.at(base + ".g"), p.at(base + ".b"));
}

Tensor ffn(const Tensor& x, const Params& p, const std::string& base) {
  Tensor h = gelu(add_rowvec(matmul(x, p.at(base + ".w1")), p.at(base + ".b1")));
  return add_rowvec(matmul(h, p.at(base + ".w2")), p.at(base + ".b2"));
}

// Multi-head attention: queries from q_in, keys/values from kv.
Tensor mha(const Tensor& q_in, const Tensor& kv, const Params& p,
           const std::string& base, int heads, bool causal) {
  int d = q_in.dim(1);
  int hd = d / heads;
  Tensor q = add_rowvec(matmul(q_in, p.at(base + ".wq")), p.at(base + ".bq"));
  Tensor k = add_rowvec(matmul(kv, p.at(base + ".wk")), p.at(base + ".bk"));
  Tensor v = add_rowvec(matmul(kv, p.at(base + ".wv")), p.at(base + ".bv"));

  int T = q_in.dim(0);
  int S = kv.dim(0);
  Tensor mask;
  if (causal) {
    std::vector<double> m(static_cast<size_t>(T) * S, 0.0);
    for (int i = 0; i < T; ++i)
      for (int j = i + 1; j < S; ++j) m[static_cast<size_t>(i) * S + j] = kMaskedScore;
    mask = Tensor::from({T, S}, std::move(m));
  }

  std::vector<Tensor> heads_out;
  heads_out.reserve(heads);
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
    Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
    Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (causal) scores = add(scores, mask);
    heads_out.push_back(matmul(softmax(scores, 1), vh));
  }
  Tensor o = heads > 1 ? concat_cols(heads_out) : heads_out[0];
  return add_rowvec(matmul(o, p.at(base + ".wo")), p.at(base + ".bo"));
}

// Pre-norm encoder block: x + attn(LN(x)), then x + ff(LN(x)).
Tensor enc_block(const Tensor& x, const Params& p, const std::string& base,
                 int heads) {
  Tensor n1 = ln(x, p, base + ".ln1");
  Tensor h = add(x, mha(n1, n1, p, base + ".attn", heads, false));
  return add(h, ffn(ln(h, p, base + ".ln2"), p, base + ".ff"));
}

Tensor dec_block(const Tensor& x, const Tensor& memory, const Params& p,
                 const std::string& base, int heads) {
  Tensor n1 = ln(x, p, base + ".ln1");
  Tensor h = add(x, mha(n1, n1, p, base + ".self", heads, true));
  h = add(h, mha(ln(h, p, base + ".ln2"), memory, p, base + ".cross", heads, false));
  return add(h, ffn(ln(h, p, base + ".ln3"), p, base + ".ff"));
}

void check_token_shape(const Tensor& t, int rows, int cols, const char* what) {
  if (!t.defined() || t.rank() != 2 || t.dim(0) != rows || t.dim(1) != cols) {
    std::ostringstream msg;
    msg << what << " tokens must be [" << rows << " x " << cols << "], got "
        << (t.defined() ? t.shape_str() : std::string("undefined"));
    throw ContractError(msg.str());
  }
}

void check_ids(const std::vector<int>& ids, int vocab, const char* what) {
  for (int id : ids)
    if (id < 0 || id >= vocab)
      throw ContractError(std::string(what) + " id out of vocab range: " +
                          std::to_string(id));
}

// Memory the decoder cross-attends to; cls_only keeps summary rows only.
Tensor decoder_memory(const Tensor& enc, const ModelConfig& cfg) {
  if (enc.rank() != 2 || enc.dim(0) != cfg.encoder_output_len() ||
      enc.dim(1) != cfg.d_model)
    throw ContractError("encoder output shape does not match config: " +
                        enc.shape_str());
  if (!cfg.cls_only) return enc;
  int skip = cfg.n_audio_tokens + (cfg.audio_only ? 0 : cfg.n_video_tokens);
  return slice_rows(enc, skip, enc.dim(0));
}

// Log-probabilities for the next token after every prefix of input_ids
// (input_ids[0] is BOS). Row t conditions on input_ids[0..t].
Tensor decoder_forward(const Tensor& enc, const std::vector<int>& input_ids,
                       const ModelConfig& cfg, const Params& p) {
  int T = static_cast<int>(input_ids.size());
  if (T == 0) throw ContractError("decoder input is empty");
  if (T > cfg.max_target_len)
    throw ContractError("decoder input longer than max_target_len");
  check_ids(input_ids, cfg.vocab_size, "decoder input");

  Tensor memory = decoder_memory(enc, cfg);
  Tensor x = add(embedding(p.at("dec.embed"), input_ids),
                 slice_rows(p.at("dec.pos"), 0, T));
  for (int l = 0; l < cfg.dec_layers; ++l)
    x = dec_block(x, memory, p, layer_name("dec", l), cfg.dec_heads);
  Tensor h = ln(x, p, "dec.ln_f");
  Tensor logits = add_rowvec(matmul(h, p.at("dec.out.w")), p.at("dec.out.b"));
  return log_softmax(logits);
}

double length_penalty(int n, double alpha) {
  return std::pow((5.0 + n) / 6.0, alpha);
}

}  // namespace

// ---- ModelConfig -------------------------------------------------------

ModelConfig ModelConfig::paper_preset() {
  ModelConfig cfg;
  cfg.d_model = 768;
  cfg.enc_layers = 12;
  cfg.enc_heads = 12;
  cfg.ff_dim = 3072;
  cfg.n_bottleneck = 4;
  cfg.fusion_layer = 8;
  cfg.dec_layers = 8;
  cfg.dec_heads = 4;
  cfg.max_target_len = 64;
  return cfg;
}

ModelConfig ModelConfig::tiny_preset() {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.enc_layers = 2;
  cfg.enc_heads = 2;
  cfg.ff_dim = 32;
  cfg.n_bottleneck = 2;
  cfg.fusion_layer = 1;
  cfg.dec_layers = 2;
  cfg.dec_heads = 2;
  cfg.max_target_len = 16;
  cfg.audio_only = true;
  cfg.n_audio_tokens = 160;  // leading 5.12 s of the padded spectrogram
  return cfg;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1)
      throw ConfigError(std::string(name) + " must be >= 1, got " +
                        std::to_string(v));
  };
  positive(d_model, "d_model");
  positive(enc_layers, "enc_layers");
  positive(enc_heads, "enc_heads");
  positive(ff_dim, "ff_dim");
  positive(dec_layers, "dec_layers");
  positive(dec_heads, "dec_heads");
  positive(max_target_len, "max_target_len");
  positive(n_audio_tokens, "n_audio_tokens");
  positive(audio_token_dim, "audio_token_dim");
  if (!audio_only) {
    positive(n_video_tokens, "n_video_tokens");
    positive(video_token_dim, "video_token_dim");
  }
  if (d_model % enc_heads != 0)
    throw ConfigError("d_model must be divisible by enc_heads");
  if (d_model % dec_heads != 0)
    throw ConfigError("d_model must be divisible by dec_heads");
  if (n_bottleneck < 0) throw ConfigError("n_bottleneck must be >= 0");
  if (fusion_layer < 0 || fusion_layer > enc_layers)
    throw ConfigError("fusion_layer must lie in [0, enc_layers]");
  if (vocab_size < 2)
    throw ConfigError("vocab_size must be >= 2, got " + std::to_string(vocab_size));
  if (bos_id < 0 || bos_id >= vocab_size || eos_id < 0 || eos_id >= vocab_size)
    throw ConfigError("bos_id/eos_id must lie in [0, vocab_size)");
  if (bos_id == eos_id) throw ConfigError("bos_id and eos_id must differ");
}

int ModelConfig::encoder_output_len() const {
  int n = n_audio_tokens + 1 + n_bottleneck;
  if (!audio_only) n += n_video_tokens + 1;
  return n;
}

// ---- Params ------------------------------------------------------------

std::map<std::string, std::vector<int>> Params::expected_shapes(
    const ModelConfig& cfg) {
  cfg.validate();
  std::map<std::string, std::vector<int>> out;
  int d = cfg.d_model;

  auto add_modality = [&](const std::string& m, int n_tokens, int token_dim) {
    out[m + ".proj.w"] = {token_dim, d};
    out[m + ".proj.b"] = {d};
    out[m + ".pos"] = {n_tokens, d};
    out[m + ".cls"] = {1, d};
    for (int l = 0; l < cfg.enc_layers; ++l)
      add_block_shapes(out, layer_name("enc." + m, l), d, cfg.ff_dim, false);
  };
  add_modality("audio", cfg.n_audio_tokens, cfg.audio_token_dim);
  if (!cfg.audio_only)
    add_modality("video", cfg.n_video_tokens, cfg.video_token_dim);
  if (cfg.n_bottleneck > 0) out["bottleneck"] = {cfg.n_bottleneck, d};
  out["enc.ln_f.g"] = {d};
  out["enc.ln_f.b"] = {d};

  out["dec.embed"] = {cfg.vocab_size, d};
  out["dec.pos"] = {cfg.max_target_len, d};
  for (int l = 0; l < cfg.dec_layers; ++l)
    add_block_shapes(out, layer_name("dec", l), d, cfg.ff_dim, true);
  out["dec.ln_f.g"] = {d};
  out["dec.ln_f.b"] = {d};
  out["dec.out.w"] = {d, cfg.vocab_size};
  out["dec.out.b"] = {cfg.vocab_size};
  return out;
}

Params Params::init(const ModelConfig& cfg, Rng& rng) {
  Params p;
  for (const auto& [name, shape] : expected_shapes(cfg)) {
    std::string leaf = name.substr(name.find_last_of('.') + 1);
    bool is_bias = leaf == "b" || leaf == "b1" || leaf == "b2" || leaf == "bq" ||
                   leaf == "bk" || leaf == "bv" || leaf == "bo";
    if (is_bias) {
      p.table_[name] = Tensor::zeros(shape, true);
    } else if (leaf == "g") {
      Tensor t = Tensor::from(shape, std::vector<double>(shape[0], 1.0), true);
      p.table_[name] = t;
    } else {
      p.table_[name] = Tensor::trunc_normal(shape, 0.02, rng, true);
    }
  }
  return p;
}

Tensor& Params::at(const std::string& name) {
  auto it = table_.find(name);
  if (it == table_.end()) throw ContractError("missing parameter: " + name);
  return it->second;
}

const Tensor& Params::at(const std::string& name) const {
  auto it = table_.find(name);
  if (it == table_.end()) throw ContractError("missing parameter: " + name);
  return it->second;
}

void Params::zero_grads() {
  for (auto& [name, t] : table_) t.zero_grad();
}

namespace {

constexpr char kCkptMagic[8] = {'A', 'V', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void write_raw(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void Params::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint: " + path);
  out.write(kCkptMagic, sizeof(kCkptMagic));
  write_raw<std::uint64_t>(out, table_.size());
  for (const auto& [name, t] : table_) {
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i)
      write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(t.dim(i)));
  }
  for (const auto& [name, t] : table_) {
    const auto& d = t.data();
    out.write(reinterpret_cast<const char*>(d.data()),
              static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!out) throw InputError("failed writing checkpoint: " + path);
}

Params Params::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
    throw InputError("not a checkpoint file: " + path);

  auto n = read_raw<std::uint64_t>(in, path);
  std::vector<std::pair<std::string, std::vector<int>>> entries;
  entries.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto name_len = read_raw<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw InputError("truncated checkpoint: " + path);
    auto n_dims = read_raw<std::uint32_t>(in, path);
    std::vector<int> shape(n_dims);
    for (std::uint32_t k = 0; k < n_dims; ++k) {
      auto v = read_raw<std::uint64_t>(in, path);
      if (v == 0 || v > (1u << 30))
        throw InputError("bad dimension in checkpoint: " + path);
      shape[k] = static_cast<int>(v);
    }
    entries.emplace_back(std::move(name), std::move(shape));
  }

  Params p;
  for (auto& [name, shape] : entries) {
    long long count = 1;
    for (int d : shape) count *= d;
    std::vector<double> values(static_cast<size_t>(count));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw InputError("truncated checkpoint: " + path);
    if (p.table_.count(name))
      throw InputError("duplicate parameter name in checkpoint: " + name);
    p.table_[name] = Tensor::from(shape, std::move(values), true);
  }
  return p;
}

std::vector<std::string> Params::import_named(const std::string& path) {
  Params donor = Params::load(path);
  std::vector<std::string> imported;
  for (const auto& [name, src] : donor.table_) {
    auto it = table_.find(name);
    if (it == table_.end()) continue;
    Tensor& dst = it->second;
    if (src.shape() == dst.shape()) {
      dst.data() = src.data();
      imported.push_back(name);
      continue;
    }
    // Patch-kernel adaptation: donor rows carry an RGB channel triple per
    // spatial cell. Grayscale targets average the triple; two-frame targets
    // repeat the donor row block per frame.
    bool adapted = false;
    if (src.rank() == 2 && dst.rank() == 2 && src.dim(1) == dst.dim(1)) {
      int cols = src.dim(1);
      if (src.dim(0) == dst.dim(0) * 3) {
        for (int r = 0; r < dst.dim(0); ++r)
          for (int c = 0; c < cols; ++c) {
            double s = 0;
            for (int ch = 0; ch < 3; ++ch)
              s += src.data()[(static_cast<size_t>(r) * 3 + ch) * cols + c];
            dst.data()[static_cast<size_t>(r) * cols + c] = s / 3.0;
          }
        adapted = true;
      } else if (dst.dim(0) == src.dim(0) * 2 && src.dim(0) % 3 == 0) {
        int cells = src.dim(0) / 3;  // spatial cells, 3 channels each
        for (int cell = 0; cell < cells; ++cell)
          for (int f = 0; f < 2; ++f)
            for (int ch = 0; ch < 3; ++ch) {
              size_t dst_row = (static_cast<size_t>(cell) * 2 + f) * 3 + ch;
              size_t src_row = static_cast<size_t>(cell) * 3 + ch;
              std::memcpy(&dst.data()[dst_row * cols],
                          &src.data()[src_row * cols], cols * sizeof(double));
            }
        adapted = true;
      }
    }
    if (!adapted)
      throw InputError("imported tensor '" + name + "' has shape " +
                       src.shape_str() + ", expected " + dst.shape_str());
    imported.push_back(name);
  }
  return imported;
}

void check_params_match(const ModelConfig& cfg, const Params& params) {
  auto expected = Params::expected_shapes(cfg);
  for (const auto& [name, shape] : expected) {
    if (!params.has(name))
      throw InputError("checkpoint is missing parameter: " + name);
    if (params.at(name).shape() != shape) {
      std::ostringstream want;
      want << "[";
      for (size_t i = 0; i < shape.size(); ++i)
        want << (i ? " x " : "") << shape[i];
      want << "]";
      throw InputError("parameter '" + name + "' has shape " +
                       params.at(name).shape_str() + ", config expects " +
                       want.str());
    }
  }
  for (const auto& [name, t] : params.table())
    if (!expected.count(name))
      throw InputError("checkpoint has unexpected parameter: " + name);
}

// ---- encoder -----------------------------------------------------------

Tensor encode(const Tensor& audio, const std::optional<Tensor>& video,
              const ModelConfig& cfg, const Params& p, EncoderProbe* probe) {
  cfg.validate();
  if (cfg.audio_only == video.has_value())
    throw ContractError(cfg.audio_only
                            ? "audio-only config given video tokens"
                            : "config expects video tokens");
  check_token_shape(audio, cfg.n_audio_tokens, cfg.audio_token_dim, "audio");
  if (video)
    check_token_shape(*video, cfg.n_video_tokens, cfg.video_token_dim, "video");

  auto embed = [&](const Tensor& toks, const std::string& m) {
    Tensor x = add_rowvec(matmul(toks, p.at(m + ".proj.w")), p.at(m + ".proj.b"));
    x = add(x, p.at(m + ".pos"));
    return concat_rows({x, p.at(m + ".cls")});  // CLS is the last row
  };
  Tensor a = embed(audio, "audio");
  std::optional<Tensor> v;
  if (video) v = embed(*video, "video");

  int n_a = cfg.n_audio_tokens;
  int n_v = cfg.n_video_tokens;
  int n_b = cfg.n_bottleneck;
  int first_fused = n_b > 0 ? cfg.fusion_layer : cfg.enc_layers;

  for (int l = 0; l < first_fused; ++l) {
    a = enc_block(a, p, layer_name("enc.audio", l), cfg.enc_heads);
    if (v) *v = enc_block(*v, p, layer_name("enc.video", l), cfg.enc_heads);
  }

  Tensor b;
  if (n_b > 0) b = p.at("bottleneck");
  for (int l = first_fused; l < cfg.enc_layers; ++l) {
    if (probe) {
      size_t slot = static_cast<size_t>(l - first_fused);
      if (probe->inject) {
        if (slot >= probe->bottlenecks.size())
          throw ContractError("probe has no recorded bottleneck for layer " +
                              std::to_string(l));
        b = Tensor::from({n_b, cfg.d_model}, probe->bottlenecks[slot]);
      } else {
        probe->bottlenecks.push_back(b.data());
      }
    }
    Tensor ax = enc_block(concat_rows({a, b}), p, layer_name("enc.audio", l),
                          cfg.enc_heads);
    a = slice_rows(ax, 0, n_a + 1);
    Tensor b_audio = slice_rows(ax, n_a + 1, n_a + 1 + n_b);
    if (v) {
      Tensor vx = enc_block(concat_rows({*v, b}), p, layer_name("enc.video", l),
                            cfg.enc_heads);
      *v = slice_rows(vx, 0, n_v + 1);
      Tensor b_video = slice_rows(vx, n_v + 1, n_v + 1 + n_b);
      b = scale(add(b_audio, b_video), 0.5);
    } else {
      b = b_audio;
    }
  }

  std::vector<Tensor> rows;
  rows.push_back(slice_rows(a, 0, n_a));
  if (v) rows.push_back(slice_rows(*v, 0, n_v));
  rows.push_back(slice_rows(a, n_a, n_a + 1));
  if (v) rows.push_back(slice_rows(*v, n_v, n_v + 1));
  if (n_b > 0) rows.push_back(b);
  return layer_norm(concat_rows(rows), p.at("enc.ln_f.g"), p.at("enc.ln_f.b"));
}

// ---- decoder -----------------------------------------------------------

Tensor decoder_logprobs(const Tensor& enc, const std::vector<int>& target,
                        const ModelConfig& cfg, const Params& p) {
  if (target.empty()) throw ContractError("target is empty");
  std::vector<int> input;
  input.reserve(target.size());
  input.push_back(cfg.bos_id);
  input.insert(input.end(), target.begin(), target.end() - 1);
  return decoder_forward(enc, input, cfg, p);
}

std::vector<double> decode_step(const Tensor& enc, const std::vector<int>& prefix,
                                const ModelConfig& cfg, const Params& p) {
  if (static_cast<int>(prefix.size()) >= cfg.max_target_len)
    throw ContractError("prefix length must be < max_target_len");
  NoGradGuard guard;
  std::vector<int> input;
  input.reserve(prefix.size() + 1);
  input.push_back(cfg.bos_id);
  input.insert(input.end(), prefix.begin(), prefix.end());
  Tensor lp = decoder_forward(enc, input, cfg, p);
  int T = lp.dim(0);
  int V = lp.dim(1);
  const auto& d = lp.data();
  return std::vector<double>(d.begin() + static_cast<size_t>(T - 1) * V, d.end());
}

Tensor sequence_loss(const Tensor& enc, const std::vector<int>& target,
                     const ModelConfig& cfg, const Params& p) {
  if (target.empty()) throw ContractError("target is empty");
  if (target.back() != cfg.eos_id)
    throw ContractError("target must end with the end-of-sequence id");
  if (static_cast<int>(target.size()) > cfg.max_target_len)
    throw ContractError("target longer than max_target_len");
  return nll_loss(decoder_logprobs(enc, target, cfg, p), target);
}

// ---- beam search -------------------------------------------------------

std::vector<int> beam_search(const Tensor& enc, const ModelConfig& cfg,
                             const Params& p, int beam_size, double alpha) {
  if (beam_size < 1) throw ContractError("beam_size must be >= 1");
  cfg.validate();
  NoGradGuard guard;

  struct Live {
    std::vector<int> ids;
    double log_prob;
  };
  std::vector<Live> live{{{}, 0.0}};
  std::vector<Hypothesis> finished;

  // Each step ranks every child of every live hypothesis by raw cumulative
  // log-probability and keeps the top beam_size; kept end-of-sequence
  // children retire to the finished pool (so beam_size 1 walks the greedy
  // path), the rest stay live until the length cap.
  for (int step = 1; step <= cfg.max_target_len && !live.empty(); ++step) {
    std::vector<Live> candidates;
    candidates.reserve(live.size() * cfg.vocab_size);
    for (const Live& h : live) {
      std::vector<double> lp = decode_step(enc, h.ids, cfg, p);
      for (int tok = 0; tok < cfg.vocab_size; ++tok) {
        std::vector<int> ids = h.ids;
        ids.push_back(tok);
        candidates.push_back({std::move(ids), h.log_prob + lp[tok]});
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Live& x, const Live& y) {
                if (x.log_prob != y.log_prob) return x.log_prob > y.log_prob;
                return x.ids < y.ids;
              });
    if (static_cast<int>(candidates.size()) > beam_size)
      candidates.resize(beam_size);
    live.clear();
    for (Live& c : candidates) {
      if (c.ids.back() == cfg.eos_id)
        finished.push_back({std::move(c.ids), c.log_prob, true});
      else if (step == cfg.max_target_len)
        finished.push_back({std::move(c.ids), c.log_prob, false});
      else
        live.push_back(std::move(c));
    }
  }

  if (finished.empty())
    throw ContractError("beam search produced no hypotheses");
  const Hypothesis* best = nullptr;
  double best_score = 0;
  for (const Hypothesis& h : finished) {
    double score = h.log_prob / length_penalty(static_cast<int>(h.ids.size()),
                                               alpha);
    if (!best || score > best_score ||
        (score == best_score && h.ids < best->ids)) {
      best = &h;
      best_score = score;
    }
  }
  return best->ids;
}

}  // namespace avatar
