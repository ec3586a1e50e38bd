#include "cotbert/toy_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstring>
#include <fstream>

#include "cotbert/error.hpp"
#include "cotbert/simd/kernels.hpp"

namespace cotbert {
namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
constexpr char kMagic[4] = {'C', 'T', 'B', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

struct LnCache {
  Matrix xhat;
  std::vector<double> rstd;
};

struct LayerCache {
  LnCache ln1;
  Matrix u, q, k, v;
  std::vector<Matrix> probs;  // per head [len x len]
  Matrix ctx;
  Matrix drop_attn;  // empty when dropout is off
  LnCache ln2;
  Matrix u2, z, g;
  Matrix drop_ffn;
};

struct SeqCache {
  std::size_t len = 0;
  std::vector<TokenId> ids;
  std::vector<std::int32_t> pos;
  std::vector<std::uint8_t> key_mask;
  std::vector<LayerCache> layers;
  LnCache lnf;
};

struct ToyCache final : ForwardCache {
  std::size_t batch = 0;
  std::size_t max_len = 0;
  std::vector<SeqCache> seqs;
};

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LnCache& cache) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  cache.xhat = Matrix(n, d);
  cache.rstd.assign(n, 0.0);
  Matrix y(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xr = x.row(i);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    cache.rstd[i] = rstd;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (xr[j] - mean) * rstd;
      cache.xhat(i, j) = xh;
      y(i, j) = gain(0, j) * xh + bias(0, j);
    }
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LnCache& cache, const Matrix& gain, Matrix& dgain,
                           Matrix& dbias) {
  const std::size_t n = dy.rows();
  const std::size_t d = dy.cols();
  Matrix dx(n, d);
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dy(i, j);
      const double xh = cache.xhat(i, j);
      dgain(0, j) += g * xh;
      dbias(0, j) += g;
      dxhat[j] = g * gain(0, j);
      m1 += dxhat[j];
      m2 += dxhat[j] * xh;
    }
    m1 /= static_cast<double>(d);
    m2 /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx(i, j) = cache.rstd[i] * (dxhat[j] - m1 - cache.xhat(i, j) * m2);
    }
  }
  return dx;
}

double gelu(double z) { return 0.5 * z * (1.0 + std::tanh(kGeluC * (z + kGeluA * z * z * z))); }

double gelu_grad(double z) {
  const double t = std::tanh(kGeluC * (z + kGeluA * z * z * z));
  return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * z * z);
}

Matrix affine(const Matrix& x, const ToyEncoder::Param& w, const ToyEncoder::Param& b) {
  Matrix out;
  matmul(x, w.value, out);
  add_row_bias(out, b.value);
  return out;
}

void hadamard_inplace(Matrix& a, const Matrix& b) {
  auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] *= bv[i];
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double p, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  for (double& v : m.values()) v = keep(rng) ? s : 0.0;
  return m;
}

ToyEncoder::Param make_param(std::string name, std::size_t rows, std::size_t cols) {
  return {std::move(name), Matrix(rows, cols), Matrix(rows, cols)};
}

void init_normal(ToyEncoder::Param& p, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : p.value.values()) v = dist(rng);
}

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  require(in.good(), ErrorKind::io, "truncated encoder checkpoint");
  return v;
}

}  // namespace

nlohmann::json ToyEncoderConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"hidden_dim", hidden_dim}, {"layers", layers},
          {"heads", heads},           {"ffn_dim", ffn_dim},       {"max_positions", max_positions},
          {"dropout", dropout},       {"seed", seed}};
}

ToyEncoderConfig ToyEncoderConfig::from_json(const nlohmann::json& j) {
  ToyEncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::unique_ptr<ToyEncoder> make_toy_encoder(const ToyEncoderConfig& config) {
  return std::make_unique<ToyEncoder>(config);
}

ToyEncoder::ToyEncoder(const ToyEncoderConfig& config) : config_(config), dropout_rng_(config.seed ^ 0x5eedULL) {
  require(config.vocab_size > 0, ErrorKind::config, "toy encoder needs a vocabulary");
  require(config.hidden_dim > 0 && config.heads > 0 && config.hidden_dim % config.heads == 0, ErrorKind::config,
          "hidden_dim must be a positive multiple of heads");
  require(config.layers > 0 && config.ffn_dim > 0 && config.max_positions > 0, ErrorKind::config,
          "toy encoder sizes must be positive");
  require(config.dropout >= 0.0 && config.dropout < 1.0, ErrorKind::config, "dropout must lie in [0, 1)");

  const std::size_t d = config.hidden_dim;
  const std::size_t f = config.ffn_dim;
  std::mt19937_64 rng(config.seed);

  tok_emb_ = make_param("tok_emb", config.vocab_size, d);
  pos_emb_ = make_param("pos_emb", config.max_positions, d);
  init_normal(tok_emb_, 1.0, rng);
  init_normal(pos_emb_, 0.5, rng);

  const double wd = 1.0 / std::sqrt(static_cast<double>(d));
  const double wf = 1.0 / std::sqrt(static_cast<double>(f));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer layer{make_param(p + "ln1_gain", 1, d), make_param(p + "ln1_bias", 1, d),
                make_param(p + "wq", d, d),       make_param(p + "bq", 1, d),
                make_param(p + "wk", d, d),       make_param(p + "bk", 1, d),
                make_param(p + "wv", d, d),       make_param(p + "bv", 1, d),
                make_param(p + "wo", d, d),       make_param(p + "bo", 1, d),
                make_param(p + "ln2_gain", 1, d), make_param(p + "ln2_bias", 1, d),
                make_param(p + "w1", d, f),       make_param(p + "b1", 1, f),
                make_param(p + "w2", f, d),       make_param(p + "b2", 1, d)};
    layer.ln1_gain.value.fill(1.0);
    layer.ln2_gain.value.fill(1.0);
    for (Param* w : {&layer.wq, &layer.wk, &layer.wv, &layer.wo, &layer.w1}) init_normal(*w, wd, rng);
    init_normal(layer.w2, wf, rng);
    layers_.push_back(std::move(layer));
  }
  lnf_gain_ = make_param("lnf_gain", 1, d);
  lnf_bias_ = make_param("lnf_bias", 1, d);
  lnf_gain_.value.fill(1.0);
}

template <class F>
void ToyEncoder::for_each_param(F&& f) {
  f(tok_emb_);
  f(pos_emb_);
  for (auto& l : layers_) {
    for (Param* p : {&l.ln1_gain, &l.ln1_bias, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo,
                     &l.ln2_gain, &l.ln2_bias, &l.w1, &l.b1, &l.w2, &l.b2}) {
      f(*p);
    }
  }
  f(lnf_gain_);
  f(lnf_bias_);
}

template <class F>
void ToyEncoder::for_each_param(F&& f) const {
  const_cast<ToyEncoder*>(this)->for_each_param([&](Param& p) { f(static_cast<const Param&>(p)); });
}

std::vector<ParamRef> ToyEncoder::parameters() {
  std::vector<ParamRef> refs;
  for_each_param([&](Param& p) { refs.push_back({p.name, p.value.values(), p.grad.values()}); });
  return refs;
}

void ToyEncoder::zero_grad() {
  for_each_param([](Param& p) { p.grad.fill(0.0); });
}

Activations ToyEncoder::forward(const EncodedBatch& batch) {
  const std::size_t n = batch.batch_size();
  const std::size_t L = batch.max_len;
  const std::size_t d = config_.hidden_dim;
  const std::size_t heads = config_.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = mode() == Mode::train && config_.dropout > 0.0;
  const bool keep_cache = mode() == Mode::train;
  require(batch.token_ids.size() == n * L && batch.attention_mask.size() == n * L, ErrorKind::shape,
          "encoded batch does not match its max_len");

  Activations act;
  act.hidden = Tensor3(n, L, d);
  auto cache = std::make_shared<ToyCache>();
  cache->batch = n;
  cache->max_len = L;
  if (keep_cache) cache->seqs.resize(n);

  for (std::size_t b = 0; b < n; ++b) {
    SeqCache local;
    SeqCache& sc = keep_cache ? cache->seqs[b] : local;
    const std::size_t len = batch.attended_extent(b);
    sc.len = len;
    if (len == 0) continue;
    sc.ids.assign(batch.ids(b).begin(), batch.ids(b).begin() + static_cast<std::ptrdiff_t>(len));
    sc.key_mask.assign(batch.mask(b).begin(), batch.mask(b).begin() + static_cast<std::ptrdiff_t>(len));
    sc.pos.resize(len);

    Matrix x(len, d);
    for (std::size_t t = 0; t < len; ++t) {
      const TokenId id = sc.ids[t];
      const std::int32_t pos = batch.position(b, t);
      require(id >= 0 && static_cast<std::size_t>(id) < config_.vocab_size, ErrorKind::input,
              "token id " + std::to_string(id) + " outside toy vocabulary");
      require(pos >= 0 && static_cast<std::size_t>(pos) < config_.max_positions, ErrorKind::shape,
              "position id " + std::to_string(pos) + " exceeds max_positions");
      sc.pos[t] = pos;
      const auto tok = tok_emb_.value.row(static_cast<std::size_t>(id));
      std::copy(tok.begin(), tok.end(), x.row(t).begin());
      simd::axpy(1.0, pos_emb_.value.row(static_cast<std::size_t>(pos)), x.row(t));
    }

    sc.layers.resize(config_.layers);
    for (std::size_t l = 0; l < config_.layers; ++l) {
      Layer& W = layers_[l];
      LayerCache& lc = sc.layers[l];
      lc.u = layer_norm(x, W.ln1_gain.value, W.ln1_bias.value, lc.ln1);
      lc.q = affine(lc.u, W.wq, W.bq);
      lc.k = affine(lc.u, W.wk, W.bk);
      lc.v = affine(lc.u, W.wv, W.bv);
      lc.ctx = Matrix(len, d);
      lc.probs.assign(heads, Matrix(len, len));
      for (std::size_t h = 0; h < heads; ++h) {
        Matrix& p = lc.probs[h];
        const std::size_t off = h * dh;
        for (std::size_t t = 0; t < len; ++t) {
          const auto qt = lc.q.row(t).subspan(off, dh);
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t s = 0; s < len; ++s) {
            if (!sc.key_mask[s]) continue;
            p(t, s) = simd::dot(qt, lc.k.row(s).subspan(off, dh)) * scale;
            mx = std::max(mx, p(t, s));
          }
          double z = 0.0;
          for (std::size_t s = 0; s < len; ++s) {
            if (!sc.key_mask[s]) continue;
            p(t, s) = std::exp(p(t, s) - mx);
            z += p(t, s);
          }
          const auto ct = lc.ctx.row(t).subspan(off, dh);
          for (std::size_t s = 0; s < len; ++s) {
            if (!sc.key_mask[s]) continue;
            p(t, s) /= z;
            simd::axpy(p(t, s), lc.v.row(s).subspan(off, dh), ct);
          }
        }
      }
      Matrix o = affine(lc.ctx, W.wo, W.bo);
      if (drop) {
        lc.drop_attn = dropout_mask(len, d, config_.dropout, dropout_rng_);
        hadamard_inplace(o, lc.drop_attn);
      }
      add_inplace(x, o);

      lc.u2 = layer_norm(x, W.ln2_gain.value, W.ln2_bias.value, lc.ln2);
      lc.z = affine(lc.u2, W.w1, W.b1);
      lc.g = lc.z;
      for (double& v : lc.g.values()) v = gelu(v);
      Matrix f = affine(lc.g, W.w2, W.b2);
      if (drop) {
        lc.drop_ffn = dropout_mask(len, d, config_.dropout, dropout_rng_);
        hadamard_inplace(f, lc.drop_ffn);
      }
      add_inplace(x, f);
    }
    const Matrix y = layer_norm(x, lnf_gain_.value, lnf_bias_.value, sc.lnf);
    for (std::size_t t = 0; t < len; ++t) {
      std::copy(y.row(t).begin(), y.row(t).end(), act.hidden.at(b, t).begin());
    }
  }
  if (keep_cache) act.cache = std::move(cache);
  return act;
}

void ToyEncoder::backward(const Activations& activations, const Tensor3& grad_hidden) {
  const auto* cache = dynamic_cast<const ToyCache*>(activations.cache.get());
  require(cache != nullptr, ErrorKind::internal, "backward needs a train-mode forward pass of the toy encoder");
  require(grad_hidden.batch() == cache->batch && grad_hidden.seq() == cache->max_len &&
              grad_hidden.dim() == config_.hidden_dim,
          ErrorKind::shape, "gradient does not match forward activations");
  const std::size_t d = config_.hidden_dim;
  const std::size_t heads = config_.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t b = 0; b < cache->batch; ++b) {
    const SeqCache& sc = cache->seqs[b];
    const std::size_t len = sc.len;
    if (len == 0) continue;
    Matrix dy(len, d);
    for (std::size_t t = 0; t < len; ++t) {
      const auto g = grad_hidden.at(b, t);
      std::copy(g.begin(), g.end(), dy.row(t).begin());
    }
    Matrix dx = layer_norm_backward(dy, sc.lnf, lnf_gain_.value, lnf_gain_.grad, lnf_bias_.grad);

    for (std::size_t l = config_.layers; l-- > 0;) {
      Layer& W = layers_[l];
      const LayerCache& lc = sc.layers[l];

      // Feed-forward block.
      Matrix df = dx;
      if (!lc.drop_ffn.empty()) hadamard_inplace(df, lc.drop_ffn);
      Matrix dg;
      matmul_nt(df, W.w2.value, dg);
      matmul_tn_acc(lc.g, df, W.w2.grad);
      acc_column_sums(df, W.b2.grad);
      Matrix dz = dg;
      {
        auto dzv = dz.values();
        const auto zv = lc.z.values();
        for (std::size_t i = 0; i < dzv.size(); ++i) dzv[i] *= gelu_grad(zv[i]);
      }
      matmul_tn_acc(lc.u2, dz, W.w1.grad);
      acc_column_sums(dz, W.b1.grad);
      Matrix du2;
      matmul_nt(dz, W.w1.value, du2);
      add_inplace(dx, layer_norm_backward(du2, lc.ln2, W.ln2_gain.value, W.ln2_gain.grad, W.ln2_bias.grad));

      // Attention block.
      Matrix dout = dx;
      if (!lc.drop_attn.empty()) hadamard_inplace(dout, lc.drop_attn);
      matmul_tn_acc(lc.ctx, dout, W.wo.grad);
      acc_column_sums(dout, W.bo.grad);
      Matrix dctx;
      matmul_nt(dout, W.wo.value, dctx);

      Matrix dq(len, d), dk(len, d), dv(len, d);
      std::vector<double> dprob(len);
      for (std::size_t h = 0; h < heads; ++h) {
        const Matrix& p = lc.probs[h];
        const std::size_t off = h * dh;
        for (std::size_t t = 0; t < len; ++t) {
          const auto dct = dctx.row(t).subspan(off, dh);
          double weighted = 0.0;
          for (std::size_t s = 0; s < len; ++s) {
            if (!sc.key_mask[s]) continue;
            dprob[s] = simd::dot(dct, lc.v.row(s).subspan(off, dh));
            weighted += p(t, s) * dprob[s];
            simd::axpy(p(t, s), dct, dv.row(s).subspan(off, dh));
          }
          for (std::size_t s = 0; s < len; ++s) {
            if (!sc.key_mask[s]) continue;
            const double dscore = p(t, s) * (dprob[s] - weighted) * scale;
            simd::axpy(dscore, lc.k.row(s).subspan(off, dh), dq.row(t).subspan(off, dh));
            simd::axpy(dscore, lc.q.row(t).subspan(off, dh), dk.row(s).subspan(off, dh));
          }
        }
      }
      matmul_tn_acc(lc.u, dq, W.wq.grad);
      matmul_tn_acc(lc.u, dk, W.wk.grad);
      matmul_tn_acc(lc.u, dv, W.wv.grad);
      acc_column_sums(dq, W.bq.grad);
      acc_column_sums(dk, W.bk.grad);
      acc_column_sums(dv, W.bv.grad);
      Matrix du, tmp;
      matmul_nt(dq, W.wq.value, du);
      matmul_nt(dk, W.wk.value, tmp);
      add_inplace(du, tmp);
      matmul_nt(dv, W.wv.value, tmp);
      add_inplace(du, tmp);
      add_inplace(dx, layer_norm_backward(du, lc.ln1, W.ln1_gain.value, W.ln1_gain.grad, W.ln1_bias.grad));
    }

    for (std::size_t t = 0; t < len; ++t) {
      simd::axpy(1.0, dx.row(t), tok_emb_.grad.row(static_cast<std::size_t>(sc.ids[t])));
      simd::axpy(1.0, dx.row(t), pos_emb_.grad.row(static_cast<std::size_t>(sc.pos[t])));
    }
  }
}

nlohmann::json ToyEncoder::describe() const { return {{"backend", "toy"}, {"config", config_.to_json()}}; }

void ToyEncoder::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream meta(dir / "encoder.json");
    require(meta.good(), ErrorKind::io, "cannot write " + (dir / "encoder.json").string());
    meta << describe().dump(2) << '\n';
  }
  std::ofstream out(dir / "encoder.bin", std::ios::binary);
  require(out.good(), ErrorKind::io, "cannot write " + (dir / "encoder.bin").string());
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kFormatVersion);
  std::uint64_t count = 0;
  for_each_param([&](const Param&) { ++count; });
  write_pod(out, count);
  for_each_param([&](const Param& p) {
    write_pod(out, static_cast<std::uint64_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(out, static_cast<std::uint64_t>(p.value.rows()));
    write_pod(out, static_cast<std::uint64_t>(p.value.cols()));
    out.write(reinterpret_cast<const char*>(p.value.values().data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  });
  require(out.good(), ErrorKind::io, "failed writing " + (dir / "encoder.bin").string());
}

std::unique_ptr<ToyEncoder> ToyEncoder::load(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "encoder.json");
  require(meta_in.good(), ErrorKind::io, "cannot open " + (dir / "encoder.json").string());
  const auto meta = nlohmann::json::parse(meta_in);
  require(meta.value("backend", "") == "toy", ErrorKind::config, "checkpoint in " + dir.string() + " is not a toy encoder");
  auto enc = std::make_unique<ToyEncoder>(ToyEncoderConfig::from_json(meta.at("config")));

  std::ifstream in(dir / "encoder.bin", std::ios::binary);
  require(in.good(), ErrorKind::io, "cannot open " + (dir / "encoder.bin").string());
  char magic[4];
  in.read(magic, sizeof magic);
  require(in.good() && std::memcmp(magic, kMagic, sizeof magic) == 0, ErrorKind::io, "bad encoder checkpoint header");
  require(read_pod<std::uint32_t>(in) == kFormatVersion, ErrorKind::io, "unsupported encoder checkpoint version");
  const auto count = read_pod<std::uint64_t>(in);
  std::uint64_t expected = 0;
  enc->for_each_param([&](Param&) { ++expected; });
  require(count == expected, ErrorKind::io, "encoder checkpoint parameter count mismatch");
  enc->for_each_param([&](Param& p) {
    const auto name_len = read_pod<std::uint64_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    require(name == p.name && rows == p.value.rows() && cols == p.value.cols(), ErrorKind::io,
            "encoder checkpoint tensor '" + name + "' does not match the configured shape");
    in.read(reinterpret_cast<char*>(p.value.values().data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    require(in.good(), ErrorKind::io, "truncated encoder checkpoint");
  });
  return enc;
}

}  // namespace cotbert
