#include "snnadv/attention.hpp"

#include <algorithm>
#include <cmath>

#include "snnadv/ops.hpp"

namespace snnadv {

void AttentionConfig::validate() const {
  if (channels == 0 || height == 0 || width == 0 || patch == 0 || embed == 0 || depth == 0 ||
      heads == 0 || mlp_hidden == 0 || classes == 0) {
    throw ConfigError("attention config: all extents must be positive");
  }
  if (height % patch || width % patch) {
    throw ConfigError("attention config: image " + std::to_string(height) + "x" +
                      std::to_string(width) + " does not divide into " + std::to_string(patch) +
                      "x" + std::to_string(patch) + " patches");
  }
  if (embed % heads) throw ConfigError("attention config: embed not divisible by heads");
}

template <typename T>
TinyAttentionNet<T> TinyAttentionNet<T>::zeros(const AttentionConfig& cfg) {
  cfg.validate();
  TinyAttentionNet<T> net;
  net.config = cfg;
  const std::size_t e = cfg.embed;
  net.patch_embed = DenseLayer<T>(cfg.patch_dim(), e);
  net.cls_token = BasicTensor<T>({e});
  net.pos_embed = BasicTensor<T>({cfg.tokens(), e});
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    AttentionBlock<T> b;
    b.ln1_gamma = BasicTensor<T>({e}, T{1});
    b.ln1_beta = BasicTensor<T>({e});
    b.qkv = DenseLayer<T>(e, 3 * e);
    b.proj = DenseLayer<T>(e, e);
    b.ln2_gamma = BasicTensor<T>({e}, T{1});
    b.ln2_beta = BasicTensor<T>({e});
    b.fc1 = DenseLayer<T>(e, cfg.mlp_hidden);
    b.fc2 = DenseLayer<T>(cfg.mlp_hidden, e);
    net.blocks.push_back(std::move(b));
  }
  net.lnf_gamma = BasicTensor<T>({e}, T{1});
  net.lnf_beta = BasicTensor<T>({e});
  net.head = DenseLayer<T>(e, cfg.classes);
  return net;
}

namespace {

template <typename Net, typename Ptr>
std::vector<std::pair<std::string, Ptr>> collect(Net& net) {
  std::vector<std::pair<std::string, Ptr>> out;
  out.emplace_back("patch.weight", &net.patch_embed.weight);
  out.emplace_back("patch.bias", &net.patch_embed.bias);
  out.emplace_back("cls", &net.cls_token);
  out.emplace_back("pos", &net.pos_embed);
  for (std::size_t l = 0; l < net.blocks.size(); ++l) {
    auto& b = net.blocks[l];
    std::string p = "block" + std::to_string(l) + ".";
    out.emplace_back(p + "ln1.gamma", &b.ln1_gamma);
    out.emplace_back(p + "ln1.beta", &b.ln1_beta);
    out.emplace_back(p + "qkv.weight", &b.qkv.weight);
    out.emplace_back(p + "qkv.bias", &b.qkv.bias);
    out.emplace_back(p + "proj.weight", &b.proj.weight);
    out.emplace_back(p + "proj.bias", &b.proj.bias);
    out.emplace_back(p + "ln2.gamma", &b.ln2_gamma);
    out.emplace_back(p + "ln2.beta", &b.ln2_beta);
    out.emplace_back(p + "fc1.weight", &b.fc1.weight);
    out.emplace_back(p + "fc1.bias", &b.fc1.bias);
    out.emplace_back(p + "fc2.weight", &b.fc2.weight);
    out.emplace_back(p + "fc2.bias", &b.fc2.bias);
  }
  out.emplace_back("lnf.gamma", &net.lnf_gamma);
  out.emplace_back("lnf.beta", &net.lnf_beta);
  out.emplace_back("head.weight", &net.head.weight);
  out.emplace_back("head.bias", &net.head.bias);
  return out;
}

constexpr double kLayerNormEps = 1e-5;

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, LayerNormCache<T>& cache) {
  const std::size_t rows = x.dim(0), e = x.dim(1);
  cache.xhat = BasicTensor<T>(x.shape());
  cache.rstd.assign(rows, T{0});
  BasicTensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = x.row(r);
    double mean = 0;
    for (T v : in) mean += v;
    mean /= static_cast<double>(e);
    double var = 0;
    for (T v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(e);
    const T rstd = static_cast<T>(1.0 / std::sqrt(var + kLayerNormEps));
    cache.rstd[r] = rstd;
    auto xh = cache.xhat.row(r);
    auto out = y.row(r);
    for (std::size_t j = 0; j < e; ++j) {
      xh[j] = static_cast<T>(in[j] - mean) * rstd;
      out[j] = gamma[j] * xh[j] + beta[j];
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> layer_norm_backward(const BasicTensor<T>& dy, const BasicTensor<T>& gamma,
                                   const LayerNormCache<T>& cache, BasicTensor<T>& dgamma,
                                   BasicTensor<T>& dbeta) {
  const std::size_t rows = dy.dim(0), e = dy.dim(1);
  BasicTensor<T> dx(dy.shape());
  std::vector<T> dxhat(e);
  for (std::size_t r = 0; r < rows; ++r) {
    auto d = dy.row(r);
    auto xh = cache.xhat.row(r);
    double m1 = 0, m2 = 0;
    for (std::size_t j = 0; j < e; ++j) {
      dxhat[j] = d[j] * gamma[j];
      m1 += dxhat[j];
      m2 += dxhat[j] * xh[j];
      dgamma[j] += d[j] * xh[j];
      dbeta[j] += d[j];
    }
    m1 /= static_cast<double>(e);
    m2 /= static_cast<double>(e);
    auto out = dx.row(r);
    for (std::size_t j = 0; j < e; ++j) {
      out[j] = cache.rstd[r] * static_cast<T>(dxhat[j] - m1 - xh[j] * m2);
    }
  }
  return dx;
}

template <typename T>
void accumulate(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
std::vector<std::pair<std::string, BasicTensor<T>*>> TinyAttentionNet<T>::named_parameters() {
  return collect<TinyAttentionNet<T>, BasicTensor<T>*>(*this);
}

template <typename T>
std::vector<std::pair<std::string, const BasicTensor<T>*>> TinyAttentionNet<T>::named_parameters()
    const {
  return collect<const TinyAttentionNet<T>, const BasicTensor<T>*>(*this);
}

template <typename T>
AttentionRecords<T> attention_records(const AttentionTrace<T>& trace) {
  AttentionRecords<T> out;
  for (const auto& b : trace.blocks) out.push_back(b.attention);
  return out;
}

template <typename T>
AttentionTrace<T> attention_forward(const TinyAttentionNet<T>& net, const BasicTensor<T>& x) {
  const auto& cfg = net.config;
  cfg.validate();
  if (x.row_width() != cfg.input_size()) {
    throw DimensionError("attention_forward: expected rows of width " +
                         std::to_string(cfg.input_size()) + ", got " + shape_string(x.shape()));
  }
  require_finite(x, "attention_forward input");
  const std::size_t batch = x.dim(0), np = cfg.patches(), n = cfg.tokens(), e = cfg.embed;
  const std::size_t p = cfg.patch, gw = cfg.grid_w(), dh = cfg.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  AttentionTrace<T> tr;
  tr.batch = batch;
  tr.patches = BasicTensor<T>({batch * np, cfg.patch_dim()});
  for (std::size_t b = 0; b < batch; ++b) {
    auto img = x.row(b);
    for (std::size_t pi = 0; pi < np; ++pi) {
      auto dst = tr.patches.row(b * np + pi);
      std::size_t gy = pi / gw, gx = pi % gw;
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        for (std::size_t py = 0; py < p; ++py) {
          for (std::size_t px = 0; px < p; ++px) {
            dst[c * p * p + py * p + px] =
                img[c * cfg.height * cfg.width + (gy * p + py) * cfg.width + gx * p + px];
          }
        }
      }
    }
  }
  BasicTensor<T> emb = net.patch_embed.forward(tr.patches);
  BasicTensor<T> h({batch * n, e});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < n; ++t) {
      auto dst = h.row(b * n + t);
      auto pos = net.pos_embed.row(t);
      for (std::size_t j = 0; j < e; ++j) {
        T base = t == 0 ? net.cls_token[j] : emb.row(b * np + t - 1)[j];
        dst[j] = base + pos[j];
      }
    }
  }

  for (const auto& blk : net.blocks) {
    BlockCache<T> c;
    c.input = h;
    c.a = layer_norm(h, blk.ln1_gamma, blk.ln1_beta, c.ln1);
    c.qkv = blk.qkv.forward(c.a);
    c.ctx = BasicTensor<T>({batch * n, e});
    std::vector<T> srow(n);
    for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
      BasicTensor<T> att({batch, n, n});
      const std::size_t qo = hd * dh, ko = e + hd * dh, vo = 2 * e + hd * dh;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
          auto q = c.qkv.row(b * n + i);
          T mx = -std::numeric_limits<T>::infinity();
          for (std::size_t j = 0; j < n; ++j) {
            auto k = c.qkv.row(b * n + j);
            T s = 0;
            for (std::size_t d = 0; d < dh; ++d) s += q[qo + d] * k[ko + d];
            srow[j] = s * scale;
            mx = std::max(mx, srow[j]);
          }
          T z = 0;
          for (std::size_t j = 0; j < n; ++j) {
            srow[j] = std::exp(srow[j] - mx);
            z += srow[j];
          }
          T* arow = &att[(b * n + i) * n];
          auto ctx = c.ctx.row(b * n + i);
          for (std::size_t j = 0; j < n; ++j) {
            arow[j] = srow[j] / z;
            auto v = c.qkv.row(b * n + j);
            for (std::size_t d = 0; d < dh; ++d) ctx[qo + d] += arow[j] * v[vo + d];
          }
        }
      }
      c.attention.push_back(std::move(att));
    }
    BasicTensor<T> out = blk.proj.forward(c.ctx);
    c.h1 = add(h, out);
    c.c = layer_norm(c.h1, blk.ln2_gamma, blk.ln2_beta, c.ln2);
    c.pre = blk.fc1.forward(c.c);
    c.f = relu_forward(c.pre);
    h = add(c.h1, blk.fc2.forward(c.f));
    tr.blocks.push_back(std::move(c));
  }

  BasicTensor<T> cls({batch, e});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(h.row(b * n).begin(), h.row(b * n).end(), cls.row(b).begin());
  }
  tr.cls_norm = layer_norm(cls, net.lnf_gamma, net.lnf_beta, tr.lnf);
  tr.logits = net.head.forward(tr.cls_norm);
  require_finite(tr.logits, "attention_forward logits");
  return tr;
}

template <typename T>
AttentionGradients<T> attention_backward(const TinyAttentionNet<T>& net,
                                         const AttentionTrace<T>& tr,
                                         const BasicTensor<T>& dlogits) {
  const auto& cfg = net.config;
  if (dlogits.shape() != tr.logits.shape() || tr.blocks.size() != net.blocks.size()) {
    throw StateError("attention_backward: gradient does not match the recorded forward pass");
  }
  const std::size_t batch = tr.batch, np = cfg.patches(), n = cfg.tokens(), e = cfg.embed;
  const std::size_t p = cfg.patch, gw = cfg.grid_w(), dh = cfg.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  AttentionGradients<T> out;
  out.dparams = TinyAttentionNet<T>::zeros(cfg);
  auto& g = out.dparams;
  for (auto& [name, t] : g.named_parameters()) {
    for (auto& v : t->data()) v = T{0};
  }

  auto gh = net.head.backward(tr.cls_norm, dlogits);
  g.head.weight = std::move(gh.dweight);
  g.head.bias = std::move(gh.dbias);
  BasicTensor<T> dcls = layer_norm_backward(gh.dx, net.lnf_gamma, tr.lnf, g.lnf_gamma, g.lnf_beta);

  BasicTensor<T> dh_t({batch * n, e});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(dcls.row(b).begin(), dcls.row(b).end(), dh_t.row(b * n).begin());
  }

  for (std::size_t l = net.blocks.size(); l-- > 0;) {
    const auto& blk = net.blocks[l];
    const auto& c = tr.blocks[l];
    auto& gb = g.blocks[l];

    BasicTensor<T> dh1 = dh_t;
    auto g2 = blk.fc2.backward(c.f, dh_t);
    gb.fc2.weight = std::move(g2.dweight);
    gb.fc2.bias = std::move(g2.dbias);
    auto g1 = blk.fc1.backward(c.c, relu_backward(c.pre, g2.dx));
    gb.fc1.weight = std::move(g1.dweight);
    gb.fc1.bias = std::move(g1.dbias);
    accumulate(dh1, layer_norm_backward(g1.dx, blk.ln2_gamma, c.ln2, gb.ln2_gamma, gb.ln2_beta));

    BasicTensor<T> din = dh1;
    auto gp = blk.proj.backward(c.ctx, dh1);
    gb.proj.weight = std::move(gp.dweight);
    gb.proj.bias = std::move(gp.dbias);
    const BasicTensor<T>& dctx = gp.dx;

    BasicTensor<T> dqkv({batch * n, 3 * e});
    std::vector<T> da(n), ds(n);
    for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
      const auto& att = c.attention[hd];
      const std::size_t qo = hd * dh, ko = e + hd * dh, vo = 2 * e + hd * dh;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
          const T* arow = &att[(b * n + i) * n];
          auto dc = dctx.row(b * n + i);
          T dot = 0;
          for (std::size_t j = 0; j < n; ++j) {
            auto v = c.qkv.row(b * n + j);
            auto dv = dqkv.row(b * n + j);
            T s = 0;
            for (std::size_t d = 0; d < dh; ++d) {
              s += dc[qo + d] * v[vo + d];
              dv[vo + d] += arow[j] * dc[qo + d];
            }
            da[j] = s;
            dot += arow[j] * s;
          }
          auto q = c.qkv.row(b * n + i);
          auto dq = dqkv.row(b * n + i);
          for (std::size_t j = 0; j < n; ++j) {
            T dsij = arow[j] * (da[j] - dot) * scale;
            if (dsij == T{0}) continue;
            auto k = c.qkv.row(b * n + j);
            auto dk = dqkv.row(b * n + j);
            for (std::size_t d = 0; d < dh; ++d) {
              dq[qo + d] += dsij * k[ko + d];
              dk[ko + d] += dsij * q[qo + d];
            }
          }
        }
      }
    }
    auto gq = blk.qkv.backward(c.a, dqkv);
    gb.qkv.weight = std::move(gq.dweight);
    gb.qkv.bias = std::move(gq.dbias);
    accumulate(din, layer_norm_backward(gq.dx, blk.ln1_gamma, c.ln1, gb.ln1_gamma, gb.ln1_beta));
    dh_t = std::move(din);
  }

  BasicTensor<T> demb({batch * np, e});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < n; ++t) {
      auto src = dh_t.row(b * n + t);
      auto dpos = g.pos_embed.row(t);
      for (std::size_t j = 0; j < e; ++j) dpos[j] += src[j];
      if (t == 0) {
        for (std::size_t j = 0; j < e; ++j) g.cls_token[j] += src[j];
      } else {
        std::copy(src.begin(), src.end(), demb.row(b * np + t - 1).begin());
      }
    }
  }
  auto ge = net.patch_embed.backward(tr.patches, demb);
  g.patch_embed.weight = std::move(ge.dweight);
  g.patch_embed.bias = std::move(ge.dbias);

  out.dinput = BasicTensor<T>({batch, cfg.input_size()});
  for (std::size_t b = 0; b < batch; ++b) {
    auto img = out.dinput.row(b);
    for (std::size_t pi = 0; pi < np; ++pi) {
      auto src = ge.dx.row(b * np + pi);
      std::size_t gy = pi / gw, gx = pi % gw;
      for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
        for (std::size_t py = 0; py < p; ++py) {
          for (std::size_t px = 0; px < p; ++px) {
            img[ch * cfg.height * cfg.width + (gy * p + py) * cfg.width + gx * p + px] =
                src[ch * p * p + py * p + px];
          }
        }
      }
    }
  }
  require_finite(out.dinput, "attention_backward input gradient");
  return out;
}

TinyAttentionNet<float> make_attention_net(const AttentionConfig& cfg, Rng& rng) {
  auto net = TinyAttentionNet<float>::zeros(cfg);
  auto init = [&](DenseLayer<float>& d, double gain) {
    LinearLayer<float> l = std::move(d);
    init_fan_in_uniform(l, rng, gain);
    d = std::get<DenseLayer<float>>(std::move(l));
  };
  init(net.patch_embed, 1.0);
  for (auto& v : net.cls_token.data()) v = static_cast<float>(0.02 * standard_normal(rng));
  for (auto& v : net.pos_embed.data()) v = static_cast<float>(0.02 * standard_normal(rng));
  for (auto& b : net.blocks) {
    init(b.qkv, 1.0);
    init(b.proj, 1.0);
    init(b.fc1, std::sqrt(2.0));
    init(b.fc2, 1.0);
  }
  init(net.head, 1.0);
  return net;
}

template struct TinyAttentionNet<float>;
template struct TinyAttentionNet<double>;
template AttentionRecords<float> attention_records(const AttentionTrace<float>&);
template AttentionRecords<double> attention_records(const AttentionTrace<double>&);
template AttentionTrace<float> attention_forward(const TinyAttentionNet<float>&,
                                                 const BasicTensor<float>&);
template AttentionTrace<double> attention_forward(const TinyAttentionNet<double>&,
                                                  const BasicTensor<double>&);
template AttentionGradients<float> attention_backward(const TinyAttentionNet<float>&,
                                                      const AttentionTrace<float>&,
                                                      const BasicTensor<float>&);
template AttentionGradients<double> attention_backward(const TinyAttentionNet<double>&,
                                                       const AttentionTrace<double>&,
                                                       const BasicTensor<double>&);

}  // namespace snnadv
