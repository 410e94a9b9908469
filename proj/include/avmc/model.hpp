#pragma once

#include <array>
#include <string>
#include <vector>

#include "avmc/dataset.hpp"
#include "avmc/layers.hpp"

namespace avmc {

inline int task_index(Modality task) {
  switch (task) {
    case Modality::multimodal: return 0;
    case Modality::text: return 1;
    case Modality::acoustic: return 2;
    case Modality::visual: return 3;
  }
  throw ValidationError("bad task key");
}

// Four scalar sentiment predictions for one instance.
struct PredictionSet {
  double m = 0.0;
  double t = 0.0;
  double a = 0.0;
  double v = 0.0;

  double at(Modality task) const {
    switch (task) {
      case Modality::multimodal: return m;
      case Modality::text: return t;
      case Modality::acoustic: return a;
      case Modality::visual: return v;
    }
    throw ValidationError("bad task key");
  }
};

// ---------------------------------------------------------------------------
// Task head: BN -> FFN -> FFN -> FFN(width 1, identity)
// ---------------------------------------------------------------------------

template <typename S>
struct Head {
  BatchNorm<S> bn;
  Dense<S> f1, f2, f3;
  float dropout = 0.0f;

  struct Cache {
    typename BatchNorm<S>::Cache bnc;
    typename Dense<S>::Cache c1, c2, c3;
    Mat<S> mask1, mask2;  // inverted-dropout multipliers; empty when unused
  };

  void init(int input_dim, const ModelConfig& cfg, RandomSource& rng) {
    dropout = cfg.dropout;
    const auto dims = cfg.classifier_dims(input_dim);
    bn.init(input_dim);
    f1.init(dims[0], input_dim, cfg.activation, rng);
    f2.init(dims[1], dims[0], cfg.activation, rng);
    f3.init(1, dims[1], Activation::identity, rng);
  }

  void zero_grad() {
    bn.zero_grad();
    f1.zero_grad();
    f2.zero_grad();
    f3.zero_grad();
  }

  Vec<S> forward(const Mat<S>& x, bool training, RandomSource* drop_rng, Cache* cache) {
    Cache local;
    Cache& c = cache ? *cache : local;
    Mat<S> h = bn.forward(x, training, &c.bnc);
    h = f1.forward(h, &c.c1);
    apply_dropout(h, training, drop_rng, &c.mask1);
    h = f2.forward(h, &c.c2);
    apply_dropout(h, training, drop_rng, &c.mask2);
    const Mat<S> out = f3.forward(h, &c.c3);
    return out.row(0).transpose();
  }

  // dy is the per-instance gradient of the scalar prediction; returns dx.
  Mat<S> backward(const Cache& cache, const Vec<S>& dy) {
    Mat<S> g = f3.backward(cache.c3, dy.transpose());
    if (cache.mask2.size() > 0) g = g.cwiseProduct(cache.mask2);
    g = f2.backward(cache.c2, g);
    if (cache.mask1.size() > 0) g = g.cwiseProduct(cache.mask1);
    g = f1.backward(cache.c1, g);
    return bn.backward(cache.bnc, g);
  }

  void visit(const std::string& prefix, std::vector<ParamView<S>>& out) {
    bn.visit(prefix + ".bn", out);
    f1.visit(prefix + ".ffn1", out);
    f2.visit(prefix + ".ffn2", out);
    f3.visit(prefix + ".ffn3", out);
  }

 private:
  void apply_dropout(Mat<S>& h, bool training, RandomSource* rng, Mat<S>* mask) {
    if (!training || dropout <= 0.0f) {
      *mask = Mat<S>();
      return;
    }
    if (rng == nullptr) throw ConfigError("dropout requires a RandomSource in training mode");
    const S keep = S(1) - S(dropout);
    mask->resize(h.rows(), h.cols());
    for (Eigen::Index i = 0; i < mask->size(); ++i) {
      mask->data()[i] = rng->uniform() < dropout ? S(0) : S(1) / keep;
    }
    h = h.cwiseProduct(*mask);
  }
};

// ---------------------------------------------------------------------------
// Sequence encoder: stacked BiLSTM over valid rows + projection FFN
// ---------------------------------------------------------------------------

template <typename S>
struct SeqEncoder {
  std::vector<LstmCell<S>> fwd, bwd;  // one cell per stack layer
  Dense<S> proj;                      // [2H] -> h_k
  int hidden = 0;

  struct InstanceCache {
    std::vector<typename LstmCell<S>::Cache> fwd_c, bwd_c;
  };
  struct Cache {
    std::vector<InstanceCache> inst;
    typename Dense<S>::Cache projc;
  };

  void init(int feat_dim, int out_dim, int layers, int hidden_dim, Activation act,
            RandomSource& rng) {
    hidden = hidden_dim;
    fwd.resize(layers);
    bwd.resize(layers);
    for (int l = 0; l < layers; ++l) {
      const int in_dim = l == 0 ? feat_dim : 2 * hidden;
      fwd[l].init(hidden, in_dim, rng);
      bwd[l].init(hidden, in_dim, rng);
    }
    proj.init(out_dim, 2 * hidden, act, rng);
  }

  void zero_grad() {
    for (auto& c : fwd) c.zero_grad();
    for (auto& c : bwd) c.zero_grad();
    proj.zero_grad();
  }

  // Consumes rows [0, valid_len) of each instance; padded rows never enter
  // the recurrence. Summary = [final forward state ; final backward state].
  Mat<S> forward(const Batch& batch, Modality modality, Cache* cache) {
    const int B = batch.size();
    const int H = hidden;
    Cache local;
    Cache& c = cache ? *cache : local;
    c.inst.assign(B, InstanceCache{});
    Mat<S> summaries(2 * H, B);
    for (int i = 0; i < B; ++i) {
      const FeatureSequence& seq = batch.instances[i]->feature(modality);
      if (seq.values().cols() != fwd[0].W_ih.cols()) {
        throw ShapeError(std::string("encoder(") + to_string(modality) + "): feature dim " +
                         std::to_string(seq.values().cols()) + ", expected " +
                         std::to_string(fwd[0].W_ih.cols()));
      }
      const int T = seq.valid_len();
      if (T < 1) {
        throw ValidationError("instance '" + batch.id(i) + "': " + to_string(modality) +
                              " valid_len is 0");
      }
      InstanceCache& ic = c.inst[i];
      ic.fwd_c.resize(fwd.size());
      ic.bwd_c.resize(bwd.size());
      Mat<S> x = seq.values().topRows(T).transpose().template cast<S>();
      for (std::size_t l = 0; l < fwd.size(); ++l) {
        const Mat<S> hf = fwd[l].forward(x, &ic.fwd_c[l]);
        const Mat<S> hb_rev = bwd[l].forward(x.rowwise().reverse(), &ic.bwd_c[l]);
        x.resize(2 * H, T);
        x.topRows(H) = hf;
        x.bottomRows(H) = hb_rev.rowwise().reverse();
      }
      summaries.col(i).head(H) = ic.fwd_c.back().h.col(T - 1);
      summaries.col(i).tail(H) = ic.bwd_c.back().h.col(T - 1);
    }
    return proj.forward(summaries, &c.projc);
  }

  void backward(const Cache& cache, const Mat<S>& dF) {
    const Mat<S> dsum = proj.backward(cache.projc, dF);  // [2H x B]
    const int H = hidden;
    for (std::size_t i = 0; i < cache.inst.size(); ++i) {
      const InstanceCache& ic = cache.inst[i];
      const auto T = ic.fwd_c.back().h.cols();
      Mat<S> dh_fwd = Mat<S>::Zero(H, T);
      Mat<S> dh_bwd_rev = Mat<S>::Zero(H, T);
      dh_fwd.col(T - 1) = dsum.col(i).head(H);
      dh_bwd_rev.col(T - 1) = dsum.col(i).tail(H);
      for (std::size_t l = fwd.size(); l-- > 0;) {
        const bool need_dx = l > 0;
        Mat<S> dx_f, dx_b;
        fwd[l].backward(ic.fwd_c[l], dh_fwd, need_dx ? &dx_f : nullptr);
        bwd[l].backward(ic.bwd_c[l], dh_bwd_rev, need_dx ? &dx_b : nullptr);
        if (need_dx) {
          const Mat<S> dx = dx_f + dx_b.rowwise().reverse();
          dh_fwd = dx.topRows(H);
          dh_bwd_rev = dx.bottomRows(H).rowwise().reverse();
        }
      }
    }
  }

  void visit(const std::string& prefix, std::vector<ParamView<S>>& out) {
    for (std::size_t l = 0; l < fwd.size(); ++l) {
      fwd[l].visit(prefix + ".lstm" + std::to_string(l) + ".fwd", out);
      bwd[l].visit(prefix + ".lstm" + std::to_string(l) + ".bwd", out);
    }
    proj.visit(prefix + ".proj", out);
  }
};

// ---------------------------------------------------------------------------
// Full model: three encoders, concatenation fusion, four task heads
// ---------------------------------------------------------------------------

template <typename S>
struct Model {
  PerFeature<FeatureSpec> specs;
  ModelConfig cfg;
  Dense<S> text_enc;               // reads the sentence-level row 0
  SeqEncoder<S> acoustic_enc, visual_enc;
  std::array<Head<S>, 4> heads;    // task order m, t, a, v

  struct Cache {
    typename Dense<S>::Cache textc;
    typename SeqEncoder<S>::Cache ac, vc;
    std::array<typename Head<S>::Cache, 4> headc;
  };

  struct Forward {
    Mat<S> F_t, F_a, F_v, F_m;      // [h x B]
    std::array<Vec<S>, 4> yhat;     // per task, length B
    Cache cache;
  };

  static Model init(const PerFeature<FeatureSpec>& specs, const ModelConfig& cfg,
                    RandomSource& rng) {
    cfg.validate();
    for (Modality m : kFeatureModalities) specs.at(m).validate();
    Model model;
    model.specs = specs;
    model.cfg = cfg;
    model.text_enc.init(cfg.hidden.text, specs.text.feat_dim, cfg.activation, rng);
    model.acoustic_enc.init(specs.acoustic.feat_dim, cfg.hidden.acoustic, cfg.lstm_layers,
                            cfg.lstm_hidden_for(Modality::acoustic), cfg.activation, rng);
    model.visual_enc.init(specs.visual.feat_dim, cfg.hidden.visual, cfg.lstm_layers,
                          cfg.lstm_hidden_for(Modality::visual), cfg.activation, rng);
    model.heads[0].init(cfg.fused_dim(), cfg, rng);
    model.heads[1].init(cfg.hidden.text, cfg, rng);
    model.heads[2].init(cfg.hidden.acoustic, cfg, rng);
    model.heads[3].init(cfg.hidden.visual, cfg, rng);
    return model;
  }

  Head<S>& head(Modality task) { return heads[static_cast<std::size_t>(task_index(task))]; }

  void zero_grad() {
    text_enc.zero_grad();
    acoustic_enc.zero_grad();
    visual_enc.zero_grad();
    for (auto& h : heads) h.zero_grad();
  }

  Forward forward(const Batch& batch, bool training, RandomSource* dropout_rng = nullptr) {
    const int B = batch.size();
    if (B < 1) throw ValidationError("Model::forward: empty batch");
    Forward fr;

    Mat<S> x0(specs.text.feat_dim, B);
    for (int i = 0; i < B; ++i) {
      const FeatureMatrix& tv = batch.feature(Modality::text, i);
      if (tv.cols() != specs.text.feat_dim) {
        throw ShapeError("encoder(text): feature dim " + std::to_string(tv.cols()) +
                         ", expected " + std::to_string(specs.text.feat_dim));
      }
      x0.col(i) = tv.row(0).transpose().template cast<S>();
    }
    fr.F_t = text_enc.forward(x0, &fr.cache.textc);
    fr.F_a = acoustic_enc.forward(batch, Modality::acoustic, &fr.cache.ac);
    fr.F_v = visual_enc.forward(batch, Modality::visual, &fr.cache.vc);

    fr.F_m.resize(cfg.fused_dim(), B);
    fr.F_m.topRows(cfg.hidden.text) = fr.F_t;
    fr.F_m.middleRows(cfg.hidden.text, cfg.hidden.acoustic) = fr.F_a;
    fr.F_m.bottomRows(cfg.hidden.visual) = fr.F_v;

    fr.yhat[0] = heads[0].forward(fr.F_m, training, dropout_rng, &fr.cache.headc[0]);
    fr.yhat[1] = heads[1].forward(fr.F_t, training, dropout_rng, &fr.cache.headc[1]);
    fr.yhat[2] = heads[2].forward(fr.F_a, training, dropout_rng, &fr.cache.headc[2]);
    fr.yhat[3] = heads[3].forward(fr.F_v, training, dropout_rng, &fr.cache.headc[3]);
    return fr;
  }

  // dyhat: per-task gradients of the objective w.r.t. the predictions.
  // dFa_extra / dFv_extra: additional representation gradients (the mixup
  // path enters here).
  void backward(const Forward& fr, const std::array<Vec<S>, 4>& dyhat,
                const Mat<S>* dFa_extra = nullptr, const Mat<S>* dFv_extra = nullptr) {
    const Mat<S> dF_m = heads[0].backward(fr.cache.headc[0], dyhat[0]);
    Mat<S> dF_t = heads[1].backward(fr.cache.headc[1], dyhat[1]);
    Mat<S> dF_a = heads[2].backward(fr.cache.headc[2], dyhat[2]);
    Mat<S> dF_v = heads[3].backward(fr.cache.headc[3], dyhat[3]);
    dF_t += dF_m.topRows(cfg.hidden.text);
    dF_a += dF_m.middleRows(cfg.hidden.text, cfg.hidden.acoustic);
    dF_v += dF_m.bottomRows(cfg.hidden.visual);
    if (dFa_extra) dF_a += *dFa_extra;
    if (dFv_extra) dF_v += *dFv_extra;
    text_enc.backward(fr.cache.textc, dF_t);
    acoustic_enc.backward(fr.cache.ac, dF_a);
    visual_enc.backward(fr.cache.vc, dF_v);
  }

  // Eval-mode predictions: a pure function of (inputs, parameters).
  std::vector<PredictionSet> predict(const Batch& batch) {
    Forward fr = forward(batch, /*training=*/false);
    std::vector<PredictionSet> out(batch.size());
    for (int i = 0; i < batch.size(); ++i) {
      out[i] = PredictionSet{static_cast<double>(fr.yhat[0][i]), static_cast<double>(fr.yhat[1][i]),
                             static_cast<double>(fr.yhat[2][i]), static_cast<double>(fr.yhat[3][i])};
    }
    return out;
  }

  // Canonical tensor enumeration; order is stable and defines the optimizer
  // state layout and the checkpoint tensor list.
  std::vector<ParamView<S>> params() {
    std::vector<ParamView<S>> out;
    text_enc.visit("enc.text", out);
    acoustic_enc.visit("enc.acoustic", out);
    visual_enc.visit("enc.visual", out);
    const char* names[4] = {"head.m", "head.t", "head.a", "head.v"};
    for (int k = 0; k < 4; ++k) heads[static_cast<std::size_t>(k)].visit(names[k], out);
    return out;
  }
};

}  // namespace avmc
