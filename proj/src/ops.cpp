#include "hrm/ops.hpp"

#include <cmath>
#include <string>

#include "hrm/errors.hpp"

namespace hrm {

namespace {

template <class T>
void require(bool ok, const char* op, const Matrix<T>& a, const Matrix<T>& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + " are incompatible");
  }
}

template <class T>
T sigmoid_scalar(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace

template <class T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  const Matrix<T>& av = tape.value(a);
  const Matrix<T>& bv = tape.value(b);
  require(av.cols() == bv.rows(), "matmul", av, bv);
  Matrix<T> out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  const Var self = tape.next();
  return tape.push(
      std::move(out), {a, b},
      [a, b, self](Tape<T>& t) {
        const Matrix<T>& g = t.grad(self);
        if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
        if (t.requires_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
      },
      "matmul");
}

template <class T>
Var affine(Tape<T>& tape, Var x, Var w, std::optional<Var> bias) {
  Var y = matmul(tape, x, w);
  if (!bias) return y;
  const Var b = *bias;
  const Matrix<T>& yv = tape.value(y);
  const Matrix<T>& bv = tape.value(b);
  require(bv.rows() == 1 && bv.cols() == yv.cols(), "affine bias", yv, bv);
  Matrix<T> out = yv.rowwise() + bv.row(0);
  const Var self = tape.next();
  return tape.push(
      std::move(out), {y, b},
      [y, b, self](Tape<T>& t) {
        const Matrix<T>& g = t.grad(self);
        if (t.requires_grad(y)) t.grad(y) += g;
        if (t.requires_grad(b)) t.grad(b) += g.colwise().sum();
      },
      "affine");
}

template <class T>
Var add(Tape<T>& tape, Var a, Var b) {
  const Matrix<T>& av = tape.value(a);
  const Matrix<T>& bv = tape.value(b);
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "add", av, bv);
  Matrix<T> out = av + bv;
  const Var self = tape.next();
  return tape.push(
      std::move(out), {a, b},
      [a, b, self](Tape<T>& t) {
        const Matrix<T>& g = t.grad(self);
        if (t.requires_grad(a)) t.grad(a) += g;
        if (t.requires_grad(b)) t.grad(b) += g;
      },
      "add");
}

template <class T>
Var scale(Tape<T>& tape, Var a, T factor) {
  Matrix<T> out = tape.value(a) * factor;
  const Var self = tape.next();
  return tape.push(
      std::move(out), {a},
      [a, self, factor](Tape<T>& t) { t.grad(a) += t.grad(self) * factor; }, "scale");
}

template <class T>
Var mul(Tape<T>& tape, Var a, Var b) {
  const Matrix<T>& av = tape.value(a);
  const Matrix<T>& bv = tape.value(b);
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "mul", av, bv);
  Matrix<T> out = av.cwiseProduct(bv);
  const Var self = tape.next();
  return tape.push(
      std::move(out), {a, b},
      [a, b, self](Tape<T>& t) {
        const Matrix<T>& g = t.grad(self);
        if (t.requires_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b));
        if (t.requires_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a));
      },
      "mul");
}

template <class T>
Var sigmoid(Tape<T>& tape, Var a) {
  Matrix<T> out = tape.value(a).unaryExpr([](T x) { return sigmoid_scalar(x); });
  const Var self = tape.next();
  return tape.push(
      std::move(out), {a},
      [a, self](Tape<T>& t) {
        const Matrix<T>& s = t.value(self);
        t.grad(a).array() += t.grad(self).array() * s.array() * (T(1) - s.array());
      },
      "sigmoid");
}

template <class T>
Var rms_norm(Tape<T>& tape, Var x, Var gain, T eps) {
  const Matrix<T>& xv = tape.value(x);
  const Matrix<T>& gv = tape.value(gain);
  require(gv.rows() == 1 && gv.cols() == xv.cols(), "rms_norm", xv, gv);
  const auto cols = static_cast<T>(xv.cols());
  // inv_rms(r) = 1 / sqrt(mean_j x_rj^2 + eps)
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_rms =
      ((xv.array().square().rowwise().sum() / cols) + eps).rsqrt();
  Matrix<T> out = (xv.array().colwise() * inv_rms.array()).matrix();
  out.array().rowwise() *= gv.row(0).array();
  const Var self = tape.next();
  return tape.push(
      std::move(out), {x, gain},
      [x, gain, self, inv_rms, cols](Tape<T>& t) {
        const Matrix<T>& g = t.grad(self);
        const Matrix<T>& xv2 = t.value(x);
        const Matrix<T>& gv2 = t.value(gain);
        if (t.requires_grad(gain)) {
          t.grad(gain) += (g.array() * (xv2.array().colwise() * inv_rms.array())).colwise().sum().matrix();
        }
        if (t.requires_grad(x)) {
          // u = g * gain; dx = r u - r^3 x (u . x) / D
          Matrix<T> u = (g.array().rowwise() * gv2.row(0).array()).matrix();
          Eigen::Matrix<T, Eigen::Dynamic, 1> dot = (u.array() * xv2.array()).rowwise().sum();
          Eigen::Matrix<T, Eigen::Dynamic, 1> r3 = inv_rms.array().cube() * dot.array() / cols;
          t.grad(x).array() += (u.array().colwise() * inv_rms.array()) - (xv2.array().colwise() * r3.array());
        }
      },
      "rms_norm");
}

template <class T>
Var gather_rows(Tape<T>& tape, Var table, std::span<const int> indices) {
  const Matrix<T>& tv = tape.value(table);
  Matrix<T> out(static_cast<Eigen::Index>(indices.size()), tv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= tv.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(idx) + " outside table of " +
                       std::to_string(tv.rows()) + " rows");
    }
    out.row(static_cast<Eigen::Index>(i)) = tv.row(idx);
  }
  const Var self = tape.next();
  std::vector<int> idx(indices.begin(), indices.end());
  return tape.push(
      std::move(out), {table},
      [table, self, idx = std::move(idx)](Tape<T>& t) {
        const Matrix<T>& g = t.grad(self);
        Matrix<T>& gt = t.grad(table);
        for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
      },
      "gather_rows");
}

template <class T>
Var attention(Tape<T>& tape, Var q, Var k, Var v, int heads, int seq_len) {
  const Matrix<T>& qv = tape.value(q);
  const Matrix<T>& kv = tape.value(k);
  const Matrix<T>& vv = tape.value(v);
  require(qv.rows() == kv.rows() && qv.cols() == kv.cols(), "attention q/k", qv, kv);
  require(qv.rows() == vv.rows() && qv.cols() == vv.cols(), "attention q/v", qv, vv);
  const Eigen::Index width = qv.cols();
  if (heads <= 0 || width % heads != 0 || seq_len <= 0 || qv.rows() % seq_len != 0) {
    throw ShapeError("attention: width " + std::to_string(width) + " / heads " +
                     std::to_string(heads) + " / seq_len " + std::to_string(seq_len) +
                     " do not divide the inputs");
  }
  const Eigen::Index hd = width / heads;
  const Eigen::Index L = seq_len;
  const Eigen::Index batch = qv.rows() / L;
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(hd));

  // probs holds one L x L block per (sequence, head), stacked vertically.
  Matrix<T> probs(batch * heads * L, L);
  Matrix<T> out(qv.rows(), width);
  Matrix<T> scores(L, L);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto qb = qv.block(b * L, h * hd, L, hd);
      const auto kb = kv.block(b * L, h * hd, L, hd);
      const auto vb = vv.block(b * L, h * hd, L, hd);
      scores.noalias() = qb * kb.transpose();
      scores *= scale_factor;
      for (Eigen::Index r = 0; r < L; ++r) {
        const T m = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - m).exp().matrix();
        scores.row(r) /= scores.row(r).sum();
      }
      probs.block((b * heads + h) * L, 0, L, L) = scores;
      out.block(b * L, h * hd, L, hd).noalias() = scores * vb;
    }
  }
  const Var self = tape.next();
  return tape.push(
      std::move(out), {q, k, v},
      [q, k, v, self, probs = std::move(probs), batch, heads, L, hd, scale_factor](Tape<T>& t) {
        const Matrix<T>& g = t.grad(self);
        const Matrix<T>& qv2 = t.value(q);
        const Matrix<T>& kv2 = t.value(k);
        const Matrix<T>& vv2 = t.value(v);
        const bool gq = t.requires_grad(q), gk = t.requires_grad(k), gv = t.requires_grad(v);
        Matrix<T> dp(L, L);
        Matrix<T> ds(L, L);
        for (Eigen::Index b = 0; b < batch; ++b) {
          for (Eigen::Index h = 0; h < heads; ++h) {
            const auto p = probs.block((b * heads + h) * L, 0, L, L);
            const auto go = g.block(b * L, h * hd, L, hd);
            if (gv) t.grad(v).block(b * L, h * hd, L, hd).noalias() += p.transpose() * go;
            dp.noalias() = go * vv2.block(b * L, h * hd, L, hd).transpose();
            // softmax backward: ds = p * (dp - rowsum(dp * p))
            const Eigen::Matrix<T, Eigen::Dynamic, 1> rs = (dp.array() * p.array()).rowwise().sum();
            ds = (p.array() * (dp.array().colwise() - rs.array())).matrix() * scale_factor;
            if (gq) t.grad(q).block(b * L, h * hd, L, hd).noalias() += ds * kv2.block(b * L, h * hd, L, hd);
            if (gk) t.grad(k).block(b * L, h * hd, L, hd).noalias() += ds.transpose() * qv2.block(b * L, h * hd, L, hd);
          }
        }
      },
      "attention");
}

template <class T>
Var multi_head_self_attention(Tape<T>& tape, Var x, const AttentionWeights& w, int heads,
                              int seq_len) {
  const Var q = matmul(tape, x, w.wq);
  const Var k = matmul(tape, x, w.wk);
  const Var v = matmul(tape, x, w.wv);
  return matmul(tape, attention(tape, q, k, v, heads, seq_len), w.wo);
}

template <class T>
Var glu_ffn(Tape<T>& tape, Var x, const GluWeights& w) {
  const Var gate = sigmoid(tape, matmul(tape, x, w.gate));
  const Var value = matmul(tape, x, w.value);
  return matmul(tape, mul(tape, gate, value), w.output);
}

template <class T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const int> targets) {
  const Matrix<T>& lv = tape.value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != lv.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(lv.rows()) + " rows");
  }
  const Eigen::Index rows = lv.rows();
  Matrix<T> probs(rows, lv.cols());
  T total = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int tgt = targets[static_cast<std::size_t>(r)];
    if (tgt < 0 || tgt >= lv.cols()) {
      throw ShapeError("softmax_cross_entropy: target " + std::to_string(tgt) +
                       " outside vocabulary of " + std::to_string(lv.cols()));
    }
    const T m = lv.row(r).maxCoeff();
    probs.row(r) = (lv.row(r).array() - m).exp().matrix();
    const T z = probs.row(r).sum();
    probs.row(r) /= z;
    total += std::log(z) + m - lv(r, tgt);
  }
  Matrix<T> out(1, 1);
  out(0, 0) = total / static_cast<T>(rows);
  const Var self = tape.next();
  std::vector<int> tg(targets.begin(), targets.end());
  return tape.push(
      std::move(out), {logits},
      [logits, self, probs = std::move(probs), tg = std::move(tg)](Tape<T>& t) {
        const T g = t.grad(self)(0, 0) / static_cast<T>(probs.rows());
        Matrix<T>& gl = t.grad(logits);
        gl += probs * g;
        for (std::size_t r = 0; r < tg.size(); ++r) gl(static_cast<Eigen::Index>(r), tg[r]) -= g;
      },
      "softmax_cross_entropy");
}

template <class T>
Var mean_pool(Tape<T>& tape, Var x, int seq_len) {
  const Matrix<T>& xv = tape.value(x);
  if (seq_len <= 0 || xv.rows() % seq_len != 0) {
    throw ShapeError("mean_pool: " + std::to_string(xv.rows()) + " rows not divisible by " +
                     std::to_string(seq_len));
  }
  const Eigen::Index batch = xv.rows() / seq_len;
  Matrix<T> out(batch, xv.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    out.row(b) = xv.middleRows(b * seq_len, seq_len).colwise().sum() / static_cast<T>(seq_len);
  }
  const Var self = tape.next();
  return tape.push(
      std::move(out), {x},
      [x, self, batch, seq_len](Tape<T>& t) {
        const Matrix<T>& g = t.grad(self);
        Matrix<T>& gx = t.grad(x);
        for (Eigen::Index b = 0; b < batch; ++b) {
          gx.middleRows(b * seq_len, seq_len).rowwise() += g.row(b) / static_cast<T>(seq_len);
        }
      },
      "mean_pool");
}

template <class T>
Var bce_with_logits(Tape<T>& tape, Var logits, const Matrix<T>& targets) {
  const Matrix<T>& lv = tape.value(logits);
  require(lv.rows() == targets.rows() && lv.cols() == targets.cols(), "bce_with_logits", lv, targets);
  // max(x, 0) - x t + log(1 + exp(-|x|))
  const T total = (lv.array().max(T(0)) - lv.array() * targets.array() +
                   (T(1) + (-lv.array().abs()).exp()).log())
                      .sum();
  Matrix<T> out(1, 1);
  out(0, 0) = total / static_cast<T>(lv.rows());
  const Var self = tape.next();
  return tape.push(
      std::move(out), {logits},
      [logits, self, targets](Tape<T>& t) {
        const Matrix<T>& lv2 = t.value(logits);
        const T g = t.grad(self)(0, 0) / static_cast<T>(lv2.rows());
        Matrix<T> s = lv2.unaryExpr([](T x) { return sigmoid_scalar(x); });
        t.grad(logits) += (s - targets) * g;
      },
      "bce_with_logits");
}

template <class T>
Var sum_all(Tape<T>& tape, Var a) {
  Matrix<T> out(1, 1);
  out(0, 0) = tape.value(a).sum();
  const Var self = tape.next();
  return tape.push(
      std::move(out), {a},
      [a, self](Tape<T>& t) { t.grad(a).array() += t.grad(self)(0, 0); }, "sum_all");
}

#define HRM_INSTANTIATE_OPS(T)                                                              \
  template Var matmul<T>(Tape<T>&, Var, Var);                                               \
  template Var affine<T>(Tape<T>&, Var, Var, std::optional<Var>);                           \
  template Var add<T>(Tape<T>&, Var, Var);                                                  \
  template Var scale<T>(Tape<T>&, Var, T);                                                  \
  template Var mul<T>(Tape<T>&, Var, Var);                                                  \
  template Var sigmoid<T>(Tape<T>&, Var);                                                   \
  template Var rms_norm<T>(Tape<T>&, Var, Var, T);                                          \
  template Var gather_rows<T>(Tape<T>&, Var, std::span<const int>);                         \
  template Var attention<T>(Tape<T>&, Var, Var, Var, int, int);                             \
  template Var multi_head_self_attention<T>(Tape<T>&, Var, const AttentionWeights&, int, int); \
  template Var glu_ffn<T>(Tape<T>&, Var, const GluWeights&);                                \
  template Var softmax_cross_entropy<T>(Tape<T>&, Var, std::span<const int>);               \
  template Var mean_pool<T>(Tape<T>&, Var, int);                                            \
  template Var bce_with_logits<T>(Tape<T>&, Var, const Matrix<T>&);                         \
  template Var sum_all<T>(Tape<T>&, Var);

HRM_INSTANTIATE_OPS(float)
HRM_INSTANTIATE_OPS(double)

#undef HRM_INSTANTIATE_OPS

}  // namespace hrm
