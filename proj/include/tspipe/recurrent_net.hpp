#pragma once

#include "tspipe/dataset.hpp"
#include "tspipe/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tspipe {

enum class CellType { Linear, Rnn, Gru };

/// One mini-batch laid out step-major: inputs[t] is [batch x input_dim],
/// targets[t] and weights[t] are [batch x outputs]. A weight of 0 removes
/// the cell from the loss.
template <typename Scalar>
struct SequenceBatch {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Mat> inputs;
  std::vector<Mat> targets;
  std::vector<Mat> weights;
  /// Optional per-layer initial hidden state, [batch x hidden] each.
  std::vector<Mat> initial;

  Index steps() const { return static_cast<Index>(inputs.size()); }
  Index rows() const { return inputs.empty() ? 0 : inputs.front().rows(); }
};

/// Stacked recurrent network with a linear read-out at every step.
///
/// Rnn:  h = tanh(x W + b + h' U)
/// Gru:  z = sigma(x Wz + bz + h' Uz), r = sigma(x Wr + br + h' Ur),
///       n = tanh(x Wn + bn + r * (h' Un)), h = (1 - z) * n + z * h'
/// Linear has no recurrent layers: the read-out acts on x directly.
///
/// Parameters are stored per layer as W [in x G*h], U [h x G*h], b [1 x G*h]
/// with gate blocks ordered (z, r, n), then the head Wo [h x out], bo [1 x out].
template <typename Scalar>
class BasicRecurrentNet {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  BasicRecurrentNet() = default;

  BasicRecurrentNet(CellType cell, Index input_dim, Index hidden, Index layers, Index outputs, std::uint64_t seed)
      : cell_(cell), input_dim_(input_dim), hidden_(hidden), layers_(cell == CellType::Linear ? 0 : layers),
        outputs_(outputs) {
    if (input_dim < 1 || outputs < 1) throw ParameterError("network needs positive input and output sizes");
    if (cell != CellType::Linear && (hidden < 1 || layers < 1)) {
      throw ParameterError("recurrent network needs h_dim >= 1 and n_layer >= 1");
    }
    std::mt19937_64 rng(seed);
    const auto uniform = [&rng](Index r, Index c, double fan_in) {
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
      Mat m(r, c);
      for (Index j = 0; j < c; ++j) {
        for (Index i = 0; i < r; ++i) m(i, j) = static_cast<Scalar>(u(rng));
      }
      return m;
    };
    const Index g = gates() * hidden_;
    for (Index l = 0; l < layers_; ++l) {
      const Index in = l == 0 ? input_dim_ : hidden_;
      params_.push_back(uniform(in, g, static_cast<double>(in)));
      params_.push_back(uniform(hidden_, g, static_cast<double>(hidden_)));
      params_.push_back(uniform(1, g, static_cast<double>(in)));
    }
    const Index top = layers_ == 0 ? input_dim_ : hidden_;
    params_.push_back(uniform(top, outputs_, static_cast<double>(top)));
    params_.push_back(uniform(1, outputs_, static_cast<double>(top)));
  }

  CellType cell() const { return cell_; }
  Index input_dim() const { return input_dim_; }
  Index hidden() const { return hidden_; }
  Index layers() const { return layers_; }
  Index outputs() const { return outputs_; }
  Index gates() const { return cell_ == CellType::Gru ? 3 : 1; }

  std::vector<Mat>& parameters() { return params_; }
  const std::vector<Mat>& parameters() const { return params_; }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (Index l = 0; l < layers_; ++l) {
      const auto s = std::to_string(l);
      names.insert(names.end(), {"W" + s, "U" + s, "b" + s});
    }
    names.insert(names.end(), {"Wo", "bo"});
    return names;
  }

  /// Zero-filled matrices shaped like the parameters.
  std::vector<Mat> zeros_like() const {
    std::vector<Mat> out;
    for (const auto& p : params_) out.push_back(Mat::Zero(p.rows(), p.cols()));
    return out;
  }

  /// Activations kept for back-propagation.
  struct Trace {
    std::vector<Mat> inputs;                    // [t]
    std::vector<std::vector<Mat>> layer_input;  // [t][l]
    std::vector<std::vector<Mat>> prev;         // [t][l] h_{t-1}
    std::vector<std::vector<Mat>> z, r, n, hu;  // [t][l] gates; hu = h' Un
    std::vector<std::vector<Mat>> h;            // [t][l]
    std::vector<Mat> logits;                    // [t]
  };

  /// Runs all steps. `initial` optionally seeds each layer's hidden state
  /// ([batch x hidden] per layer).
  Trace forward(const std::vector<Mat>& inputs, const std::vector<Mat>* initial = nullptr) const {
    Trace tr;
    tr.inputs = inputs;
    const auto steps = inputs.size();
    const Index rows = steps ? inputs.front().rows() : 0;
    std::vector<Mat> state(static_cast<std::size_t>(layers_));
    for (Index l = 0; l < layers_; ++l) {
      state[static_cast<std::size_t>(l)] =
          initial ? (*initial)[static_cast<std::size_t>(l)] : Mat::Zero(rows, hidden_);
    }
    const auto resize = [&](std::vector<std::vector<Mat>>& v) {
      v.assign(steps, std::vector<Mat>(static_cast<std::size_t>(layers_)));
    };
    resize(tr.layer_input);
    resize(tr.prev);
    resize(tr.h);
    if (cell_ == CellType::Gru) {
      resize(tr.z);
      resize(tr.r);
      resize(tr.n);
      resize(tr.hu);
    }
    const Index hd = hidden_;
    for (std::size_t t = 0; t < steps; ++t) {
      Mat x = inputs[t];
      for (Index l = 0; l < layers_; ++l) {
        const auto sl = static_cast<std::size_t>(l);
        const Mat& w = params_[3 * sl];
        const Mat& u = params_[3 * sl + 1];
        const Mat& b = params_[3 * sl + 2];
        tr.layer_input[t][sl] = x;
        tr.prev[t][sl] = state[sl];
        const Mat& hp = state[sl];
        Mat a = x * w;
        a.rowwise() += b.row(0);
        const Mat bu = hp * u;
        Mat h;
        if (cell_ == CellType::Rnn) {
          h = (a + bu).array().tanh().matrix();
        } else {
          const Mat z = sigmoid(a.leftCols(hd) + bu.leftCols(hd));
          const Mat r = sigmoid(a.middleCols(hd, hd) + bu.middleCols(hd, hd));
          const Mat hu = bu.rightCols(hd);
          const Mat n = (a.rightCols(hd).array() + r.array() * hu.array()).tanh().matrix();
          h = ((Scalar(1) - z.array()) * n.array() + z.array() * hp.array()).matrix();
          tr.z[t][sl] = z;
          tr.r[t][sl] = r;
          tr.n[t][sl] = n;
          tr.hu[t][sl] = hu;
        }
        tr.h[t][sl] = h;
        state[sl] = h;
        x = std::move(h);
      }
      Mat o = x * params_[params_.size() - 2];
      o.rowwise() += params_.back().row(0);
      tr.logits.push_back(std::move(o));
    }
    return tr;
  }

  /// Accumulates parameter gradients given d(loss)/d(logits) per step.
  void backward(const Trace& tr, const std::vector<Mat>& dlogits, std::vector<Mat>& grads) const {
    const auto steps = tr.logits.size();
    if (steps == 0) return;
    const Index rows = tr.logits.front().rows();
    const Index hd = hidden_;
    const Mat& wo = params_[params_.size() - 2];
    Mat& gwo = grads[grads.size() - 2];
    Mat& gbo = grads.back();
    std::vector<Mat> carry(static_cast<std::size_t>(layers_), Mat::Zero(rows, hd));
    for (std::size_t ti = steps; ti-- > 0;) {
      const Mat& dl = dlogits[ti];
      const Mat& top = layers_ == 0 ? tr.inputs[ti] : tr.h[ti].back();
      gwo.noalias() += top.transpose() * dl;
      gbo += dl.colwise().sum();
      if (layers_ == 0) continue;
      Mat dh = dl * wo.transpose();
      for (Index l = layers_ - 1; l >= 0; --l) {
        const auto sl = static_cast<std::size_t>(l);
        dh += carry[sl];
        const Mat& x = tr.layer_input[ti][sl];
        const Mat& hp = tr.prev[ti][sl];
        const Mat& w = params_[3 * sl];
        const Mat& u = params_[3 * sl + 1];
        Mat da, db;
        if (cell_ == CellType::Rnn) {
          const Mat& h = tr.h[ti][sl];
          da = (dh.array() * (Scalar(1) - h.array().square())).matrix();
          db = da;
        } else {
          const auto& z = tr.z[ti][sl].array();
          const auto& r = tr.r[ti][sl].array();
          const auto& n = tr.n[ti][sl].array();
          const auto& hu = tr.hu[ti][sl].array();
          const auto g = dh.array();
          const auto dz = g * (hp.array() - n);
          const auto dn = g * (Scalar(1) - z);
          const Mat dan = (dn * (Scalar(1) - n.square())).matrix();
          const auto dr = dan.array() * hu;
          da.resize(rows, 3 * hd);
          da.leftCols(hd) = (dz * z * (Scalar(1) - z)).matrix();
          da.middleCols(hd, hd) = (dr * r * (Scalar(1) - r)).matrix();
          da.rightCols(hd) = dan;
          db = da;
          db.rightCols(hd) = (dan.array() * r).matrix();
        }
        grads[3 * sl].noalias() += x.transpose() * da;
        grads[3 * sl + 1].noalias() += hp.transpose() * db;
        grads[3 * sl + 2] += da.colwise().sum();
        Mat dprev = db * u.transpose();
        if (cell_ == CellType::Gru) dprev.array() += dh.array() * tr.z[ti][sl].array();
        carry[sl] = std::move(dprev);
        if (l > 0) dh = da * w.transpose();
      }
    }
  }

  static Mat sigmoid(const Mat& m) { return (Scalar(1) / (Scalar(1) + (-m.array()).exp())).matrix(); }

 private:
  CellType cell_ = CellType::Linear;
  Index input_dim_ = 0;
  Index hidden_ = 0;
  Index layers_ = 0;
  Index outputs_ = 0;
  std::vector<Mat> params_;
};

using RecurrentNet = BasicRecurrentNet<double>;

/// Masked mean loss over a batch (sum of weighted cell losses divided by the
/// total weight). Classification uses sigmoid + binary cross-entropy on the
/// logits, regression squared error. `ridge` adds ridge * |Wo|^2 when the
/// network is linear. When `grads` is given, gradients are accumulated into it.
template <typename Scalar>
Scalar masked_loss(const BasicRecurrentNet<Scalar>& net, const SequenceBatch<Scalar>& batch, Task task, Scalar ridge,
                   std::vector<typename BasicRecurrentNet<Scalar>::Mat>* grads) {
  using Mat = typename BasicRecurrentNet<Scalar>::Mat;
  const auto tr = net.forward(batch.inputs, batch.initial.empty() ? nullptr : &batch.initial);
  Scalar total_weight = 0;
  for (const auto& w : batch.weights) total_weight += w.sum();
  Scalar loss = 0;
  std::vector<Mat> dlogits;
  for (std::size_t t = 0; t < tr.logits.size(); ++t) {
    const auto o = tr.logits[t].array();
    const auto y = batch.targets[t].array();
    const auto w = batch.weights[t].array();
    Mat d;
    if (task == Task::Classification) {
      const auto cell = o.max(Scalar(0)) - o * y + (Scalar(1) + (-o.abs()).exp()).log();
      loss += (w * cell).sum();
      d = (w * ((Scalar(1) / (Scalar(1) + (-o).exp())) - y)).matrix();
    } else {
      const auto diff = o - y;
      loss += (w * diff.square()).sum();
      d = (Scalar(2) * w * diff).matrix();
    }
    if (total_weight > 0) d /= total_weight;
    dlogits.push_back(std::move(d));
  }
  if (total_weight > 0) loss /= total_weight;
  const bool penalize = net.cell() == CellType::Linear && ridge > 0;
  if (penalize) loss += ridge * net.parameters()[net.parameters().size() - 2].squaredNorm();
  if (grads != nullptr) {
    net.backward(tr, dlogits, *grads);
    if (penalize) (*grads)[grads->size() - 2] += Scalar(2) * ridge * net.parameters()[net.parameters().size() - 2];
  }
  return loss;
}

/// First/second-moment adaptive gradient steps (beta1 0.9, beta2 0.999, eps 1e-8).
template <typename Scalar>
class AdamOptimizer {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  AdamOptimizer(const std::vector<Mat>& shapes, Scalar learning_rate) : lr_(learning_rate) {
    for (const auto& p : shapes) {
      m_.push_back(Mat::Zero(p.rows(), p.cols()));
      v_.push_back(Mat::Zero(p.rows(), p.cols()));
    }
  }

  void step(std::vector<Mat>& params, const std::vector<Mat>& grads) {
    ++t_;
    const Scalar c1 = Scalar(1) - std::pow(kBeta1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(kBeta2, static_cast<Scalar>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = kBeta1 * m_[k] + (Scalar(1) - kBeta1) * grads[k];
      v_[k] = kBeta2 * v_[k] + (Scalar(1) - kBeta2) * grads[k].cwiseProduct(grads[k]);
      params[k].array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr Scalar kBeta1 = Scalar(0.9);
  static constexpr Scalar kBeta2 = Scalar(0.999);
  static constexpr Scalar kEps = Scalar(1e-8);
  Scalar lr_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

}  // namespace tspipe
