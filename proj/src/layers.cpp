// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "stutterkit/layers.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "stutterkit/errors.hpp"

namespace sk::nn {

namespace {

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

Matrix orthogonal(Index n, Rng& rng) {
  Eigen::MatrixXd g(n, n);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix so the draw is uniform over the orthogonal group.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

// Vectorized through Eigen's packet exp; tanh(x) = 2 sigmoid(2x) - 1.
template <typename Block>
void sigmoid_inplace(Block&& b) {
  b = (1.0 + (-b.array()).exp()).inverse().matrix();
}

template <typename Block>
void tanh_inplace(Block&& b) {
  b = (2.0 * (1.0 + (-2.0 * b.array()).exp()).inverse() - 1.0).matrix();
}

}  // namespace

std::vector<Index> SeqBatch::offsets() const {
  std::vector<Index> off(lengths.size());
  Index acc = 0;
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    off[b] = acc;
    acc += lengths[b];
  }
  return off;
}

Index SeqBatch::max_length() const {
  Index m = 0;
  for (Index l : lengths) m = std::max(m, l);
  return m;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(Index in, Index out) {
  weight.resize(out, in);
  bias.resize(1, out);
}

void Linear::init(Rng& rng) {
  fill_uniform(weight.value, 1.0 / std::sqrt(static_cast<double>(in_dim())), rng);
  bias.value.setZero();
}

Matrix Linear::forward(const Matrix& x) {
  input_ = x;
  Matrix y(x.rows(), out_dim());
  y.noalias() = x * weight.value.transpose();
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& dy, bool need_input_grad) {
  weight.grad.noalias() += dy.transpose() * input_;
  bias.grad.row(0) += dy.colwise().sum();
  if (!need_input_grad) return {};
  Matrix dx(dy.rows(), in_dim());
  dx.noalias() = dy * weight.value;
  return dx;
}

void Linear::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

// ---------------------------------------------------------------- TDNN

TdnnLayer::TdnnLayer(Index in, Index out, std::vector<int> offsets) : in_(in), offsets_(std::move(offsets)) {
  if (offsets_.empty()) throw ConfigError("tdnn layer needs at least one tap");
  std::sort(offsets_.begin(), offsets_.end());
  if (std::adjacent_find(offsets_.begin(), offsets_.end()) != offsets_.end()) {
    throw ConfigError("tdnn layer taps must be distinct");
  }
  weight.resize(out, in * static_cast<Index>(offsets_.size()));
  bias.resize(1, out);
}

void TdnnLayer::init(Rng& rng) {
  fill_uniform(weight.value, 1.0 / std::sqrt(static_cast<double>(weight.value.cols())), rng);
  bias.value.setZero();
}

SeqBatch TdnnLayer::forward(const SeqBatch& x) {
  if (x.data.cols() != in_) throw ContractViolation("tdnn: input width mismatch");
  const int sp = span();
  const Index taps = static_cast<Index>(offsets_.size());
  in_lengths_ = x.lengths;
  in_rows_ = x.data.rows();

  SeqBatch y;
  y.lengths.reserve(x.lengths.size());
  Index total = 0;
  for (Index len : x.lengths) {
    if (len - sp < 1) {
      throw TooShortError("tdnn: sequence of " + std::to_string(len) + " frames is shorter than the " +
                          std::to_string(sp + 1) + "-frame layer context");
    }
    y.lengths.push_back(len - sp);
    total += len - sp;
  }

  unfolded_.resize(total, in_ * taps);
  const auto in_off = x.offsets();
  const auto out_off = y.offsets();
  for (std::size_t b = 0; b < x.lengths.size(); ++b) {
    const Index n = y.lengths[b];
    for (Index j = 0; j < taps; ++j) {
      const Index shift = offsets_[static_cast<std::size_t>(j)] - offsets_.front();
      unfolded_.block(out_off[b], j * in_, n, in_) = x.data.block(in_off[b] + shift, 0, n, in_);
    }
  }
  y.data.resize(total, out_dim());
  y.data.noalias() = unfolded_ * weight.value.transpose();
  y.data.rowwise() += bias.value.row(0);
  return y;
}

SeqBatch TdnnLayer::backward(const SeqBatch& dy, bool need_input_grad) {
  weight.grad.noalias() += dy.data.transpose() * unfolded_;
  bias.grad.row(0) += dy.data.colwise().sum();
  SeqBatch dx;
  dx.lengths = in_lengths_;
  if (!need_input_grad) return dx;

  Matrix du(dy.data.rows(), weight.value.cols());
  du.noalias() = dy.data * weight.value;
  dx.data = Matrix::Zero(in_rows_, in_);
  const auto in_off = dx.offsets();
  const auto out_off = dy.offsets();
  const Index taps = static_cast<Index>(offsets_.size());
  for (std::size_t b = 0; b < in_lengths_.size(); ++b) {
    const Index n = dy.lengths[b];
    for (Index j = 0; j < taps; ++j) {
      const Index shift = offsets_[static_cast<std::size_t>(j)] - offsets_.front();
      dx.data.block(in_off[b] + shift, 0, n, in_) += du.block(out_off[b], j * in_, n, in_);
    }
  }
  return dx;
}

void TdnnLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(Index features, double momentum, double eps) : momentum_(momentum), eps_(eps) {
  gamma.resize(1, features);
  beta.resize(1, features);
  init();
}

void BatchNorm::init() {
  gamma.value.setOnes();
  beta.value.setZero();
  running_mean = Matrix::Zero(1, gamma.value.cols());
  running_var = Matrix::Ones(1, gamma.value.cols());
}

Matrix BatchNorm::forward(const Matrix& x, Phase phase) {
  phase_ = phase;
  const Index n = x.rows();
  Eigen::RowVectorXd mean, var;
  if (phase == Phase::Train) {
    mean = x.colwise().mean();
    var = (x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n);
    const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
    running_mean = (1.0 - momentum_) * running_mean + momentum_ * Matrix(mean);
    running_var = (1.0 - momentum_) * running_var + momentum_ * Matrix(var * unbias);
  } else {
    mean = running_mean.row(0);
    var = running_var.row(0);
  }
  inv_std_ = (var.array() + eps_).rsqrt().matrix();
  xhat_ = (x.rowwise() - mean).array().rowwise() * inv_std_.array();
  Matrix y = xhat_.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  return y;
}

Matrix BatchNorm::backward(const Matrix& dy) {
  gamma.grad.row(0) += (dy.array() * xhat_.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  const Eigen::RowVectorXd g = gamma.value.row(0);
  Matrix dxhat = dy.array().rowwise() * g.array();
  if (phase_ == Phase::Eval) {
    return dxhat.array().rowwise() * inv_std_.array();
  }
  const double n = static_cast<double>(dy.rows());
  const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
  const Eigen::RowVectorXd sum_dxhat_xhat = (dxhat.array() * xhat_.array()).colwise().sum();
  Matrix dx = (n * dxhat.array()).matrix();
  dx.rowwise() -= sum_dxhat;
  dx -= (xhat_.array().rowwise() * sum_dxhat_xhat.array()).matrix();
  dx = dx.array().rowwise() * (inv_std_.array() / n);
  return dx;
}

void BatchNorm::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".gamma", &gamma});
  out.push_back({prefix + ".beta", &beta});
}

void BatchNorm::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
  out.push_back({prefix + ".running_mean", &running_mean});
  out.push_back({prefix + ".running_var", &running_var});
}

// ---------------------------------------------------------------- ReLU / Dropout

Matrix Relu::forward(const Matrix& x) {
  mask_ = (x.array() > 0.0).cast<double>();
  return x.cwiseMax(0.0);
}

Matrix Relu::backward(const Matrix& dy) const { return dy.cwiseProduct(mask_); }

Matrix Dropout::forward(const Matrix& x, Phase phase, std::uint64_t seed) {
  active_ = phase == Phase::Train && p_ > 0.0;
  if (!active_) return x;
  Rng rng(seed);
  const double keep = 1.0 - p_;
  mask_.resize(x.rows(), x.cols());
  for (Index i = 0; i < mask_.size(); ++i) mask_.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return x.cwiseProduct(mask_);
}

Matrix Dropout::backward(const Matrix& dy) const { return active_ ? Matrix(dy.cwiseProduct(mask_)) : dy; }

// ---------------------------------------------------------------- LSTM

LstmDirection::LstmDirection(Index in, Index hidden, bool reverse) : hidden_(hidden), reverse_(reverse) {
  w_ih.resize(4 * hidden, in);
  w_hh.resize(4 * hidden, hidden);
  bias.resize(1, 4 * hidden);
}

void LstmDirection::init(Rng& rng) {
  fill_uniform(w_ih.value, 1.0 / std::sqrt(static_cast<double>(w_ih.value.cols())), rng);
  for (Index g = 0; g < 4; ++g) w_hh.value.block(g * hidden_, 0, hidden_, hidden_) = orthogonal(hidden_, rng);
  bias.value.setZero();
  bias.value.block(0, hidden_, 1, hidden_).setOnes();
}

// Sequences are processed in step-major order: row s * B + b holds step s of
// sequence b (time s, or len - 1 - s when reversed). Sequences shorter than
// the longest one are zero-padded at the end of processing; padded steps get
// zero output gradient, so no gradient flows out of them.
void LstmDirection::build_index(const std::vector<Index>& lengths) {
  lengths_ = lengths;
  const auto batch = static_cast<Index>(lengths.size());
  steps_ = 0;
  for (Index l : lengths) steps_ = std::max(steps_, l);
  index_.assign(static_cast<std::size_t>(steps_ * batch), -1);
  Index off = 0;
  for (Index b = 0; b < batch; ++b) {
    const Index len = lengths[static_cast<std::size_t>(b)];
    for (Index s = 0; s < len; ++s) {
      index_[static_cast<std::size_t>(s * batch + b)] = off + (reverse_ ? len - 1 - s : s);
    }
    off += len;
  }
}

Matrix LstmDirection::forward(const SeqBatch& x) {
  const Index H = hidden_;
  const Index B = x.batch();
  build_index(x.lengths);
  const Index rows = steps_ * B;

  input_ = Matrix::Zero(rows, x.data.cols());
  for (Index r = 0; r < rows; ++r) {
    const Index src = index_[static_cast<std::size_t>(r)];
    if (src >= 0) input_.row(r) = x.data.row(src);
  }
  gates_.resize(rows, 4 * H);
  gates_.noalias() = input_ * w_ih.value.transpose();
  gates_.rowwise() += bias.value.row(0);
  cell_.resize(rows, H);
  cell_tanh_.resize(rows, H);
  hidden_out_.resize(rows, H);

  const Eigen::MatrixXd w_hh_t = w_hh.value.transpose();
  for (Index s = 0; s < steps_; ++s) {
    auto g = gates_.middleRows(s * B, B);
    if (s > 0) g.noalias() += hidden_out_.middleRows((s - 1) * B, B) * w_hh_t;
    sigmoid_inplace(g.leftCols(2 * H));
    tanh_inplace(g.middleCols(2 * H, H));
    sigmoid_inplace(g.rightCols(H));
    auto c = cell_.middleRows(s * B, B);
    c = g.leftCols(H).cwiseProduct(g.middleCols(2 * H, H));
    if (s > 0) c += g.middleCols(H, H).cwiseProduct(cell_.middleRows((s - 1) * B, B));
    auto tc = cell_tanh_.middleRows(s * B, B);
    tc = c;
    tanh_inplace(tc);
    hidden_out_.middleRows(s * B, B) = g.rightCols(H).cwiseProduct(tc);
  }

  Matrix out(x.data.rows(), H);
  for (Index r = 0; r < rows; ++r) {
    const Index dst = index_[static_cast<std::size_t>(r)];
    if (dst >= 0) out.row(dst) = hidden_out_.row(r);
  }
  return out;
}

Matrix LstmDirection::backward(const Matrix& dh_out, bool need_input_grad) {
  const Index H = hidden_;
  const auto B = static_cast<Index>(lengths_.size());
  const Index rows = steps_ * B;

  Matrix dgates(rows, 4 * H);
  Matrix dh(B, H), dc = Matrix::Zero(B, H);
  Matrix dh_next = Matrix::Zero(B, H);
  for (Index s = steps_ - 1; s >= 0; --s) {
    for (Index b = 0; b < B; ++b) {
      const Index src = index_[static_cast<std::size_t>(s * B + b)];
      if (src >= 0) {
        dh.row(b) = dh_out.row(src) + dh_next.row(b);
      } else {
        dh.row(b) = dh_next.row(b);
      }
    }
    const auto gate = gates_.middleRows(s * B, B);
    const auto i = gate.leftCols(H).array();
    const auto f = gate.middleCols(H, H).array();
    const auto gg = gate.middleCols(2 * H, H).array();
    const auto o = gate.rightCols(H).array();
    const auto tc = cell_tanh_.middleRows(s * B, B).array();

    dc.array() += dh.array() * o * (1.0 - tc.square());
    auto dg = dgates.middleRows(s * B, B);
    dg.leftCols(H) = (dc.array() * gg * i * (1.0 - i)).matrix();
    if (s > 0) {
      dg.middleCols(H, H) = (dc.array() * cell_.middleRows((s - 1) * B, B).array() * f * (1.0 - f)).matrix();
    } else {
      dg.middleCols(H, H).setZero();
    }
    dg.middleCols(2 * H, H) = (dc.array() * i * (1.0 - gg.square())).matrix();
    dg.rightCols(H) = (dh.array() * tc * o * (1.0 - o)).matrix();

    dh_next.noalias() = dg * w_hh.value;
    dc = (dc.array() * f).matrix();
  }

  w_ih.grad.noalias() += dgates.transpose() * input_;
  if (steps_ > 1) {
    w_hh.grad.noalias() += dgates.bottomRows(rows - B).transpose() * hidden_out_.topRows(rows - B);
  }
  bias.grad.row(0) += dgates.colwise().sum();
  if (!need_input_grad) return {};
  Matrix dxs(rows, input_.cols());
  dxs.noalias() = dgates * w_ih.value;
  Matrix dx(dh_out.rows(), input_.cols());
  for (Index r = 0; r < rows; ++r) {
    const Index dst = index_[static_cast<std::size_t>(r)];
    if (dst >= 0) dx.row(dst) = dxs.row(r);
  }
  return dx;
}

void LstmDirection::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".w_ih", &w_ih});
  out.push_back({prefix + ".w_hh", &w_hh});
  out.push_back({prefix + ".bias", &bias});
}

BiLstmLayer::BiLstmLayer(Index in, Index hidden) : fwd_(in, hidden, false), bwd_(in, hidden, true) {}

void BiLstmLayer::init(Rng& rng, const std::string& prefix) {
  Rng rf = rng.fork(prefix + ".fwd");
  Rng rb = rng.fork(prefix + ".bwd");
  fwd_.init(rf);
  bwd_.init(rb);
}

SeqBatch BiLstmLayer::forward(const SeqBatch& x) {
  SeqBatch y;
  y.lengths = x.lengths;
  const Index H = fwd_.hidden();
  y.data.resize(x.data.rows(), 2 * H);
  y.data.leftCols(H) = fwd_.forward(x);
  y.data.rightCols(H) = bwd_.forward(x);
  return y;
}

SeqBatch BiLstmLayer::backward(const SeqBatch& dy, bool need_input_grad) {
  const Index H = fwd_.hidden();
  SeqBatch dx;
  dx.lengths = dy.lengths;
  Matrix a = fwd_.backward(dy.data.leftCols(H), need_input_grad);
  Matrix b = bwd_.backward(dy.data.rightCols(H), need_input_grad);
  if (need_input_grad) dx.data = a + b;
  return dx;
}

void BiLstmLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  fwd_.collect(prefix + ".fwd", out);
  bwd_.collect(prefix + ".bwd", out);
}

// ---------------------------------------------------------------- StatPool

Matrix StatPool::forward(const SeqBatch& x) {
  const Index d = x.data.cols();
  lengths_ = x.lengths;
  centered_.resize(x.data.rows(), d);
  std_.resize(x.batch(), d);
  Matrix out(x.batch(), 2 * d);
  const auto off = x.offsets();
  for (Index b = 0; b < x.batch(); ++b) {
    const Index len = x.lengths[static_cast<std::size_t>(b)];
    if (len < 2) throw DegenerateInputError("statistics pooling needs at least 2 frames");
    const auto seq = x.data.middleRows(off[static_cast<std::size_t>(b)], len);
    const Eigen::RowVectorXd mean = seq.colwise().mean();
    auto cen = centered_.middleRows(off[static_cast<std::size_t>(b)], len);
    cen = seq.rowwise() - mean;
    const Eigen::RowVectorXd sd = (cen.array().square().colwise().sum() / static_cast<double>(len)).sqrt();
    std_.row(b) = sd;
    out.row(b).head(d) = mean;
    out.row(b).tail(d) = sd;
  }
  return out;
}

SeqBatch StatPool::backward(const Matrix& dy) const {
  const Index d = centered_.cols();
  SeqBatch dx;
  dx.lengths = lengths_;
  dx.data.resize(centered_.rows(), d);
  const auto off = dx.offsets();
  for (std::size_t b = 0; b < lengths_.size(); ++b) {
    const Index len = lengths_[b];
    const double inv_t = 1.0 / static_cast<double>(len);
    const Eigen::RowVectorXd dmean = dy.row(static_cast<Index>(b)).head(d) * inv_t;
    // d std / d x_t = (x_t - mean) / (T * std); zero where std == 0, since
    // every centered value is zero there as well.
    Eigen::RowVectorXd dstd = dy.row(static_cast<Index>(b)).tail(d);
    for (Index j = 0; j < d; ++j) {
      const double s = std_(static_cast<Index>(b), j);
      dstd(j) = s > 0.0 ? dstd(j) * inv_t / s : 0.0;
    }
    auto blk = dx.data.middleRows(off[b], len);
    blk = centered_.middleRows(off[b], len).array().rowwise() * dstd.array();
    blk.rowwise() += dmean;
  }
  return dx;
}

Matrix pool_statistics(const SeqBatch& x) {
  StatPool p;
  return p.forward(x);
}

}  // namespace sk::nn
