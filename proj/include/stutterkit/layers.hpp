// Copyright 2026 The stutterkit Authors
// SPDX-License-Identifier: Apache-2.0

// Building blocks with explicit forward/backward passes. Every layer caches
// what its backward pass needs during forward(); backward() accumulates into
// Parameter::grad and returns the gradient with respect to the layer input.
// Sequences travel as SeqBatch: the frames of every utterance stacked row-wise.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "stutterkit/features.hpp"
#include "stutterkit/rng.hpp"

namespace sk::nn {

using Index = Eigen::Index;
using Matrix = RowMatrix;

struct Parameter {
  Matrix value;
  Matrix grad;

  void resize(Index rows, Index cols) {
    value = Matrix::Zero(rows, cols);
    grad = Matrix::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
  Index size() const { return value.size(); }
};

struct NamedParam {
  std::string name;
  Parameter* param;
};

struct NamedBuffer {
  std::string name;
  Matrix* value;
};

enum class Phase { Train, Eval };

struct SeqBatch {
  Matrix data;
  std::vector<Index> lengths;

  Index batch() const { return static_cast<Index>(lengths.size()); }
  std::vector<Index> offsets() const;
  Index max_length() const;
};

/// y = x W^T + b.
class Linear {
 public:
  Linear() = default;
  Linear(Index in, Index out);

  /// Fan-in scaled uniform weights in +-1/sqrt(in), zero bias.
  void init(Rng& rng);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy, bool need_input_grad = true);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);

  Index in_dim() const { return weight.value.cols(); }
  Index out_dim() const { return weight.value.rows(); }

  Parameter weight;  ///< out x in
  Parameter bias;    ///< 1 x out

 private:
  Matrix input_;
};

/// Temporal linear map over a fixed set of frame offsets without padding:
/// output frame u reads input frames u - min(offset) + offset_j.
class TdnnLayer {
 public:
  TdnnLayer() = default;
  TdnnLayer(Index in, Index out, std::vector<int> offsets);

  void init(Rng& rng);
  SeqBatch forward(const SeqBatch& x);
  SeqBatch backward(const SeqBatch& dy, bool need_input_grad = true);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);

  /// max(offset) - min(offset): frames lost per sequence.
  int span() const { return offsets_.back() - offsets_.front(); }
  const std::vector<int>& offsets() const { return offsets_; }
  Index in_dim() const { return in_; }
  Index out_dim() const { return weight.value.rows(); }

  Parameter weight;  ///< out x (in * taps), tap-major columns
  Parameter bias;    ///< 1 x out

 private:
  Index in_ = 0;
  std::vector<int> offsets_;
  Matrix unfolded_;
  std::vector<Index> in_lengths_;
  Index in_rows_ = 0;
};

/// Normalizes every column over all rows (batch and time together).
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(Index features, double momentum = 0.1, double eps = 1e-5);

  void init();
  /// Train: batch statistics, updates running estimates (unbiased variance).
  /// Eval: running estimates, no state change.
  Matrix forward(const Matrix& x, Phase phase);
  Matrix backward(const Matrix& dy);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out);

  Parameter gamma;  ///< 1 x C
  Parameter beta;   ///< 1 x C
  Matrix running_mean;
  Matrix running_var;

 private:
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  Phase phase_ = Phase::Eval;
  Matrix xhat_;
  Eigen::RowVectorXd inv_std_;
};

class Relu {
 public:
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy) const;

 private:
  Matrix mask_;
};

/// Inverted dropout; the mask is a pure function of the seed.
class Dropout {
 public:
  explicit Dropout(double p = 0.0) : p_(p) {}
  Matrix forward(const Matrix& x, Phase phase, std::uint64_t seed);
  Matrix backward(const Matrix& dy) const;
  double rate() const { return p_; }

 private:
  double p_;
  bool active_ = false;
  Matrix mask_;
};

/// One direction of an LSTM layer. Gate order i, f, g, o; a single bias
/// vector per direction. Reverse direction reads each sequence back to front.
class LstmDirection {
 public:
  LstmDirection() = default;
  LstmDirection(Index in, Index hidden, bool reverse);

  /// W_ih fan-in uniform, W_hh orthogonal per gate block, bias zero except
  /// forget gate = 1.
  void init(Rng& rng);
  Matrix forward(const SeqBatch& x);
  Matrix backward(const Matrix& dh, bool need_input_grad = true);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);

  Index hidden() const { return hidden_; }

  Parameter w_ih;  ///< 4H x in
  Parameter w_hh;  ///< 4H x H
  Parameter bias;  ///< 1 x 4H

 private:
  void build_index(const std::vector<Index>& lengths);

  Index hidden_ = 0;
  bool reverse_ = false;
  std::vector<Index> lengths_;
  Index steps_ = 0;
  std::vector<Index> index_;  // step-major row -> input row, -1 for padding
  Matrix input_;              // step-major copies of the cached activations
  Matrix gates_;              // post-activation i, f, g, o
  Matrix cell_;
  Matrix cell_tanh_;
  Matrix hidden_out_;
};

/// Bidirectional layer; output columns are [forward | backward].
class BiLstmLayer {
 public:
  BiLstmLayer() = default;
  BiLstmLayer(Index in, Index hidden);

  void init(Rng& rng, const std::string& prefix);
  SeqBatch forward(const SeqBatch& x);
  SeqBatch backward(const SeqBatch& dy, bool need_input_grad = true);
  void collect(const std::string& prefix, std::vector<NamedParam>& out);

  Index out_dim() const { return 2 * fwd_.hidden(); }

 private:
  LstmDirection fwd_;
  LstmDirection bwd_;
};

/// [mean | std] over each sequence's frames; population standard deviation.
class StatPool {
 public:
  /// Throws DegenerateInputError for sequences shorter than 2 frames.
  Matrix forward(const SeqBatch& x);
  SeqBatch backward(const Matrix& dy) const;

 private:
  Matrix centered_;
  Matrix std_;
  std::vector<Index> lengths_;
};

Matrix pool_statistics(const SeqBatch& x);

}  // namespace sk::nn
