#pragma once

#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "dagnn/params.hpp"
#include "dagnn/tensor.hpp"

namespace dagnn::num {

// Reverse-mode differentiation over a small fixed op set (define-by-run).
// The architectures in scope compose from these primitives only, so every
// backward rule below is covered directly by the finite-difference suite.
//
// Matrices are row-per-item: node states are [n_nodes x d], a dense layer is
// x * W with W laid out [in x out].
template <typename T>
class Tape {
 public:
  explicit Tape(ParamStore<T>* store = nullptr) : store_(store) {}

  // --- leaves ---

  int constant(Mat<T> v) {
    require_finite(v, "Tape::constant");
    return push(Node{Op::kLeaf, -1, -1, {}, std::move(v)});
  }

  int param(const std::string& name) {
    require(store_ != nullptr, "Tape::param: no ParamStore bound");
    Node n{Op::kLeaf, -1, -1, {}, store_->value(name)};
    n.param_name = name;
    return push(std::move(n));
  }

  // --- primitives ---

  int matmul(int a, int b) {
    const Mat<T>&A = val(a), &B = val(b);
    require(A.cols() == B.rows(), shape_msg("matmul", A, B));
    return push(Node{Op::kMatMul, a, b, {}, A * B});
  }

  int add(int a, int b) {
    const Mat<T>&A = val(a), &B = val(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(),
            shape_msg("add", A, B));
    return push(Node{Op::kAdd, a, b, {}, A + B});
  }

  // X [n x d] + row vector b [1 x d], broadcast over rows
  int add_rowvec(int x, int b) {
    const Mat<T>&X = val(x), &B = val(b);
    require(B.rows() == 1 && B.cols() == X.cols(),
            shape_msg("add_rowvec", X, B));
    Mat<T> out = X;
    out.rowwise() += B.row(0);
    return push(Node{Op::kAddRow, x, b, {}, std::move(out)});
  }

  int concat_cols(const std::vector<int>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    Index rows = val(parts[0]).rows(), cols = 0;
    for (int p : parts) {
      require(val(p).rows() == rows, "concat_cols: row count mismatch");
      cols += val(p).cols();
    }
    Mat<T> out(rows, cols);
    Index at = 0;
    for (int p : parts) {
      out.middleCols(at, val(p).cols()) = val(p);
      at += val(p).cols();
    }
    Node n{Op::kConcat, -1, -1, parts, std::move(out)};
    return push(std::move(n));
  }

  int sigmoid(int x) {
    Mat<T> out = val(x).unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });
    return push(Node{Op::kSigmoid, x, -1, {}, std::move(out)});
  }

  int tanh(int x) {
    Mat<T> out = val(x).array().tanh().matrix();
    return push(Node{Op::kTanh, x, -1, {}, std::move(out)});
  }

  int cos(int x) {
    Mat<T> out = val(x).array().cos().matrix();
    return push(Node{Op::kCos, x, -1, {}, std::move(out)});
  }

  int hadamard(int a, int b) {
    const Mat<T>&A = val(a), &B = val(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(),
            shape_msg("hadamard", A, B));
    return push(Node{Op::kHadamard, a, b, {}, A.cwiseProduct(B)});
  }

  // [n x d] -> [1 x d]
  int sum_rows(int x) {
    Mat<T> out = val(x).colwise().sum();
    return push(Node{Op::kSumRows, x, -1, {}, std::move(out)});
  }

  // multiply by a compile-step constant; gradients scale through it
  int scale(int x, T s) {
    Node n{Op::kScale, x, -1, {}, val(x) * s};
    n.scalar = s;
    return push(std::move(n));
  }

  // rows of X selected by idx -> [idx.size() x d]
  int gather_rows(int x, std::vector<Index> idx) {
    const Mat<T>& X = val(x);
    Mat<T> out(static_cast<Index>(idx.size()), X.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      require(idx[i] >= 0 && idx[i] < X.rows(), "gather_rows: index out of range");
      out.row(static_cast<Index>(i)) = X.row(idx[i]);
    }
    Node n{Op::kGather, x, -1, {}, std::move(out)};
    n.indices = std::move(idx);
    return push(std::move(n));
  }

  // row i of X added into row idx[i] of a zero [n_out x d] matrix
  int scatter_add_rows(int x, std::vector<Index> idx, Index n_out) {
    const Mat<T>& X = val(x);
    require(static_cast<Index>(idx.size()) == X.rows(),
            "scatter_add_rows: index count mismatch");
    Mat<T> out = Mat<T>::Zero(n_out, X.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      require(idx[i] >= 0 && idx[i] < n_out, "scatter_add_rows: index out of range");
      out.row(idx[i]) += X.row(static_cast<Index>(i));
    }
    Node n{Op::kScatter, x, -1, {}, std::move(out)};
    n.indices = std::move(idx);
    return push(std::move(n));
  }

  // logits [1 x K], target class -> [1 x 1] loss = logsumexp(z) - z_y
  int softmax_xent(int logits, int target) {
    const Mat<T>& Z = val(logits);
    require(Z.rows() == 1 && Z.cols() >= 2, "softmax_xent: logits must be [1 x K]");
    require(target >= 0 && target < Z.cols(), "softmax_xent: target out of range");
    const T zmax = Z.maxCoeff();
    Mat<T> shifted = (Z.array() - zmax).exp().matrix();
    const T denom = shifted.sum();
    Mat<T> probs = shifted / denom;
    Mat<T> out(1, 1);
    out(0, 0) = std::log(denom) + zmax - Z(0, target);
    Node n{Op::kSoftmaxXent, logits, -1, {}, std::move(out)};
    n.cached = std::move(probs);
    n.target = target;
    return push(std::move(n));
  }

  // --- access / backward ---

  const Mat<T>& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Mat<T>& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  // Accumulates d(root)/d(leaf) into every leaf; parameter leaves flush into
  // the bound store's gradient slots. root must be [1 x 1].
  void backward(int root, T seed = T(1)) {
    require(val(root).rows() == 1 && val(root).cols() == 1,
            "Tape::backward: root must be scalar");
    for (auto& n : nodes_) n.grad = Mat<T>::Zero(n.value.rows(), n.value.cols());
    nodes_[static_cast<std::size_t>(root)].grad(0, 0) = seed;
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.isZero(T(0)) && n.op != Op::kLeaf) continue;
      step_back(n);
    }
    if (store_ != nullptr) {
      for (auto& n : nodes_) {
        if (!n.param_name.empty()) store_->grad(n.param_name) += n.grad;
      }
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf, kMatMul, kAdd, kAddRow, kConcat, kSigmoid, kTanh, kCos,
    kHadamard, kSumRows, kScale, kGather, kScatter, kSoftmaxXent
  };

  struct Node {
    Op op;
    int a, b;
    std::vector<int> list;  // concat inputs
    Mat<T> value;
    Mat<T> grad;
    Mat<T> cached;             // softmax probabilities
    std::vector<Index> indices;
    T scalar = T(0);
    int target = -1;
    std::string param_name;
  };

  int push(Node n) {
    require_finite(n.value, "Tape op output");
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Mat<T>& g(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  void step_back(Node& n) {
    const Mat<T>& G = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul:
        g(n.a) += G * val(n.b).transpose();
        g(n.b) += val(n.a).transpose() * G;
        break;
      case Op::kAdd:
        g(n.a) += G;
        g(n.b) += G;
        break;
      case Op::kAddRow:
        g(n.a) += G;
        g(n.b) += G.colwise().sum();
        break;
      case Op::kConcat: {
        Index at = 0;
        for (int p : n.list) {
          g(p) += G.middleCols(at, val(p).cols());
          at += val(p).cols();
        }
        break;
      }
      case Op::kSigmoid:
        g(n.a) += G.cwiseProduct(
            n.value.cwiseProduct((Mat<T>::Ones(n.value.rows(), n.value.cols()) - n.value).eval()));
        break;
      case Op::kTanh:
        g(n.a) += G.cwiseProduct(
            (Mat<T>::Ones(n.value.rows(), n.value.cols()) - n.value.cwiseProduct(n.value)).eval());
        break;
      case Op::kCos:
        g(n.a) -= G.cwiseProduct(val(n.a).array().sin().matrix().eval());
        break;
      case Op::kHadamard:
        g(n.a) += G.cwiseProduct(val(n.b));
        g(n.b) += G.cwiseProduct(val(n.a));
        break;
      case Op::kSumRows:
        g(n.a) += G.replicate(val(n.a).rows(), 1);
        break;
      case Op::kScale:
        g(n.a) += G * n.scalar;
        break;
      case Op::kGather:
        for (std::size_t i = 0; i < n.indices.size(); ++i)
          g(n.a).row(n.indices[i]) += G.row(static_cast<Index>(i));
        break;
      case Op::kScatter:
        for (std::size_t i = 0; i < n.indices.size(); ++i)
          g(n.a).row(static_cast<Index>(i)) += G.row(n.indices[i]);
        break;
      case Op::kSoftmaxXent: {
        Mat<T> d = n.cached;
        d(0, n.target) -= T(1);
        g(n.a) += G(0, 0) * d;
        break;
      }
    }
  }

  static std::string shape_msg(const char* op, const Mat<T>& a, const Mat<T>& b) {
    return std::string(op) + ": shape mismatch [" + std::to_string(a.rows()) + "x" +
           std::to_string(a.cols()) + "] vs [" + std::to_string(b.rows()) + "x" +
           std::to_string(b.cols()) + "]";
  }

  ParamStore<T>* store_;
  // deque keeps value references stable while new nodes are appended
  std::deque<Node> nodes_;
};

// forward-only softmax over a row vector, numerically stable
template <typename T>
inline RowVec<T> softmax_row(const RowVec<T>& z) {
  RowVec<T> shifted = (z.array() - z.maxCoeff()).exp();
  return shifted / shifted.sum();
}

}  // namespace dagnn::num
