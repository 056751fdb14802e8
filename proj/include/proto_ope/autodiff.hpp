#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace proto_ope::ad {

using Mat = Eigen::MatrixXd;

// Handle into a Tape node. Valid only while the owning tape is alive.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Dynamic computation graph with reverse-mode differentiation. Operations
// append nodes in topological order; backward() replays them in reverse.
// Values are matrices; scalars are 1x1.
class Tape {
 public:
  Var input(Mat value);

  const Mat& value(Var v) const { return nodes_[v.idx].value; }
  const Mat& grad(Var v) const { return nodes_[v.idx].grad; }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);                 // same shape
  Var add_bias(Var m, Var bias);         // bias: column vector, broadcast over columns
  Var sub(Var a, Var b);
  Var scale(Var a, double c);
  Var relu(Var a);
  Var tanh(Var a);
  Var sum(Var a);                        // 1x1
  Var vconcat(Var top, Var bottom);      // stack rows
  // Column-wise select: active columns from `fresh`, the rest from `prev`.
  Var where_cols(Var fresh, Var prev, const std::vector<char>& active);

  // Squared euclidean distances between columns: z (d x n), e (d x m) -> n x m.
  Var pairwise_sqdist(Var z, Var e);
  Var exp_neg(Var a);                    // exp(-x), elementwise

  // Mean negative log-likelihood of softmax(logits) at the given labels.
  Var nll_softmax(Var logits, std::vector<int> labels);

  // Sum over columns of the minimum entry per column / over rows of the
  // minimum per row. Subgradient flows to the first minimizer.
  Var colwise_min_sum(Var a);
  Var rowwise_min_sum(Var a);

  // sum_{i<j} max(0, d_min - ||z_i - z_j||)^2 over columns of z.
  Var hinge_diversity(Var z, double d_min);

  // Accumulate seed into out's gradient and propagate to every ancestor.
  void backward(Var out, const Mat& seed);
  void backward(Var out);                // scalar out, seed 1

  bool all_values_finite() const;
  // Reset accumulated gradients; lets one tape run backward from several seeds.
  void zero_grads();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> back;  // may be empty for leaves
  };

  Var emplace(Mat value, std::function<void(Tape&)> back);
  Mat& grad_mut(Var v) { return nodes_[v.idx].grad; }

  std::vector<Node> nodes_;
};

}  // namespace proto_ope::ad
